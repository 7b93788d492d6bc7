#include <catch_amalgamated.hpp>

#include <numbers>

#include "ipea/photonics.hpp"
#include "ipea/qpe.hpp"
#include "oracles.hpp"

using namespace ipea;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

const StateVector kR = polarization_state(Polarization::R);
const StateVector kL = polarization_state(Polarization::L);

StateVector random_state(std::size_t dim, Rng& rng) {
  std::vector<Complex> a(dim);
  for (auto& z : a) z = {rng.normal(), rng.normal()};
  return StateVector::normalized(std::move(a));
}

// Haar-ish unitary from Gram-Schmidt on a Gaussian matrix.
Unitary random_unitary(std::size_t dim, Rng& rng) {
  std::vector<std::vector<Complex>> cols(dim, std::vector<Complex>(dim));
  for (auto& c : cols)
    for (auto& z : c) z = {rng.normal(), rng.normal()};
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      Complex d{};
      for (std::size_t r = 0; r < dim; ++r) d += std::conj(cols[i][r]) * cols[j][r];
      for (std::size_t r = 0; r < dim; ++r) cols[j][r] -= d * cols[i][r];
    }
    double n = 0.0;
    for (const auto& z : cols[j]) n += std::norm(z);
    for (auto& z : cols[j]) z /= std::sqrt(n);
  }
  ComplexMatrix m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = cols[c][r];
  return Unitary(m);
}

oracle::Mat to_oracle(const Unitary& u) {
  oracle::Mat m(u.dimension(), oracle::Vec(u.dimension()));
  for (std::size_t r = 0; r < u.dimension(); ++r)
    for (std::size_t c = 0; c < u.dimension(); ++c) m[r][c] = u(r, c);
  return m;
}

oracle::Vec to_oracle(const StateVector& s) { return {s.amplitudes().begin(), s.amplitudes().end()}; }

// (|0> psi + |1> V psi) / sqrt(2) from an explicit block matrix on |+> (x) psi.
oracle::Vec oracle_controlled_state(const oracle::Mat& v, const oracle::Vec& psi) {
  const double h = 1.0 / std::sqrt(2.0);
  return oracle::mul(oracle::controlled(v), oracle::kron(oracle::Vec{h, h}, psi));
}

oracle::Mat oracle_power(const oracle::Mat& v, std::uint64_t times) {
  oracle::Mat out = oracle::identity(v.size());
  for (std::uint64_t i = 0; i < times; ++i) out = oracle::mul(v, out);
  return out;
}

// rho of (|0>|H> + |1> U|H>)/sqrt(2) with control coherences scaled by p, then
// control measured "+"; returns the normalized 2x2 target block.
oracle::Mat oracle_noisy_collapse(const Unitary& u, double p) {
  const auto joint = oracle_controlled_state(to_oracle(u), {1.0, 0.0});
  oracle::Mat rho(4, oracle::Vec(4));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) rho[r][c] = joint[r] * std::conj(joint[c]) * (((r >> 1) != (c >> 1)) ? p : 1.0);
  // <+| on the control: block (rho00 + rho01 + rho10 + rho11) / 2.
  oracle::Mat out(2, oracle::Vec(2));
  double tr = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      out[i][j] = 0.5 * (rho[i][j] + rho[i][2 + j] + rho[2 + i][j] + rho[2 + i][2 + j]);
      if (i == j) tr += out[i][j].real();
    }
  for (auto& row : out)
    for (auto& z : row) z /= tr;
  return out;
}

double oracle_fidelity(const oracle::Mat& rho, const oracle::Vec& psi) {
  oracle::C f{};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) f += std::conj(psi[i]) * rho[i][j] * psi[j];
  return f.real();
}

}  // namespace

TEST_CASE("hwp worked examples", "[photonics][waveplate]") {
  const auto out0 = apply(hwp(0.0), states::zero(), {0});
  CHECK(std::abs(out0[0] - 1.0) < 1e-15);
  CHECK(std::abs(out0[1]) < 1e-15);

  const auto d = apply(hwp(22.5), states::zero(), {0});
  CHECK(std::abs(d[0] - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(d[1] - 1.0 / std::sqrt(2.0)) < 1e-15);

  for (int i = 0; i < 12; ++i) {
    const double theta = 15.0 * i;
    CHECK(std::abs(inner(kL, apply(hwp(theta), kR, {0}))) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("hwp is an involution for every angle", "[photonics][waveplate][property]") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const double theta = 360.0 * rng.uniform() - 180.0;
    const auto h = hwp(theta);
    REQUIRE(max_abs_diff((h * h).matrix(), ComplexMatrix::identity(2)) < 1e-12);
  }
}

TEST_CASE("physical convention keeps the -i factor", "[photonics][waveplate]") {
  const auto r = hwp(30.0);
  const auto p = hwp(30.0, JonesConvention::physical);
  CHECK(max_abs_diff(p.matrix(), (-kI * r.matrix())) < 1e-15);

  const auto two_real = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(30)});
  const auto two_phys = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(30)}, JonesConvention::physical);
  const double shift = std::fmod(oracle_eigenphase(two_phys) - oracle_eigenphase(two_real) + 1.0, 1.0);
  CHECK(shift == Approx(0.5).margin(1e-12));
}

TEST_CASE("waveplate spec normalizes to [0, 180)", "[photonics][waveplate]") {
  CHECK(WaveplateSpec::half(180.0).angle_deg == 0.0);
  CHECK(WaveplateSpec::half(-15.0).angle_deg == Approx(165.0));
  CHECK(WaveplateSpec::quarter(405.0).angle_deg == Approx(45.0));
  CHECK_THROWS_AS(WaveplateSpec::half(std::nan("")), ContractError);
}

TEST_CASE("qwp matches the rotated diag(1, i) construction", "[photonics][waveplate]") {
  for (double t : {0.0, 22.5, 45.0, 71.0}) {
    const double a = t * kPi / 180.0;
    const oracle::Mat rot{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
    const oracle::Mat rot_inv{{std::cos(a), std::sin(a)}, {-std::sin(a), std::cos(a)}};
    const auto want = oracle::mul(rot, oracle::mul(oracle::Mat{{1.0, 0.0}, {0.0, kI}}, rot_inv));
    const auto q = qwp(t);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(q(r, c) - want[r][c]) < 1e-14);
  }
  const auto q45 = qwp(45.0);
  CHECK(std::abs(inner(kL, apply(q45, states::zero(), {0}))) == Approx(1.0).margin(1e-12));
  CHECK(std::abs(inner(kR, apply(qwp(135.0), states::zero(), {0}))) == Approx(1.0).margin(1e-12));
}

TEST_CASE("compose_waveplates examples", "[photonics][waveplate]") {
  const auto same = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(0)});
  CHECK(max_abs_diff(same.matrix(), ComplexMatrix::identity(2)) < 1e-15);

  const auto rot = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(45)});
  const ComplexMatrix want{{0.0, -1.0}, {1.0, 0.0}};
  CHECK(max_abs_diff(rot.matrix(), want) < 1e-15);

  // Order matters: the first plate acts first.
  const auto a = compose_waveplates({WaveplateSpec::half(10), WaveplateSpec::quarter(40)});
  CHECK(max_abs_diff(a.matrix(), (qwp(40) * hwp(10)).matrix()) < 1e-15);
}

TEST_CASE("two-HWP products have |R>, |L> as eigenvectors", "[photonics][waveplate][property]") {
  for (int i = 0; i < 36; ++i)
    for (int j = 0; j < 36; ++j) {
      const auto u = compose_waveplates({WaveplateSpec::half(5.0 * i), WaveplateSpec::half(5.0 * j)});
      for (const auto& e : {kR, kL}) {
        const auto ue = apply(u, e, {0});
        REQUIRE(overlap(ue, e) == Approx(1.0).margin(1e-10));
      }
    }
}

TEST_CASE("oracle eigenphase examples", "[photonics][oracle]") {
  CHECK(oracle_eigenphase(Unitary::identity(2), states::zero()) == 0.0);
  CHECK(oracle_eigenphase(Unitary::identity(2), kR) == 0.0);
  CHECK(oracle_eigenphase(gates::phase(kPi / 2), states::one()) == Approx(0.25).margin(1e-12));
  CHECK(oracle_eigenphase(gates::phase(kPi / 2), states::zero()) == Approx(0.0).margin(1e-12));

  const auto rot = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(45)});
  CHECK(oracle_eigenphase(rot, Polarization::R) == Approx(0.75).margin(1e-12));
  CHECK(oracle_eigenphase(rot, Polarization::L) == Approx(0.25).margin(1e-12));

  // |D> overlaps the |H> and |V> eigenspaces of diag(1, i) equally.
  CHECK_THROWS_AS(oracle_eigenphase(gates::phase(kPi / 2), polarization_state(Polarization::D)), DegeneracyError);

  const auto pair = oracle_eigenpair_near_phase(gates::phase_turns(0.3), 0.29);
  CHECK(pair.phase == Approx(0.3).margin(1e-12));
  CHECK(overlap(pair.eigenvector, states::one()) == Approx(1.0).margin(1e-12));
}

TEST_CASE("two-HWP eigenphase follows the rotation angle", "[photonics][oracle][property]") {
  // hwp(t) hwp(0) is a rotation by 2t, so |R> picks up e^{-i 2t}.
  for (int i = 0; i < 36; ++i) {
    const double t = 5.0 * i;
    const auto u = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(t)});
    const double want = std::fmod(1.0 - t / 180.0, 1.0);
    REQUIRE(circular_distance(oracle_eigenphase(u), want) < 1e-12);
  }
}

TEST_CASE("prepare_entangled_input examples", "[photonics][input]") {
  const auto h = prepare_entangled_input(states::zero());
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(h.amplitude(0, 0, 0) - s) < 1e-15);
  CHECK(std::abs(h.amplitude(1, 0, 1) - s) < 1e-15);
  int nonzero = 0;
  for (const auto& z : h.amplitudes()) nonzero += std::abs(z) > 0.0;
  CHECK(nonzero == 2);

  const auto r = prepare_entangled_input(kR);
  CHECK(std::abs(r.amplitude(0, 0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(r.amplitude(0, 1, 0) - 0.5 * kI) < 1e-15);
  CHECK(std::abs(r.amplitude(1, 0, 1) - 0.5) < 1e-15);
  CHECK(std::abs(r.amplitude(1, 1, 1) - 0.5 * kI) < 1e-15);

  const auto hh = prepare_entangled_input(tensor(states::zero(), states::zero()));
  int nz2 = 0;
  for (std::size_t i = 0; i < hh.amplitudes().size(); ++i)
    if (std::abs(hh.amplitudes()[i]) > 0.0) ++nz2;
  CHECK(nz2 == 2);
  CHECK(std::abs(hh.amplitude(0, 0, 0b00)) > 0.0);
  CHECK(std::abs(hh.amplitude(1, 0, 0b11)) > 0.0);
}

TEST_CASE("apply_blue_unitary examples", "[photonics][cascade]") {
  Rng rng(2);
  const auto psi = random_state(2, rng);
  const auto input = prepare_entangled_input(psi);
  for (int k = 1; k <= 4; ++k) {
    const auto out = apply_blue_unitary(input, Unitary::identity(2), k);
    for (std::size_t i = 0; i < out.amplitudes().size(); ++i)
      REQUIRE(std::abs(out.amplitudes()[i] - input.amplitudes()[i]) < 1e-15);
  }

  const double alpha = 0.37;
  const auto twice = apply_blue_unitary(prepare_entangled_input(states::plus()), gates::phase(alpha), 2);
  const double s = 0.5;
  CHECK(std::abs(twice.amplitude(1, 1, 1) - s * std::polar(1.0, 2 * alpha)) < 1e-15);
  CHECK(std::abs(twice.amplitude(1, 0, 1) - s) < 1e-15);
  CHECK(std::abs(twice.amplitude(0, 1, 0) - s) < 1e-15);

  const auto u = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(45)});
  const auto rr = apply_blue_unitary(prepare_entangled_input(kR), u, 1);
  const Complex phase = std::polar(1.0, 2 * kPi * oracle_eigenphase(u));
  CHECK(std::abs(rr.amplitude(1, 0, 1) - 0.5 * phase) < 1e-12);
  CHECK(std::abs(rr.amplitude(1, 1, 1) - 0.5 * kI * phase) < 1e-12);
  CHECK(std::abs(rr.amplitude(0, 0, 0) - 0.5) < 1e-15);

  CHECK_THROWS_AS(apply_blue_unitary(input, Unitary::identity(2), 0), ContractError);
  CHECK_THROWS_AS(apply_blue_unitary(input, Unitary::identity(2), 17), ContractError);
  CHECK_THROWS_AS(apply_blue_unitary(input, Unitary::identity(4), 1), ContractError);
  CHECK_THROWS_AS(apply_blue_unitary(beamsplitter_mix(input), Unitary::identity(2), 1), ContractError);
}

TEST_CASE("cascade equals repeated multiplication in the oracle", "[photonics][cascade][property]") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = random_unitary(2, rng);
    const auto psi = random_state(2, rng);
    for (int k = 1; k <= 6; ++k) {
      const auto out = apply_blue_unitary(prepare_entangled_input(psi), u, k);
      const auto want = oracle::mul(oracle_power(to_oracle(u), std::uint64_t{1} << (k - 1)), to_oracle(psi));
      for (std::size_t pol = 0; pol < 2; ++pol)
        REQUIRE(std::abs(out.amplitude(1, pol, 1) - want[pol] / std::sqrt(2.0)) < 1e-12);
    }
  }
}

TEST_CASE("beamsplitter_mix examples", "[photonics][bs]") {
  Rng rng(4);
  const auto psi = random_state(2, rng);
  const auto mixed = beamsplitter_mix(apply_blue_unitary(prepare_entangled_input(psi), Unitary::identity(2), 1));
  CHECK(mixed.rail_basis() == RailBasis::upper_lower);
  // Upper rail: (|H> + |V>) psi / 2.
  for (int c = 0; c < 2; ++c)
    for (std::size_t pol = 0; pol < 2; ++pol) CHECK(std::abs(mixed.amplitude(c, pol, 0) - 0.5 * psi[pol]) < 1e-15);
  CHECK(mixed.pattern_probability(0) == Approx(0.5).margin(1e-12));

  for (int n = 1; n <= 3; ++n) {
    const auto s = random_state(std::size_t{1} << n, rng);
    const auto out = beamsplitter_mix(apply_blue_unitary(prepare_entangled_input(s), random_unitary(s.dimension(), rng), 1));
    double total = 0.0;
    for (std::size_t mask = 0; mask < out.num_patterns(); ++mask) total += out.pattern_probability(mask);
    CHECK(total == Approx(1.0).margin(1e-12));
  }

  CHECK(parity_cases(2, ParityLabel::P).size() == 2);
  CHECK(parity_cases(2, ParityLabel::Q).size() == 2);
  CHECK_THROWS_AS(beamsplitter_mix(mixed), ContractError);
}

TEST_CASE("parity branches validate their pattern", "[photonics][parity]") {
  CHECK_NOTHROW(ParityBranch(ParityLabel::P, 0b11));
  CHECK_NOTHROW(ParityBranch(ParityLabel::Q, 0b100));
  CHECK_THROWS_AS(ParityBranch(ParityLabel::P, 0b1), ContractError);
  CHECK_THROWS_AS(ParityBranch(ParityLabel::Q, 0b101), ContractError);
  for (int n = 1; n <= 6; ++n) {
    const auto p = parity_cases(n, ParityLabel::P);
    REQUIRE(p.size() == std::size_t{1} << (n - 1));
    for (const auto& b : p) REQUIRE(std::popcount(b.lower_mask) % 2 == 0);
  }
}

TEST_CASE("postselect examples", "[photonics][postselect]") {
  Rng rng(5);
  const auto rot = compose_waveplates({WaveplateSpec::half(0), WaveplateSpec::half(30)});
  const auto mixed = beamsplitter_mix(apply_blue_unitary(prepare_entangled_input(kR), rot, 1));
  const auto p = postselect(mixed, ParityBranch(ParityLabel::P, 0));
  REQUIRE_FALSE(p.is_null());
  CHECK(p.probability == Approx(0.5).margin(1e-12));

  // (|H> + e^{i 2 pi phi}|V>)/sqrt(2) (x) |R>.
  const double phi = oracle_eigenphase(rot);
  const double s = 1.0 / std::sqrt(2.0);
  const oracle::Vec want = oracle::kron(oracle::Vec{s, s * std::polar(1.0, 2 * kPi * phi)}, to_oracle(kR));
  CHECK(oracle::overlap(to_oracle(*p.state), want) >= 1 - 1e-10);

  for (int n = 1; n <= 3; ++n) {
    const auto psi = random_state(std::size_t{1} << n, rng);
    const auto v = random_unitary(psi.dimension(), rng);
    const auto out = beamsplitter_mix(apply_blue_unitary(prepare_entangled_input(psi), v, 1));
    double total = 0.0;
    for (const auto& b : parity_cases(n, ParityLabel::P)) {
      const auto r = postselect(out, b);
      CHECK(r.probability == Approx(std::ldexp(1.0, -n)).margin(1e-12));
      total += r.probability;
    }
    CHECK(parity_cases(n, ParityLabel::P).size() == std::size_t{1} << (n - 1));
    CHECK(total == Approx(0.5).margin(1e-12));
  }

  std::vector<Complex> amps(PhotonicState::dimension_for(1));
  amps[0b000] = 1.0;
  const PhotonicState upper_only(1, RailBasis::upper_lower, amps);
  const auto null = postselect(upper_only, ParityBranch(ParityLabel::Q, 1));
  CHECK(null.is_null());
  CHECK(null.probability == 0.0);
  CHECK_THROWS_AS(postselect(prepare_entangled_input(kR), ParityBranch(ParityLabel::P, 0)), ContractError);
}

TEST_CASE("P-case success probability is (1/2)^n each and 1/2 in total", "[photonics][postselect][property]") {
  Rng rng(6);
  for (int n = 1; n <= 3; ++n)
    for (int trial = 0; trial < 50; ++trial) {
      const auto psi = random_state(std::size_t{1} << n, rng);
      const auto v = random_unitary(psi.dimension(), rng);
      const int k = 1 + trial % 3;
      const auto out = beamsplitter_mix(apply_blue_unitary(prepare_entangled_input(psi), v, k));
      double total = 0.0;
      for (const auto& b : parity_cases(n, ParityLabel::P)) {
        const double p = postselect(out, b).probability;
        REQUIRE(p == Approx(std::ldexp(1.0, -n)).margin(1e-12));
        total += p;
      }
      REQUIRE(total == Approx(0.5).margin(1e-12));
    }
}

TEST_CASE("photonic controlled power examples", "[photonics][scheme]") {
  Rng rng(7);
  const auto psi = random_state(2, rng);
  const auto id = photonic_controlled_power(Unitary::identity(2), psi, 1);
  CHECK(overlap(id, tensor(states::plus(), psi)) == Approx(1.0).margin(1e-12));

  const auto d = photonic_controlled_power(gates::phase_turns(0.3), states::one(), 3);
  const double s = 1.0 / std::sqrt(2.0);
  // k = 3 cascades 2^(k-1) = 4 copies.
  const double arg = std::fmod(2 * kPi * 0.3 * 4, 2 * kPi);
  const oracle::Vec want{0.0, s, 0.0, s * std::polar(1.0, arg)};
  CHECK(oracle::overlap(to_oracle(d), want) >= 1 - 1e-10);

  for (int i = 0; i < 100; ++i) {
    const auto u = random_unitary(2, rng);
    const auto phi = random_state(2, rng);
    const auto got = photonic_controlled_power(u, phi, 1);
    REQUIRE(oracle::overlap(to_oracle(got), oracle_controlled_state(to_oracle(u), to_oracle(phi))) >= 1 - 1e-10);
  }
}

TEST_CASE("photonic scheme equals the matrix controlled power", "[photonics][scheme][property]") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto u = random_unitary(2, rng);
    const auto psi = random_state(2, rng);
    for (int k = 1; k <= 3; ++k) {
      const auto got = photonic_controlled_power(u, psi, k);
      const auto want = oracle_controlled_state(oracle_power(to_oracle(u), std::uint64_t{1} << (k - 1)), to_oracle(psi));
      REQUIRE(oracle::overlap(to_oracle(got), want) >= 1 - 1e-10);
      REQUIRE(overlap(got, MatrixProvider::controlled_power_state(u.power(std::uint64_t{1} << (k - 1)), psi)) >= 1 - 1e-10);
    }
  }
  for (int n = 2; n <= 3; ++n) {
    const auto u = random_unitary(std::size_t{1} << n, rng);
    const auto psi = random_state(u.dimension(), rng);
    const auto got = photonic_controlled_power(u, psi, 2);
    const auto want = oracle_controlled_state(oracle_power(to_oracle(u), 2), to_oracle(psi));
    CHECK(oracle::overlap(to_oracle(got), want) >= 1 - 1e-10);
  }
}

TEST_CASE("q_branch_relabel flips the bit", "[photonics][relabel]") {
  STATIC_REQUIRE(q_branch_relabel(0) == 1);
  STATIC_REQUIRE(q_branch_relabel(1) == 0);
}

TEST_CASE("Q branches after relabeling reproduce P-branch statistics", "[photonics][relabel][property]") {
  const PhotonicProvider provider;
  for (int g = 0; g < 36; ++g) {
    const double phi = g / 36.0;
    const EigenproblemSpec spec(gates::phase_turns(phi), states::one());
    for (int k = 1; k <= 3; ++k)
      for (std::size_t y = 0; y < (std::size_t{1} << (3 - k)); ++y) {
        const auto later = PhaseEstimate::from_index(y, 3 - k).bits;
        const double omega = feedback_angle(k, 3, later);
        const auto branches = provider.branches(spec.unitary, spec.input_state, k);
        REQUIRE(branches.size() == 2);
        const auto& p = branches[0].relabel ? branches[1] : branches[0];
        const auto& q = branches[0].relabel ? branches[0] : branches[1];
        REQUIRE(q.relabel);
        REQUIRE_FALSE(p.relabel);
        REQUIRE(branch_bit_one_probability(q, omega) == Approx(branch_bit_one_probability(p, omega)).margin(1e-12));
        const double want = 1.0 - oracle::ipea_plus_probability(phi, k, oracle::binary_fraction(later));
        REQUIRE(branch_bit_one_probability(p, omega) == Approx(want).margin(1e-12));
      }
  }
}

TEST_CASE("discard policy keeps only P branches", "[photonics][relabel]") {
  const PhotonicProvider discard(QBranchPolicy::discard);
  const auto b = discard.branches(gates::phase_turns(0.2), states::one(), 1);
  REQUIRE(b.size() == 1);
  CHECK_FALSE(b[0].relabel);
  CHECK(b[0].probability == Approx(1.0));
  CHECK(discard.policy() == QBranchPolicy::discard);
}

TEST_CASE("noise model examples", "[photonics][noise]") {
  Rng rng(9);
  const auto joint = MatrixProvider::controlled_power_state(gates::phase_turns(0.3), states::one());
  const auto rho = density_from_state(joint);
  const int controls[] = {0};

  const auto same = apply_noise(rho, NoiseSpec::none(), controls);
  CHECK(max_abs_diff(same.matrix(), rho.matrix()) == 0.0);
  const WaveplateSpec plates[] = {WaveplateSpec::half(0), WaveplateSpec::half(30)};
  const auto unjittered = apply_noise(plates, NoiseSpec::none(), rng);
  CHECK(unjittered[1].angle_deg == 30.0);

  for (double phi : {0.0, 0.1, 0.3, 0.77}) {
    const EigenproblemSpec spec(gates::phase_turns(phi), states::one());
    const MatrixProvider matrix;
    const double p1 = bit_posterior(spec, IterationPlan::make(1, 1, {}), matrix, 0.0);
    CHECK(p1 == Approx(0.5).margin(1e-12));
  }

  for (double p : {0.0, 0.3, 0.9, 1.0}) {
    const auto r = collapse_branch_noisy(hwp(45.0), states::zero(), 1, 0, p);
    REQUIRE(r);
    const auto want = oracle_noisy_collapse(hwp(45.0), p);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(r->collapsed_target(i, j) - want[i][j]) < 1e-12);
    const double f = fidelity(r->collapsed_target, polarization_state(Polarization::D));
    CHECK(f == Approx(oracle_fidelity(want, to_oracle(polarization_state(Polarization::D)))).margin(1e-12));
    CHECK(f == Approx((1 + p) / 2).margin(1e-12));
  }

  CHECK_THROWS_AS(NoiseSpec({1.5, 0.0}).validate(), ContractError);
  CHECK_THROWS_AS(NoiseSpec({0.5, -1.0}).validate(), ContractError);
  CHECK(NoiseSpec::defaults().distinguishability == 0.95);
  CHECK(NoiseSpec::defaults().angle_jitter_sigma_deg == 0.25);
}

TEST_CASE("angle jitter has the configured spread", "[photonics][noise]") {
  Rng rng(10);
  const WaveplateSpec plates[] = {WaveplateSpec::half(30)};
  const NoiseSpec noise{1.0, 0.25};
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double d = apply_noise(plates, noise, rng)[0].angle_deg - 30.0;
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean) < 4 * 0.25 / std::sqrt(n));
  CHECK(sd == Approx(0.25).epsilon(0.03));
}

TEST_CASE("collapse fidelity is monotone in distinguishability", "[photonics][noise][property]") {
  double prev = -1.0;
  for (int i = 0; i <= 10; ++i) {
    const double p = 0.1 * i;
    const auto r = collapse_branch_noisy(hwp(45.0), states::zero(), 1, 0, p);
    REQUIRE(r);
    const double f = fidelity(r->collapsed_target, polarization_state(Polarization::D));
    REQUIRE(f >= prev - 1e-12);
    prev = f;
  }
}
