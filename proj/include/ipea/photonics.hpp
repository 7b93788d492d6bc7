#pragma once

// Polarization-qubit optics: Jones matrices for waveplates, the dual-rail
// entangled input, blue-rail unitary cascade, beamsplitter mixing, parity
// post-selection, and the noise model for distinguishability and angle jitter.
//
// Polarization basis: |H> = |0>, |V> = |1>. Rails per target photon are either
// {red, blue} before the beamsplitters or {upper, lower} after them.

#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ipea/controlled.hpp"
#include "ipea/qmath.hpp"

namespace ipea {

// ---------------------------------------------------------------------------
// Polarization states

enum class Polarization { H, V, D, A, R, L };

inline StateVector polarization_state(Polarization p) {
  const double h = 1.0 / std::numbers::sqrt2;
  switch (p) {
    case Polarization::H: return StateVector{1.0, 0.0};
    case Polarization::V: return StateVector{0.0, 1.0};
    case Polarization::D: return StateVector{h, h};
    case Polarization::A: return StateVector{h, -h};
    case Polarization::R: return StateVector{h, h * kI};
    case Polarization::L: return StateVector{h, -h * kI};
  }
  throw ContractError("unknown polarization");
}

inline std::optional<Polarization> parse_polarization(std::string_view s) {
  if (s == "H") return Polarization::H;
  if (s == "V") return Polarization::V;
  if (s == "D") return Polarization::D;
  if (s == "A") return Polarization::A;
  if (s == "R") return Polarization::R;
  if (s == "L") return Polarization::L;
  return std::nullopt;
}

inline const char* to_string(Polarization p) {
  switch (p) {
    case Polarization::H: return "H";
    case Polarization::V: return "V";
    case Polarization::D: return "D";
    case Polarization::A: return "A";
    case Polarization::R: return "R";
    case Polarization::L: return "L";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Waveplates

/// `real` drops the physical global factor of each plate (-i for a HWP,
/// e^{-i pi/4} for a QWP). `physical` keeps it; a two-HWP product then picks up
/// an overall -1, which shifts its eigenphases by 0.5.
enum class JonesConvention { real, physical };

enum class WaveplateKind { hwp, qwp };

struct WaveplateSpec {
  WaveplateKind kind = WaveplateKind::hwp;
  double angle_deg = 0.0;  ///< fast-axis orientation, normalized to [0, 180)

  WaveplateSpec() = default;
  WaveplateSpec(WaveplateKind k, double deg) : kind{k}, angle_deg{normalize(deg)} {}

  static WaveplateSpec half(double deg) { return {WaveplateKind::hwp, deg}; }
  static WaveplateSpec quarter(double deg) { return {WaveplateKind::qwp, deg}; }

  static double normalize(double deg) {
    if (!std::isfinite(deg)) throw ContractError("waveplate angle is not finite");
    double a = std::fmod(deg, 180.0);
    if (a < 0.0) a += 180.0;
    if (a >= 180.0) a -= 180.0;
    return a;
  }
};

inline double radians(double deg) { return deg * std::numbers::pi / 180.0; }

/// [[cos 2t, sin 2t], [sin 2t, -cos 2t]] in the {H, V} basis.
inline Unitary hwp(double theta_deg, JonesConvention conv = JonesConvention::real) {
  const double t = 2.0 * radians(theta_deg);
  const Complex g = conv == JonesConvention::physical ? -kI : Complex{1.0};
  return Unitary(ComplexMatrix{{g * std::cos(t), g * std::sin(t)}, {g * std::sin(t), -g * std::cos(t)}});
}

/// R(t) diag(1, i) R(-t).
inline Unitary qwp(double theta_deg, JonesConvention conv = JonesConvention::real) {
  const double t = radians(theta_deg);
  const double c = std::cos(t);
  const double s = std::sin(t);
  const Complex g = conv == JonesConvention::physical ? std::polar(1.0, -std::numbers::pi / 4.0) : Complex{1.0};
  return Unitary(ComplexMatrix{{g * (c * c + kI * s * s), g * (1.0 - kI) * c * s},
                               {g * (1.0 - kI) * c * s, g * (s * s + kI * c * c)}});
}

inline Unitary jones(const WaveplateSpec& plate, JonesConvention conv = JonesConvention::real) {
  return plate.kind == WaveplateKind::hwp ? hwp(plate.angle_deg, conv) : qwp(plate.angle_deg, conv);
}

/// Product of the plates in beam order: plates[0] acts first.
inline Unitary compose_waveplates(std::span<const WaveplateSpec> plates, JonesConvention conv = JonesConvention::real) {
  Unitary total = Unitary::identity(2);
  for (const auto& p : plates) total = jones(p, conv) * total;
  return total;
}

inline Unitary compose_waveplates(std::initializer_list<WaveplateSpec> plates,
                                  JonesConvention conv = JonesConvention::real) {
  return compose_waveplates(std::span<const WaveplateSpec>(plates.begin(), plates.size()), conv);
}

// ---------------------------------------------------------------------------
// Test oracle: spectral read-off. The estimators never call this.

/// Selector overlaps two eigenspaces with different eigenvalues equally.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Eigenpair {
  double phase = 0.0;  ///< arg(eigenvalue) / 2 pi, in [0, 1)
  Complex eigenvalue;
  StateVector eigenvector;  ///< normalized projection of the selector onto the chosen eigenspace
};

/// Diagonalizes u and returns the eigenpair whose eigenspace carries the largest
/// weight of `selector`.
inline Eigenpair oracle_eigenpair(const Unitary& u, const StateVector& selector) {
  if (u.dimension() != selector.dimension()) throw ContractError("selector dimension does not match unitary");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(to_eigen(u.matrix()));
  if (solver.info() != Eigen::Success) throw ContractError("eigendecomposition failed");
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  const Eigen::Index d = values.size();

  Eigen::VectorXcd sel(d);
  for (Eigen::Index i = 0; i < d; ++i) sel(i) = selector[static_cast<std::size_t>(i)];

  struct Space {
    Complex value;
    Eigen::VectorXcd projection;
    double weight;
  };
  std::vector<Space> spaces;
  std::vector<bool> used(static_cast<std::size_t>(d), false);
  constexpr double kSameEigenvalue = 1e-8;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    std::vector<Eigen::VectorXcd> basis;
    for (Eigen::Index j = i; j < d; ++j) {
      if (used[static_cast<std::size_t>(j)] || std::abs(values(j) - values(i)) > kSameEigenvalue) continue;
      used[static_cast<std::size_t>(j)] = true;
      Eigen::VectorXcd v = vectors.col(j);
      for (const auto& b : basis) v -= b.dot(v) * b;
      if (v.norm() > 1e-8) basis.push_back(v / v.norm());
    }
    Eigen::VectorXcd proj = Eigen::VectorXcd::Zero(d);
    for (const auto& b : basis) proj += b.dot(sel) * b;
    spaces.push_back({values(i), proj, proj.squaredNorm()});
  }

  std::size_t best = 0;
  for (std::size_t s = 1; s < spaces.size(); ++s)
    if (spaces[s].weight > spaces[best].weight) best = s;
  for (std::size_t s = 0; s < spaces.size(); ++s) {
    if (s != best && std::abs(spaces[s].weight - spaces[best].weight) < 1e-9) {
      throw DegeneracyError("selector overlaps distinct eigenspaces equally; eigenphase is ambiguous");
    }
  }

  const Complex lambda = spaces[best].value;
  double phase = std::arg(lambda) / (2.0 * std::numbers::pi);
  if (phase < 0.0) phase += 1.0;
  if (phase >= 1.0) phase -= 1.0;
  std::vector<Complex> vec(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) vec[static_cast<std::size_t>(i)] = spaces[best].projection(i);
  return {phase, lambda / std::abs(lambda), StateVector::normalized(std::move(vec))};
}

/// Eigenpair whose eigenphase is circularly nearest to `phase`.
inline Eigenpair oracle_eigenpair_near_phase(const Unitary& u, double phase) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(to_eigen(u.matrix()));
  if (solver.info() != Eigen::Success) throw ContractError("eigendecomposition failed");
  const auto& values = solver.eigenvalues();
  const Complex target = std::polar(1.0, 2.0 * std::numbers::pi * phase);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (std::abs(values(i) - target) < std::abs(values(best) - target)) best = i;
  double ph = std::arg(values(best)) / (2.0 * std::numbers::pi);
  if (ph < 0.0) ph += 1.0;
  if (ph >= 1.0) ph -= 1.0;
  std::vector<Complex> vec(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) vec[static_cast<std::size_t>(i)] = solver.eigenvectors()(i, best);
  return {ph, values(best) / std::abs(values(best)), StateVector::normalized(std::move(vec))};
}

/// Eigenphase in [0, 1) for the eigenvector selected by `selector`.
inline double oracle_eigenphase(const Unitary& u, const StateVector& selector) {
  return oracle_eigenpair(u, selector).phase;
}

inline double oracle_eigenphase(const Unitary& u, Polarization selector = Polarization::R) {
  return oracle_eigenphase(u, polarization_state(selector));
}

// ---------------------------------------------------------------------------
// Dual-rail photonic state

enum class RailBasis { red_blue, upper_lower };

/// Amplitudes over control polarization (x) target polarizations (x) target rails.
/// Index layout: control bit, then n polarization bits, then n rail bits (target 0
/// is the most significant within each group). Rail bit 0 = red/upper, 1 = blue/lower.
class PhotonicState {
 public:
  PhotonicState(int num_targets, RailBasis rails, std::vector<Complex> amplitudes)
      : num_targets_{num_targets}, rails_{rails}, amplitudes_{std::move(amplitudes)} {
    if (num_targets < 1 || num_targets > 8) throw ContractError("photonic target count must be in [1, 8]");
    if (amplitudes_.size() != dimension_for(num_targets)) throw ContractError("photonic amplitude count mismatch");
    double n2 = 0.0;
    for (const auto& z : amplitudes_) n2 += std::norm(z);
    if (std::abs(n2 - 1.0) > tol::kConstruction) throw ContractError("photonic state is not normalized");
  }

  static std::size_t dimension_for(int num_targets) { return std::size_t{1} << (1 + 2 * num_targets); }

  [[nodiscard]] int num_targets() const noexcept { return num_targets_; }
  [[nodiscard]] RailBasis rail_basis() const noexcept { return rails_; }
  [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  [[nodiscard]] std::size_t num_patterns() const noexcept { return std::size_t{1} << num_targets_; }

  [[nodiscard]] std::size_t index(int control, std::size_t pols, std::size_t rails) const {
    const auto n = static_cast<std::size_t>(num_targets_);
    return (static_cast<std::size_t>(control) << (2 * n)) | (pols << n) | rails;
  }

  [[nodiscard]] Complex amplitude(int control, std::size_t pols, std::size_t rails) const {
    return amplitudes_[index(control, pols, rails)];
  }

  /// Total probability of a rail pattern, summed over polarizations.
  [[nodiscard]] double pattern_probability(std::size_t rails) const {
    double p = 0.0;
    for (int c = 0; c < 2; ++c)
      for (std::size_t pol = 0; pol < num_patterns(); ++pol) p += std::norm(amplitude(c, pol, rails));
    return p;
  }

 private:
  int num_targets_;
  RailBasis rails_;
  std::vector<Complex> amplitudes_;
};

/// (|H> (x) psi_r + |V> (x) psi_b) / sqrt(2), psi on n polarization qubits.
inline PhotonicState prepare_entangled_input(const StateVector& psi) {
  const int n = psi.num_qubits();
  if (n < 1) throw ContractError("target must have at least one qubit");
  std::vector<Complex> amps(PhotonicState::dimension_for(n));
  const std::size_t all_blue = (std::size_t{1} << n) - 1;
  const double h = 1.0 / std::numbers::sqrt2;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t pol = 0; pol < psi.dimension(); ++pol) {
    amps[(std::size_t{0} << (2 * un)) | (pol << un) | 0] = h * psi[pol];
    amps[(std::size_t{1} << (2 * un)) | (pol << un) | all_blue] = h * psi[pol];
  }
  return PhotonicState(n, RailBasis::red_blue, std::move(amps));
}

/// Sends the all-blue components through 2^(k-1) cascaded copies of u. Each copy
/// is a separate multiplication; the red components are untouched.
inline PhotonicState apply_blue_unitary(const PhotonicState& state, const Unitary& u, int k) {
  if (state.rail_basis() != RailBasis::red_blue) throw ContractError("blue-rail unitary needs the red/blue rail basis");
  const std::size_t patterns = state.num_patterns();
  if (u.dimension() != patterns) throw ContractError("unitary dimension does not match target photon count");
  const std::size_t all_blue = patterns - 1;
  for (int c = 0; c < 2; ++c)
    for (std::size_t pol = 0; pol < patterns; ++pol)
      for (std::size_t rails = 1; rails < all_blue; ++rails)
        if (std::abs(state.amplitude(c, pol, rails)) > tol::kDrift)
          throw ContractError("state is not rail-correlated; mixed red/blue components present");

  const std::uint64_t copies = cascade_length(k);
  std::vector<Complex> amps(state.amplitudes().begin(), state.amplitudes().end());
  std::vector<Complex> pol_vec(patterns);
  std::vector<Complex> next(patterns);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t pol = 0; pol < patterns; ++pol) pol_vec[pol] = state.amplitude(c, pol, all_blue);
    for (std::uint64_t copy = 0; copy < copies; ++copy) {
      for (std::size_t r = 0; r < patterns; ++r) {
        Complex acc{};
        for (std::size_t col = 0; col < patterns; ++col) acc += u(r, col) * pol_vec[col];
        next[r] = acc;
      }
      pol_vec.swap(next);
    }
    for (std::size_t pol = 0; pol < patterns; ++pol) amps[state.index(c, pol, all_blue)] = pol_vec[pol];
  }
  return PhotonicState(state.num_targets(), RailBasis::red_blue, std::move(amps));
}

/// Per target photon: r -> (upper + lower)/sqrt(2), b -> (upper - lower)/sqrt(2).
inline PhotonicState beamsplitter_mix(const PhotonicState& state) {
  if (state.rail_basis() != RailBasis::red_blue) throw ContractError("beamsplitters expect the red/blue rail basis");
  std::vector<Complex> amps(state.amplitudes().begin(), state.amplitudes().end());
  const int n = state.num_targets();
  const double h = 1.0 / std::numbers::sqrt2;
  for (int t = 0; t < n; ++t) {
    const std::size_t bit = std::size_t{1} << (n - 1 - t);
    for (std::size_t i = 0; i < amps.size(); ++i) {
      if (i & bit) continue;
      const Complex red = amps[i];
      const Complex blue = amps[i | bit];
      amps[i] = h * (red + blue);
      amps[i | bit] = h * (red - blue);
    }
  }
  return PhotonicState(n, RailBasis::upper_lower, std::move(amps));
}

// ---------------------------------------------------------------------------
// Parity post-selection

enum class ParityLabel { P, Q };

/// One detection pattern: bit t of `lower_mask` set means target t exits the lower port.
struct ParityBranch {
  ParityLabel label = ParityLabel::P;
  std::size_t lower_mask = 0;

  ParityBranch() = default;
  ParityBranch(ParityLabel l, std::size_t mask) : label{l}, lower_mask{mask} {
    if (label_for(mask) != l) throw ContractError("rail pattern parity does not match branch label");
  }

  static ParityLabel label_for(std::size_t mask) {
    return (std::popcount(mask) % 2 == 0) ? ParityLabel::P : ParityLabel::Q;
  }
};

/// All rail patterns of n targets with the given parity, in ascending mask order.
inline std::vector<ParityBranch> parity_cases(int num_targets, ParityLabel label) {
  std::vector<ParityBranch> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << num_targets); ++mask)
    if (ParityBranch::label_for(mask) == label) out.emplace_back(label, mask);
  return out;
}

struct PostselectResult {
  std::optional<StateVector> state;  ///< control (x) targets; empty for a null branch
  double probability = 0.0;

  [[nodiscard]] bool is_null() const noexcept { return !state.has_value(); }
};

/// Projects onto one detection pattern and drops the rail labels.
inline PostselectResult postselect(const PhotonicState& state, const ParityBranch& branch) {
  if (state.rail_basis() != RailBasis::upper_lower) throw ContractError("post-selection expects the post-beamsplitter basis");
  if (branch.lower_mask >= state.num_patterns()) throw ContractError("rail pattern out of range");
  const std::size_t patterns = state.num_patterns();
  std::vector<Complex> amps(2 * patterns);
  double p = 0.0;
  for (int c = 0; c < 2; ++c)
    for (std::size_t pol = 0; pol < patterns; ++pol) {
      const Complex a = state.amplitude(c, pol, branch.lower_mask);
      amps[static_cast<std::size_t>(c) * patterns + pol] = a;
      p += std::norm(a);
    }
  if (p <= 1e-20) return {std::nullopt, 0.0};
  return {StateVector::normalized(std::move(amps)), p};
}

/// Q-branch rule: "+" reads as 1 and "-" as 0.
constexpr int q_branch_relabel(int bit) { return bit == 0 ? 1 : 0; }

/// The P-branch output for the all-upper pattern, on control (x) target.
inline StateVector photonic_controlled_power(const Unitary& u, const StateVector& psi, int k) {
  const auto mixed = beamsplitter_mix(apply_blue_unitary(prepare_entangled_input(psi), u, k));
  auto result = postselect(mixed, ParityBranch(ParityLabel::P, 0));
  if (result.is_null()) throw ContractError("all-upper pattern has zero probability");
  return std::move(*result.state);
}

enum class QBranchPolicy { relabel, discard };

/// Entanglement-based C-U^(2^(k-1)): every detection pattern is a branch; Q
/// patterns carry the relabel flag, or are dropped (and P renormalized) under
/// the discard policy.
class PhotonicProvider final : public ControlledPowerProvider {
 public:
  explicit PhotonicProvider(QBranchPolicy policy = QBranchPolicy::relabel) : policy_{policy} {}

  [[nodiscard]] std::vector<ControlledBranch> branches(const Unitary& u, const StateVector& target,
                                                       int k) const override {
    const auto mixed = beamsplitter_mix(apply_blue_unitary(prepare_entangled_input(target), u, k));
    std::vector<ControlledBranch> out;
    double kept = 0.0;
    for (std::size_t mask = 0; mask < mixed.num_patterns(); ++mask) {
      const auto label = ParityBranch::label_for(mask);
      if (label == ParityLabel::Q && policy_ == QBranchPolicy::discard) continue;
      auto r = postselect(mixed, ParityBranch(label, mask));
      if (r.is_null()) continue;
      kept += r.probability;
      out.push_back({std::move(*r.state), r.probability, label == ParityLabel::Q});
    }
    for (auto& b : out) b.probability /= kept;
    return out;
  }

  [[nodiscard]] QBranchPolicy policy() const noexcept { return policy_; }

 private:
  QBranchPolicy policy_;
};

// ---------------------------------------------------------------------------
// Noise

/// distinguishability = 1 means perfectly indistinguishable photons.
struct NoiseSpec {
  double distinguishability = 1.0;
  double angle_jitter_sigma_deg = 0.0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec defaults() { return {0.95, 0.25}; }

  [[nodiscard]] bool coherent() const noexcept { return distinguishability >= 1.0; }
  [[nodiscard]] bool noiseless() const noexcept { return coherent() && angle_jitter_sigma_deg <= 0.0; }

  void validate() const {
    if (!(distinguishability >= 0.0 && distinguishability <= 1.0)) throw ContractError("distinguishability must be in [0, 1]");
    if (!(angle_jitter_sigma_deg >= 0.0) || !std::isfinite(angle_jitter_sigma_deg))
      throw ContractError("angle jitter sigma must be >= 0");
  }
};

/// rho -> p rho + (1 - p) Delta(rho), Delta removing coherences between the |0>
/// and |1> blocks of each listed control qubit.
inline ComplexMatrix dephase_controls(const ComplexMatrix& rho, double p, std::span<const int> controls) {
  const int n = log2_exact(rho.rows());
  ComplexMatrix out = rho;
  for (int q : controls) {
    if (q < 0 || q >= n) throw ContractError("dephased qubit index out of range");
    const std::size_t bit = detail::bit_of(q, n);
    for (std::size_t r = 0; r < rho.rows(); ++r)
      for (std::size_t c = 0; c < rho.cols(); ++c)
        if ((r & bit) != (c & bit)) out(r, c) *= p;
  }
  return out;
}

inline DensityMatrix apply_noise(const DensityMatrix& rho, const NoiseSpec& noise, std::span<const int> controls) {
  noise.validate();
  return DensityMatrix(dephase_controls(rho.matrix(), noise.distinguishability, controls));
}

/// Each plate angle perturbed by an independent N(0, sigma^2) draw, in degrees.
inline std::vector<WaveplateSpec> apply_noise(std::span<const WaveplateSpec> plates, const NoiseSpec& noise, Rng& rng) {
  noise.validate();
  std::vector<WaveplateSpec> out;
  out.reserve(plates.size());
  for (const auto& p : plates) {
    const double delta = noise.angle_jitter_sigma_deg > 0.0 ? noise.angle_jitter_sigma_deg * rng.normal() : 0.0;
    out.emplace_back(p.kind, p.angle_deg + delta);
  }
  return out;
}

}  // namespace ipea
