#pragma once

// Phase estimation engines.
//
//  * ipea_run: one ancilla, bits extracted least significant first, each
//    iteration compensated by the feedback rotation diag(1, e^{i omega_k}).
//  * qpe_full_distribution: m-qubit register, controlled powers, inverse QFT.
//  * collapse_run: the full-register circuit on a non-eigenstate input, which
//    projects the target onto the eigenstate selected by the readout.
//
// The estimators treat U as a black box.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipea/controlled.hpp"
#include "ipea/photonics.hpp"
#include "ipea/qmath.hpp"

namespace ipea {

struct EigenproblemSpec {
  Unitary unitary;
  StateVector input_state;

  EigenproblemSpec(Unitary u, StateVector psi) : unitary{std::move(u)}, input_state{std::move(psi)} {
    if (unitary.dimension() != input_state.dimension()) throw ContractError("unitary and input state dimensions differ");
  }
};

/// Bits phi_1 ... phi_m of the estimate 0.phi_1 phi_2 ... phi_m.
struct PhaseEstimate {
  std::vector<int> bits;

  [[nodiscard]] int num_bits() const noexcept { return static_cast<int>(bits.size()); }

  /// Exact dyadic sum; doubles hold it exactly for m <= 52.
  [[nodiscard]] double value() const {
    double v = 0.0;
    double w = 0.5;
    for (int b : bits) {
      if (b) v += w;
      w *= 0.5;
    }
    return v;
  }

  /// Register index whose binary digits (MSB first) are the bits.
  [[nodiscard]] std::size_t index() const {
    std::size_t y = 0;
    for (int b : bits) y = (y << 1) | static_cast<std::size_t>(b);
    return y;
  }

  [[nodiscard]] std::string bit_string() const {
    std::string s;
    for (int b : bits) s.push_back(b ? '1' : '0');
    return s;
  }

  static PhaseEstimate from_index(std::size_t y, int m) {
    PhaseEstimate e;
    e.bits.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) e.bits[static_cast<std::size_t>(j)] = static_cast<int>((y >> (m - 1 - j)) & 1U);
    return e;
  }

  friend bool operator==(const PhaseEstimate&, const PhaseEstimate&) = default;
};

/// min(|a - b|, 1 - |a - b|) for phases taken mod 1.
inline double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 1.0);
  return std::min(d, 1.0 - d);
}

// ---------------------------------------------------------------------------
// Feedback

/// xi_k = 0.0 phi_{k+1} ... phi_m, given later_bits = (phi_{k+1}, ..., phi_m).
inline double binary_fraction_xi(std::span<const int> later_bits) {
  double xi = 0.0;
  double w = 0.25;
  for (int b : later_bits) {
    if (b != 0 && b != 1) throw ContractError("measured bits must be 0 or 1");
    if (b) xi += w;
    w *= 0.5;
  }
  return xi;
}

/// omega_k = -2 pi xi_k.
inline double feedback_angle(std::span<const int> later_bits) {
  return -2.0 * std::numbers::pi * binary_fraction_xi(later_bits);
}

inline double feedback_angle(int k, int m, std::span<const int> later_bits) {
  if (m < 1 || k < 1 || k > m) throw ContractError("iteration index must satisfy 1 <= k <= m");
  if (later_bits.size() != static_cast<std::size_t>(m - k)) throw ContractError("expected m - k previously measured bits");
  return feedback_angle(later_bits);
}

struct IterationPlan {
  int m = 1;
  int k = 1;
  std::vector<int> measured_bits;  ///< phi_{k+1} ... phi_m
  double xi = 0.0;
  double omega = 0.0;

  static IterationPlan make(int m, int k, std::vector<int> later_bits) {
    IterationPlan plan;
    plan.m = m;
    plan.k = k;
    plan.omega = feedback_angle(k, m, later_bits);
    plan.xi = binary_fraction_xi(later_bits);
    plan.measured_bits = std::move(later_bits);
    return plan;
  }
};

// ---------------------------------------------------------------------------
// One iteration

namespace detail {

// P("+") on qubit 0 of a density matrix over ancilla (x) target.
inline double plus_probability(const ComplexMatrix& rho) {
  const std::size_t half = rho.rows() / 2;
  double p = 0.0;
  for (std::size_t t = 0; t < half; ++t)
    p += 0.5 * (rho(t, t) + rho(half + t, half + t) + rho(t, half + t) + rho(half + t, t)).real();
  return std::clamp(p, 0.0, 1.0);
}

inline double branch_plus_probability(const StateVector& joint_after_rotation, double distinguishability) {
  const double coherent = outcome_probabilities(joint_after_rotation, 0, Basis::plus_minus).first;
  if (distinguishability >= 1.0) return coherent;
  const int controls[] = {0};
  const auto rho = dephase_controls(density_from_state(joint_after_rotation).matrix(), distinguishability, controls);
  return plus_probability(rho);
}

}  // namespace detail

struct IterationResult {
  int bit = 0;                  ///< after Q-branch relabeling
  StateVector target;           ///< post-measurement target (coherent component)
  double plus_probability = 0;  ///< P("+") within the sampled branch
  bool relabeled = false;       ///< sampled branch was a Q pattern
};

/// Prepares |+> (x) target, applies C-U^(2^(k-1)) through `provider`, rotates the
/// ancilla by omega_k and measures it in the +/- basis ("+" -> 0, "-" -> 1).
///
/// With distinguishability < 1 the outcome probabilities come from the dephased
/// ancilla-target density matrix; the returned target is the coherent branch's
/// conditional state, which is exact for eigenstate inputs.
inline IterationResult ipea_iteration(const EigenproblemSpec& spec, const IterationPlan& plan,
                                      const ControlledPowerProvider& provider, Rng& rng,
                                      double distinguishability = 1.0) {
  auto branch = provider.sample(spec.unitary, spec.input_state, plan.k, rng);
  if (branch.joint.dimension() != 2 * spec.input_state.dimension()) throw ContractError("provider output dimension mismatch");
  const StateVector rotated = apply(gates::phase(plan.omega), branch.joint, {0});
  const double p_plus = detail::branch_plus_probability(rotated, distinguishability);
  const int outcome = rng.uniform() < p_plus ? 0 : 1;
  auto cond = condition_on(rotated, 0, Basis::plus_minus, outcome);
  if (!cond.remaining) cond = condition_on(rotated, 0, Basis::plus_minus, 1 - outcome);
  const int bit = branch.relabel ? q_branch_relabel(outcome) : outcome;
  return {bit, std::move(*cond.remaining), p_plus, branch.relabel};
}

/// Exact P(bit = 1) for one branch, after its relabeling rule.
inline double branch_bit_one_probability(const ControlledBranch& branch, double omega, double distinguishability = 1.0) {
  const StateVector rotated = apply(gates::phase(omega), branch.joint, {0});
  const double p_plus = detail::branch_plus_probability(rotated, distinguishability);
  return branch.relabel ? p_plus : 1.0 - p_plus;
}

/// Exact P(bit = 1) for an iteration, averaged over the provider's branches.
inline double bit_posterior(const EigenproblemSpec& spec, const IterationPlan& plan,
                            const ControlledPowerProvider& provider, double distinguishability = 1.0) {
  double p1 = 0.0;
  for (const auto& b : provider.branches(spec.unitary, spec.input_state, plan.k))
    p1 += b.probability * branch_bit_one_probability(b, plan.omega, distinguishability);
  return std::clamp(p1, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Full IPEA

struct IpeaRunResult {
  PhaseEstimate estimate;
  int iterations = 0;       ///< total iterations executed (m * reps)
  int p_branch_count = 0;   ///< iterations whose sampled branch did not need relabeling
};

inline void check_bit_count(int m) {
  if (m < 1 || m > kMaxIteration) throw ContractError("bit count m must be in [1, 16]");
}

/// m-bit IPEA with `reps_per_bit` repetitions per bit and majority vote. The
/// input state is taken to be an eigenstate; nothing here checks that.
inline IpeaRunResult ipea_run(const EigenproblemSpec& spec, int m, int reps_per_bit,
                              const ControlledPowerProvider& provider, Rng& rng, double distinguishability = 1.0) {
  check_bit_count(m);
  if (reps_per_bit < 1 || reps_per_bit % 2 == 0) throw ContractError("reps_per_bit must be odd and >= 1");
  IpeaRunResult result;
  result.estimate.bits.assign(static_cast<std::size_t>(m), 0);
  auto& bits = result.estimate.bits;
  for (int k = m; k >= 1; --k) {
    const auto plan = IterationPlan::make(m, k, std::vector<int>(bits.begin() + k, bits.end()));
    int ones = 0;
    for (int rep = 0; rep < reps_per_bit; ++rep) {
      const auto it = ipea_iteration(spec, plan, provider, rng, distinguishability);
      ones += it.bit;
      ++result.iterations;
      if (!it.relabeled) ++result.p_branch_count;
    }
    bits[static_cast<std::size_t>(k - 1)] = 2 * ones > reps_per_bit ? 1 : 0;
  }
  return result;
}

struct ExactIpeaResult {
  PhaseEstimate estimate;
  std::vector<double> bit_one_posteriors;  ///< index k-1 holds P(phi_k = 1) given later bits
  double p_branch_fraction = 1.0;          ///< total probability of non-relabeled branches
};

/// Exact-probability mode: each bit takes the more probable value (the limit of
/// majority voting over infinitely many repetitions). A tie resolves to 0.
inline ExactIpeaResult ipea_run_exact(const EigenproblemSpec& spec, int m, const ControlledPowerProvider& provider,
                                      double distinguishability = 1.0) {
  check_bit_count(m);
  ExactIpeaResult result;
  result.estimate.bits.assign(static_cast<std::size_t>(m), 0);
  result.bit_one_posteriors.assign(static_cast<std::size_t>(m), 0.0);
  auto& bits = result.estimate.bits;
  double p_frac = 0.0;
  for (int k = m; k >= 1; --k) {
    const auto plan = IterationPlan::make(m, k, std::vector<int>(bits.begin() + k, bits.end()));
    double p1 = 0.0;
    for (const auto& b : provider.branches(spec.unitary, spec.input_state, k)) {
      p1 += b.probability * branch_bit_one_probability(b, plan.omega, distinguishability);
      if (!b.relabel) p_frac += b.probability;
    }
    p1 = std::clamp(p1, 0.0, 1.0);
    result.bit_one_posteriors[static_cast<std::size_t>(k - 1)] = p1;
    bits[static_cast<std::size_t>(k - 1)] = p1 > 0.5 ? 1 : 0;
  }
  result.p_branch_fraction = p_frac / m;
  return result;
}

// ---------------------------------------------------------------------------
// Inverse QFT

/// Dense QFT^{-1}: entries 2^{-m/2} e^{-i 2 pi j k / 2^m}.
inline Unitary inverse_qft(int m) {
  if (m < 1) throw ContractError("QFT size must be >= 1");
  const std::size_t dim = std::size_t{1} << m;
  check_capacity(dim * dim);
  ComplexMatrix f(dim, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t j = 0; j < dim; ++j)
    for (std::size_t k = 0; k < dim; ++k) {
      const std::size_t e = (j * k) % dim;
      f(j, k) = std::polar(scale, -2.0 * std::numbers::pi * static_cast<double>(e) / static_cast<double>(dim));
    }
  return Unitary(std::move(f));
}

inline Unitary qft(int m) { return inverse_qft(m).adjoint(); }

/// QFT^{-1} on `qubits` (qubits[0] most significant) as Hadamards, controlled
/// phases and swaps; no dense 2^m x 2^m matrix is formed.
inline StateVector apply_inverse_qft(const StateVector& s, std::span<const int> qubits) {
  const int m = static_cast<int>(qubits.size());
  StateVector out = s;
  const Unitary swap(ComplexMatrix{{1, 0, 0, 0}, {0, 0, 1, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}});
  for (int j = 0; j < m / 2; ++j) {
    const int pair[] = {qubits[static_cast<std::size_t>(j)], qubits[static_cast<std::size_t>(m - 1 - j)]};
    out = apply(swap, out, pair);
  }
  const Unitary h = gates::hadamard();
  for (int j = m - 1; j >= 0; --j) {
    for (int l = m - 1; l > j; --l) {
      const double angle = -2.0 * std::numbers::pi / static_cast<double>(std::size_t{1} << (l - j + 1));
      const int target[] = {qubits[static_cast<std::size_t>(j)]};
      out = apply_controlled(gates::phase(angle), out, qubits[static_cast<std::size_t>(l)], target);
    }
    const int target[] = {qubits[static_cast<std::size_t>(j)]};
    out = apply(h, out, target);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full-register QPE

namespace detail {

inline std::vector<int> range(int first, int count) {
  std::vector<int> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = first + i;
  return v;
}

// |+>^m (x) psi after the controlled powers: ancilla j controls U^(2^(m-1-j)).
inline StateVector controlled_register_state(const Unitary& u, const StateVector& input, int m) {
  check_bit_count(m);
  check_capacity((std::size_t{1} << m) * input.dimension());
  if (u.dimension() != input.dimension()) throw ContractError("unitary and input state dimensions differ");
  StateVector s = input;
  for (int j = 0; j < m; ++j) s = tensor(states::plus(), s);
  const auto targets = range(m, input.num_qubits());
  Unitary power = u;
  for (int j = m - 1; j >= 0; --j) {
    s = apply_controlled(power, s, j, targets);
    if (j > 0) power = power * power;
  }
  return s;
}

inline StateVector qpe_output_state(const Unitary& u, const StateVector& input, int m) {
  const auto register_qubits = range(0, m);
  return apply_inverse_qft(controlled_register_state(u, input, m), register_qubits);
}

}  // namespace detail

/// Exact register distribution P(y), y = 0 .. 2^m - 1 read MSB first as phi_1 ... phi_m.
inline std::vector<double> qpe_full_distribution(const EigenproblemSpec& spec, int m) {
  const StateVector out = detail::qpe_output_state(spec.unitary, spec.input_state, m);
  const std::size_t tdim = spec.input_state.dimension();
  std::vector<double> probs(std::size_t{1} << m, 0.0);
  for (std::size_t i = 0; i < out.dimension(); ++i) probs[i / tdim] += std::norm(out[i]);
  return probs;
}

// ---------------------------------------------------------------------------
// Eigenstate generation

struct CollapseResult {
  PhaseEstimate estimate;
  StateVector collapsed_target;
  double outcome_probability = 0.0;
};

/// Conditional target state for register readout y; empty if P(y) = 0.
inline std::optional<CollapseResult> collapse_branch(const Unitary& u, const StateVector& input, int m, std::size_t y) {
  const StateVector out = detail::qpe_output_state(u, input, m);
  const std::size_t tdim = input.dimension();
  if (y >= (std::size_t{1} << m)) throw ContractError("register outcome out of range");
  std::vector<Complex> amps(out.amplitudes().begin() + static_cast<std::ptrdiff_t>(y * tdim),
                            out.amplitudes().begin() + static_cast<std::ptrdiff_t>((y + 1) * tdim));
  double p = 0.0;
  for (const auto& z : amps) p += std::norm(z);
  if (p <= 1e-20) return std::nullopt;
  return CollapseResult{PhaseEstimate::from_index(y, m), StateVector::normalized(std::move(amps)), p};
}

namespace detail {

inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double draw = rng.uniform();
  double acc = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_nonzero = i;
    acc += probs[i];
    if (draw < acc && probs[i] > 0.0) return i;
  }
  return last_nonzero;
}

}  // namespace detail

/// Runs the coherent full-register circuit on an arbitrary input and samples the readout.
inline CollapseResult collapse_run(const Unitary& u, const StateVector& input, int m, Rng& rng) {
  const auto probs = qpe_full_distribution(EigenproblemSpec(u, input), m);
  const std::size_t y = detail::sample_index(probs, rng);
  return *collapse_branch(u, input, m, y);
}

struct NoisyCollapseResult {
  PhaseEstimate estimate;
  DensityMatrix collapsed_target;
  double outcome_probability = 0.0;
};

/// Density-matrix counterpart of collapse_branch: the register coherences are
/// dephased with strength `distinguishability` before the inverse QFT.
inline std::optional<NoisyCollapseResult> collapse_branch_noisy(const Unitary& u, const StateVector& input, int m,
                                                                std::size_t y, double distinguishability) {
  if (y >= (std::size_t{1} << m)) throw ContractError("register outcome out of range");
  const StateVector pre = detail::controlled_register_state(u, input, m);
  const auto controls = detail::range(0, m);
  const ComplexMatrix dephased = dephase_controls(density_from_state(pre).matrix(), distinguishability, controls);
  const ComplexMatrix rho = conjugate(embed(inverse_qft(m), pre.num_qubits(), controls), dephased);
  const std::size_t tdim = input.dimension();
  ComplexMatrix block(tdim, tdim);
  double p = 0.0;
  for (std::size_t r = 0; r < tdim; ++r) {
    for (std::size_t c = 0; c < tdim; ++c) block(r, c) = rho(y * tdim + r, y * tdim + c);
    p += block(r, r).real();
  }
  if (p <= 1e-14) return std::nullopt;
  block = Complex{1.0 / p} * block;
  // Symmetrize away round-off before validation.
  block = Complex{0.5} * (block + block.adjoint());
  return NoisyCollapseResult{PhaseEstimate::from_index(y, m), DensityMatrix(std::move(block)), p};
}

}  // namespace ipea
