#pragma once

// Realizations of the controlled power C-U^(2^(k-1)) acting on |+> (x) psi.
//
// A provider never inspects the spectrum of U. It returns every branch the
// physical realization can produce, each with its probability and with a flag
// saying whether the ancilla bit must be flipped afterwards.

#include <cstdint>
#include <memory>
#include <vector>

#include "ipea/qmath.hpp"

namespace ipea {

/// Highest iteration index a run may request; U^(2^15) is the deepest cascade.
inline constexpr int kMaxIteration = 16;

inline std::uint64_t cascade_length(int k) {
  if (k < 1 || k > kMaxIteration) throw ContractError("iteration index k must be in [1, 16]");
  return std::uint64_t{1} << (k - 1);
}

/// One post-selected outcome of the controlled-power construction.
struct ControlledBranch {
  StateVector joint;          ///< ancilla (qubit 0) (x) target
  double probability = 1.0;   ///< probability this branch occurs
  bool relabel = false;       ///< flip the measured ancilla bit for this branch
};

enum class ProviderKind { matrix, photonic };

class ControlledPowerProvider {
 public:
  virtual ~ControlledPowerProvider() = default;

  /// Every branch with nonzero probability; probabilities sum to 1.
  [[nodiscard]] virtual std::vector<ControlledBranch> branches(const Unitary& u, const StateVector& target,
                                                               int k) const = 0;

  /// Draws one branch according to the branch probabilities.
  [[nodiscard]] ControlledBranch sample(const Unitary& u, const StateVector& target, int k, Rng& rng) const {
    auto all = branches(u, target, k);
    if (all.size() == 1) return std::move(all.front());
    const double draw = rng.uniform();
    double acc = 0.0;
    for (auto& b : all) {
      acc += b.probability;
      if (draw < acc) return std::move(b);
    }
    return std::move(all.back());
  }
};

/// C-U^(2^(k-1)) as the block matrix diag(I, U^(2^(k-1))) applied to |+> (x) psi.
class MatrixProvider final : public ControlledPowerProvider {
 public:
  [[nodiscard]] std::vector<ControlledBranch> branches(const Unitary& u, const StateVector& target,
                                                       int k) const override {
    if (u.dimension() != target.dimension()) throw ContractError("unitary and target dimensions differ");
    std::vector<ControlledBranch> out;
    out.push_back({controlled_power_state(u.power(cascade_length(k)), target), 1.0, false});
    return out;
  }

  /// (|0> (x) psi + |1> (x) V psi) / sqrt(2) via the controlled-gate route.
  static StateVector controlled_power_state(const Unitary& v, const StateVector& target) {
    const StateVector start = tensor(states::plus(), target);
    std::vector<int> targets(static_cast<std::size_t>(target.num_qubits()));
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<int>(i) + 1;
    return apply_controlled(v, start, 0, targets);
  }
};

}  // namespace ipea
