#pragma once

// Single-qubit state tomography in the {X, Y, Z} bases: simulated counts,
// linear inversion with projection onto the Bloch ball, and a parametric
// bootstrap for fidelity error bars.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "ipea/qmath.hpp"

namespace ipea {

enum class PauliBasis { X = 0, Y = 1, Z = 2 };

struct BasisCounts {
  std::uint64_t plus = 0;
  std::uint64_t minus = 0;
};

struct PauliCounts {
  std::uint64_t shots_per_basis = 0;
  std::array<BasisCounts, 3> counts{};  ///< indexed by PauliBasis

  [[nodiscard]] const BasisCounts& operator[](PauliBasis b) const { return counts[static_cast<std::size_t>(b)]; }

  void validate() const {
    if (shots_per_basis == 0) throw ContractError("tomography needs at least one shot per basis");
    for (const auto& c : counts)
      if (c.plus + c.minus != shots_per_basis) throw ContractError("plus + minus must equal shots_per_basis");
  }
};

using BlochVector = std::array<double, 3>;

/// (<X>, <Y>, <Z>) of a single-qubit density matrix.
inline BlochVector bloch_vector(const DensityMatrix& rho) {
  if (rho.dimension() != 2) throw ContractError("tomography is single-qubit only");
  return {2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(), (rho(0, 0) - rho(1, 1)).real()};
}

/// (I + r.sigma) / 2, with |r| > 1 rescaled onto the unit sphere.
inline DensityMatrix density_from_bloch(BlochVector r) {
  const double len = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
  if (len > 1.0) {
    for (auto& x : r) x /= len;
  }
  return DensityMatrix(ComplexMatrix{{0.5 * (1.0 + r[2]), 0.5 * Complex{r[0], -r[1]}},
                                     {0.5 * Complex{r[0], r[1]}, 0.5 * (1.0 - r[2])}});
}

inline PauliCounts simulate_counts(const DensityMatrix& rho, std::uint64_t shots, Rng& rng) {
  if (shots == 0) throw ContractError("shots must be >= 1");
  const BlochVector r = bloch_vector(rho);
  PauliCounts out;
  out.shots_per_basis = shots;
  for (std::size_t b = 0; b < 3; ++b) {
    const double p_plus = std::clamp(0.5 * (1.0 + r[b]), 0.0, 1.0);
    std::binomial_distribution<std::uint64_t> draw(shots, p_plus);
    const std::uint64_t plus = draw(rng);
    out.counts[b] = {plus, shots - plus};
  }
  return out;
}

/// Empirical expectations (plus - minus) / shots per basis.
inline BlochVector empirical_bloch(const PauliCounts& counts) {
  counts.validate();
  BlochVector r{};
  const auto n = static_cast<double>(counts.shots_per_basis);
  for (std::size_t b = 0; b < 3; ++b)
    r[b] = (static_cast<double>(counts.counts[b].plus) - static_cast<double>(counts.counts[b].minus)) / n;
  return r;
}

inline DensityMatrix reconstruct(const PauliCounts& counts) { return density_from_bloch(empirical_bloch(counts)); }

/// From exact expectation values instead of counts.
inline DensityMatrix reconstruct(const BlochVector& expectations) { return density_from_bloch(expectations); }

struct FidelityStats {
  double mean = 0.0;
  double std = 0.0;
};

/// Parametric bootstrap: each resample redraws every basis from Binomial(shots,
/// observed p_plus) using its own derived stream. `std` is the population
/// standard deviation over resamples.
inline FidelityStats bootstrap_fidelity(const PauliCounts& counts, const StateVector& ideal, std::uint64_t resamples,
                                        const Rng& rng) {
  counts.validate();
  if (resamples == 0) throw ContractError("resamples must be >= 1");
  const auto n = static_cast<double>(counts.shots_per_basis);
  double sum = 0.0;
  double sum2 = 0.0;
  for (std::uint64_t i = 0; i < resamples; ++i) {
    Rng stream = rng.split(i);
    PauliCounts resampled;
    resampled.shots_per_basis = counts.shots_per_basis;
    for (std::size_t b = 0; b < 3; ++b) {
      std::binomial_distribution<std::uint64_t> draw(counts.shots_per_basis, static_cast<double>(counts.counts[b].plus) / n);
      const std::uint64_t plus = draw(stream);
      resampled.counts[b] = {plus, counts.shots_per_basis - plus};
    }
    const double f = fidelity(reconstruct(resampled), ideal);
    sum += f;
    sum2 += f * f;
  }
  const double mean = sum / static_cast<double>(resamples);
  const double var = std::max(0.0, sum2 / static_cast<double>(resamples) - mean * mean);
  return {mean, resamples == 1 ? 0.0 : std::sqrt(var)};
}

/// Uhlmann fidelity of two qubit states: Tr(rho sigma) + 2 sqrt(det rho det sigma).
inline double state_fidelity(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dimension() != 2 || b.dimension() != 2) throw ContractError("state_fidelity is single-qubit only");
  const double overlap = (a.matrix() * b.matrix()).trace().real();
  const auto det = [](const DensityMatrix& m) {
    return std::max(0.0, (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real());
  };
  return std::clamp(overlap + 2.0 * std::sqrt(det(a) * det(b)), 0.0, 1.0);
}

struct ReconstructionReport {
  DensityMatrix rho;
  double fidelity_vs_ideal = 0.0;
  double fidelity_std = 0.0;
  std::uint64_t shots_per_basis = 0;  ///< 0 means exact expectations were used
};

/// Full tomography pass. shots == 0 reconstructs from exact expectations.
inline ReconstructionReport tomograph(const DensityMatrix& rho, const StateVector& ideal, std::uint64_t shots,
                                      std::uint64_t resamples, Rng& rng) {
  if (shots == 0) {
    DensityMatrix est = reconstruct(bloch_vector(rho));
    const double f = fidelity(est, ideal);
    return {std::move(est), f, 0.0, 0};
  }
  const PauliCounts counts = simulate_counts(rho, shots, rng);
  DensityMatrix est = reconstruct(counts);
  const double f = fidelity(est, ideal);
  const auto stats = bootstrap_fidelity(counts, ideal, std::max<std::uint64_t>(resamples, 1), rng.split(0xB007));
  return {std::move(est), f, stats.std, shots};
}

}  // namespace ipea
