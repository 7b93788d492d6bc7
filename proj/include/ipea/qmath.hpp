#pragma once

// Dense complex linear algebra for small qubit registers: states, operators,
// Kronecker products, projective measurement and fidelity.
//
// Qubit 0 is the most significant bit of an amplitude index, so a register
// written left to right in a circuit diagram reads left to right in the index.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipea/rng.hpp"

namespace ipea {

using Complex = std::complex<double>;
inline constexpr Complex kI{0.0, 1.0};

/// Violated precondition or invariant (non-unitary matrix, bad index, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Requested register exceeds the configured amplitude budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace tol {
inline constexpr double kConstruction = 1e-10;
inline constexpr double kDrift = 1e-12;
inline constexpr double kEigenFloor = 1e-8;
}  // namespace tol

/// Qubit cap; `IPEA_SIM_MAX_QUBITS` overrides the default of 20.
inline int max_qubits() {
  if (const char* env = std::getenv("IPEA_SIM_MAX_QUBITS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != nullptr && *end == '\0' && v >= 1 && v <= 30) return static_cast<int>(v);
  }
  return 20;
}

inline void check_capacity(std::size_t amplitudes) {
  const std::size_t cap = std::size_t{1} << max_qubits();
  if (amplitudes > cap) {
    throw CapacityError("register of " + std::to_string(amplitudes) +
                        " amplitudes exceeds capacity of " + std::to_string(cap));
  }
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline int log2_exact(std::size_t n) {
  if (!is_power_of_two(n)) throw ContractError("dimension " + std::to_string(n) + " is not a power of two");
  int q = 0;
  while ((std::size_t{1} << q) < n) ++q;
  return q;
}

// ---------------------------------------------------------------------------
// ComplexMatrix

class ComplexMatrix {
 public:
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_{rows}, cols_{cols} {
    if (rows == 0 || cols == 0) throw ContractError("matrix dimensions must be >= 1");
    check_capacity(rows * cols);
    entries_.assign(rows * cols, Complex{});
  }

  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> entries)
      : rows_{rows}, cols_{cols}, entries_{std::move(entries)} {
    if (rows == 0 || cols == 0) throw ContractError("matrix dimensions must be >= 1");
    if (entries_.size() != rows * cols) throw ContractError("matrix entry count does not match shape");
    for (const auto& z : entries_) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw ContractError("matrix entry is not finite");
    }
  }

  ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows)
      : ComplexMatrix(rows.size(), rows.size() == 0 ? 0 : rows.begin()->size(), flatten(rows)) {}

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(std::span<const Complex> d) {
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool is_square() const noexcept { return rows_ == cols_; }
  [[nodiscard]] std::span<const Complex> entries() const noexcept { return entries_; }

  Complex& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  [[nodiscard]] ComplexMatrix adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  [[nodiscard]] Complex trace() const {
    Complex t{};
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) throw ContractError("matrix product shape mismatch");
    ComplexMatrix out(a.rows_, b.cols_);
    for (std::size_t r = 0; r < a.rows_; ++r)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Complex v = a(r, k);
        if (v == Complex{}) continue;
        for (std::size_t c = 0; c < b.cols_; ++c) out(r, c) += v * b(k, c);
      }
    return out;
  }

  friend ComplexMatrix operator*(Complex s, const ComplexMatrix& a) {
    ComplexMatrix out = a;
    for (auto& z : out.entries_) z *= s;
    return out;
  }

  friend ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ContractError("matrix sum shape mismatch");
    ComplexMatrix out = a;
    for (std::size_t i = 0; i < out.entries_.size(); ++i) out.entries_[i] += b.entries_[i];
    return out;
  }

  /// Max-entry norm of a - b; shapes must agree.
  friend double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw ContractError("matrix comparison shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) d = std::max(d, std::abs(a.entries_[i] - b.entries_[i]));
    return d;
  }

 private:
  static std::vector<Complex> flatten(std::initializer_list<std::initializer_list<Complex>> rows) {
    std::vector<Complex> out;
    const std::size_t width = rows.size() == 0 ? 0 : rows.begin()->size();
    for (const auto& row : rows) {
      if (row.size() != width) throw ContractError("ragged matrix initializer");
      out.insert(out.end(), row.begin(), row.end());
    }
    return out;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<Complex> entries_;
};

inline Eigen::MatrixXcd to_eigen(const ComplexMatrix& m) {
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  return out;
}

// ---------------------------------------------------------------------------
// Unitary

inline double unitarity_deviation(const ComplexMatrix& m) {
  if (!m.is_square()) return std::numeric_limits<double>::infinity();
  return max_abs_diff(m.adjoint() * m, ComplexMatrix::identity(m.rows()));
}

class Unitary {
 public:
  explicit Unitary(ComplexMatrix m) : matrix_{std::move(m)} {
    if (!matrix_.is_square()) throw ContractError("unitary must be square");
    const double dev = unitarity_deviation(matrix_);
    if (dev > tol::kConstruction) {
      throw ContractError("matrix is not unitary: max |U^dagger U - I| = " + std::to_string(dev));
    }
  }

  static Unitary identity(std::size_t d) { return Unitary(ComplexMatrix::identity(d)); }

  [[nodiscard]] const ComplexMatrix& matrix() const noexcept { return matrix_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return matrix_.rows(); }
  [[nodiscard]] int num_qubits() const { return log2_exact(dimension()); }
  const Complex& operator()(std::size_t r, std::size_t c) const { return matrix_(r, c); }

  [[nodiscard]] Unitary adjoint() const { return Unitary(matrix_.adjoint()); }

  /// U^exponent by repeated squaring.
  [[nodiscard]] Unitary power(std::uint64_t exponent) const {
    ComplexMatrix result = ComplexMatrix::identity(dimension());
    ComplexMatrix base = matrix_;
    while (exponent > 0) {
      if (exponent & 1U) result = result * base;
      exponent >>= 1U;
      if (exponent > 0) base = base * base;
    }
    return Unitary(std::move(result));
  }

  friend Unitary operator*(const Unitary& a, const Unitary& b) { return Unitary(a.matrix_ * b.matrix_); }

 private:
  ComplexMatrix matrix_;
};

// ---------------------------------------------------------------------------
// StateVector

class StateVector {
 public:
  /// Validates length (power of two) and normalization.
  explicit StateVector(std::vector<Complex> amplitudes) : amplitudes_{std::move(amplitudes)} {
    num_qubits_ = log2_exact(amplitudes_.size());
    check_capacity(amplitudes_.size());
    double norm2 = 0.0;
    for (const auto& z : amplitudes_) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw ContractError("state amplitude is not finite");
      norm2 += std::norm(z);
    }
    if (std::abs(norm2 - 1.0) > tol::kConstruction) {
      throw ContractError("state is not normalized: sum |a|^2 = " + std::to_string(norm2));
    }
  }

  StateVector(std::initializer_list<Complex> amplitudes) : StateVector(std::vector<Complex>(amplitudes)) {}

  /// Rescales to unit norm; zero vectors are a contract error.
  static StateVector normalized(std::vector<Complex> amplitudes) {
    double norm2 = 0.0;
    for (const auto& z : amplitudes) norm2 += std::norm(z);
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw ContractError("cannot normalize a zero or non-finite vector");
    const double s = 1.0 / std::sqrt(norm2);
    for (auto& z : amplitudes) z *= s;
    return StateVector(std::move(amplitudes));
  }

  static StateVector basis(int num_qubits, std::size_t index) {
    if (num_qubits < 0) throw ContractError("negative qubit count");
    const std::size_t dim = std::size_t{1} << num_qubits;
    if (index >= dim) throw ContractError("basis index out of range");
    check_capacity(dim);
    std::vector<Complex> a(dim);
    a[index] = 1.0;
    return StateVector(std::move(a));
  }

  [[nodiscard]] int num_qubits() const noexcept { return num_qubits_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return amplitudes_.size(); }
  [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }

  [[nodiscard]] double norm() const {
    double n2 = 0.0;
    for (const auto& z : amplitudes_) n2 += std::norm(z);
    return std::sqrt(n2);
  }

 private:
  int num_qubits_ = 0;
  std::vector<Complex> amplitudes_;
};

/// <a|b>
inline Complex inner(const StateVector& a, const StateVector& b) {
  if (a.dimension() != b.dimension()) throw ContractError("inner product dimension mismatch");
  Complex s{};
  for (std::size_t i = 0; i < a.dimension(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

/// |<a|b>|; equals 1 iff the states agree up to global phase.
inline double overlap(const StateVector& a, const StateVector& b) { return std::abs(inner(a, b)); }

// ---------------------------------------------------------------------------
// DensityMatrix

class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix m) : matrix_{std::move(m)} {
    if (!matrix_.is_square()) throw ContractError("density matrix must be square");
    if (max_abs_diff(matrix_, matrix_.adjoint()) > tol::kConstruction) throw ContractError("density matrix is not Hermitian");
    if (std::abs(matrix_.trace() - 1.0) > tol::kConstruction) throw ContractError("density matrix trace is not 1");
    if (min_eigenvalue() < -tol::kEigenFloor) throw ContractError("density matrix has a negative eigenvalue");
  }

  [[nodiscard]] std::size_t dimension() const noexcept { return matrix_.rows(); }
  [[nodiscard]] const ComplexMatrix& matrix() const noexcept { return matrix_; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return matrix_(r, c); }

  /// Ascending eigenvalues.
  [[nodiscard]] std::vector<double> eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(to_eigen(matrix_), Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
  }

  [[nodiscard]] double purity() const {
    return (matrix_ * matrix_).trace().real();
  }

 private:
  [[nodiscard]] double min_eigenvalue() const {
    const auto ev = eigenvalues();
    return ev.empty() ? 0.0 : ev.front();
  }

  ComplexMatrix matrix_;
};

inline DensityMatrix density_from_state(const StateVector& s) {
  const std::size_t d = s.dimension();
  ComplexMatrix m(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = s[r] * std::conj(s[c]);
  // Exact Hermitian symmetry and unit trace; outer products drift in the last bit.
  for (std::size_t r = 0; r < d; ++r) m(r, r) = std::norm(s[r]);
  return DensityMatrix(std::move(m));
}

/// <target|rho|target>, clamped to [0, 1].
inline double fidelity(const DensityMatrix& rho, const StateVector& target) {
  if (rho.dimension() != target.dimension()) throw ContractError("fidelity dimension mismatch");
  Complex f{};
  for (std::size_t r = 0; r < target.dimension(); ++r)
    for (std::size_t c = 0; c < target.dimension(); ++c) f += std::conj(target[r]) * rho(r, c) * target[c];
  return std::clamp(f.real(), 0.0, 1.0);
}

/// op * rho * op^dagger, without re-validating physicality.
inline ComplexMatrix conjugate(const ComplexMatrix& op, const ComplexMatrix& rho) { return op * rho * op.adjoint(); }

// ---------------------------------------------------------------------------
// Kronecker products

inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
  check_capacity(a.rows() * b.rows() * a.cols() * b.cols());
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t ar = 0; ar < a.rows(); ++ar)
    for (std::size_t ac = 0; ac < a.cols(); ++ac)
      for (std::size_t br = 0; br < b.rows(); ++br)
        for (std::size_t bc = 0; bc < b.cols(); ++bc) out(ar * b.rows() + br, ac * b.cols() + bc) = a(ar, ac) * b(br, bc);
  return out;
}

inline Unitary tensor(const Unitary& a, const Unitary& b) { return Unitary(tensor(a.matrix(), b.matrix())); }

inline StateVector tensor(const StateVector& a, const StateVector& b) {
  check_capacity(a.dimension() * b.dimension());
  std::vector<Complex> out(a.dimension() * b.dimension());
  for (std::size_t i = 0; i < a.dimension(); ++i)
    for (std::size_t j = 0; j < b.dimension(); ++j) out[i * b.dimension() + j] = a[i] * b[j];
  return StateVector(std::move(out));
}

// ---------------------------------------------------------------------------
// Gate application

namespace detail {

inline std::size_t bit_of(int qubit, int num_qubits) { return std::size_t{1} << (num_qubits - 1 - qubit); }

inline void check_targets(std::span<const int> targets, int num_qubits) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= num_qubits) throw ContractError("target qubit index out of range");
    for (std::size_t j = 0; j < i; ++j)
      if (targets[i] == targets[j]) throw ContractError("target qubit indices must be distinct");
  }
}

// Calls fn(base, offsets) for every assignment of the non-target qubits; offsets[sub]
// is the index displacement of local basis state `sub` on the targets (targets[0] is
// the local MSB). Optional `fixed_mask` qubits must be set in `base`.
template <typename Fn>
void for_each_block(int num_qubits, std::span<const int> targets, std::size_t fixed_mask, Fn&& fn) {
  const std::size_t local = std::size_t{1} << targets.size();
  std::vector<std::size_t> offsets(local, 0);
  std::size_t target_mask = 0;
  for (std::size_t sub = 0; sub < local; ++sub)
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (sub & (std::size_t{1} << (targets.size() - 1 - t))) offsets[sub] |= bit_of(targets[t], num_qubits);
  for (int t : targets) target_mask |= bit_of(t, num_qubits);
  const std::size_t dim = std::size_t{1} << num_qubits;
  for (std::size_t base = 0; base < dim; ++base) {
    if ((base & target_mask) != 0) continue;
    if ((base & fixed_mask) != fixed_mask) continue;
    fn(base, std::span<const std::size_t>(offsets));
  }
}

inline std::vector<Complex> apply_raw(const ComplexMatrix& u, std::span<const Complex> amps, int num_qubits,
                                      std::span<const int> targets, std::size_t fixed_mask) {
  std::vector<Complex> out(amps.begin(), amps.end());
  std::vector<Complex> local(u.rows());
  for_each_block(num_qubits, targets, fixed_mask, [&](std::size_t base, std::span<const std::size_t> offsets) {
    for (std::size_t r = 0; r < u.rows(); ++r) {
      Complex acc{};
      for (std::size_t c = 0; c < u.cols(); ++c) acc += u(r, c) * amps[base + offsets[c]];
      local[r] = acc;
    }
    for (std::size_t r = 0; r < u.rows(); ++r) out[base + offsets[r]] = local[r];
  });
  return out;
}

}  // namespace detail

/// Applies u to `targets` (targets[0] is u's most significant qubit), identity elsewhere.
inline StateVector apply(const Unitary& u, const StateVector& s, std::span<const int> targets) {
  detail::check_targets(targets, s.num_qubits());
  if (u.dimension() != (std::size_t{1} << targets.size())) throw ContractError("unitary dimension does not match target count");
  return StateVector(detail::apply_raw(u.matrix(), s.amplitudes(), s.num_qubits(), targets, 0));
}

inline StateVector apply(const Unitary& u, const StateVector& s, std::initializer_list<int> targets) {
  return apply(u, s, std::span<const int>(targets.begin(), targets.size()));
}

/// Applies u to `targets` on the branch where `control` is |1>.
inline StateVector apply_controlled(const Unitary& u, const StateVector& s, int control, std::span<const int> targets) {
  detail::check_targets(targets, s.num_qubits());
  if (control < 0 || control >= s.num_qubits()) throw ContractError("control qubit index out of range");
  if (std::find(targets.begin(), targets.end(), control) != targets.end()) throw ContractError("control overlaps targets");
  if (u.dimension() != (std::size_t{1} << targets.size())) throw ContractError("unitary dimension does not match target count");
  return StateVector(
      detail::apply_raw(u.matrix(), s.amplitudes(), s.num_qubits(), targets, detail::bit_of(control, s.num_qubits())));
}

/// Full 2^n x 2^n operator of u embedded on `targets`.
inline ComplexMatrix embed(const Unitary& u, int num_qubits, std::span<const int> targets) {
  detail::check_targets(targets, num_qubits);
  if (u.dimension() != (std::size_t{1} << targets.size())) throw ContractError("unitary dimension does not match target count");
  const std::size_t dim = std::size_t{1} << num_qubits;
  check_capacity(dim * dim);
  ComplexMatrix out(dim, dim);
  detail::for_each_block(num_qubits, targets, 0, [&](std::size_t base, std::span<const std::size_t> offsets) {
    for (std::size_t r = 0; r < u.dimension(); ++r)
      for (std::size_t c = 0; c < u.dimension(); ++c) out(base + offsets[r], base + offsets[c]) = u(r, c);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Standard single-qubit gates and states

namespace gates {
inline Unitary identity() { return Unitary::identity(2); }
inline Unitary hadamard() {
  const double h = 1.0 / std::numbers::sqrt2;
  return Unitary(ComplexMatrix{{h, h}, {h, -h}});
}
inline Unitary pauli_x() { return Unitary(ComplexMatrix{{0.0, 1.0}, {1.0, 0.0}}); }
inline Unitary pauli_y() { return Unitary(ComplexMatrix{{0.0, -kI}, {kI, 0.0}}); }
inline Unitary pauli_z() { return Unitary(ComplexMatrix{{1.0, 0.0}, {0.0, -1.0}}); }
/// diag(1, e^{i angle}); the feedback rotation on the ancilla.
inline Unitary phase(double angle) { return Unitary(ComplexMatrix{{1.0, 0.0}, {0.0, std::polar(1.0, angle)}}); }
/// diag(1, e^{i 2 pi phi}).
inline Unitary phase_turns(double phi) { return phase(2.0 * std::numbers::pi * phi); }
}  // namespace gates

namespace states {
inline StateVector zero() { return StateVector::basis(1, 0); }
inline StateVector one() { return StateVector::basis(1, 1); }
inline StateVector plus() {
  const double h = 1.0 / std::numbers::sqrt2;
  return StateVector{h, h};
}
inline StateVector minus() {
  const double h = 1.0 / std::numbers::sqrt2;
  return StateVector{h, -h};
}
}  // namespace states

// ---------------------------------------------------------------------------
// Measurement

enum class Basis { computational, plus_minus };

struct MeasurementOutcome {
  int outcome_index = 0;
  double probability = 0.0;
  StateVector post_state;
};

/// Un-normalized amplitudes of the remaining qubits after projecting `qubit` onto
/// outcome 0/1 of `basis` (plus_minus: 0 = "+", 1 = "-").
inline std::vector<Complex> projected_amplitudes(const StateVector& s, int qubit, Basis basis, int outcome) {
  const int n = s.num_qubits();
  if (qubit < 0 || qubit >= n) throw ContractError("measured qubit index out of range");
  if (outcome != 0 && outcome != 1) throw ContractError("outcome must be 0 or 1");
  const std::size_t bit = detail::bit_of(qubit, n);
  const std::size_t low_mask = bit - 1;
  std::vector<Complex> out(s.dimension() / 2);
  const double h = 1.0 / std::numbers::sqrt2;
  for (std::size_t r = 0; r < out.size(); ++r) {
    const std::size_t i0 = ((r & ~low_mask) << 1) | (r & low_mask);
    const std::size_t i1 = i0 | bit;
    if (basis == Basis::computational) {
      out[r] = outcome == 0 ? s[i0] : s[i1];
    } else {
      out[r] = outcome == 0 ? h * (s[i0] + s[i1]) : h * (s[i0] - s[i1]);
    }
  }
  return out;
}

/// Born-rule probabilities of outcomes 0 and 1.
inline std::pair<double, double> outcome_probabilities(const StateVector& s, int qubit, Basis basis) {
  double p0 = 0.0;
  for (const auto& z : projected_amplitudes(s, qubit, basis, 0)) p0 += std::norm(z);
  double p1 = 0.0;
  for (const auto& z : projected_amplitudes(s, qubit, basis, 1)) p1 += std::norm(z);
  // Renormalize away drift so the pair sums to 1.
  const double total = p0 + p1;
  return {p0 / total, p1 / total};
}

struct Conditioned {
  std::optional<StateVector> remaining;  ///< empty when the outcome has zero probability
  double probability = 0.0;
};

/// Projects `qubit` onto an outcome and removes it from the register.
inline Conditioned condition_on(const StateVector& s, int qubit, Basis basis, int outcome) {
  auto amps = projected_amplitudes(s, qubit, basis, outcome);
  double p = 0.0;
  for (const auto& z : amps) p += std::norm(z);
  if (p <= 1e-20) return {std::nullopt, 0.0};
  return {StateVector::normalized(std::move(amps)), p};
}

inline MeasurementOutcome measure(const StateVector& s, int qubit, Basis basis, Rng& rng) {
  const auto [p0, p1] = outcome_probabilities(s, qubit, basis);
  const int outcome = rng.uniform() < p0 ? 0 : 1;
  const double p = outcome == 0 ? p0 : p1;
  const auto reduced = StateVector::normalized(projected_amplitudes(s, qubit, basis, outcome));

  const int n = s.num_qubits();
  const std::size_t bit = detail::bit_of(qubit, n);
  const std::size_t low_mask = bit - 1;
  const double h = 1.0 / std::numbers::sqrt2;
  Complex b0 = outcome == 0 ? 1.0 : 0.0;
  Complex b1 = outcome == 0 ? 0.0 : 1.0;
  if (basis == Basis::plus_minus) {
    b0 = h;
    b1 = outcome == 0 ? h : -h;
  }
  std::vector<Complex> post(s.dimension());
  for (std::size_t r = 0; r < reduced.dimension(); ++r) {
    const std::size_t i0 = ((r & ~low_mask) << 1) | (r & low_mask);
    post[i0] = reduced[r] * b0;
    post[i0 | bit] = reduced[r] * b1;
  }
  return {outcome, p, StateVector::normalized(std::move(post))};
}

}  // namespace ipea
