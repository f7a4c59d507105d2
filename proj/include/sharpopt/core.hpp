// Dense parameter vectors, diagonal preconditioners and step-size schedules.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sharpopt {

/// Caller violated a precondition (dimension mismatch, bad argument range).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input lies outside the mathematical domain of a function (e.g. sigma <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A computation produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-dimension vector of finite doubles.
///
/// Every public operation that produces a ParamVector checks that the result
/// is finite and throws NumericError otherwise, so a diverging run surfaces
/// at the step that blew up instead of propagating NaNs.
class ParamVector {
 public:
  ParamVector() = default;

  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {
    require_nonempty();
    check_finite("ParamVector(n, fill)");
  }

  ParamVector(std::initializer_list<double> values) : values_(values) {
    require_nonempty();
    check_finite("ParamVector{...}");
  }

  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {
    require_nonempty();
    check_finite("ParamVector(vector)");
  }

  static ParamVector zeros(std::size_t n) { return ParamVector(n, 0.0); }

  static ParamVector unit(std::size_t n, std::size_t i) {
    ParamVector e(n, 0.0);
    e.values_.at(i) = 1.0;
    return e;
  }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double at(std::size_t i) const { return values_.at(i); }

  /// Writes one entry. The finiteness invariant is enforced here as well.
  void set(std::size_t i, double value) {
    if (!std::isfinite(value)) {
      throw NumericError("ParamVector::set: non-finite value at index " + std::to_string(i));
    }
    values_.at(i) = value;
  }

  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vec() const noexcept { return values_; }

  auto begin() const noexcept { return values_.cbegin(); }
  auto end() const noexcept { return values_.cend(); }

  ParamVector& operator+=(const ParamVector& other) {
    require_same_dim(other, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    check_finite("operator+=");
    return *this;
  }

  ParamVector& operator-=(const ParamVector& other) {
    require_same_dim(other, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    check_finite("operator-=");
    return *this;
  }

  ParamVector& operator*=(double s) {
    for (double& v : values_) v *= s;
    check_finite("operator*=");
    return *this;
  }

  /// this += s * x
  ParamVector& axpy(double s, const ParamVector& x) {
    require_same_dim(x, "axpy");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * x.values_[i];
    check_finite("axpy");
    return *this;
  }

  friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
  friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
  friend ParamVector operator*(double s, ParamVector a) { return a *= s; }
  friend ParamVector operator*(ParamVector a, double s) { return a *= s; }

  /// Elementwise product.
  friend ParamVector hadamard(const ParamVector& a, const ParamVector& b) {
    a.require_same_dim(b, "hadamard");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values_[i] * b.values_[i];
    return ParamVector(std::move(out));
  }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.values_ == b.values_;
  }

  void require_same_dim(const ParamVector& other, const char* where) const {
    if (other.size() != size()) {
      throw UsageError(std::string(where) + ": dimension mismatch (" + std::to_string(size()) +
                       " vs " + std::to_string(other.size()) + ")");
    }
  }

 private:
  void require_nonempty() const {
    if (values_.empty()) throw UsageError("ParamVector: dimension must be >= 1");
  }

  void check_finite(const char* where) const {
    for (double v : values_) {
      if (!std::isfinite(v)) throw NumericError(std::string(where) + ": non-finite entry");
    }
  }

  std::vector<double> values_;
};

inline double dot(const ParamVector& a, const ParamVector& b) {
  a.require_same_dim(b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Euclidean norm, sequential left-to-right accumulation.
inline double l2_norm(const ParamVector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double linf_norm(const ParamVector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Diagonal preconditioner B. The identity is a distinct state so that
/// solving against it returns the input unchanged, bit for bit.
class DiagPrecond {
 public:
  static DiagPrecond identity() { return DiagPrecond(); }

  static DiagPrecond diagonal(ParamVector diag) {
    for (double d : diag) {
      if (!(d > 0.0)) throw UsageError("DiagPrecond: diagonal entries must be > 0");
    }
    DiagPrecond b;
    b.diag_ = std::move(diag);
    return b;
  }

  bool is_identity() const noexcept { return !diag_.has_value(); }
  const ParamVector& diag() const { return diag_.value(); }

 private:
  DiagPrecond() = default;
  std::optional<ParamVector> diag_;
};

/// B^{-1} m
inline ParamVector precond_solve(const DiagPrecond& b, const ParamVector& m) {
  if (b.is_identity()) return m;
  const ParamVector& d = b.diag();
  d.require_same_dim(m, "precond_solve");
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] / d[i];
  return ParamVector(std::move(out));
}

/// B m
inline ParamVector precond_apply(const DiagPrecond& b, const ParamVector& m) {
  if (b.is_identity()) return m;
  return hadamard(b.diag(), m);
}

class Schedule {
 public:
  enum class Kind { Constant, InverseSqrt };

  Schedule() = default;
  Schedule(Kind kind, double base) : kind_(kind), base_(base) {
    if (!(base > 0.0) || !std::isfinite(base)) {
      throw UsageError("Schedule: base must be a positive finite real");
    }
  }

  static Schedule constant(double base) { return {Kind::Constant, base}; }
  static Schedule inverse_sqrt(double base) { return {Kind::InverseSqrt, base}; }

  Kind kind() const noexcept { return kind_; }
  double base() const noexcept { return base_; }

  /// Value at step t (1-based).
  double value_at(std::uint64_t t) const {
    if (t < 1) throw UsageError("Schedule::value_at: t must be >= 1");
    if (kind_ == Kind::Constant) return base_;
    return base_ / std::sqrt(static_cast<double>(t));
  }

 private:
  Kind kind_ = Kind::Constant;
  double base_ = 1.0;
};

}  // namespace sharpopt
