#pragma once

// Bijections between a parameter's support and the unconstrained real line,
// with the log-Jacobian correction that keeps the target density invariant.
// The sampler works in unconstrained space throughout; models and outputs
// only ever see constrained values.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalsens/math.hpp"

namespace causalsens {

class Constraint {
 public:
  enum class Kind { Unbounded, LowerBound, UpperBound, Interval };

  static Constraint unbounded() { return Constraint(Kind::Unbounded, 0.0, 0.0); }
  static Constraint lower(double lo) { return Constraint(Kind::LowerBound, lo, 0.0); }
  static Constraint upper(double hi) { return Constraint(Kind::UpperBound, 0.0, hi); }
  static Constraint interval(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("Constraint::interval: requires lo < hi");
    return Constraint(Kind::Interval, lo, hi);
  }

  Kind kind() const { return kind_; }
  double lower_bound() const { return lo_; }
  double upper_bound() const { return hi_; }

  /// Map a constrained value to the real line; rejects values outside the
  /// support (boundary included, since the image must be finite).
  double unconstrain(double x) const {
    switch (kind_) {
      case Kind::Unbounded:
        return x;
      case Kind::LowerBound:
        if (!(x > lo_)) {
          throw std::domain_error("Constraint: value " + std::to_string(x) +
                                  " not above lower bound " + std::to_string(lo_));
        }
        return std::log(x - lo_);
      case Kind::UpperBound:
        if (!(x < hi_)) {
          throw std::domain_error("Constraint: value " + std::to_string(x) +
                                  " not below upper bound " + std::to_string(hi_));
        }
        return std::log(hi_ - x);
      case Kind::Interval:
        if (!(x > lo_) || !(x < hi_)) {
          throw std::domain_error("Constraint: value " + std::to_string(x) + " outside (" +
                                  std::to_string(lo_) + ", " + std::to_string(hi_) + ")");
        }
        return std::log(x - lo_) - std::log(hi_ - x);
    }
    throw std::logic_error("Constraint: bad kind");
  }

  /// Inverse map from the real line into the support.
  template <class T>
  T constrain(const T& u) const {
    using std::exp;
    switch (kind_) {
      case Kind::Unbounded:
        return u;
      case Kind::LowerBound:
        return lo_ + exp(u);
      case Kind::UpperBound:
        return hi_ - exp(u);
      case Kind::Interval:
        return lo_ + (hi_ - lo_) * expit(u);
    }
    throw std::logic_error("Constraint: bad kind");
  }

  /// log |d constrain(u) / du|, added to the log target so that densities
  /// transform correctly under the change of variables.
  template <class T>
  T log_jacobian(const T& u) const {
    switch (kind_) {
      case Kind::Unbounded:
        return u * 0.0;
      case Kind::LowerBound:
      case Kind::UpperBound:
        return u;
      case Kind::Interval:
        return std::log(hi_ - lo_) + log_expit(u) + log_expit(-u);
    }
    throw std::logic_error("Constraint: bad kind");
  }

 private:
  Constraint(Kind kind, double lo, double hi) : kind_(kind), lo_(lo), hi_(hi) {}

  Kind kind_;
  double lo_;
  double hi_;
};

struct UnconstrainResult {
  std::vector<double> u;
  double log_jacobian = 0.0;  // of the inverse map, evaluated at u
};

inline UnconstrainResult unconstrain_all(std::span<const double> x,
                                         std::span<const Constraint> constraints) {
  if (x.size() != constraints.size()) {
    throw std::invalid_argument("unconstrain_all: size mismatch");
  }
  UnconstrainResult out;
  out.u.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = constraints[i].unconstrain(x[i]);
    out.u.push_back(u);
    out.log_jacobian += constraints[i].log_jacobian(u);
  }
  return out;
}

}  // namespace causalsens
