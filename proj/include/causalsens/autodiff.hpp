#pragma once

// Reverse-mode automatic differentiation on a flat tape.
//
// A Var is a cheap handle (tape pointer, node id, cached value). Arithmetic
// on Vars appends nodes whose local partial derivatives are computed at
// forward time, so the backward sweep is a single pass of multiply-adds
// over contiguous arrays. Tapes are rebuilt per evaluation and recycle
// their storage, so a gradient costs one forward pass plus one reverse
// pass with no allocation in the steady state.
//
// The math.hpp density kernels are templates; including this header makes
// them differentiable because the Var overloads of exp/log/etc. are found
// by argument-dependent lookup.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalsens/math.hpp"

namespace causalsens::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  double val = 0.0;
};

inline double value_of(const Var& v) { return v.val; }

class Tape {
 public:
  /// Register an independent variable. Inputs must be created before any
  /// dependent node so that backward() can read their adjoints off the
  /// front of the tape.
  Var input(double value) {
    if (n_nodes() != n_inputs_) {
      throw std::logic_error("Tape::input: inputs must precede dependent nodes");
    }
    ++n_inputs_;
    return push(value, {}, {});
  }

  /// Drop all nodes but keep capacity for the next evaluation.
  void clear() {
    val_.clear();
    head_.resize(1);
    parent_.clear();
    partial_.clear();
    n_inputs_ = 0;
  }

  int n_nodes() const { return static_cast<int>(val_.size()); }
  int n_inputs() const { return n_inputs_; }
  double value(int id) const { return val_[static_cast<std::size_t>(id)]; }

  Var push(double value, std::initializer_list<int> parents, std::initializer_list<double> partials) {
    return push_impl(value, std::span<const int>(parents.begin(), parents.size()),
                     std::span<const double>(partials.begin(), partials.size()));
  }

  Var push_n(double value, std::span<const int> parents, std::span<const double> partials) {
    return push_impl(value, parents, partials);
  }

  /// Propagate adjoints from `root` back to the inputs; grad_out receives
  /// d root / d input_i for the first grad_out.size() inputs.
  void backward(const Var& root, std::span<double> grad_out) {
    if (root.tape != this) throw std::logic_error("Tape::backward: root from another tape");
    adjoint_.assign(val_.size(), 0.0);
    adjoint_[static_cast<std::size_t>(root.id)] = 1.0;
    for (int i = root.id; i >= n_inputs_; --i) {
      const double a = adjoint_[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const int lo = head_[static_cast<std::size_t>(i)];
      const int hi = head_[static_cast<std::size_t>(i) + 1];
      for (int j = lo; j < hi; ++j) {
        adjoint_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(j)])] +=
            a * partial_[static_cast<std::size_t>(j)];
      }
    }
    for (std::size_t k = 0; k < grad_out.size(); ++k) {
      grad_out[k] = adjoint_[k];
    }
  }

  // Test hook: parents and local partials of one node.
  struct NodeView {
    std::span<const int> parents;
    std::span<const double> partials;
  };
  NodeView node(int id) const {
    const int lo = head_[static_cast<std::size_t>(id)];
    const int hi = head_[static_cast<std::size_t>(id) + 1];
    return {std::span<const int>(parent_).subspan(lo, hi - lo),
            std::span<const double>(partial_).subspan(lo, hi - lo)};
  }

 private:
  Var push_impl(double value, std::span<const int> parents, std::span<const double> partials) {
    const int id = n_nodes();
    val_.push_back(value);
    parent_.insert(parent_.end(), parents.begin(), parents.end());
    partial_.insert(partial_.end(), partials.begin(), partials.end());
    if (head_.empty()) head_.push_back(0);
    head_.push_back(static_cast<int>(parent_.size()));
    return Var{this, id, value};
  }

  std::vector<double> val_;
  std::vector<int> head_;  // head_[i]..head_[i+1] indexes parent_/partial_ of node i
  std::vector<int> parent_;
  std::vector<double> partial_;
  std::vector<double> adjoint_;
  int n_inputs_ = 0;
};

[[noreturn]] inline void throw_domain(const char* op, const Var& v, const char* what) {
  throw std::domain_error(std::string(op) + ": " + what + " at tape node " + std::to_string(v.id) +
                          " (value " + std::to_string(v.val) + ")");
}

// ---- arithmetic ------------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  return a.tape->push(a.val + b.val, {a.id, b.id}, {1.0, 1.0});
}
inline Var operator+(const Var& a, double b) { return a.tape->push(a.val + b, {a.id}, {1.0}); }
inline Var operator+(double a, const Var& b) { return b + a; }

inline Var operator-(const Var& a, const Var& b) {
  return a.tape->push(a.val - b.val, {a.id, b.id}, {1.0, -1.0});
}
inline Var operator-(const Var& a, double b) { return a.tape->push(a.val - b, {a.id}, {1.0}); }
inline Var operator-(double a, const Var& b) { return b.tape->push(a - b.val, {b.id}, {-1.0}); }
inline Var operator-(const Var& a) { return a.tape->push(-a.val, {a.id}, {-1.0}); }

inline Var operator*(const Var& a, const Var& b) {
  return a.tape->push(a.val * b.val, {a.id, b.id}, {b.val, a.val});
}
inline Var operator*(const Var& a, double b) { return a.tape->push(a.val * b, {a.id}, {b}); }
inline Var operator*(double a, const Var& b) { return b * a; }

inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.val;
  return a.tape->push(a.val * inv, {a.id, b.id}, {inv, -a.val * inv * inv});
}
inline Var operator/(const Var& a, double b) { return a * (1.0 / b); }
inline Var operator/(double a, const Var& b) {
  const double inv = 1.0 / b.val;
  return b.tape->push(a * inv, {b.id}, {-a * inv * inv});
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator+=(Var& a, double b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator-=(Var& a, double b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator*=(Var& a, double b) { return a = a * b; }

// ---- elementary functions --------------------------------------------------

inline Var exp(const Var& x) {
  const double e = std::exp(x.val);
  return x.tape->push(e, {x.id}, {e});
}

inline Var log(const Var& x) {
  if (!(x.val > 0.0)) throw_domain("log", x, "non-positive argument");
  return x.tape->push(std::log(x.val), {x.id}, {1.0 / x.val});
}

inline Var log1p(const Var& x) {
  if (!(x.val > -1.0)) throw_domain("log1p", x, "argument <= -1");
  return x.tape->push(std::log1p(x.val), {x.id}, {1.0 / (1.0 + x.val)});
}

inline Var sqrt(const Var& x) {
  if (!(x.val > 0.0)) throw_domain("sqrt", x, "non-positive argument");
  const double r = std::sqrt(x.val);
  return x.tape->push(r, {x.id}, {0.5 / r});
}

inline Var square(const Var& x) { return x.tape->push(x.val * x.val, {x.id}, {2.0 * x.val}); }

inline Var expit(const Var& x) {
  const double p = causalsens::expit(x.val);
  return x.tape->push(p, {x.id}, {p * (1.0 - p)});
}

/// log(expit(x)): composed from primitives, branch chosen by value for
/// stability at large |x|.
inline Var log_expit(const Var& x) {
  if (x.val >= 0.0) {
    return -log1p(exp(-x));
  }
  return x - log1p(exp(x));
}

/// n-ary log-sum-exp node with softmax local partials.
inline Var log_sum_exp(std::span<const Var> xs) {
  if (xs.empty()) throw std::domain_error("log_sum_exp: empty input");
  Tape* tape = xs[0].tape;
  double m = -std::numeric_limits<double>::infinity();
  for (const Var& x : xs) {
    if (x.val > m) m = x.val;
  }
  thread_local std::vector<int> parents;
  thread_local std::vector<double> partials;
  parents.clear();
  partials.clear();
  if (!std::isfinite(m)) {
    // all -inf: value -inf, gradient zero
    for (const Var& x : xs) {
      parents.push_back(x.id);
      partials.push_back(0.0);
    }
    return tape->push_n(m, parents, partials);
  }
  double s = 0.0;
  for (const Var& x : xs) {
    const double e = std::exp(x.val - m);
    s += e;
    parents.push_back(x.id);
    partials.push_back(e);
  }
  for (double& p : partials) p /= s;
  return tape->push_n(m + std::log(s), parents, partials);
}

inline Var log_sum_exp(const Var& a, const Var& b) {
  const Var v[2] = {a, b};
  return log_sum_exp(std::span<const Var>(v, 2));
}

// ---- gradient driver -------------------------------------------------------

/// Evaluate f at `at` and return (value, gradient). F maps
/// std::span<const Var> -> Var on a fresh tape.
template <class F>
std::pair<double, std::vector<double>> grad(F&& f, std::span<const double> at) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(at.size());
  for (double x : at) vars.push_back(tape.input(x));
  const Var out = f(std::span<const Var>(vars.data(), vars.size()));
  std::vector<double> g(at.size());
  tape.backward(out, g);
  return {out.val, std::move(g)};
}

}  // namespace causalsens::ad
