#pragma once

// Scalar numerical primitives shared by all models: stable special
// functions, log-density kernels, and Gauss-Hermite quadrature for
// expectations against the standard normal density.
//
// Density kernels are function templates so the same definition serves
// plain doubles and reverse-mode autodiff variables (see autodiff.hpp);
// unqualified calls to log/exp/log1p resolve via ADL.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace causalsens {

inline constexpr double k_log_two_pi = 1.8378770664093454835606594728112353;

inline double value_of(double x) { return x; }

inline double square(double x) { return x * x; }

/// Logistic function 1/(1+exp(-x)), saturation-safe at |x| up to ~745.
inline double expit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(expit(x)) without intermediate underflow.
inline double log_expit(double x) {
  if (x >= 0.0) {
    return -std::log1p(std::exp(-x));
  }
  return x - std::log1p(std::exp(x));
}

/// log sum_i exp(v_i), shift-invariant; tolerates -inf entries.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) {
    throw std::domain_error("log_sum_exp: empty input");
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (v > m) m = v;
  }
  if (!std::isfinite(m)) {
    return m;  // all -inf (or +inf dominates)
  }
  double s = 0.0;
  for (double v : values) {
    s += std::exp(v - m);
  }
  return m + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  const double v[2] = {a, b};
  return log_sum_exp(std::span<const double>(v, 2));
}

// ---- log-density kernels -------------------------------------------------
//
// Each kernel returns the exact log density/mass including normalizing
// constants and rejects out-of-domain parameters with std::domain_error.
// Distribution parameters that are never sampled in any model are plain
// doubles; everything else is generic.

template <class TP>
auto bernoulli_lpmf(int y, const TP& p) {
  if (y != 0 && y != 1) {
    throw std::domain_error("bernoulli_lpmf: y must be 0 or 1, got " + std::to_string(y));
  }
  const double pv = value_of(p);
  if (!(pv > 0.0) || !(pv < 1.0)) {
    throw std::domain_error("bernoulli_lpmf: p must lie in (0,1), got " + std::to_string(pv));
  }
  using std::log;
  using std::log1p;
  return y == 1 ? log(p) : log1p(-p);
}

/// Bernoulli log-mass with the success probability given on the logit
/// scale; stable for arbitrarily large |eta|.
template <class TE>
auto bernoulli_logit_lpmf(int y, const TE& eta) {
  if (y != 0 && y != 1) {
    throw std::domain_error("bernoulli_logit_lpmf: y must be 0 or 1");
  }
  return y == 1 ? log_expit(eta) : log_expit(-eta);
}

template <class TX, class TM, class TS>
auto normal_lpdf(const TX& x, const TM& mu, const TS& sigma) {
  const double sv = value_of(sigma);
  if (!(sv > 0.0)) {
    throw std::domain_error("normal_lpdf: sigma must be positive, got " + std::to_string(sv));
  }
  using std::log;
  auto z = (x - mu) / sigma;
  return -0.5 * k_log_two_pi - log(sigma) - 0.5 * square(z);
}

template <class TX>
auto beta_lpdf(const TX& x, double a, double b) {
  const double xv = value_of(x);
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::domain_error("beta_lpdf: shape parameters must be positive");
  }
  if (!(xv > 0.0) || !(xv < 1.0)) {
    throw std::domain_error("beta_lpdf: x must lie in (0,1), got " + std::to_string(xv));
  }
  using std::log;
  using std::log1p;
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return (a - 1.0) * log(x) + (b - 1.0) * log1p(-x) - lbeta;
}

template <class TX>
auto gamma_lpdf(const TX& x, double shape, double rate) {
  const double xv = value_of(x);
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("gamma_lpdf: shape and rate must be positive");
  }
  if (!(xv > 0.0)) {
    throw std::domain_error("gamma_lpdf: x must be positive, got " + std::to_string(xv));
  }
  using std::log;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * log(x) - rate * x;
}

template <class TX>
auto half_normal_lpdf(const TX& x, double scale) {
  const double xv = value_of(x);
  if (!(scale > 0.0)) {
    throw std::domain_error("half_normal_lpdf: scale must be positive");
  }
  if (xv < 0.0) {
    throw std::domain_error("half_normal_lpdf: x must be nonnegative, got " + std::to_string(xv));
  }
  using std::log;
  // density 2 * N(x; 0, scale^2) on [0, inf)
  const double c = std::numbers::ln2 - 0.5 * k_log_two_pi - std::log(scale);
  return c - 0.5 * square(x / scale);
}

// ---- quadrature ------------------------------------------------------------

/// Nodes and weights for E[f(U)] ~= sum_i w_i f(x_i), U ~ N(0,1).
struct QuadratureRule {
  std::vector<double> nodes;    // strictly increasing
  std::vector<double> weights;  // positive, sum to 1
};

/// Gauss-Hermite rule rescaled to the standard normal measure.
/// Exact for polynomials of degree <= 2*order - 1.
inline QuadratureRule gauss_hermite_standard_normal(int order) {
  if (order < 1 || order > 64) {
    throw std::domain_error("gauss_hermite_standard_normal: order must lie in [1,64], got " +
                            std::to_string(order));
  }
  const int n = order;
  // Roots of the physicists' Hermite polynomial H_n via Newton iteration on
  // the orthonormal recurrence, with asymptotic initial guesses; largest
  // root first, symmetric pairs mirrored.
  constexpr double pim4 = 0.7511255444649425;  // pi^{-1/4}
  constexpr double eps = 1e-14;
  constexpr int max_iter = 40;
  std::vector<double> z_root(n), w_phys(n);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * z_root[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * z_root[1];
    } else {
      z = 2.0 * z - z_root[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z_prev = z;
      z = z_prev - p1 / pp;
      if (std::abs(z - z_prev) <= eps) break;
    }
    if (std::abs(z) < 1e-12) z = 0.0;  // center root of odd-order rules
    z_root[i] = z;
    w_phys[i] = 2.0 / (pp * pp);
  }
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // ascending nodes: -z_root[0], ..., -z_root[m-1], (mirror)
  for (int i = 0; i < m; ++i) {
    rule.nodes[i] = -std::numbers::sqrt2 * z_root[i];
    rule.weights[i] = w_phys[i];
    rule.nodes[n - 1 - i] = std::numbers::sqrt2 * z_root[i];
    rule.weights[n - 1 - i] = w_phys[i];
  }
  double wsum = 0.0;
  for (double w : rule.weights) wsum += w;  // = sqrt(pi) up to roundoff
  for (double& w : rule.weights) w /= wsum;
  return rule;
}

}  // namespace causalsens
