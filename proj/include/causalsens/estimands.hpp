#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "diagnostics.hpp"
#include "math.hpp"
#include "rng.hpp"

namespace causalsens {

/// ATE under a logistic outcome model with a single binary covariate,
/// standardized over Ber(theta):
///   sum_l [expit(e0 + e1 l + e2) - expit(e0 + e1 l)] theta^l (1-theta)^(1-l).
/// eta = (intercept, covariate, treatment).
inline double gformula_binary_l(const std::array<double, 3>& eta, double theta) {
  double out = 0.0;
  for (int l = 0; l < 2; ++l) {
    const double base = eta[0] + eta[1] * l;
    const double mass = l == 1 ? theta : 1.0 - theta;
    out += (expit(base + eta[2]) - expit(base)) * mass;
  }
  return out;
}

/// ATE with an additional standard-normal latent confounder entering the
/// outcome logit with loading xi1, integrated out by Gauss-Hermite
/// quadrature. Here eta = (intercept, treatment, covariate) -- note the
/// treatment coefficient comes second.
inline double gformula_with_u(const std::array<double, 3>& eta, double xi1, double theta,
                              const QuadratureRule& rule) {
  double out = 0.0;
  for (int l = 0; l < 2; ++l) {
    const double mass = l == 1 ? theta : 1.0 - theta;
    double integral = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double shift = eta[2] * l + xi1 * rule.nodes[j];
      integral += rule.weights[j] * (expit(eta[0] + eta[1] + shift) - expit(eta[0] + shift));
    }
    out += mass * integral;
  }
  return out;
}

/// Per-component parameters of the mixture regression model, one entry per
/// component. Outcome mean is eta0 + eta1*l + eta2*a, treatment logit is
/// gamma0 + gamma1*l, covariate marginal is N(theta0, phi^2).
struct TsbComponents {
  std::vector<double> eta0, eta1, eta2;
  std::vector<double> gamma0, gamma1;
  std::vector<double> theta0, phi;

  std::size_t components() const { return eta0.size(); }

  bool consistent() const {
    const std::size_t k = eta0.size();
    return eta1.size() == k && eta2.size() == k && gamma0.size() == k && gamma1.size() == k &&
           theta0.size() == k && phi.size() == k;
  }
};

/// Mixture-model ATE by Monte Carlo over the covariate marginal: draw l from
/// the mixture, then average E[Y|a=1,l] - E[Y|a=0,l] where the conditional
/// mean reweights components by nu_k Ber(a | expit(gamma)) N(l | theta0, phi^2).
inline double gformula_tsb(const TsbComponents& c, std::span<const double> nu, int n_mc,
                           Rng& rng) {
  const std::size_t kk = c.components();
  if (kk == 0 || !c.consistent())
    throw std::invalid_argument("gformula_tsb: component vectors disagree");
  if (nu.size() != kk) throw std::invalid_argument("gformula_tsb: weight count mismatch");
  if (n_mc < 1) throw std::invalid_argument("gformula_tsb: n_mc must be >= 1");

  std::vector<double> lp1(kk), lp0(kk);
  double acc = 0.0;
  for (int j = 0; j < n_mc; ++j) {
    const std::size_t comp = rng.categorical(nu);
    const double l = rng.normal(c.theta0[comp], c.phi[comp]);
    for (std::size_t k = 0; k < kk; ++k) {
      const double lp = std::log(nu[k]) + normal_lpdf(l, c.theta0[k], c.phi[k]);
      const double logit_a = c.gamma0[k] + c.gamma1[k] * l;
      lp1[k] = lp + log_expit(logit_a);
      lp0[k] = lp + log_expit(-logit_a);
    }
    const double z1 = log_sum_exp(lp1);
    const double z0 = log_sum_exp(lp0);
    // grouped so the a=1/a=0 covariate terms cancel rather than subtract
    double diff = 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
      const double w1 = std::exp(lp1[k] - z1);
      const double w0 = std::exp(lp0[k] - z0);
      diff += (w1 - w0) * (c.eta0[k] + c.eta1[k] * l) + w1 * c.eta2[k];
    }
    acc += diff;
  }
  return acc / static_cast<double>(n_mc);
}

/// Linear interpolation of order statistics (R type 7). `sorted` must be
/// ascending and nonempty.
inline double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::domain_error("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile: level outside [0,1]");
  const std::size_t n = sorted.size();
  const double pos = p * static_cast<double>(n - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i >= n - 1) return sorted[n - 1];
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

/// Posterior summary of one tracked quantity. mcse/ess/rhat are empty when
/// the draws carry no usable variation (e.g. a constant).
struct EstimandSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
  std::optional<double> mcse;  // sd / sqrt(ess)
  std::optional<double> ess;
  std::optional<double> rhat;
};

/// Summarize per-chain post-warmup draws of a scalar quantity.
inline EstimandSummary summarize(const std::vector<std::vector<double>>& chains) {
  std::vector<double> merged;
  for (const auto& ch : chains) merged.insert(merged.end(), ch.begin(), ch.end());
  if (merged.empty()) throw std::domain_error("summarize: no draws");

  EstimandSummary s;
  for (double v : merged) s.mean += v;
  s.mean /= static_cast<double>(merged.size());
  if (merged.size() > 1) {
    double ss = 0.0;
    for (double v : merged) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(merged.size() - 1));
  }
  std::sort(merged.begin(), merged.end());
  s.q025 = quantile_type7(merged, 0.025);
  s.q500 = quantile_type7(merged, 0.5);
  s.q975 = quantile_type7(merged, 0.975);
  s.ess = effective_sample_size(chains);
  s.rhat = split_rhat(chains);
  if (s.ess) s.mcse = s.sd / std::sqrt(*s.ess);
  return s;
}

}  // namespace causalsens
