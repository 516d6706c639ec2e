#pragma once

// Convergence diagnostics over per-chain draw sequences: split-R-hat and
// effective sample size. Both split each chain in half (so within-chain
// drift registers as between-chain disagreement) and both return an empty
// optional when the statistic is undefined, e.g. for a quantity with zero
// sampling variance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace causalsens {

namespace detail {

// Halve every chain; odd lengths drop the middle draw.
inline std::vector<std::vector<double>> split_chains(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  out.reserve(2 * chains.size());
  const std::size_t len = chains.empty() ? 0 : chains[0].size();
  for (const auto& c : chains) {
    if (c.size() != len) throw std::invalid_argument("diagnostics: chains must have equal length");
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.end() - half, c.end());
  }
  return out;
}

struct ChainMoments {
  std::vector<double> mean;
  std::vector<double> var;  // n-1 denominator
  double w = 0.0;           // mean within-chain variance
  double var_between = 0.0; // sample variance of chain means
  double var_plus = 0.0;    // marginal posterior variance estimate
  std::size_t m = 0, n = 0;
  bool ok = false;
};

inline ChainMoments chain_moments(const std::vector<std::vector<double>>& chains) {
  ChainMoments mom;
  mom.m = chains.size();
  mom.n = chains.empty() ? 0 : chains[0].size();
  if (mom.m < 2 || mom.n < 2) return mom;
  mom.mean.resize(mom.m);
  mom.var.resize(mom.m);
  for (std::size_t c = 0; c < mom.m; ++c) {
    double s = 0.0;
    for (double x : chains[c]) {
      if (!std::isfinite(x)) return mom;
      s += x;
    }
    mom.mean[c] = s / static_cast<double>(mom.n);
    double ss = 0.0;
    for (double x : chains[c]) ss += (x - mom.mean[c]) * (x - mom.mean[c]);
    mom.var[c] = ss / static_cast<double>(mom.n - 1);
    mom.w += mom.var[c];
  }
  mom.w /= static_cast<double>(mom.m);
  double grand = 0.0;
  for (double mu : mom.mean) grand += mu;
  grand /= static_cast<double>(mom.m);
  for (double mu : mom.mean) mom.var_between += (mu - grand) * (mu - grand);
  mom.var_between /= static_cast<double>(mom.m - 1);
  mom.var_plus = mom.w * static_cast<double>(mom.n - 1) / static_cast<double>(mom.n) + mom.var_between;
  mom.ok = true;
  return mom;
}

}  // namespace detail

/// Split-R-hat (potential scale reduction on half-chains). Values near 1
/// indicate mixing; empty when the draws carry no variance.
inline std::optional<double> split_rhat(const std::vector<std::vector<double>>& chains) {
  const auto halves = detail::split_chains(chains);
  const auto mom = detail::chain_moments(halves);
  if (!mom.ok || !(mom.w > 0.0) || !std::isfinite(mom.w)) return std::nullopt;
  return std::sqrt(mom.var_plus / mom.w);
}

/// Effective sample size from split chains with Geyer's initial positive
/// sequence on paired autocorrelations, capped at 1.5x the total draw
/// count (antithetic samplers can exceed the nominal count).
inline std::optional<double> effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const auto halves = detail::split_chains(chains);
  const auto mom = detail::chain_moments(halves);
  if (!mom.ok || !(mom.w > 0.0) || !std::isfinite(mom.w) || !(mom.var_plus > 0.0)) {
    return std::nullopt;
  }
  const std::size_t m = mom.m, n = mom.n;
  // demeaned chains for autocovariance
  std::vector<std::vector<double>> d(halves);
  for (std::size_t c = 0; c < m; ++c) {
    for (double& x : d[c]) x -= mom.mean[c];
  }
  auto mean_acov = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += d[c][i] * d[c][i + t];
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };
  // rho_hat(t) pooled across chains; rho_hat(0) = 1 by construction
  auto rho_hat = [&](std::size_t t) { return 1.0 - (mom.w - mean_acov(t)) / mom.var_plus; };

  // Geyer pairing: P_0 = rho_0 + rho_1, P_k = rho_{2k} + rho_{2k+1};
  // retain the initial positive sequence, forced non-increasing, and set
  // tau = -1 + 2 * sum(P_k) = 1 + 2 * sum_{t>=1} rho_t.
  double pair_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    const double even = t == 0 ? 1.0 : rho_hat(t);
    const double odd = rho_hat(t + 1);
    double pair = even + odd;
    if (!(pair > 0.0) || !std::isfinite(pair)) break;  // initial positive sequence ends
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    pair_sum += pair;
  }
  const double total = static_cast<double>(m * n);
  // flooring tau at 2/3 caps the estimate at 1.5x the total draw count
  // (strongly antithetic sequences can push the raw estimate past it)
  const double tau = std::max(-1.0 + 2.0 * pair_sum, 2.0 / 3.0);
  return total / tau;
}

}  // namespace causalsens
