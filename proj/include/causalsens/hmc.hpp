#pragma once

// Adaptive Hamiltonian Monte Carlo over a ModelSpec.
//
// Scheme: work in unconstrained space (constraint transforms plus
// log-Jacobian), leapfrog integrator with a diagonal metric, and a
// Metropolis correction. Warmup adapts the step size by dual averaging
// toward a target acceptance rate under an identity metric; a diagonal
// mass matrix is then estimated from the second half of warmup and used,
// with the dual-averaged step size, for the sampling phase. The number of
// leapfrog steps is jittered uniformly on {1..L} with L = round(1/eps),
// clamped to the configured maximum.
//
// Chains are mutually independent with RNG streams derived from
// (seed, chain), so results are identical regardless of how chains are
// scheduled across threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "causalsens/autodiff.hpp"
#include "causalsens/constraints.hpp"
#include "causalsens/errors.hpp"
#include "causalsens/model_spec.hpp"
#include "causalsens/rng.hpp"

namespace causalsens {

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  int sampling = 1000;
  double target_accept = 0.8;
  int max_leapfrog = 1024;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = one per hardware thread

  void validate() const {
    if (chains < 1) throw ConfigError("sampler: chains must be >= 1");
    if (warmup < 1) throw ConfigError("sampler: warmup must be >= 1");
    if (sampling < 1) throw ConfigError("sampler: sampling iterations must be >= 1");
    if (!(target_accept > 0.0) || !(target_accept < 1.0)) {
      throw ConfigError("sampler: target-accept must lie in (0,1)");
    }
    if (max_leapfrog < 1) throw ConfigError("sampler: max-leapfrog must be >= 1");
    if (threads < 0) throw ConfigError("sampler: threads must be >= 0");
  }
};

/// Post-warmup draws on the constrained scale, including generated
/// quantities, plus per-chain sampler telemetry.
struct DrawsMatrix {
  std::vector<std::string> names;  // parameters first, then generated quantities
  int n_chains = 0;
  int n_iter = 0;   // retained draws per chain
  int warmup = 0;

  std::vector<std::vector<double>> draws;            // [chain][iter * n_q + q]
  std::vector<std::vector<std::uint8_t>> divergent;  // [chain][iter]
  std::vector<std::vector<double>> accept_stat;      // [chain][iter]
  std::vector<double> step_size;                     // adapted, per chain
  std::vector<int> leapfrog_nominal;                 // jitter upper bound, per chain

  std::size_t n_quantities() const { return names.size(); }

  double value(int chain, int iter, std::size_t q) const {
    return draws[static_cast<std::size_t>(chain)]
                [static_cast<std::size_t>(iter) * n_quantities() + q];
  }

  std::vector<double> merged(std::size_t q) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_chains) * static_cast<std::size_t>(n_iter));
    for (int c = 0; c < n_chains; ++c) {
      for (int i = 0; i < n_iter; ++i) out.push_back(value(c, i, q));
    }
    return out;
  }

  std::vector<std::vector<double>> by_chain(std::size_t q) const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n_chains));
    for (int c = 0; c < n_chains; ++c) {
      out[static_cast<std::size_t>(c)].reserve(static_cast<std::size_t>(n_iter));
      for (int i = 0; i < n_iter; ++i) out[static_cast<std::size_t>(c)].push_back(value(c, i, q));
    }
    return out;
  }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t q = 0; q < names.size(); ++q) {
      if (names[q] == name) return q;
    }
    return std::nullopt;
  }

  int total_divergences() const {
    int n = 0;
    for (const auto& c : divergent) {
      for (auto d : c) n += d;
    }
    return n;
  }
};

namespace detail {

// Unconstrained-space log target (model density plus transform Jacobian)
// with gradient via the autodiff tape. Numeric failures — domain errors
// from the density kernels or non-finite values — read as log density
// -inf, which the integrator treats as a divergence.
class TargetGrad {
 public:
  explicit TargetGrad(const ModelSpec& model) : model_(&model) {
    constraints_.reserve(model.params.size());
    for (const auto& p : model.params) constraints_.push_back(p.constraint);
    x_.resize(model.params.size());
    vars_.resize(model.params.size());
    xvars_.resize(model.params.size());
  }

  std::size_t dim() const { return constraints_.size(); }

  double operator()(std::span<const double> u, std::span<double> grad_out) {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    try {
      tape_.clear();
      for (std::size_t j = 0; j < u.size(); ++j) vars_[j] = tape_.input(u[j]);
      std::optional<ad::Var> log_jac;
      for (std::size_t j = 0; j < u.size(); ++j) {
        xvars_[j] = constraints_[j].constrain(vars_[j]);
        if (constraints_[j].kind() != Constraint::Kind::Unbounded) {
          const ad::Var lj = constraints_[j].log_jacobian(vars_[j]);
          log_jac = log_jac ? *log_jac + lj : lj;
        }
      }
      ad::Var lp = model_->log_target_ad(std::span<const ad::Var>(xvars_));
      if (log_jac) lp = lp + *log_jac;
      if (!std::isfinite(lp.val)) return ninf;
      tape_.backward(lp, grad_out);
      for (double g : grad_out) {
        if (!std::isfinite(g)) return ninf;
      }
      return lp.val;
    } catch (const std::domain_error&) {
      return ninf;
    }
  }

  /// Value without gradient (double path), same failure semantics.
  double value(std::span<const double> u) {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    try {
      double log_jac = 0.0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        x_[j] = constraints_[j].constrain(u[j]);
        if (constraints_[j].kind() != Constraint::Kind::Unbounded) {
          log_jac += constraints_[j].log_jacobian(u[j]);
        }
      }
      const double lp = model_->log_target(std::span<const double>(x_)) + log_jac;
      return std::isfinite(lp) ? lp : ninf;
    } catch (const std::domain_error&) {
      return ninf;
    }
  }

  void constrain_into(std::span<const double> u, std::span<double> x_out) const {
    for (std::size_t j = 0; j < u.size(); ++j) x_out[j] = constraints_[j].constrain(u[j]);
  }

 private:
  const ModelSpec* model_;
  std::vector<Constraint> constraints_;
  ad::Tape tape_;
  std::vector<double> x_;
  std::vector<ad::Var> vars_;
  std::vector<ad::Var> xvars_;
};

struct ChainResult {
  std::vector<double> draws;  // [iter * n_q + q], constrained + generated
  std::vector<std::uint8_t> divergent;
  std::vector<double> accept_stat;
  double step_size = 0.0;
  int leapfrog_nominal = 0;
  enum class Failure { None, Init, Config, Sampling };
  Failure failure = Failure::None;
  std::string error;
};

struct Transition {
  double alpha = 0.0;  // Metropolis acceptance statistic
  bool divergent = false;
};

class ChainRunner {
 public:
  ChainRunner(const ModelSpec& model, const SamplerConfig& cfg, int chain)
      : model_(&model),
        cfg_(&cfg),
        chain_(chain),
        target_(model),
        rng_(derive_seed(cfg.seed, 0x636861696eULL /*"chain"*/, static_cast<std::uint64_t>(chain))),
        dim_(model.params.size()) {
    u_.resize(dim_);
    grad_.resize(dim_);
    inv_mass_.assign(dim_, 1.0);
    p_.resize(dim_);
    q_new_.resize(dim_);
    grad_new_.resize(dim_);
  }

  ChainResult run() {
    ChainResult res;
    initialize();
    double eps = find_reasonable_epsilon();

    // dual averaging toward the target acceptance rate
    const double mu = std::log(10.0 * eps);
    const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    double h_bar = 0.0, log_eps_bar = 0.0;

    const int warmup = cfg_->warmup;
    const std::size_t metric_from = static_cast<std::size_t>(warmup / 2);
    std::vector<double> sum(dim_, 0.0), sumsq(dim_, 0.0);
    std::size_t n_metric = 0;

    for (int t = 1; t <= warmup; ++t) {
      const int l_max = nominal_leapfrog(eps, true);
      const int l = static_cast<int>(rng_.uniform_int(1, l_max));
      const Transition tr = transition(eps, l);
      const double t_d = static_cast<double>(t);
      h_bar = (1.0 - 1.0 / (t_d + t0)) * h_bar + (cfg_->target_accept - tr.alpha) / (t_d + t0);
      const double log_eps = mu - std::sqrt(t_d) / gamma * h_bar;
      const double w = std::pow(t_d, -kappa);
      log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
      eps = std::exp(log_eps);
      if (static_cast<std::size_t>(t) > metric_from) {
        for (std::size_t j = 0; j < dim_; ++j) {
          sum[j] += u_[j];
          sumsq[j] += u_[j] * u_[j];
        }
        ++n_metric;
      }
    }
    if (warmup > 0) eps = std::exp(log_eps_bar);
    if (n_metric >= 2) {
      // regularized diagonal variance estimate, shrunk toward unit scale
      const double n = static_cast<double>(n_metric);
      for (std::size_t j = 0; j < dim_; ++j) {
        const double mean = sum[j] / n;
        const double var = std::max(0.0, (sumsq[j] / n - mean * mean) * n / (n - 1.0));
        inv_mass_[j] = var * (n / (n + 5.0)) + 1e-3 * (5.0 / (n + 5.0));
      }
    }

    const int l_nominal = nominal_leapfrog(eps, false);
    res.step_size = eps;
    res.leapfrog_nominal = l_nominal;

    const std::size_t n_q = model_->params.size() + model_->generated_names.size();
    res.draws.resize(static_cast<std::size_t>(cfg_->sampling) * n_q);
    res.divergent.resize(static_cast<std::size_t>(cfg_->sampling));
    res.accept_stat.resize(static_cast<std::size_t>(cfg_->sampling));
    std::vector<double> x(dim_);
    std::vector<double> gq(model_->generated_names.size());

    for (int t = 1; t <= cfg_->sampling; ++t) {
      const int l = static_cast<int>(rng_.uniform_int(1, l_nominal));
      const Transition tr = transition(eps, l);
      const std::size_t it = static_cast<std::size_t>(t - 1);
      res.divergent[it] = tr.divergent ? 1 : 0;
      res.accept_stat[it] = tr.alpha;
      target_.constrain_into(u_, x);
      double* row = res.draws.data() + it * n_q;
      std::copy(x.begin(), x.end(), row);
      if (!gq.empty()) {
        Rng gq_rng(derive_seed(cfg_->seed, 0x6771ULL /*"gq"*/,
                               static_cast<std::uint64_t>(chain_), static_cast<std::uint64_t>(t)));
        model_->generated(x, gq_rng, gq);
        std::copy(gq.begin(), gq.end(), row + dim_);
      }
    }
    return res;
  }

 private:
  void initialize() {
    constexpr int max_attempts = 100;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      for (std::size_t j = 0; j < dim_; ++j) {
        const auto& p = model_->params[j];
        u_[j] = p.init ? p.constraint.unconstrain(*p.init) : rng_.uniform(-2.0, 2.0);
      }
      lp_ = target_(u_, grad_);
      if (std::isfinite(lp_)) return;
    }
    throw InitializationError("model '" + model_->name + "': no finite starting point in " +
                              std::to_string(max_attempts) + " attempts");
  }

  int nominal_leapfrog(double eps, bool in_warmup) const {
    const double raw = std::round(1.0 / eps);
    const double capped = std::clamp(raw, 1.0, static_cast<double>(cfg_->max_leapfrog));
    if (!in_warmup && raw > static_cast<double>(cfg_->max_leapfrog)) {
      throw ConfigError("sampler: adapted step size " + std::to_string(eps) + " implies " +
                        std::to_string(raw) + " leapfrog steps, above max-leapfrog " +
                        std::to_string(cfg_->max_leapfrog));
    }
    return static_cast<int>(capped);
  }

  // One jittered-length leapfrog trajectory from the current state with a
  // Metropolis accept/reject; updates (u_, lp_, grad_) on acceptance.
  Transition transition(double eps, int n_steps) {
    Transition tr;
    double kinetic0 = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      p_[j] = rng_.normal() / std::sqrt(inv_mass_[j]);
      kinetic0 += 0.5 * p_[j] * p_[j] * inv_mass_[j];
    }
    const double h0 = -lp_ + kinetic0;

    std::copy(u_.begin(), u_.end(), q_new_.begin());
    std::copy(grad_.begin(), grad_.end(), grad_new_.begin());
    double lp_new = lp_;
    bool failed = false;
    for (int s = 0; s < n_steps; ++s) {
      for (std::size_t j = 0; j < dim_; ++j) p_[j] += 0.5 * eps * grad_new_[j];
      for (std::size_t j = 0; j < dim_; ++j) q_new_[j] += eps * inv_mass_[j] * p_[j];
      lp_new = target_(q_new_, grad_new_);
      if (!std::isfinite(lp_new)) {
        failed = true;
        break;
      }
      for (std::size_t j = 0; j < dim_; ++j) p_[j] += 0.5 * eps * grad_new_[j];
    }

    double delta_h = std::numeric_limits<double>::infinity();
    if (!failed) {
      double kinetic1 = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) kinetic1 += 0.5 * p_[j] * p_[j] * inv_mass_[j];
      delta_h = (-lp_new + kinetic1) - h0;
    }
    if (!(delta_h < 1000.0)) tr.divergent = true;  // energy blow-up or NaN
    tr.alpha = std::isnan(delta_h) ? 0.0 : std::min(1.0, std::exp(-delta_h));
    if (rng_.uniform() < tr.alpha) {
      std::swap(u_, q_new_);
      std::swap(grad_, grad_new_);
      lp_ = lp_new;
    }
    return tr;
  }

  // Step-size heuristic: from eps = 1, repeatedly double or halve until a
  // single leapfrog step's acceptance probability crosses 1/2, holding the
  // momentum draw fixed.
  double find_reasonable_epsilon() {
    std::vector<double> p0(dim_);
    double kinetic0 = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      p0[j] = rng_.normal() / std::sqrt(inv_mass_[j]);
      kinetic0 += 0.5 * p0[j] * p0[j] * inv_mass_[j];
    }
    double eps = 1.0;
    const double first = one_step_accept(eps, p0, kinetic0);
    const bool grow = first > 0.5;
    for (int i = 0; i < 60; ++i) {
      eps *= grow ? 2.0 : 0.5;
      if (eps > 1e7 || eps < 1e-10) break;
      const double alpha = one_step_accept(eps, p0, kinetic0);
      if (grow ? alpha <= 0.5 : alpha > 0.5) break;
    }
    return eps;
  }

  double one_step_accept(double eps, const std::vector<double>& p0, double kinetic0) {
    std::copy(p0.begin(), p0.end(), p_.begin());
    std::copy(u_.begin(), u_.end(), q_new_.begin());
    std::copy(grad_.begin(), grad_.end(), grad_new_.begin());
    for (std::size_t j = 0; j < dim_; ++j) p_[j] += 0.5 * eps * grad_new_[j];
    for (std::size_t j = 0; j < dim_; ++j) q_new_[j] += eps * inv_mass_[j] * p_[j];
    const double lp_new = target_(q_new_, grad_new_);
    if (!std::isfinite(lp_new)) return 0.0;
    for (std::size_t j = 0; j < dim_; ++j) p_[j] += 0.5 * eps * grad_new_[j];
    double kinetic1 = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) kinetic1 += 0.5 * p_[j] * p_[j] * inv_mass_[j];
    const double log_alpha = (lp_new - kinetic1) - (lp_ - kinetic0);
    if (std::isnan(log_alpha)) return 0.0;
    return std::min(1.0, std::exp(log_alpha));
  }

  const ModelSpec* model_;
  const SamplerConfig* cfg_;
  int chain_;
  TargetGrad target_;
  Rng rng_;
  std::size_t dim_;

  std::vector<double> u_, grad_;  // current state
  double lp_ = 0.0;
  std::vector<double> inv_mass_;  // diagonal of M^{-1} (posterior variances)
  std::vector<double> p_, q_new_, grad_new_;
};

}  // namespace detail

inline DrawsMatrix hmc_sample(const ModelSpec& model, const SamplerConfig& cfg) {
  cfg.validate();
  if (model.params.empty()) throw ConfigError("sampler: model has no parameters");
  if (!model.log_target || !model.log_target_ad) {
    throw ConfigError("sampler: model has no log target");
  }
  if (!model.generated_names.empty() && !model.generated) {
    throw ConfigError("sampler: generated quantities declared but no generator given");
  }

  const int n_chains = cfg.chains;
  std::vector<detail::ChainResult> results(static_cast<std::size_t>(n_chains));
  int n_threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, n_chains));

  auto run_one = [&](int c) {
    auto& slot = results[static_cast<std::size_t>(c)];
    try {
      detail::ChainRunner runner(model, cfg, c);
      slot = runner.run();
    } catch (const InitializationError& e) {
      slot.failure = detail::ChainResult::Failure::Init;
      slot.error = e.what();
    } catch (const ConfigError& e) {
      slot.failure = detail::ChainResult::Failure::Config;
      slot.error = e.what();
    } catch (const std::exception& e) {
      slot.failure = detail::ChainResult::Failure::Sampling;
      slot.error = e.what();
    }
  };

  if (n_threads == 1) {
    for (int c = 0; c < n_chains; ++c) run_one(c);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < n_chains; c = next.fetch_add(1)) run_one(c);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (int c = 0; c < n_chains; ++c) {
    const auto& r = results[static_cast<std::size_t>(c)];
    if (r.failure != detail::ChainResult::Failure::None) {
      const std::string msg = "chain " + std::to_string(c) + ": " + r.error;
      switch (r.failure) {
        case detail::ChainResult::Failure::Init:
          throw InitializationError(msg);
        case detail::ChainResult::Failure::Config:
          throw ConfigError(msg);
        default:
          throw SamplingError(msg);
      }
    }
  }

  DrawsMatrix out;
  out.names.reserve(model.params.size() + model.generated_names.size());
  for (const auto& p : model.params) out.names.push_back(p.name);
  for (const auto& g : model.generated_names) out.names.push_back(g);
  out.n_chains = n_chains;
  out.n_iter = cfg.sampling;
  out.warmup = cfg.warmup;
  for (auto& r : results) {
    out.draws.push_back(std::move(r.draws));
    out.divergent.push_back(std::move(r.divergent));
    out.accept_stat.push_back(std::move(r.accept_stat));
    out.step_size.push_back(r.step_size);
    out.leapfrog_nominal.push_back(r.leapfrog_nominal);
  }
  return out;
}

}  // namespace causalsens
