#pragma once

// Builders that turn a dataset plus sensitivity settings into a sampleable
// ModelSpec. Five observation models share one pattern: a fully observed
// binary-data regression, and four expansions of it that confront a specific
// threat to validity (exposure misclassification, an unmeasured confounder,
// nonignorable outcome missingness for binary and for continuous outcomes).
// Sensitivity parameters arrive either as baked constants or as sampled
// coordinates with a normal prior; each builder declares which names it
// understands and everything else is rejected up front.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalsens/autodiff.hpp"
#include "causalsens/constraints.hpp"
#include "causalsens/dataset.hpp"
#include "causalsens/errors.hpp"
#include "causalsens/estimands.hpp"
#include "causalsens/math.hpp"
#include "causalsens/model_spec.hpp"
#include "causalsens/rng.hpp"
#include "causalsens/sensitivity.hpp"

namespace causalsens {

enum class ModelKind {
  CompleteData,
  Misclassification,
  UnmeasuredConfounder,
  MnarBinary,
  MnarMixture,
};

inline const char* model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::CompleteData:
      return "complete-data";
    case ModelKind::Misclassification:
      return "misclassification";
    case ModelKind::UnmeasuredConfounder:
      return "unmeasured-confounder";
    case ModelKind::MnarBinary:
      return "mnar-binary";
    case ModelKind::MnarMixture:
      return "mnar-mixture";
  }
  throw std::logic_error("model_name: bad kind");
}

inline ModelKind model_kind_from_name(const std::string& name) {
  for (ModelKind k : {ModelKind::CompleteData, ModelKind::Misclassification,
                      ModelKind::UnmeasuredConfounder, ModelKind::MnarBinary,
                      ModelKind::MnarMixture}) {
    if (name == model_name(k)) return k;
  }
  throw ConfigError(
      "unknown model '" + name +
      "'; expected complete-data, misclassification, unmeasured-confounder, "
      "mnar-binary, or mnar-mixture");
}

struct MixtureOptions {
  int components = 10;       // truncation level of the stick-breaking prior
  bool sample_alpha = true;  // concentration sampled under Gamma(1,1)...
  double fixed_alpha = 1.0;  // ...or pinned here when sample_alpha is false
  int gq_mc_draws = 500;     // Monte Carlo size for the per-draw effect
};

/// Map K-1 stick fractions in (0,1) to K positive weights summing to one.
inline std::vector<double> stick_breaking(std::span<const double> v) {
  std::vector<double> nu(v.size() + 1);
  double rem = 1.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (!(v[j] > 0.0) || !(v[j] < 1.0)) {
      throw std::domain_error("stick_breaking: fraction " + std::to_string(v[j]) +
                              " outside (0,1)");
    }
    nu[j] = v[j] * rem;
    rem *= 1.0 - v[j];
  }
  nu[v.size()] = rem;
  return nu;
}

namespace detail {

inline double constant_like(double v, std::span<const double>) { return v; }
inline ad::Var constant_like(double v, std::span<const ad::Var> params) {
  return params[0].tape->push(v, {}, {});
}

// One sensitivity parameter after binding: either baked into the density as
// a constant, or pointing at a sampled coordinate that carries a prior.
struct SensSlot {
  std::string name;
  bool sampled = false;
  double value = 0.0;     // baked constant
  std::size_t index = 0;  // sampled coordinate
  double prior_mean = 0.0;
  double prior_sd = 1.0;
};

template <typename T>
T resolve(const SensSlot& s, std::span<const T> p) {
  return s.sampled ? p[s.index] : constant_like(s.value, p);
}

// Constrained-scale value of the baked constant or, for sampled slots, of
// the coordinate in a concrete draw.
inline double resolve_value(const SensSlot& s, std::span<const double> p) {
  return s.sampled ? p[s.index] : s.value;
}

template <typename T>
void add_sens_priors(T& lp, std::span<const SensSlot> slots, std::span<const T> p) {
  for (const auto& s : slots) {
    if (s.sampled) lp = lp + normal_lpdf(p[s.index], s.prior_mean, s.prior_sd);
  }
}

struct SensDecl {
  const char* name;
  SensitivityEntry fallback;
  Constraint constraint = Constraint::unbounded();
  bool open_unit = false;  // baked values must lie strictly inside (0,1)
};

inline double prior_init(const Constraint& c, double mean) {
  switch (c.kind()) {
    case Constraint::Kind::Unbounded:
      return mean;
    case Constraint::Kind::LowerBound:
      return mean > c.lower_bound() ? mean : c.lower_bound() + 1.0;
    case Constraint::Kind::UpperBound:
      return mean < c.upper_bound() ? mean : c.upper_bound() - 1.0;
    case Constraint::Kind::Interval:
      return mean > c.lower_bound() && mean < c.upper_bound()
                 ? mean
                 : 0.5 * (c.lower_bound() + c.upper_bound());
  }
  throw std::logic_error("prior_init: bad kind");
}

// Match configured sensitivity entries against the model's declarations,
// falling back to the declared defaults. Baked constants are validated here;
// sampled ones are appended to the parameter vector.
inline std::vector<SensSlot> bind_sens(const SensitivityConfig& cfg,
                                       std::vector<ParamInfo>& params,
                                       std::span<const SensDecl> decls,
                                       const std::string& model) {
  for (const auto& [name, entry] : cfg.entries) {
    const bool known = std::any_of(decls.begin(), decls.end(),
                                   [&](const SensDecl& d) { return name == d.name; });
    if (!known) {
      throw ValidationError("model '" + model + "' has no sensitivity parameter named '" +
                            name + "'");
    }
  }
  std::vector<SensSlot> slots;
  slots.reserve(decls.size());
  for (const auto& d : decls) {
    const SensitivityEntry* configured = cfg.find(d.name);
    const SensitivityEntry& entry = configured != nullptr ? *configured : d.fallback;
    SensSlot s;
    s.name = d.name;
    switch (entry.kind) {
      case SensitivityEntry::Kind::Grid:
        throw ValidationError("model '" + model + "': sensitivity parameter '" +
                              std::string(d.name) +
                              "' carries a grid, which only a sweep can consume; pick a "
                              "point value or a prior for a single fit");
      case SensitivityEntry::Kind::PointMass:
        if (d.open_unit && !(entry.value > 0.0 && entry.value < 1.0)) {
          throw ValidationError("model '" + model + "': " + std::string(d.name) +
                                " must lie inside (0,1), got " + std::to_string(entry.value));
        }
        s.value = entry.value;
        break;
      case SensitivityEntry::Kind::NormalPrior: {
        s.sampled = true;
        s.prior_mean = entry.prior_mean;
        s.prior_sd = entry.prior_sd;
        s.index = params.size();
        params.push_back({d.name, d.constraint, prior_init(d.constraint, entry.prior_mean)});
        break;
      }
    }
    slots.push_back(std::move(s));
  }
  return slots;
}

inline std::vector<int> covariate_as_int(const Dataset& d) {
  std::vector<int> out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) out[i] = static_cast<int>(d.l[i]);
  return out;
}

inline std::vector<int> outcome_as_int(const Dataset& d) {
  std::vector<int> out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    out[i] = d.delta[i] == 0 ? static_cast<int>(d.y[i]) : 0;
  }
  return out;
}

}  // namespace detail

// Logistic outcome regression on fully observed binary data:
//   y ~ Bernoulli(expit(eta0 + eta1 l + eta2 a)),  l ~ Bernoulli(theta)
// with N(0,3) priors on the coefficients and Beta(1,1) on theta.
inline ModelSpec build_complete_data_model(const Dataset& data, const SensitivityConfig& sens) {
  data.validate();
  const std::string name = model_name(ModelKind::CompleteData);
  data.require_complete(name);
  data.require_binary_outcome(name);
  data.require_binary_covariate(name);

  ModelSpec spec;
  spec.name = name;
  spec.params = {
      {"eta0", Constraint::unbounded(), {}},
      {"eta1", Constraint::unbounded(), {}},
      {"eta2", Constraint::unbounded(), {}},
      {"theta", Constraint::interval(0.0, 1.0), {}},
  };
  detail::bind_sens(sens, spec.params, {}, name);  // declares none; rejects strays

  const auto y = detail::outcome_as_int(data);
  const auto a = data.a;
  const auto l = data.l;
  const auto li = detail::covariate_as_int(data);

  spec.set_log_target([y, a, l, li]<typename T>(std::span<const T> p) {
    T lp = normal_lpdf(p[0], 0.0, 3.0) + normal_lpdf(p[1], 0.0, 3.0) +
           normal_lpdf(p[2], 0.0, 3.0) + beta_lpdf(p[3], 1.0, 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      lp = lp + bernoulli_logit_lpmf(y[i], p[0] + p[1] * l[i] + p[2] * a[i]);
      lp = lp + bernoulli_lpmf(li[i], p[3]);
    }
    return lp;
  });

  spec.generated_names = {"ate"};
  spec.generated = [](std::span<const double> x, Rng&, std::span<double> out) {
    out[0] = gformula_binary_l({x[0], x[1], x[2]}, x[3]);
  };
  return spec;
}

// The complete-data regression when the recorded exposure is a noisy
// surrogate: each row marginalizes the latent true exposure against
// sensitivity (xi1, xi2) = P(surrogate = 1 | true exposure = 1 or 0),
// with a logistic treatment model gamma feeding the latent margin.
inline ModelSpec build_misclassification_model(const Dataset& data,
                                               const SensitivityConfig& sens) {
  data.validate();
  const std::string name = model_name(ModelKind::Misclassification);
  data.require_complete(name);
  data.require_binary_outcome(name);
  data.require_binary_covariate(name);

  ModelSpec spec;
  spec.name = name;
  spec.params = {
      {"eta0", Constraint::unbounded(), {}},
      {"eta1", Constraint::unbounded(), {}},
      {"eta2", Constraint::unbounded(), {}},
      {"gamma0", Constraint::unbounded(), {}},
      {"gamma1", Constraint::unbounded(), {}},
      {"theta", Constraint::interval(0.0, 1.0), {}},
  };
  const std::array<detail::SensDecl, 2> decls = {{
      {"xi1", SensitivityEntry::point(0.999), Constraint::interval(0.0, 1.0), true},
      {"xi2", SensitivityEntry::point(0.001), Constraint::interval(0.0, 1.0), true},
  }};
  const auto slots = detail::bind_sens(sens, spec.params, decls, name);

  const auto y = detail::outcome_as_int(data);
  const auto surr = data.a;
  const auto l = data.l;
  const auto li = detail::covariate_as_int(data);

  spec.set_log_target([y, surr, l, li, slots]<typename T>(std::span<const T> p) {
    const T xi1 = detail::resolve(slots[0], p);
    const T xi2 = detail::resolve(slots[1], p);
    T lp = normal_lpdf(p[0], 0.0, 3.0) + normal_lpdf(p[1], 0.0, 3.0) +
           normal_lpdf(p[2], 0.0, 3.0) + normal_lpdf(p[3], 0.0, 3.0) +
           normal_lpdf(p[4], 0.0, 3.0) + beta_lpdf(p[5], 1.0, 1.0);
    detail::add_sens_priors(lp, slots, p);
    for (std::size_t i = 0; i < y.size(); ++i) {
      std::array<T, 2> branch = {
          bernoulli_lpmf(surr[i], xi2) + bernoulli_logit_lpmf(y[i], p[0] + p[1] * l[i]) +
              bernoulli_logit_lpmf(0, p[3] + p[4] * l[i]),
          bernoulli_lpmf(surr[i], xi1) +
              bernoulli_logit_lpmf(y[i], p[0] + p[1] * l[i] + p[2]) +
              bernoulli_logit_lpmf(1, p[3] + p[4] * l[i]),
      };
      lp = lp + log_sum_exp(std::span<const T>(branch.data(), 2));
      lp = lp + bernoulli_lpmf(li[i], p[5]);
    }
    return lp;
  });

  spec.generated_names = {"ate"};
  spec.generated = [](std::span<const double> x, Rng&, std::span<double> out) {
    out[0] = gformula_binary_l({x[0], x[1], x[2]}, x[5]);
  };
  return spec;
}

// The complete-data regression with a standard-normal latent confounder per
// row entering both the outcome model (loading xi1) and the treatment model
// (loading xi2). Coefficient order in the outcome model puts treatment
// before the covariate.
inline ModelSpec build_unmeasured_confounder_model(const Dataset& data,
                                                   const SensitivityConfig& sens) {
  data.validate();
  const std::string name = model_name(ModelKind::UnmeasuredConfounder);
  data.require_complete(name);
  data.require_binary_outcome(name);
  data.require_binary_covariate(name);

  ModelSpec spec;
  spec.name = name;
  spec.params = {
      {"eta0", Constraint::unbounded(), {}},
      {"eta1", Constraint::unbounded(), {}},
      {"eta2", Constraint::unbounded(), {}},
      {"gamma0", Constraint::unbounded(), {}},
      {"gamma1", Constraint::unbounded(), {}},
      {"theta", Constraint::interval(0.0, 1.0), {}},
  };
  const std::size_t off_u = spec.params.size();
  for (std::size_t i = 1; i <= data.n(); ++i) {
    spec.params.push_back({"u[" + std::to_string(i) + "]", Constraint::unbounded(), 0.0});
  }
  const std::array<detail::SensDecl, 2> decls = {{
      {"xi1", SensitivityEntry::point(0.0)},
      {"xi2", SensitivityEntry::point(0.0)},
  }};
  const auto slots = detail::bind_sens(sens, spec.params, decls, name);

  const auto y = detail::outcome_as_int(data);
  const auto a = data.a;
  const auto l = data.l;
  const auto li = detail::covariate_as_int(data);

  spec.set_log_target([y, a, l, li, slots, off_u]<typename T>(std::span<const T> p) {
    const T xi1 = detail::resolve(slots[0], p);
    const T xi2 = detail::resolve(slots[1], p);
    T lp = normal_lpdf(p[0], 0.0, 3.0) + normal_lpdf(p[1], 0.0, 3.0) +
           normal_lpdf(p[2], 0.0, 3.0) + normal_lpdf(p[3], 0.0, 3.0) +
           normal_lpdf(p[4], 0.0, 3.0) + beta_lpdf(p[5], 1.0, 1.0);
    detail::add_sens_priors(lp, slots, p);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const T& u = p[off_u + i];
      lp = lp + bernoulli_logit_lpmf(y[i], p[0] + p[1] * a[i] + p[2] * l[i] + xi1 * u);
      lp = lp + bernoulli_logit_lpmf(a[i], p[3] + p[4] * l[i] + xi2 * u);
      lp = lp + bernoulli_lpmf(li[i], p[5]);
      lp = lp + normal_lpdf(u, 0.0, 1.0);
    }
    return lp;
  });

  spec.generated_names = {"ate"};
  const auto xi1_slot = slots[0];
  spec.generated = [xi1_slot, rule = gauss_hermite_standard_normal(32)](
                       std::span<const double> x, Rng&, std::span<double> out) {
    out[0] = gformula_with_u({x[0], x[1], x[2]}, detail::resolve_value(xi1_slot, x), x[5], rule);
  };
  return spec;
}

// Binary-outcome regression under nonignorable missingness: a logistic
// selection model P(missing) = expit(xi0 + xi1 a + xi3 a y) ties dropout to
// the possibly unobserved outcome; missing rows marginalize y. Setting
// xi3 = 0 recovers missing-at-random.
inline ModelSpec build_mnar_binary_model(const Dataset& data, const SensitivityConfig& sens) {
  data.validate();
  const std::string name = model_name(ModelKind::MnarBinary);
  data.require_binary_outcome(name);
  data.require_binary_covariate(name);

  ModelSpec spec;
  spec.name = name;
  spec.params = {
      {"eta0", Constraint::unbounded(), {}},
      {"eta1", Constraint::unbounded(), {}},
      {"eta2", Constraint::unbounded(), {}},
      {"theta", Constraint::interval(0.0, 1.0), {}},
  };
  const std::array<detail::SensDecl, 3> decls = {{
      {"xi0", SensitivityEntry::normal(0.0, 3.0)},
      {"xi1", SensitivityEntry::normal(0.0, 3.0)},
      {"xi3", SensitivityEntry::point(0.0)},
  }};
  const auto slots = detail::bind_sens(sens, spec.params, decls, name);

  const auto delta = data.delta;
  const auto y = detail::outcome_as_int(data);
  const auto a = data.a;
  const auto l = data.l;
  const auto li = detail::covariate_as_int(data);

  spec.set_log_target([delta, y, a, l, li, slots]<typename T>(std::span<const T> p) {
    const T xi0 = detail::resolve(slots[0], p);
    const T xi1 = detail::resolve(slots[1], p);
    const T xi3 = detail::resolve(slots[2], p);
    T lp = normal_lpdf(p[0], 0.0, 3.0) + normal_lpdf(p[1], 0.0, 3.0) +
           normal_lpdf(p[2], 0.0, 3.0) + beta_lpdf(p[3], 1.0, 1.0);
    detail::add_sens_priors(lp, slots, p);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      if (delta[i] == 0) {
        lp = lp + bernoulli_logit_lpmf(0, xi0 + xi1 * a[i] + xi3 * (a[i] * y[i]));
        lp = lp + bernoulli_logit_lpmf(y[i], p[0] + p[1] * l[i] + p[2] * a[i]);
      } else {
        std::array<T, 2> branch;
        for (int yv = 0; yv <= 1; ++yv) {
          branch[static_cast<std::size_t>(yv)] =
              bernoulli_logit_lpmf(1, xi0 + xi1 * a[i] + xi3 * (a[i] * yv)) +
              bernoulli_logit_lpmf(yv, p[0] + p[1] * l[i] + p[2] * a[i]);
        }
        lp = lp + log_sum_exp(std::span<const T>(branch.data(), 2));
      }
      lp = lp + bernoulli_lpmf(li[i], p[3]);
    }
    return lp;
  });

  spec.generated_names = {"ate"};
  spec.generated = [](std::span<const double> x, Rng&, std::span<double> out) {
    out[0] = gformula_binary_l({x[0], x[1], x[2]}, x[3]);
  };
  return spec;
}

// Continuous-outcome analogue of the nonignorable-missingness model: the
// outcome/treatment/covariate joint is a truncated stick-breaking mixture of
// Gaussian-regression components, missing outcomes become latent parameters,
// and the same logistic selection model links dropout to the outcome.
inline ModelSpec build_mnar_mixture_model(const Dataset& data, const SensitivityConfig& sens,
                                          const MixtureOptions& opt) {
  data.validate();
  const std::string name = model_name(ModelKind::MnarMixture);
  if (opt.components < 1 || opt.components > 50) {
    throw ConfigError(name + std::string(": components must lie in [1,50], got ") +
                      std::to_string(opt.components));
  }
  if (opt.gq_mc_draws < 1) {
    throw ConfigError(name + std::string(": gq_mc_draws must be positive"));
  }
  if (!opt.sample_alpha && !(opt.fixed_alpha > 0.0)) {
    throw ConfigError(name + std::string(": fixed_alpha must be positive"));
  }

  const std::size_t K = static_cast<std::size_t>(opt.components);
  const bool with_alpha = opt.sample_alpha && K >= 2;

  ModelSpec spec;
  spec.name = name;
  auto block = [&spec, K](const char* stem, Constraint c, std::optional<double> init) {
    for (std::size_t k = 1; k <= K; ++k) {
      spec.params.push_back({stem + ("[" + std::to_string(k) + "]"), c, init});
    }
  };
  const std::size_t off_e0 = 0;
  block("eta0", Constraint::unbounded(), {});
  const std::size_t off_e1 = spec.params.size();
  block("eta1", Constraint::unbounded(), {});
  const std::size_t off_e2 = spec.params.size();
  block("eta2", Constraint::unbounded(), {});
  const std::size_t off_sig = spec.params.size();
  block("sigma", Constraint::lower(0.0), 1.0);
  const std::size_t off_g0 = spec.params.size();
  block("gamma0", Constraint::unbounded(), {});
  const std::size_t off_g1 = spec.params.size();
  block("gamma1", Constraint::unbounded(), {});
  const std::size_t off_th = spec.params.size();
  block("theta0", Constraint::unbounded(), {});
  const std::size_t off_ph = spec.params.size();
  block("phi", Constraint::lower(0.0), 1.0);
  const std::size_t off_v = spec.params.size();
  for (std::size_t j = 1; j < K; ++j) {
    // start at equal weights: v_j = 1 / (K - j + 1)
    spec.params.push_back({"v[" + std::to_string(j) + "]", Constraint::interval(0.0, 1.0),
                           1.0 / static_cast<double>(K - j + 1)});
  }
  const std::size_t idx_alpha = spec.params.size();
  if (with_alpha) spec.params.push_back({"alpha", Constraint::lower(0.0), 1.0});

  double y_mean = 0.0;
  if (data.n_observed() > 0) {
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (data.delta[i] == 0) y_mean += data.y[i];
    }
    y_mean /= static_cast<double>(data.n_observed());
  }
  const std::size_t off_ymiss = spec.params.size();
  for (std::size_t j = 1; j <= data.n_missing(); ++j) {
    spec.params.push_back({"y_miss[" + std::to_string(j) + "]", Constraint::unbounded(), y_mean});
  }

  const std::array<detail::SensDecl, 3> decls = {{
      {"xi0", SensitivityEntry::normal(0.0, 3.0)},
      {"xi1", SensitivityEntry::normal(0.0, 3.0)},
      {"xi3", SensitivityEntry::point(0.0)},
  }};
  const auto slots = detail::bind_sens(sens, spec.params, decls, name);

  const auto delta = data.delta;
  const auto y = data.y;
  const auto a = data.a;
  const auto l = data.l;
  const double alpha_fixed = opt.fixed_alpha;

  spec.set_log_target([delta, y, a, l, slots, K, off_e0, off_e1, off_e2, off_sig, off_g0, off_g1,
                       off_th, off_ph, off_v, idx_alpha, off_ymiss, with_alpha,
                       alpha_fixed]<typename T>(std::span<const T> p) {
    using std::log;
    using std::log1p;
    const T xi0 = detail::resolve(slots[0], p);
    const T xi1 = detail::resolve(slots[1], p);
    const T xi3 = detail::resolve(slots[2], p);

    T lp = detail::constant_like(0.0, p);
    for (std::size_t k = 0; k < K; ++k) {
      lp = lp + normal_lpdf(p[off_e0 + k], 0.0, 3.0) + normal_lpdf(p[off_e1 + k], 0.0, 3.0) +
           normal_lpdf(p[off_e2 + k], 0.0, 3.0) + normal_lpdf(p[off_g0 + k], 0.0, 3.0) +
           normal_lpdf(p[off_g1 + k], 0.0, 3.0) + normal_lpdf(p[off_th + k], 0.0, 3.0) +
           half_normal_lpdf(p[off_sig + k], 2.0) + half_normal_lpdf(p[off_ph + k], 2.0);
    }
    if (K >= 2) {
      // Beta(1, alpha) on each stick fraction, written out directly since the
      // concentration may itself be a parameter
      const T alpha = with_alpha ? p[idx_alpha] : detail::constant_like(alpha_fixed, p);
      for (std::size_t j = 0; j + 1 < K; ++j) {
        lp = lp + log(alpha) + (alpha - 1.0) * log1p(-p[off_v + j]);
      }
      if (with_alpha) lp = lp + gamma_lpdf(alpha, 1.0, 1.0);
    }
    detail::add_sens_priors(lp, slots, p);

    // mixture weights in log space
    std::vector<T> log_nu(K);
    T log_rem = detail::constant_like(0.0, p);
    for (std::size_t j = 0; j + 1 < K; ++j) {
      log_nu[j] = log(p[off_v + j]) + log_rem;
      log_rem = log_rem + log1p(-p[off_v + j]);
    }
    log_nu[K - 1] = log_rem;

    std::vector<T> comp(K);
    std::size_t mi = 0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const T yi = delta[i] == 1 ? p[off_ymiss + mi++] : detail::constant_like(y[i], p);
      lp = lp + bernoulli_logit_lpmf(delta[i], xi0 + xi1 * a[i] + xi3 * (a[i] * yi));
      for (std::size_t k = 0; k < K; ++k) {
        comp[k] = log_nu[k] +
                  normal_lpdf(yi, p[off_e0 + k] + p[off_e1 + k] * l[i] + p[off_e2 + k] * a[i],
                              p[off_sig + k]) +
                  bernoulli_logit_lpmf(a[i], p[off_g0 + k] + p[off_g1 + k] * l[i]) +
                  normal_lpdf(l[i], p[off_th + k], p[off_ph + k]);
      }
      lp = lp + (K == 1 ? comp[0] : log_sum_exp(std::span<const T>(comp.data(), K)));
    }
    return lp;
  });

  spec.generated_names = {"ate"};
  const int n_mc = opt.gq_mc_draws;
  spec.generated = [K, off_e0, off_e1, off_e2, off_g0, off_g1, off_th, off_ph, off_v, n_mc](
                       std::span<const double> x, Rng& rng, std::span<double> out) {
    TsbComponents c;
    const auto slice = [&x](std::size_t off, std::size_t len) {
      return std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(off),
                                 x.begin() + static_cast<std::ptrdiff_t>(off + len));
    };
    c.eta0 = slice(off_e0, K);
    c.eta1 = slice(off_e1, K);
    c.eta2 = slice(off_e2, K);
    c.gamma0 = slice(off_g0, K);
    c.gamma1 = slice(off_g1, K);
    c.theta0 = slice(off_th, K);
    c.phi = slice(off_ph, K);
    const auto nu = stick_breaking(slice(off_v, K - 1));
    out[0] = gformula_tsb(c, nu, n_mc, rng);
  };
  return spec;
}

inline ModelSpec build_model(ModelKind kind, const Dataset& data, const SensitivityConfig& sens,
                             const MixtureOptions& mixture = {}) {
  switch (kind) {
    case ModelKind::CompleteData:
      return build_complete_data_model(data, sens);
    case ModelKind::Misclassification:
      return build_misclassification_model(data, sens);
    case ModelKind::UnmeasuredConfounder:
      return build_unmeasured_confounder_model(data, sens);
    case ModelKind::MnarBinary:
      return build_mnar_binary_model(data, sens);
    case ModelKind::MnarMixture:
      return build_mnar_mixture_model(data, sens, mixture);
  }
  throw std::logic_error("build_model: bad kind");
}

}  // namespace causalsens
