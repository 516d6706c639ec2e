#pragma once

// Seeded synthetic-data generators, one per model family, each returning the
// dataset together with the generative-truth ATE computed by a deterministic
// oracle at the DGP parameters (never from the sample). Generators share a
// common core so that families which extend the fully observed binary DGP
// (surrogate exposure, masked outcomes) reproduce its draws bit for bit under
// a matching seed — handy for tests that need the latent truth back.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "causalsens/dataset.hpp"
#include "causalsens/errors.hpp"
#include "causalsens/estimands.hpp"
#include "causalsens/math.hpp"
#include "causalsens/rng.hpp"

namespace causalsens {

enum class DgpFamily {
  Complete,
  Misclassified,
  Unmeasured,
  MnarBinary,
  MnarContinuous,
};

inline const char* dgp_family_name(DgpFamily f) {
  switch (f) {
    case DgpFamily::Complete:
      return "complete";
    case DgpFamily::Misclassified:
      return "misclassified";
    case DgpFamily::Unmeasured:
      return "unmeasured";
    case DgpFamily::MnarBinary:
      return "mnar-binary";
    case DgpFamily::MnarContinuous:
      return "mnar-continuous";
  }
  throw std::logic_error("dgp_family_name: bad family");
}

inline DgpFamily dgp_family_from_name(const std::string& name) {
  for (DgpFamily f : {DgpFamily::Complete, DgpFamily::Misclassified, DgpFamily::Unmeasured,
                      DgpFamily::MnarBinary, DgpFamily::MnarContinuous}) {
    if (name == dgp_family_name(f)) return f;
  }
  throw ConfigError("unknown data family '" + name +
                    "'; expected complete, misclassified, unmeasured, mnar-binary, or "
                    "mnar-continuous");
}

struct MixtureComponentDgp {
  double weight = 1.0;
  double eta0 = 0.0, eta1 = 0.0, eta2 = 0.0, sigma = 1.0;  // outcome regression
  double gamma0 = 0.0, gamma1 = 0.0;                       // treatment model
  double theta0 = 0.0, phi = 1.0;                          // covariate marginal
};

struct DgpSpec {
  DgpFamily family = DgpFamily::Complete;
  std::size_t n = 500;
  std::uint64_t seed = 1;

  // fully observed binary core: y ~ Ber(expit(eta' (1,l,a))), a ~ Ber(expit(gamma' (1,l))),
  // l ~ Ber(theta)
  double eta_intercept = -0.5;
  double eta_covariate = 0.8;
  double eta_treatment = 0.7;
  double gamma0 = 0.2;
  double gamma1 = -0.6;
  double theta = 0.4;

  // recorded-exposure error rates given the true exposure
  double surrogate_tpr = 0.9;
  double surrogate_fpr = 0.1;

  // latent standard-normal confounder loadings (outcome and treatment models)
  double u_outcome = -1.2;
  double u_treatment = 1.2;

  // outcome-missingness selection model, logit P(missing) = c0 + c1 a + c3 a y
  double miss_intercept = 2.2;
  double miss_treated = 0.0;
  double miss_interaction = 0.0;

  // mixture components for the continuous-outcome family
  std::vector<MixtureComponentDgp> components;

  void validate() const {
    if (n < 1) throw ValidationError("dgp: n must be at least 1");
    auto open_unit = [](double p, const char* what) {
      if (!(p > 0.0) || !(p < 1.0)) {
        throw ValidationError(std::string("dgp: ") + what + " must lie inside (0,1), got " +
                              std::to_string(p));
      }
    };
    switch (family) {
      case DgpFamily::Misclassified:
        open_unit(surrogate_tpr, "surrogate_tpr");
        open_unit(surrogate_fpr, "surrogate_fpr");
        [[fallthrough]];
      case DgpFamily::Complete:
      case DgpFamily::Unmeasured:
      case DgpFamily::MnarBinary:
        open_unit(theta, "theta");
        break;
      case DgpFamily::MnarContinuous:
        if (components.empty()) {
          throw ValidationError("dgp: the continuous family needs at least one component");
        }
        for (const auto& c : components) {
          if (!(c.weight > 0.0)) throw ValidationError("dgp: component weights must be positive");
          if (!(c.sigma > 0.0) || !(c.phi > 0.0)) {
            throw ValidationError("dgp: component scales must be positive");
          }
        }
        break;
    }
  }
};

inline DgpSpec default_dgp(DgpFamily family) {
  DgpSpec s;
  s.family = family;
  switch (family) {
    case DgpFamily::Complete:
    case DgpFamily::Misclassified:
      break;  // shared binary-core defaults above
    case DgpFamily::Unmeasured:
      s.n = 300;
      s.eta_treatment = 0.0;  // a truthfully null effect the confounding masks
      break;
    case DgpFamily::MnarBinary:
      s.n = 1000;  // heavy missingness scale: expit(2.2) is roughly ninety percent
      break;
    case DgpFamily::MnarContinuous:
      s.n = 200;
      s.miss_intercept = -1.0;
      s.miss_treated = 0.5;
      s.miss_interaction = -1.0;
      s.components = {
          {0.6, 1.0, 0.5, 1.0, 0.8, 0.3, 0.4, -0.5, 1.0},
          {0.4, -1.0, -0.3, 1.0, 1.2, -0.5, 0.2, 1.5, 0.8},
      };
      break;
  }
  return s;
}

struct GeneratedData {
  Dataset dataset;
  double true_ate = 0.0;
};

/// Deterministic g-formula effect of a mixture DGP: E_l[E(y|a=1,l) - E(y|a=0,l)]
/// with the covariate integrated over its mixture marginal by composite
/// Simpson quadrature. A single component yields its treatment coefficient
/// exactly, so that case short-circuits.
inline double mixture_gformula_ate(std::span<const MixtureComponentDgp> comps) {
  if (comps.empty()) throw ValidationError("mixture_gformula_ate: no components");
  if (comps.size() == 1) return comps[0].eta2;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : comps) {
    lo = std::min(lo, c.theta0 - 12.0 * c.phi);
    hi = std::max(hi, c.theta0 + 12.0 * c.phi);
  }
  const std::size_t intervals = 200000;  // even, for Simpson weights 1,4,2,...,4,1
  const double h = (hi - lo) / static_cast<double>(intervals);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double l = lo + static_cast<double>(i) * h;
    const double w_simpson = i == 0 || i == intervals ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    double mass = 0.0, n1 = 0.0, d1 = 0.0, n0 = 0.0, d0 = 0.0;
    for (const auto& c : comps) {
      const double pl = c.weight * std::exp(normal_lpdf(l, c.theta0, c.phi));
      const double pa = expit(c.gamma0 + c.gamma1 * l);
      const double w1 = pl * pa, w0 = pl * (1.0 - pa);
      const double base = c.eta0 + c.eta1 * l;
      n1 += w1 * (base + c.eta2);
      d1 += w1;
      n0 += w0 * base;
      d0 += w0;
      mass += pl;
    }
    if (!(d1 > 0.0) || !(d0 > 0.0)) continue;  // vanished tail cell
    num += w_simpson * mass * (n1 / d1 - n0 / d0);
    den += w_simpson * mass;
  }
  return num / den;
}

namespace detail {

inline void require_family(const DgpSpec& spec, DgpFamily family, const char* op) {
  if (spec.family != family) {
    throw ConfigError(std::string(op) + ": spec is tagged '" +
                      dgp_family_name(spec.family) + "', expected '" +
                      dgp_family_name(family) + "'");
  }
}

// The shared fully observed binary core. Families layering extra stages on
// top call this first so the base draws coincide bit for bit at equal seeds.
inline Dataset binary_core(const DgpSpec& s, Rng& rng, const double* u = nullptr) {
  Dataset d;
  d.delta.assign(s.n, 0);
  d.y.resize(s.n);
  d.a.resize(s.n);
  d.l.resize(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    const int l = rng.bernoulli(s.theta);
    const double uu = u != nullptr ? u[i] : 0.0;
    const double u_a = u != nullptr ? s.u_treatment * uu : 0.0;
    const double u_y = u != nullptr ? s.u_outcome * uu : 0.0;
    const int a = rng.bernoulli(expit(s.gamma0 + s.gamma1 * l + u_a));
    const int y =
        rng.bernoulli(expit(s.eta_intercept + s.eta_covariate * l + s.eta_treatment * a + u_y));
    d.l[i] = l;
    d.a[i] = a;
    d.y[i] = y;
  }
  return d;
}

inline void mask_outcomes(const DgpSpec& s, Rng& rng, Dataset& d) {
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double logit_miss =
        s.miss_intercept + s.miss_treated * d.a[i] + s.miss_interaction * d.a[i] * d.y[i];
    if (rng.bernoulli(expit(logit_miss)) == 1) {
      d.delta[i] = 1;
      d.y[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
}

}  // namespace detail

inline GeneratedData gen_complete(const DgpSpec& spec) {
  detail::require_family(spec, DgpFamily::Complete, "gen_complete");
  spec.validate();
  Rng rng(spec.seed);
  GeneratedData out;
  out.dataset = detail::binary_core(spec, rng);
  out.true_ate =
      gformula_binary_l({spec.eta_intercept, spec.eta_covariate, spec.eta_treatment}, spec.theta);
  return out;
}

inline GeneratedData gen_misclassified(const DgpSpec& spec) {
  detail::require_family(spec, DgpFamily::Misclassified, "gen_misclassified");
  spec.validate();
  Rng rng(spec.seed);
  GeneratedData out;
  out.dataset = detail::binary_core(spec, rng);
  // overwrite the true exposure with its error-prone record; the effect is
  // defined on the true exposure and therefore unchanged
  for (std::size_t i = 0; i < spec.n; ++i) {
    out.dataset.a[i] =
        rng.bernoulli(out.dataset.a[i] == 1 ? spec.surrogate_tpr : spec.surrogate_fpr);
  }
  out.true_ate =
      gformula_binary_l({spec.eta_intercept, spec.eta_covariate, spec.eta_treatment}, spec.theta);
  return out;
}

inline GeneratedData gen_unmeasured(const DgpSpec& spec) {
  detail::require_family(spec, DgpFamily::Unmeasured, "gen_unmeasured");
  spec.validate();
  Rng rng(spec.seed);
  // the confounder comes from its own stream so that at zero loadings the
  // remaining draws coincide with gen_complete under the same seed
  Rng u_rng(derive_seed(spec.seed, 0x75cf));
  std::vector<double> u(spec.n);
  for (auto& ui : u) ui = u_rng.normal();
  GeneratedData out;
  out.dataset = detail::binary_core(spec, rng, u.data());
  out.true_ate = gformula_with_u({spec.eta_intercept, spec.eta_treatment, spec.eta_covariate},
                                 spec.u_outcome, spec.theta, gauss_hermite_standard_normal(32));
  return out;
}

inline GeneratedData gen_mnar_binary(const DgpSpec& spec) {
  detail::require_family(spec, DgpFamily::MnarBinary, "gen_mnar_binary");
  spec.validate();
  Rng rng(spec.seed);
  GeneratedData out;
  out.dataset = detail::binary_core(spec, rng);
  detail::mask_outcomes(spec, rng, out.dataset);
  out.true_ate =
      gformula_binary_l({spec.eta_intercept, spec.eta_covariate, spec.eta_treatment}, spec.theta);
  return out;
}

inline GeneratedData gen_mnar_continuous(const DgpSpec& spec) {
  detail::require_family(spec, DgpFamily::MnarContinuous, "gen_mnar_continuous");
  spec.validate();
  Rng rng(spec.seed);
  std::vector<double> w;
  w.reserve(spec.components.size());
  for (const auto& c : spec.components) w.push_back(c.weight);

  GeneratedData out;
  Dataset& d = out.dataset;
  d.delta.assign(spec.n, 0);
  d.y.resize(spec.n);
  d.a.resize(spec.n);
  d.l.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto& c = spec.components[rng.categorical(w)];
    const double l = rng.normal(c.theta0, c.phi);
    const int a = rng.bernoulli(expit(c.gamma0 + c.gamma1 * l));
    const double y = rng.normal(c.eta0 + c.eta1 * l + c.eta2 * a, c.sigma);
    d.l[i] = l;
    d.a[i] = a;
    d.y[i] = y;
  }
  detail::mask_outcomes(spec, rng, d);
  out.true_ate = mixture_gformula_ate(spec.components);
  return out;
}

inline GeneratedData generate(const DgpSpec& spec) {
  switch (spec.family) {
    case DgpFamily::Complete:
      return gen_complete(spec);
    case DgpFamily::Misclassified:
      return gen_misclassified(spec);
    case DgpFamily::Unmeasured:
      return gen_unmeasured(spec);
    case DgpFamily::MnarBinary:
      return gen_mnar_binary(spec);
    case DgpFamily::MnarContinuous:
      return gen_mnar_continuous(spec);
  }
  throw std::logic_error("generate: bad family");
}

}  // namespace causalsens
