#include <catch2/catch_amalgamated.hpp>

#include <causalsens/estimands.hpp>
#include <causalsens/hmc.hpp>
#include <causalsens/models.hpp>
#include <causalsens/rng.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

using namespace causalsens;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double k_nan = std::numeric_limits<double>::quiet_NaN();

// ---- independent oracles: every density written out longhand ----------

double o_expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double o_ber(int y, double p) { return y == 1 ? std::log(p) : std::log(1.0 - p); }
double o_norm(double x, double mu, double sd) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) -
         0.5 * (x - mu) * (x - mu) / (sd * sd);
}
double o_halfnorm(double x, double sd) { return std::log(2.0) + o_norm(x, 0.0, sd); }

// Beta(1,1) on theta contributes zero, so it never appears below.

double o_complete(const Dataset& d, const std::array<double, 3>& eta, double theta) {
  double lp = o_norm(eta[0], 0, 3) + o_norm(eta[1], 0, 3) + o_norm(eta[2], 0, 3);
  for (std::size_t i = 0; i < d.n(); ++i) {
    lp += o_ber(static_cast<int>(d.y[i]), o_expit(eta[0] + eta[1] * d.l[i] + eta[2] * d.a[i]));
    lp += o_ber(static_cast<int>(d.l[i]), theta);
  }
  return lp;
}

// sum over every latent exposure configuration of the joint density
double o_misclass_enum(const Dataset& d, const std::array<double, 3>& eta,
                       const std::array<double, 2>& gamma, double theta, double xi1, double xi2) {
  const int n = static_cast<int>(d.n());
  double total = 0.0;
  for (int cfg = 0; cfg < (1 << n); ++cfg) {
    double prod = 1.0;
    for (int i = 0; i < n; ++i) {
      const int atrue = (cfg >> i) & 1;
      const double p_surr = atrue == 1 ? xi1 : xi2;
      prod *= d.a[i] == 1 ? p_surr : 1.0 - p_surr;
      const double py = o_expit(eta[0] + eta[1] * d.l[i] + eta[2] * atrue);
      prod *= d.y[i] == 1.0 ? py : 1.0 - py;
      const double pa = o_expit(gamma[0] + gamma[1] * d.l[i]);
      prod *= atrue == 1 ? pa : 1.0 - pa;
    }
    total += prod;
  }
  double lp = std::log(total);
  for (int i = 0; i < n; ++i) lp += o_ber(static_cast<int>(d.l[i]), theta);
  lp += o_norm(eta[0], 0, 3) + o_norm(eta[1], 0, 3) + o_norm(eta[2], 0, 3) +
        o_norm(gamma[0], 0, 3) + o_norm(gamma[1], 0, 3);
  return lp;
}

double o_unmeasured(const Dataset& d, const std::array<double, 3>& eta,
                    const std::array<double, 2>& gamma, double theta,
                    const std::vector<double>& u, double xi1, double xi2) {
  double lp = o_norm(eta[0], 0, 3) + o_norm(eta[1], 0, 3) + o_norm(eta[2], 0, 3) +
              o_norm(gamma[0], 0, 3) + o_norm(gamma[1], 0, 3);
  for (std::size_t i = 0; i < d.n(); ++i) {
    // treatment coefficient first, then covariate
    lp += o_ber(static_cast<int>(d.y[i]),
                o_expit(eta[0] + eta[1] * d.a[i] + eta[2] * d.l[i] + xi1 * u[i]));
    lp += o_ber(d.a[i], o_expit(gamma[0] + gamma[1] * d.l[i] + xi2 * u[i]));
    lp += o_ber(static_cast<int>(d.l[i]), theta);
    lp += o_norm(u[i], 0, 1);
  }
  return lp;
}

// sum over every missing-outcome configuration of the joint density
double o_mnar_enum(const Dataset& d, const std::array<double, 3>& eta, double theta, double xi0,
                   double xi1, double xi3) {
  double lp = o_norm(eta[0], 0, 3) + o_norm(eta[1], 0, 3) + o_norm(eta[2], 0, 3);
  std::vector<std::size_t> miss;
  for (std::size_t i = 0; i < d.n(); ++i) {
    lp += o_ber(static_cast<int>(d.l[i]), theta);
    if (d.delta[i] == 1) {
      miss.push_back(i);
      continue;
    }
    lp += o_ber(0, o_expit(xi0 + xi1 * d.a[i] + xi3 * d.a[i] * d.y[i]));
    lp += o_ber(static_cast<int>(d.y[i]), o_expit(eta[0] + eta[1] * d.l[i] + eta[2] * d.a[i]));
  }
  const int m = static_cast<int>(miss.size());
  double total = 0.0;
  for (int cfg = 0; cfg < (1 << m); ++cfg) {
    double prod = 1.0;
    for (int j = 0; j < m; ++j) {
      const std::size_t i = miss[static_cast<std::size_t>(j)];
      const int yv = (cfg >> j) & 1;
      prod *= o_expit(xi0 + xi1 * d.a[i] + xi3 * d.a[i] * yv);
      const double py = o_expit(eta[0] + eta[1] * d.l[i] + eta[2] * d.a[i]);
      prod *= yv == 1 ? py : 1.0 - py;
    }
    total += prod;
  }
  if (m > 0) lp += std::log(total);
  return lp;
}

struct MixParams {
  std::vector<double> e0, e1, e2, sig, g0, g1, th0, ph;  // one entry per component
  std::vector<double> v;                                 // K-1 stick fractions
  double alpha = 1.0;
  bool alpha_sampled = true;
  std::vector<double> ymiss;  // one entry per missing row, in row order
  double xi0 = 0.0, xi1 = 0.0, xi3 = 0.0;
};

double o_mixture(const Dataset& d, const MixParams& p) {
  const std::size_t kk = p.e0.size();
  std::vector<double> nu(kk);
  double rem = 1.0;
  for (std::size_t j = 0; j + 1 < kk; ++j) {
    nu[j] = p.v[j] * rem;
    rem *= 1.0 - p.v[j];
  }
  nu[kk - 1] = rem;

  double lp = 0.0;
  std::size_t mi = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double yv = d.delta[i] == 1 ? p.ymiss[mi++] : d.y[i];
    lp += o_ber(d.delta[i], o_expit(p.xi0 + p.xi1 * d.a[i] + p.xi3 * d.a[i] * yv));
    double s = 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
      const double pa = o_expit(p.g0[k] + p.g1[k] * d.l[i]);
      s += nu[k] * std::exp(o_norm(yv, p.e0[k] + p.e1[k] * d.l[i] + p.e2[k] * d.a[i], p.sig[k])) *
           (d.a[i] == 1 ? pa : 1.0 - pa) * std::exp(o_norm(d.l[i], p.th0[k], p.ph[k]));
    }
    lp += std::log(s);
  }
  for (std::size_t k = 0; k < kk; ++k) {
    lp += o_norm(p.e0[k], 0, 3) + o_norm(p.e1[k], 0, 3) + o_norm(p.e2[k], 0, 3) +
          o_norm(p.g0[k], 0, 3) + o_norm(p.g1[k], 0, 3) + o_norm(p.th0[k], 0, 3);
    lp += o_halfnorm(p.sig[k], 2.0) + o_halfnorm(p.ph[k], 2.0);
  }
  for (std::size_t j = 0; j + 1 < kk; ++j) {
    lp += std::log(p.alpha) + (p.alpha - 1.0) * std::log(1.0 - p.v[j]);
  }
  if (p.alpha_sampled) lp += -p.alpha;  // Gamma(1,1) log density up to its zero constant
  return lp;
}

// ---- fixtures -----------------------------------------------------------

Dataset complete3() {
  Dataset d;
  d.delta = {0, 0, 0};
  d.y = {1, 0, 1};
  d.a = {1, 0, 0};
  d.l = {0, 1, 0};
  return d;
}

Dataset complete8() {
  Dataset d;
  d.delta = {0, 0, 0, 0, 0, 0, 0, 0};
  d.y = {1, 0, 1, 1, 0, 0, 1, 0};
  d.a = {1, 0, 1, 0, 1, 1, 0, 0};
  d.l = {0, 1, 1, 0, 0, 1, 1, 0};
  return d;
}

Dataset mnar8() {
  Dataset d;
  d.delta = {0, 0, 1, 0, 1, 0, 0, 1};
  d.y = {1, 0, k_nan, 1, k_nan, 0, 1, k_nan};
  d.a = {1, 0, 1, 0, 0, 1, 1, 1};
  d.l = {1, 1, 0, 0, 1, 0, 1, 1};
  return d;
}

Dataset mixture5() {
  Dataset d;
  d.delta = {0, 1, 0, 0, 1};
  d.y = {0.8, k_nan, -0.4, 1.9, k_nan};
  d.a = {1, 0, 0, 1, 1};
  d.l = {0.3, -1.2, 0.5, 2.0, -0.7};
  return d;
}

std::vector<double> draw_for(const ModelSpec& m, const std::map<std::string, double>& vals) {
  std::vector<double> x(m.dim(), 0.0);
  for (const auto& [name, v] : vals) {
    const auto idx = m.param_index(name);
    REQUIRE(idx.has_value());
    x[*idx] = v;
  }
  return x;
}

double ad_value(const ModelSpec& m, std::span<const double> x) {
  const auto [v, g] = ad::grad([&](std::span<const ad::Var> p) { return m.log_target_ad(p); }, x);
  return v;
}

std::vector<double> ad_gradient(const ModelSpec& m, std::span<const double> x) {
  auto [v, g] = ad::grad([&](std::span<const ad::Var> p) { return m.log_target_ad(p); }, x);
  return g;
}

std::vector<double> fd_gradient(const ModelSpec& m, std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = m.log_target(x);
    x[i] = saved - h;
    const double dn = m.log_target(x);
    x[i] = saved;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

void check_gradient(const ModelSpec& m, const std::vector<double>& x, double tol = 2e-5) {
  const auto ag = ad_gradient(m, x);
  const auto fg = fd_gradient(m, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK_THAT(ag[i], WithinAbs(fg[i], tol * (1.0 + std::abs(fg[i]))));
  }
}

MixParams random_mix_params(Rng& rng, std::size_t kk, std::size_t n_miss, bool alpha_sampled) {
  MixParams p;
  p.alpha_sampled = alpha_sampled;
  for (std::size_t k = 0; k < kk; ++k) {
    p.e0.push_back(rng.uniform(-1.5, 1.5));
    p.e1.push_back(rng.uniform(-1.5, 1.5));
    p.e2.push_back(rng.uniform(-1.5, 1.5));
    p.sig.push_back(rng.uniform(0.4, 2.5));
    p.g0.push_back(rng.uniform(-1.5, 1.5));
    p.g1.push_back(rng.uniform(-1.5, 1.5));
    p.th0.push_back(rng.uniform(-1.5, 1.5));
    p.ph.push_back(rng.uniform(0.4, 2.5));
  }
  for (std::size_t j = 0; j + 1 < kk; ++j) p.v.push_back(rng.uniform(0.1, 0.9));
  p.alpha = rng.uniform(0.3, 3.0);
  for (std::size_t j = 0; j < n_miss; ++j) p.ymiss.push_back(rng.uniform(-2.0, 2.0));
  return p;
}

std::vector<double> mixture_draw(const ModelSpec& m, const MixParams& p, bool with_xi) {
  std::map<std::string, double> vals;
  const std::size_t kk = p.e0.size();
  for (std::size_t k = 0; k < kk; ++k) {
    const std::string t = "[" + std::to_string(k + 1) + "]";
    vals["eta0" + t] = p.e0[k];
    vals["eta1" + t] = p.e1[k];
    vals["eta2" + t] = p.e2[k];
    vals["sigma" + t] = p.sig[k];
    vals["gamma0" + t] = p.g0[k];
    vals["gamma1" + t] = p.g1[k];
    vals["theta0" + t] = p.th0[k];
    vals["phi" + t] = p.ph[k];
  }
  for (std::size_t j = 0; j + 1 < kk; ++j) vals["v[" + std::to_string(j + 1) + "]"] = p.v[j];
  if (p.alpha_sampled) vals["alpha"] = p.alpha;
  for (std::size_t j = 0; j < p.ymiss.size(); ++j) {
    vals["y_miss[" + std::to_string(j + 1) + "]"] = p.ymiss[j];
  }
  if (with_xi) {
    vals["xi0"] = p.xi0;
    vals["xi1"] = p.xi1;
  }
  return draw_for(m, vals);
}

}  // namespace

TEST_CASE("complete-data target matches a hand computation on one row") {
  Dataset d;
  d.delta = {0};
  d.y = {1};
  d.a = {1};
  d.l = {0};
  const auto m = build_model(ModelKind::CompleteData, d, {});
  const auto x = draw_for(m, {{"eta0", 0}, {"eta1", 0}, {"eta2", 0}, {"theta", 0.5}});
  const double expected = std::log(0.5) + std::log(0.5) + 3.0 * o_norm(0, 0, 3);
  CHECK_THAT(m.log_target(x), WithinRel(expected, 1e-14));
  CHECK_THAT(ad_value(m, x), WithinRel(expected, 1e-14));
}

TEST_CASE("complete-data target matches the direct formula on random parameters") {
  const auto d = complete3();
  const auto m = build_model(ModelKind::CompleteData, d, {});
  Rng rng(51);
  for (int rep = 0; rep < 20; ++rep) {
    const std::array<double, 3> eta = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                       rng.uniform(-1.5, 1.5)};
    const double theta = rng.uniform(0.1, 0.9);
    const auto x =
        draw_for(m, {{"eta0", eta[0]}, {"eta1", eta[1]}, {"eta2", eta[2]}, {"theta", theta}});
    const double expected = o_complete(d, eta, theta);
    CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
    CHECK_THAT(ad_value(m, x), WithinAbs(expected, 1e-10));
  }
  check_gradient(m, draw_for(m, {{"eta0", 0.3}, {"eta1", -0.9}, {"eta2", 0.5}, {"theta", 0.4}}));
}

TEST_CASE("coefficients unseen by the likelihood shift the target by their prior alone") {
  Dataset d;
  d.delta = {0, 0};
  d.y = {1, 0};
  d.a = {0, 0};
  d.l = {0, 0};
  const auto m = build_model(ModelKind::CompleteData, d, {});
  const auto base = draw_for(m, {{"eta0", 0.4}, {"eta1", 0}, {"eta2", 0}, {"theta", 0.3}});
  const auto shifted = draw_for(m, {{"eta0", 0.4}, {"eta1", 3.0}, {"eta2", -1.7}, {"theta", 0.3}});
  const double diff = m.log_target(shifted) - m.log_target(base);
  const double expected = o_norm(3.0, 0, 3) + o_norm(-1.7, 0, 3) - 2.0 * o_norm(0, 0, 3);
  CHECK_THAT(diff, WithinAbs(expected, 1e-12));
}

TEST_CASE("complete-data model rejects datasets with missing outcomes") {
  auto d = mnar8();
  CHECK_THROWS_MATCHES(build_model(ModelKind::CompleteData, d, {}), ValidationError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("mnar")));
}

TEST_CASE("dataset validation catches malformed columns") {
  auto d = complete3();
  d.a[1] = 2;
  CHECK_THROWS_AS(build_model(ModelKind::CompleteData, d, {}), ValidationError);
  d = complete3();
  d.y[0] = 0.5;
  CHECK_THROWS_AS(build_model(ModelKind::CompleteData, d, {}), ValidationError);
  d = complete3();
  d.l[2] = 0.25;
  CHECK_THROWS_AS(build_model(ModelKind::CompleteData, d, {}), ValidationError);
  d = complete3();
  d.y.pop_back();
  CHECK_THROWS_AS(build_model(ModelKind::CompleteData, d, {}), ValidationError);
  d = mnar8();
  d.y[2] = 1.0;  // present on a row marked missing
  CHECK_THROWS_AS(build_model(ModelKind::MnarBinary, d, {}), ValidationError);
}

TEST_CASE("misclassification target equals exhaustive latent-exposure enumeration") {
  const auto d = complete8();
  Rng rng(52);
  SensitivityConfig sens;
  sens.entries["xi1"] = SensitivityEntry::point(0.8);
  sens.entries["xi2"] = SensitivityEntry::point(0.2);
  const auto m = build_model(ModelKind::Misclassification, d, sens);
  for (int rep = 0; rep < 20; ++rep) {
    const std::array<double, 3> eta = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                       rng.uniform(-1.5, 1.5)};
    const std::array<double, 2> gamma = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    const double theta = rng.uniform(0.1, 0.9);
    const auto x = draw_for(m, {{"eta0", eta[0]},
                                {"eta1", eta[1]},
                                {"eta2", eta[2]},
                                {"gamma0", gamma[0]},
                                {"gamma1", gamma[1]},
                                {"theta", theta}});
    const double expected = o_misclass_enum(d, eta, gamma, theta, 0.8, 0.2);
    CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
    CHECK_THAT(ad_value(m, x), WithinAbs(expected, 1e-10));
  }
  check_gradient(m, draw_for(m, {{"eta0", 0.2},
                                 {"eta1", -0.5},
                                 {"eta2", 0.8},
                                 {"gamma0", -0.3},
                                 {"gamma1", 0.6},
                                 {"theta", 0.45}}));
}

TEST_CASE("misclassification rates can be sampled under a normal prior") {
  const auto d = complete8();
  SensitivityConfig sens;
  sens.entries["xi1"] = SensitivityEntry::normal(0.9, 0.5);
  sens.entries["xi2"] = SensitivityEntry::point(0.2);
  const auto m = build_model(ModelKind::Misclassification, d, sens);
  REQUIRE(m.param_index("xi1").has_value());
  const auto x = draw_for(m, {{"eta0", 0.2},
                              {"eta1", -0.5},
                              {"eta2", 0.8},
                              {"gamma0", -0.3},
                              {"gamma1", 0.6},
                              {"theta", 0.45},
                              {"xi1", 0.75}});
  const double expected =
      o_misclass_enum(d, {0.2, -0.5, 0.8}, {-0.3, 0.6}, 0.45, 0.75, 0.2) + o_norm(0.75, 0.9, 0.5);
  CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
  check_gradient(m, x);
}

TEST_CASE("near-perfect ascertainment collapses to the complete-data target") {
  const auto d = complete8();
  SensitivityConfig sens;
  sens.entries["xi1"] = SensitivityEntry::point(1.0 - 1e-12);
  sens.entries["xi2"] = SensitivityEntry::point(1e-12);
  const auto m2 = build_model(ModelKind::Misclassification, d, sens);
  const auto m1 = build_model(ModelKind::CompleteData, d, {});
  const double g0 = -0.4, g1 = 0.7;
  const auto x2 = draw_for(m2, {{"eta0", 0.3},
                                {"eta1", -0.8},
                                {"eta2", 0.6},
                                {"gamma0", g0},
                                {"gamma1", g1},
                                {"theta", 0.35}});
  const auto x1 = draw_for(m1, {{"eta0", 0.3}, {"eta1", -0.8}, {"eta2", 0.6}, {"theta", 0.35}});
  double treatment_terms = o_norm(g0, 0, 3) + o_norm(g1, 0, 3);
  for (std::size_t i = 0; i < d.n(); ++i) {
    treatment_terms += o_ber(d.a[i], o_expit(g0 + g1 * d.l[i]));
  }
  CHECK_THAT(m2.log_target(x2), WithinAbs(m1.log_target(x1) + treatment_terms, 1e-6));
}

TEST_CASE("relabeling the latent exposure swaps the misclassification rates") {
  // flipping both the surrogate and the latent exposure maps (xi1, xi2) to
  // (1-xi2, 1-xi1), negates the treatment model, and folds the treatment
  // coefficient into the outcome intercept
  Rng rng(53);
  for (int atilde = 0; atilde <= 1; ++atilde) {
    for (int yv = 0; yv <= 1; ++yv) {
      for (int lv = 0; lv <= 1; ++lv) {
        Dataset da;
        da.delta = {0};
        da.y = {static_cast<double>(yv)};
        da.a = {atilde};
        da.l = {static_cast<double>(lv)};
        Dataset db = da;
        db.a = {1 - atilde};

        const double e0 = rng.uniform(-1.5, 1.5), e1 = rng.uniform(-1.5, 1.5),
                     e2 = rng.uniform(-1.5, 1.5);
        const double g0 = rng.uniform(-1.5, 1.5), g1 = rng.uniform(-1.5, 1.5);
        const double xi1 = rng.uniform(0.55, 0.95), xi2 = rng.uniform(0.05, 0.45);
        const double theta = 0.5;

        SensitivityConfig sa;
        sa.entries["xi1"] = SensitivityEntry::point(xi1);
        sa.entries["xi2"] = SensitivityEntry::point(xi2);
        SensitivityConfig sb;
        sb.entries["xi1"] = SensitivityEntry::point(1.0 - xi2);
        sb.entries["xi2"] = SensitivityEntry::point(1.0 - xi1);

        const auto ma = build_model(ModelKind::Misclassification, da, sa);
        const auto mb = build_model(ModelKind::Misclassification, db, sb);
        const auto xa = draw_for(ma, {{"eta0", e0},
                                      {"eta1", e1},
                                      {"eta2", e2},
                                      {"gamma0", g0},
                                      {"gamma1", g1},
                                      {"theta", theta}});
        const auto xb = draw_for(mb, {{"eta0", e0 + e2},
                                      {"eta1", e1},
                                      {"eta2", -e2},
                                      {"gamma0", -g0},
                                      {"gamma1", -g1},
                                      {"theta", theta}});
        const double prior_a = o_norm(e0, 0, 3) + o_norm(e2, 0, 3) + o_norm(g0, 0, 3);
        const double prior_b = o_norm(e0 + e2, 0, 3) + o_norm(-e2, 0, 3) + o_norm(-g0, 0, 3);
        CHECK_THAT(ma.log_target(xa) - prior_a, WithinAbs(mb.log_target(xb) - prior_b, 1e-12));
      }
    }
  }
}

TEST_CASE("misclassification rates must stay inside the unit interval") {
  const auto d = complete8();
  SensitivityConfig sens;
  sens.entries["xi1"] = SensitivityEntry::point(1.2);
  CHECK_THROWS_AS(build_model(ModelKind::Misclassification, d, sens), ValidationError);
  sens.entries["xi1"] = SensitivityEntry::point(0.0);
  CHECK_THROWS_AS(build_model(ModelKind::Misclassification, d, sens), ValidationError);
}

TEST_CASE("grid sensitivity entries are rejected outside a sweep") {
  const auto d = complete8();
  SensitivityConfig sens;
  sens.entries["xi1"] = SensitivityEntry::grid_of({0.8, 0.9});
  CHECK_THROWS_MATCHES(build_model(ModelKind::Misclassification, d, sens), ValidationError,
                       Catch::Matchers::MessageMatches(ContainsSubstring("sweep")));
}

TEST_CASE("unknown sensitivity parameters are rejected") {
  const auto d = complete8();
  SensitivityConfig sens;
  sens.entries["zeta"] = SensitivityEntry::point(0.5);
  CHECK_THROWS_AS(build_model(ModelKind::Misclassification, d, sens), ValidationError);
  CHECK_THROWS_AS(build_model(ModelKind::CompleteData, d, sens), ValidationError);
}

TEST_CASE("unmeasured-confounder target matches the direct formula") {
  const auto d = complete3();
  Rng rng(54);
  SensitivityConfig sens;
  sens.entries["xi1"] = SensitivityEntry::point(-0.9);
  sens.entries["xi2"] = SensitivityEntry::point(1.3);
  const auto m = build_model(ModelKind::UnmeasuredConfounder, d, sens);
  REQUIRE(m.dim() == 6 + d.n());
  for (int rep = 0; rep < 20; ++rep) {
    const std::array<double, 3> eta = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                       rng.uniform(-1.5, 1.5)};
    const std::array<double, 2> gamma = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    const double theta = rng.uniform(0.1, 0.9);
    std::vector<double> u = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    auto x = draw_for(m, {{"eta0", eta[0]},
                          {"eta1", eta[1]},
                          {"eta2", eta[2]},
                          {"gamma0", gamma[0]},
                          {"gamma1", gamma[1]},
                          {"theta", theta},
                          {"u[1]", u[0]},
                          {"u[2]", u[1]},
                          {"u[3]", u[2]}});
    const double expected = o_unmeasured(d, eta, gamma, theta, u, -0.9, 1.3);
    CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
    CHECK_THAT(ad_value(m, x), WithinAbs(expected, 1e-10));
  }
  check_gradient(m, draw_for(m, {{"eta0", 0.4},
                                 {"eta1", -0.2},
                                 {"eta2", 0.7},
                                 {"gamma0", 0.1},
                                 {"gamma1", -0.8},
                                 {"theta", 0.6},
                                 {"u[1]", 0.5},
                                 {"u[2]", -1.2},
                                 {"u[3]", 0.9}}));
}

TEST_CASE("null confounding loadings reduce the latent block to its prior") {
  const auto d = complete3();
  const auto m = build_model(ModelKind::UnmeasuredConfounder, d, {});  // defaults xi1 = xi2 = 0
  const auto x = draw_for(m, {{"eta0", 0.4},
                              {"eta1", -0.2},
                              {"eta2", 0.7},
                              {"gamma0", 0.1},
                              {"gamma1", -0.8},
                              {"theta", 0.6},
                              {"u[1]", 0.5},
                              {"u[2]", -1.2},
                              {"u[3]", 0.9}});
  const auto g = ad_gradient(m, x);
  for (std::size_t i = 1; i <= 3; ++i) {
    const auto idx = m.param_index("u[" + std::to_string(i) + "]");
    REQUIRE(idx.has_value());
    CHECK(g[*idx] == -x[*idx]);
  }
}

TEST_CASE("negating the latent scores and both loadings leaves the target unchanged") {
  const auto d = complete3();
  SensitivityConfig sa, sb;
  sa.entries["xi1"] = SensitivityEntry::point(-0.9);
  sa.entries["xi2"] = SensitivityEntry::point(1.3);
  sb.entries["xi1"] = SensitivityEntry::point(0.9);
  sb.entries["xi2"] = SensitivityEntry::point(-1.3);
  const auto ma = build_model(ModelKind::UnmeasuredConfounder, d, sa);
  const auto mb = build_model(ModelKind::UnmeasuredConfounder, d, sb);
  const std::map<std::string, double> common = {{"eta0", 0.4}, {"eta1", -0.2}, {"eta2", 0.7},
                                                {"gamma0", 0.1}, {"gamma1", -0.8}, {"theta", 0.6}};
  auto va = common, vb = common;
  va["u[1]"] = 0.5;
  va["u[2]"] = -1.2;
  va["u[3]"] = 0.9;
  vb["u[1]"] = -0.5;
  vb["u[2]"] = 1.2;
  vb["u[3]"] = -0.9;
  CHECK(ma.log_target(draw_for(ma, va)) == mb.log_target(draw_for(mb, vb)));
}

TEST_CASE("outcome-missingness target equals exhaustive enumeration") {
  const auto d = mnar8();
  Rng rng(55);
  for (int rep = 0; rep < 20; ++rep) {
    const double xi0 = rng.uniform(-1.5, 1.5);
    const double xi1 = rng.uniform(-1.5, 1.5);
    const double xi3 = rng.uniform(-1.5, 1.5);
    SensitivityConfig sens;
    sens.entries["xi0"] = SensitivityEntry::point(xi0);
    sens.entries["xi1"] = SensitivityEntry::point(xi1);
    sens.entries["xi3"] = SensitivityEntry::point(xi3);
    const auto m = build_model(ModelKind::MnarBinary, d, sens);
    const std::array<double, 3> eta = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                       rng.uniform(-1.5, 1.5)};
    const double theta = rng.uniform(0.1, 0.9);
    const auto x =
        draw_for(m, {{"eta0", eta[0]}, {"eta1", eta[1]}, {"eta2", eta[2]}, {"theta", theta}});
    const double expected = o_mnar_enum(d, eta, theta, xi0, xi1, xi3);
    CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
    CHECK_THAT(ad_value(m, x), WithinAbs(expected, 1e-10));
  }
}

TEST_CASE("missingness coefficients are sampled by default") {
  const auto d = mnar8();
  const auto m = build_model(ModelKind::MnarBinary, d, {});
  REQUIRE(m.param_index("xi0").has_value());
  REQUIRE(m.param_index("xi1").has_value());
  CHECK_FALSE(m.param_index("xi3").has_value());  // point mass at the ignorable value
  const auto x = draw_for(
      m, {{"eta0", 0.3}, {"eta1", -0.4}, {"eta2", 0.9}, {"theta", 0.55}, {"xi0", -1.1}, {"xi1", 0.8}});
  const double expected =
      o_mnar_enum(d, {0.3, -0.4, 0.9}, 0.55, -1.1, 0.8, 0.0) + o_norm(-1.1, 0, 3) + o_norm(0.8, 0, 3);
  CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
  check_gradient(m, x);
}

TEST_CASE("ignorable missingness leaves outcome information to observed rows only") {
  const auto d = mnar8();
  const double c0 = -0.6, c1 = 0.9;
  SensitivityConfig sens;
  sens.entries["xi0"] = SensitivityEntry::point(c0);
  sens.entries["xi1"] = SensitivityEntry::point(c1);
  sens.entries["xi3"] = SensitivityEntry::point(0.0);
  const auto m4 = build_model(ModelKind::MnarBinary, d, sens);

  Dataset sub;
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (d.delta[i] == 1) continue;
    sub.delta.push_back(0);
    sub.y.push_back(d.y[i]);
    sub.a.push_back(d.a[i]);
    sub.l.push_back(d.l[i]);
  }
  const auto m1 = build_model(ModelKind::CompleteData, sub, {});

  const std::map<std::string, double> vals = {
      {"eta0", 0.3}, {"eta1", -0.4}, {"eta2", 0.9}, {"theta", 0.55}};
  const auto x4 = draw_for(m4, vals);
  const auto x1 = draw_for(m1, vals);

  double extra = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double p_miss = o_expit(c0 + c1 * d.a[i]);
    extra += d.delta[i] == 1 ? std::log(p_miss) + o_ber(static_cast<int>(d.l[i]), 0.55)
                             : std::log(1.0 - p_miss);
  }
  CHECK_THAT(m4.log_target(x4), WithinAbs(m1.log_target(x1) + extra, 1e-12));

  // the outcome-model gradient sees only observed rows
  const auto g4 = ad_gradient(m4, x4);
  const auto g1 = ad_gradient(m1, x1);
  for (const char* name : {"eta0", "eta1", "eta2"}) {
    CHECK_THAT(g4[*m4.param_index(name)], WithinAbs(g1[*m1.param_index(name)], 1e-13));
  }
}

TEST_CASE("fully observed data reduces the missingness model to complete-data terms") {
  const auto d = complete8();
  SensitivityConfig sens;
  sens.entries["xi0"] = SensitivityEntry::point(-0.7);
  sens.entries["xi1"] = SensitivityEntry::point(0.5);
  sens.entries["xi3"] = SensitivityEntry::point(1.1);
  const auto m4 = build_model(ModelKind::MnarBinary, d, sens);
  const auto m1 = build_model(ModelKind::CompleteData, d, {});
  const std::map<std::string, double> vals = {
      {"eta0", 0.3}, {"eta1", -0.4}, {"eta2", 0.9}, {"theta", 0.55}};
  double miss_terms = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    miss_terms += o_ber(0, o_expit(-0.7 + 0.5 * d.a[i] + 1.1 * d.a[i] * d.y[i]));
  }
  CHECK_THAT(m4.log_target(draw_for(m4, vals)),
             WithinAbs(m1.log_target(draw_for(m1, vals)) + miss_terms, 1e-12));
}

TEST_CASE("mixture target matches the direct formula") {
  const auto d = mixture5();
  Rng rng(56);
  MixtureOptions opt;
  opt.components = 2;
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_mix_params(rng, 2, d.n_missing(), true);
    p.xi0 = rng.uniform(-1.0, 1.0);
    p.xi1 = rng.uniform(-1.0, 1.0);
    p.xi3 = rng.uniform(-1.0, 1.0);
    SensitivityConfig sens;
    sens.entries["xi0"] = SensitivityEntry::point(p.xi0);
    sens.entries["xi1"] = SensitivityEntry::point(p.xi1);
    sens.entries["xi3"] = SensitivityEntry::point(p.xi3);
    const auto m = build_model(ModelKind::MnarMixture, d, sens, opt);
    const auto x = mixture_draw(m, p, false);
    const double expected = o_mixture(d, p);
    CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
    CHECK_THAT(ad_value(m, x), WithinAbs(expected, 1e-10));
  }
}

TEST_CASE("mixture missingness coefficients are sampled by default and differentiable") {
  const auto d = mixture5();
  MixtureOptions opt;
  opt.components = 2;
  const auto m = build_model(ModelKind::MnarMixture, d, {}, opt);
  Rng rng(57);
  auto p = random_mix_params(rng, 2, d.n_missing(), true);
  p.xi0 = -0.4;
  p.xi1 = 0.7;
  p.xi3 = 0.0;
  const auto x = mixture_draw(m, p, true);
  const double expected = o_mixture(d, p) + o_norm(p.xi0, 0, 3) + o_norm(p.xi1, 0, 3);
  CHECK_THAT(m.log_target(x), WithinAbs(expected, 1e-10));
  check_gradient(m, x, 5e-5);
}

TEST_CASE("a single-component mixture is one parametric regression") {
  const auto d = mixture5();
  MixtureOptions opt;
  opt.components = 1;
  SensitivityConfig sens;
  sens.entries["xi0"] = SensitivityEntry::point(0.3);
  sens.entries["xi1"] = SensitivityEntry::point(-0.2);
  const auto m = build_model(ModelKind::MnarMixture, d, sens, opt);
  CHECK_FALSE(m.param_index("v[1]").has_value());
  CHECK_FALSE(m.param_index("alpha").has_value());
  Rng rng(58);
  auto p = random_mix_params(rng, 1, d.n_missing(), false);
  p.xi0 = 0.3;
  p.xi1 = -0.2;
  const auto x = mixture_draw(m, p, false);
  CHECK_THAT(m.log_target(x), WithinAbs(o_mixture(d, p), 1e-10));
}

TEST_CASE("permuting mixture components changes only the stick priors") {
  const auto d = mixture5();
  MixtureOptions opt;
  opt.components = 3;
  SensitivityConfig sens;
  sens.entries["xi0"] = SensitivityEntry::point(0.2);
  sens.entries["xi1"] = SensitivityEntry::point(-0.5);
  const auto m = build_model(ModelKind::MnarMixture, d, sens, opt);
  Rng rng(59);
  auto p = random_mix_params(rng, 3, d.n_missing(), true);
  p.xi0 = 0.2;
  p.xi1 = -0.5;

  const auto nu = stick_breaking(p.v);
  const std::array<std::size_t, 3> perm = {2, 0, 1};
  MixParams q = p;
  for (std::size_t k = 0; k < 3; ++k) {
    q.e0[k] = p.e0[perm[k]];
    q.e1[k] = p.e1[perm[k]];
    q.e2[k] = p.e2[perm[k]];
    q.sig[k] = p.sig[perm[k]];
    q.g0[k] = p.g0[perm[k]];
    q.g1[k] = p.g1[perm[k]];
    q.th0[k] = p.th0[perm[k]];
    q.ph[k] = p.ph[perm[k]];
  }
  // stick fractions that reproduce the permuted weights
  q.v[0] = nu[perm[0]];
  q.v[1] = nu[perm[1]] / (1.0 - q.v[0]);

  auto stick_prior = [&](const MixParams& mp) {
    double s = 0.0;
    for (double vj : mp.v) s += std::log(mp.alpha) + (mp.alpha - 1.0) * std::log(1.0 - vj);
    return s;
  };
  const double ta = m.log_target(mixture_draw(m, p, false));
  const double tb = m.log_target(mixture_draw(m, q, false));
  CHECK_THAT(tb - ta, WithinAbs(stick_prior(q) - stick_prior(p), 1e-11));
}

TEST_CASE("mixture options are validated") {
  const auto d = mixture5();
  MixtureOptions opt;
  opt.components = 0;
  CHECK_THROWS_AS(build_model(ModelKind::MnarMixture, d, {}, opt), ConfigError);
  opt.components = 51;
  CHECK_THROWS_AS(build_model(ModelKind::MnarMixture, d, {}, opt), ConfigError);
  opt = {};
  opt.gq_mc_draws = 0;
  CHECK_THROWS_AS(build_model(ModelKind::MnarMixture, d, {}, opt), ConfigError);
  opt = {};
  opt.sample_alpha = false;
  opt.fixed_alpha = 0.0;
  CHECK_THROWS_AS(build_model(ModelKind::MnarMixture, d, {}, opt), ConfigError);
}

TEST_CASE("missing outcomes start at the observed-outcome mean") {
  const auto d = mixture5();
  MixtureOptions opt;
  opt.components = 2;
  const auto m = build_model(ModelKind::MnarMixture, d, {}, opt);
  const double mean = (0.8 - 0.4 + 1.9) / 3.0;
  for (const char* name : {"y_miss[1]", "y_miss[2]"}) {
    const auto idx = m.param_index(name);
    REQUIRE(idx.has_value());
    REQUIRE(m.params[*idx].init.has_value());
    CHECK_THAT(*m.params[*idx].init, WithinRel(mean, 1e-15));
  }
}

TEST_CASE("stick breaking maps fractions to simplex weights") {
  CHECK(stick_breaking(std::vector<double>{0.3}) == std::vector<double>{0.3, 0.7});
  CHECK(stick_breaking(std::vector<double>{0.5, 0.5}) == std::vector<double>{0.5, 0.25, 0.25});
  CHECK(stick_breaking(std::vector<double>{}) == std::vector<double>{1.0});

  Rng rng(60);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(9);
    for (auto& x : v) x = rng.uniform(0.01, 0.99);
    const auto nu = stick_breaking(v);
    REQUIRE(nu.size() == 10);
    double total = 0.0, prefix = 1.0;
    for (std::size_t k = 0; k < 9; ++k) {
      CHECK_THAT(nu[k], WithinRel(v[k] * prefix, 1e-14));
      prefix *= 1.0 - v[k];
      total += nu[k];
      CHECK(nu[k] > 0.0);
    }
    CHECK_THAT(nu[9], WithinRel(prefix, 1e-14));
    total += nu[9];
    CHECK_THAT(total, WithinAbs(1.0, 1e-12));
  }
  CHECK_THROWS_AS(stick_breaking(std::vector<double>{0.5, 0.0}), std::domain_error);
  CHECK_THROWS_AS(stick_breaking(std::vector<double>{1.0}), std::domain_error);
}

TEST_CASE("generated quantities standardize the treatment effect") {
  const auto d = complete3();
  const auto m = build_model(ModelKind::CompleteData, d, {});
  REQUIRE(m.generated_names == std::vector<std::string>{"ate"});
  Rng rng(61);
  double out[1];

  m.generated(draw_for(m, {{"eta0", 0.7}, {"eta1", -1.1}, {"eta2", 0.0}, {"theta", 0.4}}), rng,
              out);
  CHECK(out[0] == 0.0);

  m.generated(draw_for(m, {{"eta0", 0.0}, {"eta1", 0.0}, {"eta2", 1.0}, {"theta", 0.5}}), rng,
              out);
  CHECK_THAT(out[0], WithinRel(expit(1.0) - 0.5, 1e-14));
  CHECK_THAT(out[0], WithinAbs(0.2310585786300049, 1e-13));
}

TEST_CASE("latent-confounder generated quantities integrate over the confounder") {
  const auto d = complete3();
  SensitivityConfig sens;
  sens.entries["xi1"] = SensitivityEntry::point(0.8);
  const auto m = build_model(ModelKind::UnmeasuredConfounder, d, sens);
  const auto x = draw_for(m, {{"eta0", 0.4},
                              {"eta1", -0.2},
                              {"eta2", 0.7},
                              {"gamma0", 0.1},
                              {"gamma1", -0.8},
                              {"theta", 0.6}});
  Rng rng(62);
  double out[1];
  m.generated(x, rng, out);
  const double expected =
      gformula_with_u({0.4, -0.2, 0.7}, 0.8, 0.6, gauss_hermite_standard_normal(32));
  CHECK_THAT(out[0], WithinRel(expected, 1e-14));
}

TEST_CASE("single-component mixture generated quantities return the treatment coefficient") {
  const auto d = mixture5();
  MixtureOptions opt;
  opt.components = 1;
  const auto m = build_model(ModelKind::MnarMixture, d, {}, opt);
  Rng rng(63);
  auto p = random_mix_params(rng, 1, d.n_missing(), false);
  p.xi0 = 0.0;
  p.xi1 = 0.0;
  auto vals = mixture_draw(m, p, true);
  Rng gq(64);
  double out[1];
  m.generated(vals, gq, out);
  CHECK_THAT(out[0], WithinRel(p.e2[0], 1e-13));
}

TEST_CASE("every parameter moves the target") {
  Rng rng(65);
  auto nonzero_grad = [&](const ModelSpec& m, const std::vector<double>& x) {
    const auto g = ad_gradient(m, x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      INFO(m.name << ": " << m.params[i].name);
      CHECK(g[i] != 0.0);
    }
  };
  {
    const auto m = build_model(ModelKind::MnarBinary, mnar8(), {});
    nonzero_grad(m, draw_for(m, {{"eta0", 0.31},
                                 {"eta1", -0.47},
                                 {"eta2", 0.93},
                                 {"theta", 0.55},
                                 {"xi0", -1.13},
                                 {"xi1", 0.82}}));
  }
  {
    MixtureOptions opt;
    opt.components = 2;
    const auto m = build_model(ModelKind::MnarMixture, mixture5(), {}, opt);
    auto p = random_mix_params(rng, 2, 2, true);
    p.xi0 = -0.39;
    p.xi1 = 0.64;
    nonzero_grad(m, mixture_draw(m, p, true));
  }
}

TEST_CASE("near-null misclassification reproduces the complete-data posterior") {
  // simulate a complete binary dataset, fit both models, compare ATE posteriors
  Rng rng(66);
  Dataset d;
  for (int i = 0; i < 60; ++i) {
    const double l = rng.bernoulli(0.4);
    const int a = rng.bernoulli(expit(0.2 - 0.6 * l));
    const int y = rng.bernoulli(expit(-0.5 + 0.8 * l + 0.7 * a));
    d.delta.push_back(0);
    d.y.push_back(y);
    d.a.push_back(a);
    d.l.push_back(l);
  }
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 400;
  cfg.sampling = 400;
  cfg.seed = 71;

  const auto m1 = build_model(ModelKind::CompleteData, d, {});
  const auto fit1 = hmc_sample(m1, cfg);
  const auto s1 = summarize(fit1.by_chain(*fit1.index_of("ate")));

  const auto m2 = build_model(ModelKind::Misclassification, d, {});  // defaults nearly error-free
  const auto fit2 = hmc_sample(m2, cfg);
  const auto s2 = summarize(fit2.by_chain(*fit2.index_of("ate")));

  REQUIRE(s1.mcse.has_value());
  REQUIRE(s2.mcse.has_value());
  CHECK_THAT(s1.mean, WithinAbs(s2.mean, 2.0 * (*s1.mcse + *s2.mcse)));
}

TEST_CASE("ignorable missingness matches a complete-case fit") {
  Rng rng(67);
  Dataset d, sub;
  for (int i = 0; i < 80; ++i) {
    const double l = rng.bernoulli(0.5);
    const int a = rng.bernoulli(expit(0.3 - 0.4 * l));
    const int y = rng.bernoulli(expit(-0.2 + 0.6 * l + 0.8 * a));
    const int miss = rng.bernoulli(0.25);
    d.delta.push_back(miss);
    d.y.push_back(miss ? k_nan : y);
    d.a.push_back(a);
    d.l.push_back(l);
    if (!miss) {
      sub.delta.push_back(0);
      sub.y.push_back(y);
      sub.a.push_back(a);
      sub.l.push_back(l);
    }
  }
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 400;
  cfg.sampling = 400;
  cfg.seed = 72;

  const auto m4 = build_model(ModelKind::MnarBinary, d, {});  // xi3 pinned to 0: ignorable
  const auto fit4 = hmc_sample(m4, cfg);
  const auto m1 = build_model(ModelKind::CompleteData, sub, {});
  const auto fit1 = hmc_sample(m1, cfg);

  for (const char* name : {"eta0", "eta1", "eta2"}) {
    const auto s4 = summarize(fit4.by_chain(*fit4.index_of(name)));
    const auto s1 = summarize(fit1.by_chain(*fit1.index_of(name)));
    REQUIRE(s4.mcse.has_value());
    REQUIRE(s1.mcse.has_value());
    INFO(name);
    CHECK_THAT(s4.mean, WithinAbs(s1.mean, 2.0 * (*s4.mcse + *s1.mcse)));
  }
}
