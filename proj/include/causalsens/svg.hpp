#pragma once

// Static SVG plots, emitted directly as text: sweep curves with credible
// bands, sweep heatmaps, and the mixture-model regression overlay. Output
// is deterministic; an optional timestamp comment is the only run-varying
// field and is off unless explicitly supplied.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "causalsens/dataset.hpp"
#include "causalsens/errors.hpp"
#include "causalsens/hmc.hpp"
#include "causalsens/io.hpp"
#include "causalsens/models.hpp"
#include "causalsens/sweep.hpp"

namespace causalsens {

struct SvgOptions {
  int width = 720;
  int height = 480;
  std::string timestamp;  // stamped as a comment when nonempty
  HeaderLines meta;       // provenance comments (config, seed, ...)
};

namespace svg_detail {

inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Linear data->pixel map; degenerate ranges get padded so a single point
// still lands mid-plot.
struct Scale {
  double lo = 0.0, hi = 1.0, px_lo = 0.0, px_hi = 1.0;

  Scale(double a, double b, double p0, double p1) {
    if (!(b > a)) {
      const double pad = a == 0.0 ? 1.0 : std::abs(a) * 0.5;
      lo = a - pad;
      hi = a + pad;
    } else {
      const double pad = (b - a) * 0.05;
      lo = a - pad;
      hi = b + pad;
    }
    px_lo = p0;
    px_hi = p1;
  }

  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

struct Frame {
  int width, height;
  double left = 70.0, right = 20.0, top = 20.0, bottom = 50.0;

  double x0() const { return left; }
  double x1() const { return width - right; }
  double y0() const { return top; }
  double y1() const { return height - bottom; }
};

inline std::string open_svg(const SvgOptions& opt) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.width) +
         "\" height=\"" + std::to_string(opt.height) + "\" viewBox=\"0 0 " +
         std::to_string(opt.width) + " " + std::to_string(opt.height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (const auto& [key, value] : opt.meta) {
    out += "<!-- " + xml_escape(key) + ": " + xml_escape(value) + " -->\n";
  }
  if (!opt.timestamp.empty()) out += "<!-- timestamp: " + xml_escape(opt.timestamp) + " -->\n";
  return out;
}

inline void axes(std::string& out, const Frame& f) {
  out += "<line class=\"axis\" x1=\"" + px(f.x0()) + "\" y1=\"" + px(f.y1()) + "\" x2=\"" +
         px(f.x1()) + "\" y2=\"" + px(f.y1()) + "\" stroke=\"#333333\"/>\n";
  out += "<line class=\"axis\" x1=\"" + px(f.x0()) + "\" y1=\"" + px(f.y0()) + "\" x2=\"" +
         px(f.x0()) + "\" y2=\"" + px(f.y1()) + "\" stroke=\"#333333\"/>\n";
}

inline void x_tick(std::string& out, const Frame& f, double xpx, const std::string& label) {
  out += "<text class=\"tick\" x=\"" + px(xpx) + "\" y=\"" + px(f.y1() + 16.0) +
         "\" text-anchor=\"middle\">" + xml_escape(label) + "</text>\n";
}

inline void y_tick(std::string& out, const Frame& f, double ypx, const std::string& label) {
  out += "<text class=\"tick\" x=\"" + px(f.x0() - 6.0) + "\" y=\"" + px(ypx + 4.0) +
         "\" text-anchor=\"end\">" + xml_escape(label) + "</text>\n";
}

inline void y_ticks(std::string& out, const Frame& f, const Scale& sy) {
  for (int k = 0; k <= 4; ++k) {
    const double v = sy.lo + (sy.hi - sy.lo) * k / 4.0;
    y_tick(out, f, sy(v), tick_label(v));
  }
}

inline void x_label(std::string& out, const Frame& f, const std::string& name) {
  out += "<text class=\"axis-label\" x=\"" + px((f.x0() + f.x1()) / 2.0) + "\" y=\"" +
         px(f.y1() + 36.0) + "\" text-anchor=\"middle\">" + xml_escape(name) + "</text>\n";
}

inline void y_label(std::string& out, const Frame& f, const std::string& name) {
  out += "<text class=\"axis-label\" x=\"" + px(f.x0() - 6.0) + "\" y=\"" + px(f.y0() - 6.0) +
         "\" text-anchor=\"end\">" + xml_escape(name) + "</text>\n";
}

}  // namespace svg_detail

/// Mean line with a 95% credible band over a one-axis sweep. Failed grid
/// points split the band; markers sit on the posterior means.
inline std::string svg_sweep_curve(const SweepTable& t, const SvgOptions& opt = {}) {
  using namespace svg_detail;
  if (t.axes.size() != 1) {
    throw ValidationError("sweep curve plot needs exactly one swept axis, got " +
                          std::to_string(t.axes.size()));
  }
  if (t.rows.empty()) throw ValidationError("sweep curve plot: empty table");

  double xlo = 0.0, xhi = 0.0, ylo = 0.0, yhi = 0.0;
  bool first = true;
  for (const auto& r : t.rows) {
    if (first || r.values[0] < xlo) xlo = r.values[0];
    if (first || r.values[0] > xhi) xhi = r.values[0];
    first = false;
  }
  bool any_ok = false;
  for (const auto& r : t.rows) {
    if (r.failed) continue;
    if (!any_ok || r.ate.q025 < ylo) ylo = r.ate.q025;
    if (!any_ok || r.ate.q975 > yhi) yhi = r.ate.q975;
    any_ok = true;
  }
  if (!any_ok) throw ValidationError("sweep curve plot: every grid point failed");

  Frame f{opt.width, opt.height};
  Scale sx(xlo, xhi, f.x0(), f.x1());
  Scale sy(ylo, yhi, f.y1(), f.y0());  // pixel y grows downward

  std::string out = open_svg(opt);
  axes(out, f);

  // maximal runs of non-failed rows
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < t.rows.size();) {
    if (t.rows[i].failed) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < t.rows.size() && !t.rows[j].failed) ++j;
    runs.emplace_back(i, j);
    i = j;
  }

  if (sy.lo < 0.0 && sy.hi > 0.0) {
    out += "<line class=\"threshold\" x1=\"" + px(f.x0()) + "\" y1=\"" + px(sy(0.0)) +
           "\" x2=\"" + px(f.x1()) + "\" y2=\"" + px(sy(0.0)) +
           "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (const auto& [b, e] : runs) {
    std::string band = "<polygon class=\"cri-band\" fill=\"#c6dbef\" stroke=\"none\" points=\"";
    for (std::size_t i = b; i < e; ++i) {
      band += px(sx(t.rows[i].values[0])) + "," + px(sy(t.rows[i].ate.q975)) + " ";
    }
    for (std::size_t i = e; i-- > b;) {
      band += px(sx(t.rows[i].values[0])) + "," + px(sy(t.rows[i].ate.q025));
      if (i != b) band += " ";
    }
    out += band + "\"/>\n";
  }
  for (const auto& [b, e] : runs) {
    std::string line =
        "<polyline class=\"mean-line\" fill=\"none\" stroke=\"#2171b5\" stroke-width=\"2\" "
        "points=\"";
    for (std::size_t i = b; i < e; ++i) {
      line += px(sx(t.rows[i].values[0])) + "," + px(sy(t.rows[i].ate.mean));
      if (i + 1 != e) line += " ";
    }
    out += line + "\"/>\n";
  }
  for (const auto& r : t.rows) {
    if (r.failed) continue;
    out += "<circle class=\"grid-point\" cx=\"" + px(sx(r.values[0])) + "\" cy=\"" +
           px(sy(r.ate.mean)) + "\" r=\"3.5\" fill=\"#08306b\"/>\n";
  }

  // every grid value labels the axis while they still fit
  std::vector<double> grid;
  if (!t.grids.empty()) grid = t.grids[0];
  if (grid.size() <= 12) {
    for (double v : grid) x_tick(out, f, sx(v), tick_label(v));
  } else {
    for (int k = 0; k <= 6; ++k) {
      const std::size_t i = static_cast<std::size_t>(
          std::lround(static_cast<double>(k) * static_cast<double>(grid.size() - 1) / 6.0));
      x_tick(out, f, sx(grid[i]), tick_label(grid[i]));
    }
  }
  y_ticks(out, f, sy);
  x_label(out, f, t.axes[0]);
  y_label(out, f, "ate");
  out += "</svg>\n";
  return out;
}

/// One colored cell per grid point of a two-axis sweep; a diverging palette
/// centered at zero shows the chosen credible-interval bound.
inline std::string svg_sweep_heatmap(const SweepTable& t, CriBound bound,
                                     const SvgOptions& opt = {}) {
  using namespace svg_detail;
  if (t.axes.size() != 2) {
    throw ValidationError("heatmap plot needs exactly two swept axes, got " +
                          std::to_string(t.axes.size()));
  }
  const std::size_t n1 = t.grids[0].size();
  const std::size_t n2 = t.grids[1].size();
  if (t.rows.size() != n1 * n2 || n1 == 0 || n2 == 0) {
    throw ValidationError("heatmap plot needs a full cartesian table");
  }

  double maxabs = 0.0;
  for (const auto& r : t.rows) {
    if (r.failed) continue;
    const double v = bound == CriBound::Upper ? r.ate.q975 : r.ate.q025;
    maxabs = std::max(maxabs, std::abs(v));
  }
  if (maxabs == 0.0) maxabs = 1.0;

  Frame f{opt.width, opt.height};
  const double cw = (f.x1() - f.x0()) / static_cast<double>(n2);
  const double ch = (f.y1() - f.y0()) / static_cast<double>(n1);

  std::string out = open_svg(opt);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const SweepRow& r = t.rows[i * n2 + j];
      const double x = f.x0() + static_cast<double>(j) * cw;
      const double y = f.y0() + static_cast<double>(i) * ch;
      std::string fill, cls, title;
      if (r.failed) {
        cls = "cell failed";
        fill = "#dddddd";
        title = r.error;
      } else {
        cls = "cell";
        const double v = bound == CriBound::Upper ? r.ate.q975 : r.ate.q025;
        const double s = std::clamp(v / maxabs, -1.0, 1.0);
        // diverging palette: blue below zero, white at zero, red above
        const int tr = s >= 0.0 ? 178 : 33;
        const int tg = s >= 0.0 ? 24 : 102;
        const int tb = s >= 0.0 ? 43 : 172;
        const double a = std::abs(s);
        const long rr = std::lround(255.0 + (tr - 255.0) * a);
        const long gg = std::lround(255.0 + (tg - 255.0) * a);
        const long bb = std::lround(255.0 + (tb - 255.0) * a);
        fill = "rgb(" + std::to_string(rr) + "," + std::to_string(gg) + "," +
               std::to_string(bb) + ")";
        title = fmt_double(v);
      }
      out += "<rect class=\"" + cls + "\" x=\"" + px(x) + "\" y=\"" + px(y) + "\" width=\"" +
             px(cw) + "\" height=\"" + px(ch) + "\" fill=\"" + fill +
             "\" stroke=\"#999999\" stroke-width=\"0.5\"><title>" + xml_escape(title) +
             "</title></rect>\n";
    }
  }

  for (std::size_t j = 0; j < n2; ++j) {
    x_tick(out, f, f.x0() + (static_cast<double>(j) + 0.5) * cw, tick_label(t.grids[1][j]));
  }
  for (std::size_t i = 0; i < n1; ++i) {
    y_tick(out, f, f.y0() + (static_cast<double>(i) + 0.5) * ch, tick_label(t.grids[0][i]));
  }
  x_label(out, f, t.axes[1]);
  y_label(out, f, t.axes[0]);
  out += "</svg>\n";
  return out;
}

namespace svg_detail {

// Column indices of one per-component parameter block ("stem[1]".."stem[K]").
inline std::vector<std::size_t> block_of(const DrawsMatrix& m, const char* stem, std::size_t K) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 1; k <= K; ++k) {
    const auto q = m.index_of(std::string(stem) + "[" + std::to_string(k) + "]");
    if (!q.has_value()) {
      throw ValidationError(std::string("draws are missing ") + stem + "[" + std::to_string(k) +
                            "]; not a mixture fit?");
    }
    idx.push_back(*q);
  }
  return idx;
}

}  // namespace svg_detail

/// Observed scatter, posterior regression-curve draws, and per-arm posterior
/// mean curves for a truncated stick-breaking mixture fit. Missing-outcome
/// draws appear at their row's covariate in treatment-colored shades.
inline std::string svg_tsb_regression(const Dataset& data, const DrawsMatrix& m, int n_curves = 20,
                                      const SvgOptions& opt = {}) {
  using namespace svg_detail;

  std::size_t K = 0;
  while (m.index_of("eta0[" + std::to_string(K + 1) + "]").has_value()) ++K;
  if (K == 0) throw ValidationError("draws carry no eta0[k] columns; not a mixture fit");

  const auto eta0 = block_of(m, "eta0", K);
  const auto eta1 = block_of(m, "eta1", K);
  const auto eta2 = block_of(m, "eta2", K);
  const auto gamma0 = block_of(m, "gamma0", K);
  const auto gamma1 = block_of(m, "gamma1", K);
  const auto theta0 = block_of(m, "theta0", K);
  const auto phi = block_of(m, "phi", K);
  std::vector<std::size_t> vcols;
  for (std::size_t j = 1; j < K; ++j) {
    const auto q = m.index_of("v[" + std::to_string(j) + "]");
    if (!q.has_value()) throw ValidationError("draws are missing v[" + std::to_string(j) + "]");
    vcols.push_back(*q);
  }
  std::vector<std::size_t> ymiss_cols;
  while (true) {
    const auto q = m.index_of("y_miss[" + std::to_string(ymiss_cols.size() + 1) + "]");
    if (!q.has_value()) break;
    ymiss_cols.push_back(*q);
  }
  if (ymiss_cols.size() != data.n_missing()) {
    throw ValidationError("draws carry " + std::to_string(ymiss_cols.size()) +
                          " latent outcomes but the dataset has " +
                          std::to_string(data.n_missing()) + " missing rows");
  }

  const int total = m.n_chains * m.n_iter;
  if (total <= 0) throw ValidationError("empty draws matrix");
  const int S = std::min(n_curves, total);
  std::vector<int> picks;
  for (int i = 0; i < S; ++i) picks.push_back(i * total / S);

  // conditional regression function E[y | a, l] under one posterior draw
  const auto curve_at = [&](int t, int a, double l) {
    const int c = t / m.n_iter;
    const int it = t % m.n_iter;
    std::vector<double> v(K - 1);
    for (std::size_t j = 0; j + 1 < K; ++j) v[j] = m.value(c, it, vcols[j]);
    const std::vector<double> nu = stick_breaking(v);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double t0 = m.value(c, it, theta0[k]);
      const double ph = m.value(c, it, phi[k]);
      const double g = m.value(c, it, gamma0[k]) + m.value(c, it, gamma1[k]) * l;
      const double pa = 1.0 / (1.0 + std::exp(a == 1 ? -g : g));
      const double z = (l - t0) / ph;
      const double w = nu[k] * std::exp(-0.5 * z * z) / ph * pa;
      const double mu =
          m.value(c, it, eta0[k]) + m.value(c, it, eta1[k]) * l + m.value(c, it, eta2[k]) * a;
      num += w * mu;
      den += w;
    }
    return den > 0.0 ? num / den : 0.0;
  };

  const int grid_n = 60;
  double lmin = data.l[0], lmax = data.l[0];
  for (double l : data.l) {
    lmin = std::min(lmin, l);
    lmax = std::max(lmax, l);
  }

  std::vector<double> xs(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    xs[static_cast<std::size_t>(i)] =
        lmin + (lmax - lmin) * static_cast<double>(i) / static_cast<double>(grid_n - 1);
  }

  // everything that lands on the canvas, for the y range
  std::vector<std::vector<double>> mean_curve(2, std::vector<double>(grid_n, 0.0));
  std::vector<std::vector<std::vector<double>>> draw_curves(
      2, std::vector<std::vector<double>>(picks.size(), std::vector<double>(grid_n)));
  for (int a = 0; a < 2; ++a) {
    for (int t = 0; t < total; ++t) {
      for (int i = 0; i < grid_n; ++i) {
        mean_curve[a][static_cast<std::size_t>(i)] += curve_at(t, a, xs[static_cast<std::size_t>(i)]);
      }
    }
    for (double& v : mean_curve[a]) v /= static_cast<double>(total);
    for (std::size_t s = 0; s < picks.size(); ++s) {
      for (int i = 0; i < grid_n; ++i) {
        draw_curves[a][s][static_cast<std::size_t>(i)] =
            curve_at(picks[s], a, xs[static_cast<std::size_t>(i)]);
      }
    }
  }

  double ymin = 0.0, ymax = 0.0;
  bool first = true;
  const auto stretch = [&](double v) {
    if (first || v < ymin) ymin = v;
    if (first || v > ymax) ymax = v;
    first = false;
  };
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.delta[i] == 0) stretch(data.y[i]);
  }
  for (int a = 0; a < 2; ++a) {
    for (double v : mean_curve[a]) stretch(v);
    for (const auto& c : draw_curves[a]) {
      for (double v : c) stretch(v);
    }
  }
  for (std::size_t j = 0; j < ymiss_cols.size(); ++j) {
    for (int p : picks) stretch(m.value(p / m.n_iter, p % m.n_iter, ymiss_cols[j]));
  }

  Frame f{opt.width, opt.height};
  Scale sx(lmin, lmax, f.x0(), f.x1());
  Scale sy(ymin, ymax, f.y1(), f.y0());

  const char* light[2] = {"#66c2a5", "#fc8d62"};  // control teal / treated orange shades
  const char* dark[2] = {"#1b9e77", "#d95f02"};

  std::string out = open_svg(opt);
  axes(out, f);

  for (int a = 0; a < 2; ++a) {
    for (std::size_t s = 0; s < picks.size(); ++s) {
      std::string line = "<polyline class=\"draw-curve arm-a" + std::to_string(a) +
                         "\" fill=\"none\" stroke=\"" + light[a] +
                         "\" stroke-width=\"1\" stroke-opacity=\"0.5\" points=\"";
      for (int i = 0; i < grid_n; ++i) {
        line += px(sx(xs[static_cast<std::size_t>(i)])) + "," +
                px(sy(draw_curves[a][s][static_cast<std::size_t>(i)]));
        if (i + 1 != grid_n) line += " ";
      }
      out += line + "\"/>\n";
    }
  }
  for (int a = 0; a < 2; ++a) {
    std::string line = "<polyline id=\"mean-curve-a" + std::to_string(a) +
                       "\" class=\"mean-curve\" fill=\"none\" stroke=\"" + dark[a] +
                       "\" stroke-width=\"2.5\" points=\"";
    for (int i = 0; i < grid_n; ++i) {
      line += px(sx(xs[static_cast<std::size_t>(i)])) + "," +
              px(sy(mean_curve[a][static_cast<std::size_t>(i)]));
      if (i + 1 != grid_n) line += " ";
    }
    out += line + "\"/>\n";
  }

  // latent missing outcomes, a column of posterior draws per missing row
  std::size_t mi = 0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.delta[i] != 1) continue;
    const int a = data.a[i];
    for (int p : picks) {
      const double y = m.value(p / m.n_iter, p % m.n_iter, ymiss_cols[mi]);
      out += "<circle class=\"miss-draw arm-a" + std::to_string(a) + "\" cx=\"" +
             px(sx(data.l[i])) + "\" cy=\"" + px(sy(y)) + "\" r=\"2\" fill=\"" + light[a] +
             "\" fill-opacity=\"0.35\"/>\n";
    }
    ++mi;
  }
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.delta[i] != 0) continue;
    const int a = data.a[i];
    out += "<circle class=\"obs arm-a" + std::to_string(a) + "\" cx=\"" + px(sx(data.l[i])) +
           "\" cy=\"" + px(sy(data.y[i])) + "\" r=\"3\" fill=\"" + dark[a] + "\"/>\n";
  }

  for (int k = 0; k <= 6; ++k) {
    const double v = sx.lo + (sx.hi - sx.lo) * k / 6.0;
    x_tick(out, f, sx(v), tick_label(v));
  }
  y_ticks(out, f, sy);
  x_label(out, f, "l");
  y_label(out, f, "y");
  out += "</svg>\n";
  return out;
}

}  // namespace causalsens
