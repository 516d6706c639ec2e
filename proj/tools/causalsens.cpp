// Command-line front end: dataset simulation, single fits, sensitivity
// sweeps, tipping-point reports, diagnostics, and SVG plots.
//
// Exit codes: 0 success, 2 validation/config error, 3 sampling failure,
// 4 sweep finished with some failed grid points.

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <causalsens/config.hpp>
#include <causalsens/estimands.hpp>
#include <causalsens/hmc.hpp>
#include <causalsens/io.hpp>
#include <causalsens/models.hpp>
#include <causalsens/svg.hpp>
#include <causalsens/sweep.hpp>
#include <causalsens/synthdata.hpp>

namespace fs = std::filesystem;
using namespace causalsens;
using nlohmann::json;

namespace {

std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// ---------------------------------------------------------------------------
// flag plumbing shared by fit and sweep

struct CommonFlags {
  std::string config_path;
  std::string model;
  std::string data_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int chains = 0;
  int iter = 0;
  int warmup = 0;
  int threads = 0;
  int components = 0;
  double fixed_alpha = 0.0;
  bool no_sample_alpha = false;
  int gq_draws = 0;
  bool plot = false;
  bool timestamp = false;
  std::vector<std::string> set_args;
  std::vector<std::string> grid_args;
  std::vector<std::string> prior_args;
};

void add_common_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file; flags override its fields");
  sub->add_option("--model", f.model,
                  "model: complete, misclassification, unmeasured, mnar-binary, tsb-mnar");
  sub->add_option("--data", f.data_path, "dataset CSV (delta,y,a,l with a stamped header)");
  sub->add_option("--out", f.out_dir, "output directory (default out)");
  sub->add_option("--seed", f.seed, "sampler seed");
  sub->add_option("--chains", f.chains, "number of chains");
  sub->add_option("--iter", f.iter, "retained iterations per chain");
  sub->add_option("--warmup", f.warmup, "warmup iterations per chain");
  sub->add_option("--threads", f.threads, "worker threads");
  sub->add_option("--components", f.components, "mixture truncation level (tsb-mnar)");
  sub->add_option("--fixed-alpha", f.fixed_alpha, "pin the stick-breaking concentration");
  sub->add_flag("--no-sample-alpha", f.no_sample_alpha, "do not sample the concentration");
  sub->add_option("--gq-draws", f.gq_draws, "Monte Carlo draws for the mixture effect");
  sub->add_flag("--plot", f.plot, "emit SVG plots next to the tables");
  sub->add_flag("--timestamp", f.timestamp, "stamp SVG plots with the wall-clock time");
  sub->add_option("--set", f.set_args, "point-mass sensitivity value, e.g. xi1=0.9")
      ->take_all();
  sub->add_option("--grid", f.grid_args, "sensitivity grid, e.g. xi3=0:1:0.25 (inclusive)")
      ->take_all();
  sub->add_option("--prior", f.prior_args, "sensitivity prior, e.g. xi3=normal(0,1)")
      ->take_all();
}

RunConfig merge_config(const CLI::App* sub, const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) {
    try {
      cfg = run_config_from_json(json::parse(read_file(f.config_path)));
    } catch (const json::exception& e) {
      throw ConfigError(f.config_path + ": " + e.what());
    }
  }
  if (sub->count("--model")) cfg.model = f.model;
  if (sub->count("--data")) cfg.data_path = f.data_path;
  if (sub->count("--out")) cfg.out_dir = f.out_dir;
  if (sub->count("--seed")) cfg.sampler.seed = f.seed;
  if (sub->count("--chains")) cfg.sampler.chains = f.chains;
  if (sub->count("--iter")) cfg.sampler.sampling = f.iter;
  if (sub->count("--warmup")) cfg.sampler.warmup = f.warmup;
  if (sub->count("--threads")) cfg.sampler.threads = f.threads;
  if (sub->count("--components")) cfg.mixture.components = f.components;
  if (sub->count("--fixed-alpha")) cfg.mixture.fixed_alpha = f.fixed_alpha;
  if (f.no_sample_alpha) cfg.mixture.sample_alpha = false;
  if (sub->count("--gq-draws")) cfg.mixture.gq_mc_draws = f.gq_draws;
  if (f.plot) cfg.plot = true;
  if (f.timestamp) cfg.svg_timestamp = true;
  for (const auto& arg : f.set_args) {
    const auto [name, value] = parse_point_override(arg);
    cfg.sensitivity.entries[name] = SensitivityEntry::point(value);
  }
  for (const auto& arg : f.grid_args) {
    const auto [name, values] = parse_grid_override(arg);
    cfg.sensitivity.entries[name] = SensitivityEntry::grid_of(values);
  }
  for (const auto& arg : f.prior_args) {
    const auto [name, entry] = parse_prior_override(arg);
    cfg.sensitivity.entries[name] = entry;
  }
  if (cfg.model.empty()) throw ConfigError("no model given (use --model or a config file)");
  if (cfg.data_path.empty()) throw ConfigError("no dataset given (use --data or a config file)");
  return cfg;
}

HeaderLines provenance(const char* command, const RunConfig& cfg) {
  return {{"command", command},
          {"config", run_config_to_json(cfg).dump()},
          {"seed", std::to_string(cfg.sampler.seed)}};
}

SvgOptions svg_options(const char* command, const RunConfig& cfg) {
  SvgOptions opt;
  opt.meta = provenance(command, cfg);
  if (cfg.svg_timestamp) opt.timestamp = now_iso8601();
  return opt;
}

// summary rows: generated quantities (the effect estimate) first, then all
// model parameters
std::vector<SummaryRow> summarize_draws(const DrawsMatrix& m,
                                        const std::vector<std::string>& generated_first) {
  std::vector<std::string> order = generated_first;
  for (const auto& name : m.names) {
    bool is_generated = false;
    for (const auto& g : generated_first) {
      if (g == name) {
        is_generated = true;
        break;
      }
    }
    if (!is_generated) order.push_back(name);
  }
  std::vector<SummaryRow> rows;
  for (const auto& name : order) {
    const auto q = m.index_of(name);
    if (!q.has_value()) continue;
    rows.push_back({name, summarize(m.by_chain(*q))});
  }
  return rows;
}

std::string diagnostics_csv(const DrawsMatrix& m, const HeaderLines& header) {
  std::string out;
  out += "# divergences: " + std::to_string(m.total_divergences()) + "\n";
  detail::append_header(out, header);
  out += "quantity,ess,rhat\n";
  for (std::size_t q = 0; q < m.names.size(); ++q) {
    const EstimandSummary s = summarize(m.by_chain(q));
    out += csv_field(m.names[q]);
    out += ',';
    out += detail::fmt_opt(s.ess);
    out += ',';
    out += detail::fmt_opt(s.rhat);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// subcommands

struct SimulateArgs {
  std::string family;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> set_args;
};

int cmd_simulate(const CLI::App* sub, const SimulateArgs& a) {
  DgpSpec spec = default_dgp(dgp_family_from_name(a.family));
  if (sub->count("--n")) spec.n = a.n;
  if (sub->count("--seed")) spec.seed = a.seed;

  static const std::map<std::string, double DgpSpec::*> kFields = {
      {"eta_intercept", &DgpSpec::eta_intercept},
      {"eta_covariate", &DgpSpec::eta_covariate},
      {"eta_treatment", &DgpSpec::eta_treatment},
      {"gamma0", &DgpSpec::gamma0},
      {"gamma1", &DgpSpec::gamma1},
      {"theta", &DgpSpec::theta},
      {"surrogate_tpr", &DgpSpec::surrogate_tpr},
      {"surrogate_fpr", &DgpSpec::surrogate_fpr},
      {"u_outcome", &DgpSpec::u_outcome},
      {"u_treatment", &DgpSpec::u_treatment},
      {"miss_intercept", &DgpSpec::miss_intercept},
      {"miss_treated", &DgpSpec::miss_treated},
      {"miss_interaction", &DgpSpec::miss_interaction},
  };
  for (const auto& arg : a.set_args) {
    const auto [name, value] = parse_point_override(arg);
    const auto it = kFields.find(name);
    if (it == kFields.end()) {
      std::string known;
      for (const auto& [k, ptr] : kFields) {
        if (!known.empty()) known += ", ";
        known += k;
      }
      throw ConfigError("simulate: unknown parameter '" + name + "' (known: " + known + ")");
    }
    spec.*(it->second) = value;
  }

  const GeneratedData g = generate(spec);
  DatasetFile f;
  f.data = g.dataset;
  f.dgp = spec;
  f.true_ate = g.true_ate;
  f.header = {{"command", "simulate"}};

  fs::create_directories(a.out_dir);
  const fs::path path = fs::path(a.out_dir) / "dataset.csv";
  write_dataset_file(path, f);
  std::cout << "wrote " << path.string() << " (n=" << g.dataset.n()
            << ", true ate=" << fmt_double(g.true_ate) << ")\n";
  return 0;
}

int cmd_fit(const CLI::App* sub, const CommonFlags& flags) {
  const RunConfig cfg = merge_config(sub, flags);
  const ModelKind kind = model_kind_from_cli(cfg.model);
  cfg.sampler.validate();
  const DatasetFile df = read_dataset_file(cfg.data_path);

  // model construction performs all dataset/sensitivity validation before a
  // single sample is drawn
  const ModelSpec model = build_model(kind, df.data, cfg.sensitivity, cfg.mixture);
  const DrawsMatrix draws = hmc_sample(model, cfg.sampler);

  fs::create_directories(cfg.out_dir);
  const HeaderLines head = provenance("fit", cfg);
  write_file_atomic(fs::path(cfg.out_dir) / "draws.csv", draws_to_csv(draws, head));
  const auto rows = summarize_draws(draws, model.generated_names);
  write_file_atomic(fs::path(cfg.out_dir) / "summary.csv", summary_to_csv(rows, head));
  write_file_atomic(fs::path(cfg.out_dir) / "diagnostics.csv", diagnostics_csv(draws, head));
  if (cfg.plot && kind == ModelKind::MnarMixture) {
    write_file_atomic(fs::path(cfg.out_dir) / "regression.svg",
                      svg_tsb_regression(df.data, draws, 20, svg_options("fit", cfg)));
  }

  for (const auto& r : rows) {
    if (r.quantity == "ate") {
      std::cout << "ate: mean=" << fmt_double(r.stats.mean) << " sd=" << fmt_double(r.stats.sd)
                << " 95% CrI=[" << fmt_double(r.stats.q025) << ", " << fmt_double(r.stats.q975)
                << "]\n";
    }
  }
  std::cout << "divergences: " << draws.total_divergences() << "\n";
  return 0;
}

int cmd_sweep(const CLI::App* sub, const CommonFlags& flags, const std::string& bound_name) {
  RunConfig cfg = merge_config(sub, flags);
  const ModelKind kind = model_kind_from_cli(cfg.model);
  cfg.sampler.validate();
  const DatasetFile df = read_dataset_file(cfg.data_path);

  // --threads parallelizes grid points; each point samples single-threaded
  const int grid_threads = std::max(1, cfg.sampler.threads);
  SamplerConfig point_cfg = cfg.sampler;
  point_cfg.threads = 1;
  const SweepTable table =
      grid_sweep(kind, df.data, cfg.sensitivity, point_cfg, cfg.mixture, grid_threads);

  fs::create_directories(cfg.out_dir);
  const HeaderLines head = provenance("sweep", cfg);
  write_sweep_file(fs::path(cfg.out_dir) / "sweep.csv", table, head);

  if (cfg.plot) {
    if (table.axes.size() == 1) {
      write_file_atomic(fs::path(cfg.out_dir) / "sweep_curve.svg",
                        svg_sweep_curve(table, svg_options("sweep", cfg)));
    } else if (table.axes.size() == 2) {
      const CriBound bound = bound_name == "lower" ? CriBound::Lower : CriBound::Upper;
      write_file_atomic(fs::path(cfg.out_dir) / "sweep_heatmap.svg",
                        svg_sweep_heatmap(table, bound, svg_options("sweep", cfg)));
    } else {
      std::cerr << "note: no plot for a " << table.axes.size() << "-axis sweep\n";
    }
  }

  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += r.failed ? 1 : 0;
  std::cout << "sweep: " << table.rows.size() - failed << "/" << table.rows.size()
            << " grid points fitted\n";
  for (const auto& r : table.rows) {
    if (r.failed) std::cerr << "row " << r.index << " failed: " << r.error << "\n";
  }
  if (failed == table.rows.size()) throw SamplingError("every grid point failed");
  return failed == 0 ? 0 : 4;
}

int cmd_tipping(const std::string& table_path, const std::string& bound_name, double threshold,
                const std::string& out_dir) {
  CriBound bound;
  if (bound_name == "lower") bound = CriBound::Lower;
  else if (bound_name == "upper") bound = CriBound::Upper;
  else throw ConfigError("tipping: --bound must be lower or upper, got '" + bound_name + "'");

  const SweepFile f = sweep_from_csv(read_file(table_path));
  const TippingResult r = tipping_point(f.table, bound, threshold);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";

  json j = tipping_to_json(f.table, r, bound, threshold);
  j["source_table"] = table_path;
  for (const auto& [key, value] : f.header) {
    if (key == "config") j["source_config"] = value;
    if (key == "seed") j["source_seed"] = value;
  }
  fs::create_directories(out_dir);
  write_file_atomic(fs::path(out_dir) / "tipping.json", j.dump(2) + "\n");

  if (r.first_crossing.has_value()) {
    const SweepRow& row = f.table.rows[*r.first_crossing];
    std::cout << "tipping point: ";
    for (std::size_t k = 0; k < f.table.axes.size(); ++k) {
      if (k > 0) std::cout << ", ";
      std::cout << f.table.axes[k] << "=" << fmt_double(row.values[k]);
    }
    std::cout << " (row " << row.index << ")\n";
  } else {
    std::cout << "none\n";
  }
  return 0;
}

int cmd_plot(const std::string& kind, const std::string& table_path,
             const std::string& draws_path, const std::string& data_path,
             const std::string& bound_name, int curves, const std::string& out_file,
             bool timestamp) {
  SvgOptions opt;
  opt.meta = {{"command", "plot"}, {"kind", kind}};
  if (timestamp) opt.timestamp = now_iso8601();

  std::string svg;
  if (kind == "curve" || kind == "heatmap") {
    if (table_path.empty()) throw ConfigError("plot: --table is required for " + kind);
    opt.meta.emplace_back("source", table_path);
    const SweepFile f = sweep_from_csv(read_file(table_path));
    for (const auto& [key, value] : f.header) {
      if (key == "config" || key == "seed") opt.meta.emplace_back("source_" + key, value);
    }
    if (kind == "curve") {
      svg = svg_sweep_curve(f.table, opt);
    } else {
      const CriBound bound = bound_name == "lower" ? CriBound::Lower : CriBound::Upper;
      svg = svg_sweep_heatmap(f.table, bound, opt);
    }
  } else if (kind == "regression") {
    if (draws_path.empty() || data_path.empty()) {
      throw ConfigError("plot: --draws and --data are required for regression");
    }
    opt.meta.emplace_back("source", draws_path);
    const DrawsMatrix m = draws_from_csv(read_file(draws_path));
    const DatasetFile df = read_dataset_file(data_path);
    svg = svg_tsb_regression(df.data, m, curves, opt);
  } else {
    throw ConfigError("plot: unknown kind '" + kind + "' (expected curve, heatmap, regression)");
  }

  const fs::path out(out_file);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file_atomic(out, svg);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_diagnostics(const std::string& draws_path, const std::string& out_dir) {
  const DrawsMatrix m = draws_from_csv(read_file(draws_path));
  fs::create_directories(out_dir);
  write_file_atomic(fs::path(out_dir) / "diagnostics.csv",
                    diagnostics_csv(m, {{"source", draws_path}}));

  std::cout << "chains: " << m.n_chains << ", retained draws per chain: " << m.n_iter << "\n";
  std::cout << "divergences: " << m.total_divergences() << "\n";
  for (std::size_t q = 0; q < m.names.size(); ++q) {
    const EstimandSummary s = summarize(m.by_chain(q));
    std::cout << m.names[q] << ": rhat=" << (s.rhat ? fmt_double(*s.rhat) : "n/a")
              << " ess=" << (s.ess ? fmt_double(*s.ess) : "n/a") << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian sensitivity analysis for causal effects under untestable assumptions"};
  app.require_subcommand(1);

  // simulate
  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  simulate
      ->add_option("--family", sim.family,
                   "complete, misclassified, unmeasured, mnar-binary, mnar-continuous")
      ->required();
  simulate->add_option("--n", sim.n, "sample size");
  simulate->add_option("--seed", sim.seed, "generator seed");
  simulate->add_option("--out", sim.out_dir, "output directory (default out)");
  simulate->add_option("--set", sim.set_args, "override a generator parameter, e.g. theta=0.5")
      ->take_all();

  // fit
  CommonFlags fit_flags;
  CLI::App* fit = app.add_subcommand("fit", "fit one model and write draws/summary/diagnostics");
  add_common_flags(fit, fit_flags);

  // sweep
  CommonFlags sweep_flags;
  std::string sweep_bound = "upper";
  CLI::App* sweep = app.add_subcommand("sweep", "refit across sensitivity grids");
  add_common_flags(sweep, sweep_flags);
  sweep->add_option("--bound", sweep_bound, "credible-interval bound for heatmaps (lower/upper)");

  // tipping
  std::string tip_table, tip_bound = "upper", tip_out = "out";
  double tip_threshold = 0.0;
  CLI::App* tipping = app.add_subcommand("tipping", "locate threshold crossings in a sweep table");
  tipping->add_option("--table", tip_table, "sweep CSV produced by the sweep command")->required();
  tipping->add_option("--bound", tip_bound, "which credible-interval bound to track");
  tipping->add_option("--threshold", tip_threshold, "crossing threshold (default 0)");
  tipping->add_option("--out", tip_out, "output directory (default out)");

  // plot
  std::string plot_kind, plot_table, plot_draws, plot_data, plot_bound = "upper";
  std::string plot_out = "plot.svg";
  int plot_curves = 20;
  bool plot_timestamp = false;
  CLI::App* plot = app.add_subcommand("plot", "render a sweep or fit as a static SVG");
  plot->add_option("--kind", plot_kind, "curve, heatmap, or regression")->required();
  plot->add_option("--table", plot_table, "sweep CSV (curve/heatmap)");
  plot->add_option("--draws", plot_draws, "draws CSV from a tsb-mnar fit (regression)");
  plot->add_option("--data", plot_data, "dataset CSV (regression)");
  plot->add_option("--bound", plot_bound, "credible-interval bound for heatmaps");
  plot->add_option("--curves", plot_curves, "posterior draw curves to overlay");
  plot->add_option("--out", plot_out, "output SVG path");
  plot->add_flag("--timestamp", plot_timestamp, "stamp the SVG with the wall-clock time");

  // diagnostics
  std::string diag_draws, diag_out = "out";
  CLI::App* diagnostics = app.add_subcommand("diagnostics", "recompute R-hat/ESS from a draws file");
  diagnostics->add_option("--draws", diag_draws, "draws CSV from a fit")->required();
  diagnostics->add_option("--out", diag_out, "output directory (default out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto guarded = [&](const std::function<int()>& fn) {
    try {
      return fn();
    } catch (const SamplingError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    } catch (const ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const json::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  };

  if (simulate->parsed()) return guarded([&] { return cmd_simulate(simulate, sim); });
  if (fit->parsed()) return guarded([&] { return cmd_fit(fit, fit_flags); });
  if (sweep->parsed()) return guarded([&] { return cmd_sweep(sweep, sweep_flags, sweep_bound); });
  if (tipping->parsed()) {
    return guarded([&] { return cmd_tipping(tip_table, tip_bound, tip_threshold, tip_out); });
  }
  if (plot->parsed()) {
    return guarded([&] {
      return cmd_plot(plot_kind, plot_table, plot_draws, plot_data, plot_bound, plot_curves,
                      plot_out, plot_timestamp);
    });
  }
  if (diagnostics->parsed()) {
    return guarded([&] { return cmd_diagnostics(diag_draws, diag_out); });
  }
  return 2;
}
