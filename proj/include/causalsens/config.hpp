#pragma once

// Run configuration: the JSON config file ({model, data, sensitivity,
// sampler, output} sections), the --set/--grid/--prior override grammar,
// and the mapping from command-line model tokens to model kinds.

#include <cmath>
#include <cstdlib>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalsens/errors.hpp"
#include "causalsens/hmc.hpp"
#include "causalsens/models.hpp"
#include "causalsens/sensitivity.hpp"

namespace causalsens {

struct RunConfig {
  std::string model;  // command-line token, see model_kind_from_cli
  std::string data_path;
  SensitivityConfig sensitivity;
  SamplerConfig sampler;
  MixtureOptions mixture;
  std::string out_dir = "out";
  bool plot = false;
  bool svg_timestamp = false;
};

inline ModelKind model_kind_from_cli(std::string_view token) {
  if (token == "complete" || token == "complete-data") return ModelKind::CompleteData;
  if (token == "misclassification") return ModelKind::Misclassification;
  if (token == "unmeasured" || token == "unmeasured-confounder") {
    return ModelKind::UnmeasuredConfounder;
  }
  if (token == "mnar-binary") return ModelKind::MnarBinary;
  if (token == "tsb-mnar" || token == "mnar-mixture") return ModelKind::MnarMixture;
  throw ConfigError("unknown model '" + std::string(token) +
                    "' (expected complete, misclassification, unmeasured, mnar-binary, or "
                    "tsb-mnar)");
}

namespace detail {

inline double parse_strict_double(std::string_view text, const std::string& context) {
  std::string s(text);
  if (s.empty()) throw ConfigError(context + ": expected a number");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError(context + ": malformed number '" + s + "'");
  }
  return v;
}

inline std::pair<std::string, std::string> split_assignment(std::string_view arg,
                                                            const std::string& context) {
  const std::size_t eq = arg.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(context + ": expected name=value, got '" + std::string(arg) + "'");
  }
  std::string name(arg.substr(0, eq));
  if (name.empty()) throw ConfigError(context + ": empty parameter name");
  return {std::move(name), std::string(arg.substr(eq + 1))};
}

}  // namespace detail

/// "xi1=0.9" -> {"xi1", 0.9}
inline std::pair<std::string, double> parse_point_override(std::string_view arg) {
  auto [name, rhs] = detail::split_assignment(arg, "--set");
  return {std::move(name), detail::parse_strict_double(rhs, "--set")};
}

/// "lo:hi:step" -> inclusive range. The step sign must point from lo to hi.
inline std::vector<double> parse_range(std::string_view text) {
  const std::string s(text);
  const std::size_t c1 = s.find(':');
  const std::size_t c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos || s.find(':', c2 + 1) != std::string::npos) {
    throw ConfigError("range: expected lo:hi:step, got '" + s + "'");
  }
  const double lo = detail::parse_strict_double(s.substr(0, c1), "range");
  const double hi = detail::parse_strict_double(s.substr(c1 + 1, c2 - c1 - 1), "range");
  const double step = detail::parse_strict_double(s.substr(c2 + 1), "range");
  if (step == 0.0) throw ConfigError("range: step must be nonzero");
  const double span = (hi - lo) / step;
  if (span < 0.0) throw ConfigError("range: step points away from the endpoint in '" + s + "'");
  const std::size_t n = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(lo + static_cast<double>(k) * step);
  return out;
}

/// "xi3=0:1:0.25" -> {"xi3", {0, 0.25, 0.5, 0.75, 1}}
inline std::pair<std::string, std::vector<double>> parse_grid_override(std::string_view arg) {
  auto [name, rhs] = detail::split_assignment(arg, "--grid");
  return {std::move(name), parse_range(rhs)};
}

/// "xi3=normal(0,1)" -> normal-prior sensitivity entry
inline std::pair<std::string, SensitivityEntry> parse_prior_override(std::string_view arg) {
  auto [name, rhs] = detail::split_assignment(arg, "--prior");
  if (rhs.size() < 9 || rhs.rfind("normal(", 0) != 0 || rhs.back() != ')') {
    throw ConfigError("--prior: expected normal(mean,sd), got '" + rhs + "'");
  }
  const std::string inner = rhs.substr(7, rhs.size() - 8);
  const std::size_t comma = inner.find(',');
  if (comma == std::string::npos || inner.find(',', comma + 1) != std::string::npos) {
    throw ConfigError("--prior: expected normal(mean,sd), got '" + rhs + "'");
  }
  const double mean = detail::parse_strict_double(inner.substr(0, comma), "--prior");
  const double sd = detail::parse_strict_double(inner.substr(comma + 1), "--prior");
  return {std::move(name), SensitivityEntry::normal(mean, sd)};
}

namespace detail {

inline SensitivityEntry sens_entry_from_json(const std::string& name, const nlohmann::json& j) {
  if (j.is_number()) return SensitivityEntry::point(j.get<double>());
  if (!j.is_object()) {
    throw ConfigError("sensitivity '" + name + "': expected a number or an object");
  }
  if (j.size() != 1) {
    throw ConfigError("sensitivity '" + name + "': expected exactly one of point/grid/normal");
  }
  const auto& [key, value] = *j.items().begin();
  if (key == "point") {
    if (!value.is_number()) throw ConfigError("sensitivity '" + name + "': point must be a number");
    return SensitivityEntry::point(value.get<double>());
  }
  if (key == "grid") {
    if (value.is_string()) return SensitivityEntry::grid_of(parse_range(value.get<std::string>()));
    if (!value.is_array()) {
      throw ConfigError("sensitivity '" + name + "': grid must be an array or 'lo:hi:step'");
    }
    std::vector<double> grid;
    for (const auto& v : value) {
      if (!v.is_number()) throw ConfigError("sensitivity '" + name + "': grid values must be numbers");
      grid.push_back(v.get<double>());
    }
    return SensitivityEntry::grid_of(std::move(grid));
  }
  if (key == "normal") {
    if (value.is_array() && value.size() == 2 && value[0].is_number() && value[1].is_number()) {
      return SensitivityEntry::normal(value[0].get<double>(), value[1].get<double>());
    }
    if (value.is_object() && value.contains("mean") && value.contains("sd") && value.size() == 2) {
      return SensitivityEntry::normal(value["mean"].get<double>(), value["sd"].get<double>());
    }
    throw ConfigError("sensitivity '" + name + "': normal wants [mean, sd]");
  }
  throw ConfigError("sensitivity '" + name + "': unknown kind '" + key + "'");
}

inline nlohmann::json sens_entry_to_json(const SensitivityEntry& e) {
  switch (e.kind) {
    case SensitivityEntry::Kind::PointMass:
      return nlohmann::json{{"point", e.value}};
    case SensitivityEntry::Kind::Grid:
      return nlohmann::json{{"grid", e.grid}};
    case SensitivityEntry::Kind::NormalPrior:
    default:
      return nlohmann::json{{"normal", {e.prior_mean, e.prior_sd}}};
  }
}

template <typename T>
inline T section_value(const nlohmann::json& j, const std::string& section, const char* key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(section + ": bad value for '" + std::string(key) + "'");
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig cfg;
  for (const auto& [section, body] : doc.items()) {
    if (section == "model") {
      if (body.is_string()) {
        cfg.model = body.get<std::string>();
      } else if (body.is_object()) {
        for (const auto& [key, value] : body.items()) {
          if (key == "name") cfg.model = detail::section_value<std::string>(value, "model", "name");
          else if (key == "components") cfg.mixture.components = detail::section_value<int>(value, "model", "components");
          else if (key == "sample_alpha") cfg.mixture.sample_alpha = detail::section_value<bool>(value, "model", "sample_alpha");
          else if (key == "fixed_alpha") cfg.mixture.fixed_alpha = detail::section_value<double>(value, "model", "fixed_alpha");
          else if (key == "gq_draws") cfg.mixture.gq_mc_draws = detail::section_value<int>(value, "model", "gq_draws");
          else throw ConfigError("config model: unknown key '" + key + "'");
        }
      } else {
        throw ConfigError("config: 'model' must be a name or an object");
      }
    } else if (section == "data") {
      if (body.is_string()) {
        cfg.data_path = body.get<std::string>();
      } else if (body.is_object()) {
        for (const auto& [key, value] : body.items()) {
          if (key == "path") cfg.data_path = detail::section_value<std::string>(value, "data", "path");
          else throw ConfigError("config data: unknown key '" + key + "'");
        }
      } else {
        throw ConfigError("config: 'data' must be a path or an object");
      }
    } else if (section == "sensitivity") {
      if (!body.is_object()) throw ConfigError("config: 'sensitivity' must be an object");
      for (const auto& [name, value] : body.items()) {
        cfg.sensitivity.entries[name] = detail::sens_entry_from_json(name, value);
      }
    } else if (section == "sampler") {
      if (!body.is_object()) throw ConfigError("config: 'sampler' must be an object");
      for (const auto& [key, value] : body.items()) {
        if (key == "chains") cfg.sampler.chains = detail::section_value<int>(value, "sampler", "chains");
        else if (key == "warmup") cfg.sampler.warmup = detail::section_value<int>(value, "sampler", "warmup");
        else if (key == "iter") cfg.sampler.sampling = detail::section_value<int>(value, "sampler", "iter");
        else if (key == "seed") cfg.sampler.seed = detail::section_value<std::uint64_t>(value, "sampler", "seed");
        else if (key == "target_accept") cfg.sampler.target_accept = detail::section_value<double>(value, "sampler", "target_accept");
        else if (key == "max_leapfrog") cfg.sampler.max_leapfrog = detail::section_value<int>(value, "sampler", "max_leapfrog");
        else if (key == "threads") cfg.sampler.threads = detail::section_value<int>(value, "sampler", "threads");
        else throw ConfigError("config sampler: unknown key '" + key + "'");
      }
    } else if (section == "output") {
      if (!body.is_object()) throw ConfigError("config: 'output' must be an object");
      for (const auto& [key, value] : body.items()) {
        if (key == "dir") cfg.out_dir = detail::section_value<std::string>(value, "output", "dir");
        else if (key == "plot") cfg.plot = detail::section_value<bool>(value, "output", "plot");
        else if (key == "timestamp") cfg.svg_timestamp = detail::section_value<bool>(value, "output", "timestamp");
        else throw ConfigError("config output: unknown key '" + key + "'");
      }
    } else {
      throw ConfigError("config: unknown section '" + section + "'");
    }
  }
  if (!cfg.model.empty()) model_kind_from_cli(cfg.model);  // reject bad names up front
  return cfg;
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json sens = nlohmann::json::object();
  for (const auto& [name, entry] : cfg.sensitivity.entries) {
    sens[name] = detail::sens_entry_to_json(entry);
  }
  return nlohmann::json{
      {"model",
       {{"name", cfg.model},
        {"components", cfg.mixture.components},
        {"sample_alpha", cfg.mixture.sample_alpha},
        {"fixed_alpha", cfg.mixture.fixed_alpha},
        {"gq_draws", cfg.mixture.gq_mc_draws}}},
      {"data", {{"path", cfg.data_path}}},
      {"sensitivity", std::move(sens)},
      {"sampler",
       {{"chains", cfg.sampler.chains},
        {"warmup", cfg.sampler.warmup},
        {"iter", cfg.sampler.sampling},
        {"seed", cfg.sampler.seed},
        {"target_accept", cfg.sampler.target_accept},
        {"max_leapfrog", cfg.sampler.max_leapfrog},
        {"threads", cfg.sampler.threads}}},
      {"output",
       {{"dir", cfg.out_dir}, {"plot", cfg.plot}, {"timestamp", cfg.svg_timestamp}}}};
}

}  // namespace causalsens
