#pragma once

// File formats for the command-line tools: header-stamped dataset CSVs,
// posterior summary / draws CSVs, sweep tables, and tipping-point reports.
// All writers are deterministic (shortest round-trip number formatting,
// sorted JSON keys) and all file writes go through a temp-file rename.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalsens/dataset.hpp"
#include "causalsens/errors.hpp"
#include "causalsens/estimands.hpp"
#include "causalsens/hmc.hpp"
#include "causalsens/sweep.hpp"
#include "causalsens/synthdata.hpp"

namespace causalsens {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parse failure carrying the 1-based line number of the offending input.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Key/value comment lines ("# key: value") stamped above each CSV table.
using HeaderLines = std::vector<std::pair<std::string, std::string>>;

/// Shortest decimal string that parses back to exactly the same double.
inline std::string fmt_double(double v) {
  if (!std::isfinite(v)) throw IoError("cannot serialize a non-finite number");
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Quote a CSV field only when it needs it.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Split one CSV line, honoring quoted fields. `lineno` feeds error messages.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool closed = false;  // a quoted field just ended; only ',' may follow
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
          closed = true;
        }
      } else {
        cur += c;
      }
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      closed = false;
    } else if (closed) {
      throw ParseError(lineno, "text after a closing quote");
    } else if (c == '"') {
      if (!cur.empty()) throw ParseError(lineno, "unexpected quote inside unquoted field");
      quoted = true;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(lineno, "unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into place: " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return content;
}

namespace detail {

inline void append_header(std::string& out, const HeaderLines& header) {
  for (const auto& [key, value] : header) {
    out += "# ";
    out += key;
    out += ": ";
    out += value;
    out += '\n';
  }
}

// Walk `text` line by line. Lines beginning with '#' before the table are
// handed to `hdr` as key/value pairs (comments without "key: value" are
// skipped); the rest go to `row`. Both callbacks get 1-based line numbers.
template <typename RowFn, typename HeaderFn>
inline void scan_lines(const std::string& text, RowFn&& row, HeaderFn&& hdr) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  bool in_table = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    ++lineno;
    pos = end + 1;
    if (line.empty()) continue;
    if (!in_table && line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.erase(0, 1);
      const std::size_t sep = body.find(": ");
      if (sep != std::string::npos && sep > 0) {
        hdr(body.substr(0, sep), body.substr(sep + 2), lineno);
      }
      continue;
    }
    in_table = true;
    row(line, lineno);
  }
}

template <typename RowFn>
inline HeaderLines scan_lines(const std::string& text, RowFn&& row) {
  HeaderLines header;
  scan_lines(text, row, [&header](const std::string& key, const std::string& value,
                                  std::size_t) { header.emplace_back(key, value); });
  return header;
}

inline double parse_double(const std::string& field, std::size_t lineno, const char* what) {
  if (field.empty()) throw ParseError(lineno, std::string(what) + " is empty");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || errno == ERANGE) {
    throw ParseError(lineno, std::string(what) + ": malformed number '" + field + "'");
  }
  return v;
}

inline long long parse_int(const std::string& field, std::size_t lineno, const char* what) {
  if (field.empty()) throw ParseError(lineno, std::string(what) + " is empty");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(field.c_str(), &end, 10);
  if (end != field.c_str() + field.size() || errno == ERANGE) {
    throw ParseError(lineno, std::string(what) + ": malformed integer '" + field + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& field, std::size_t lineno, const char* what) {
  if (field.empty()) throw ParseError(lineno, std::string(what) + " is empty");
  if (field[0] == '-') throw ParseError(lineno, std::string(what) + " must be nonnegative");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(field.c_str(), &end, 10);
  if (end != field.c_str() + field.size() || errno == ERANGE) {
    throw ParseError(lineno, std::string(what) + ": malformed integer '" + field + "'");
  }
  return static_cast<std::uint64_t>(v);
}

inline std::optional<double> parse_opt_double(const std::string& field, std::size_t lineno,
                                              const char* what) {
  if (field.empty()) return std::nullopt;
  return parse_double(field, lineno, what);
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v.has_value() ? fmt_double(*v) : std::string();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// DGP specs as JSON (stamped into dataset headers)

inline nlohmann::json dgp_spec_to_json(const DgpSpec& s) {
  nlohmann::json j;
  j["family"] = dgp_family_name(s.family);
  j["n"] = s.n;
  j["seed"] = s.seed;
  j["eta_intercept"] = s.eta_intercept;
  j["eta_covariate"] = s.eta_covariate;
  j["eta_treatment"] = s.eta_treatment;
  j["gamma0"] = s.gamma0;
  j["gamma1"] = s.gamma1;
  j["theta"] = s.theta;
  j["surrogate_tpr"] = s.surrogate_tpr;
  j["surrogate_fpr"] = s.surrogate_fpr;
  j["u_outcome"] = s.u_outcome;
  j["u_treatment"] = s.u_treatment;
  j["miss_intercept"] = s.miss_intercept;
  j["miss_treated"] = s.miss_treated;
  j["miss_interaction"] = s.miss_interaction;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : s.components) {
    comps.push_back({{"weight", c.weight},
                     {"eta0", c.eta0},
                     {"eta1", c.eta1},
                     {"eta2", c.eta2},
                     {"sigma", c.sigma},
                     {"gamma0", c.gamma0},
                     {"gamma1", c.gamma1},
                     {"theta0", c.theta0},
                     {"phi", c.phi}});
  }
  j["components"] = std::move(comps);
  return j;
}

namespace detail {

inline double json_number(const nlohmann::json& j, const char* key) {
  if (!j.is_number()) throw ConfigError(std::string("dgp: '") + key + "' must be a number");
  return j.get<double>();
}

}  // namespace detail

inline DgpSpec dgp_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("dgp: expected a JSON object");
  DgpSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "family") {
      if (!value.is_string()) throw ConfigError("dgp: 'family' must be a string");
      s.family = dgp_family_from_name(value.get<std::string>());
    } else if (key == "n") {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError("dgp: 'n' must be a nonnegative integer");
      }
      s.n = value.get<std::size_t>();
    } else if (key == "seed") {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError("dgp: 'seed' must be a nonnegative integer");
      }
      s.seed = value.get<std::uint64_t>();
    } else if (key == "eta_intercept") {
      s.eta_intercept = detail::json_number(value, key.c_str());
    } else if (key == "eta_covariate") {
      s.eta_covariate = detail::json_number(value, key.c_str());
    } else if (key == "eta_treatment") {
      s.eta_treatment = detail::json_number(value, key.c_str());
    } else if (key == "gamma0") {
      s.gamma0 = detail::json_number(value, key.c_str());
    } else if (key == "gamma1") {
      s.gamma1 = detail::json_number(value, key.c_str());
    } else if (key == "theta") {
      s.theta = detail::json_number(value, key.c_str());
    } else if (key == "surrogate_tpr") {
      s.surrogate_tpr = detail::json_number(value, key.c_str());
    } else if (key == "surrogate_fpr") {
      s.surrogate_fpr = detail::json_number(value, key.c_str());
    } else if (key == "u_outcome") {
      s.u_outcome = detail::json_number(value, key.c_str());
    } else if (key == "u_treatment") {
      s.u_treatment = detail::json_number(value, key.c_str());
    } else if (key == "miss_intercept") {
      s.miss_intercept = detail::json_number(value, key.c_str());
    } else if (key == "miss_treated") {
      s.miss_treated = detail::json_number(value, key.c_str());
    } else if (key == "miss_interaction") {
      s.miss_interaction = detail::json_number(value, key.c_str());
    } else if (key == "components") {
      if (!value.is_array()) throw ConfigError("dgp: 'components' must be an array");
      s.components.clear();
      for (const auto& cj : value) {
        MixtureComponentDgp c;
        for (const auto& [ck, cv] : cj.items()) {
          if (ck == "weight") c.weight = detail::json_number(cv, "weight");
          else if (ck == "eta0") c.eta0 = detail::json_number(cv, "eta0");
          else if (ck == "eta1") c.eta1 = detail::json_number(cv, "eta1");
          else if (ck == "eta2") c.eta2 = detail::json_number(cv, "eta2");
          else if (ck == "sigma") c.sigma = detail::json_number(cv, "sigma");
          else if (ck == "gamma0") c.gamma0 = detail::json_number(cv, "gamma0");
          else if (ck == "gamma1") c.gamma1 = detail::json_number(cv, "gamma1");
          else if (ck == "theta0") c.theta0 = detail::json_number(cv, "theta0");
          else if (ck == "phi") c.phi = detail::json_number(cv, "phi");
          else throw ConfigError("dgp: unknown component key '" + ck + "'");
        }
        s.components.push_back(c);
      }
    } else {
      throw ConfigError("dgp: unknown key '" + key + "'");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dataset files: "# key: value" header, then a delta,y,a,l table with
// missing outcomes serialized as empty fields.

struct DatasetFile {
  Dataset data;
  std::optional<DgpSpec> dgp;
  std::optional<double> true_ate;
  HeaderLines header;  // extra provenance lines (config, seed, ...)
};

inline std::string dataset_file_to_csv(const DatasetFile& f) {
  f.data.validate();
  std::string out;
  if (f.dgp.has_value()) out += "# dgp: " + dgp_spec_to_json(*f.dgp).dump() + "\n";
  if (f.true_ate.has_value()) out += "# true_ate: " + fmt_double(*f.true_ate) + "\n";
  detail::append_header(out, f.header);
  out += "delta,y,a,l\n";
  for (std::size_t i = 0; i < f.data.n(); ++i) {
    out += f.data.delta[i] == 1 ? '1' : '0';
    out += ',';
    if (f.data.delta[i] == 0) {
      if (!std::isfinite(f.data.y[i])) {
        throw ValidationError("dataset: observed outcome must be finite (row " +
                              std::to_string(i) + ")");
      }
      out += fmt_double(f.data.y[i]);
    }
    out += ',';
    out += f.data.a[i] == 1 ? '1' : '0';
    out += ',';
    out += fmt_double(f.data.l[i]);
    out += '\n';
  }
  return out;
}

inline DatasetFile dataset_file_from_csv(const std::string& text) {
  DatasetFile f;
  bool saw_columns = false;
  std::optional<std::pair<std::string, std::size_t>> dgp_raw;
  std::optional<std::pair<std::string, std::size_t>> ate_raw;

  const auto on_row = [&](const std::string& line, std::size_t lineno) {
    if (!saw_columns) {
      if (line != "delta,y,a,l") {
        throw ParseError(lineno, "expected column header delta,y,a,l, got '" + line + "'");
      }
      saw_columns = true;
      return;
    }
    const auto fields = split_csv_line(line, lineno);
    if (fields.size() != 4) {
      throw ParseError(lineno, "expected 4 fields, got " + std::to_string(fields.size()));
    }
    int delta;
    if (fields[0] == "0") delta = 0;
    else if (fields[0] == "1") delta = 1;
    else throw ParseError(lineno, "delta must be 0 or 1, got '" + fields[0] + "'");
    double y;
    if (delta == 1) {
      if (!fields[1].empty()) {
        throw ParseError(lineno, "missing row carries an outcome value '" + fields[1] + "'");
      }
      y = std::numeric_limits<double>::quiet_NaN();
    } else {
      if (fields[1].empty()) throw ParseError(lineno, "observed row lacks an outcome value");
      y = detail::parse_double(fields[1], lineno, "y");
    }
    int a;
    if (fields[2] == "0") a = 0;
    else if (fields[2] == "1") a = 1;
    else throw ParseError(lineno, "a must be 0 or 1, got '" + fields[2] + "'");
    const double l = detail::parse_double(fields[3], lineno, "l");
    f.data.delta.push_back(delta);
    f.data.y.push_back(y);
    f.data.a.push_back(a);
    f.data.l.push_back(l);
  };
  // reserved keys peel off into their own fields, the rest stay as-is
  detail::scan_lines(text, on_row,
                     [&](const std::string& key, const std::string& value, std::size_t lineno) {
                       if (key == "dgp") dgp_raw = {value, lineno};
                       else if (key == "true_ate") ate_raw = {value, lineno};
                       else f.header.emplace_back(key, value);
                     });
  if (!saw_columns) throw ParseError(1, "no delta,y,a,l table found");

  if (dgp_raw.has_value()) {
    try {
      f.dgp = dgp_spec_from_json(nlohmann::json::parse(dgp_raw->first));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(dgp_raw->second, std::string("bad dgp header: ") + e.what());
    } catch (const ConfigError& e) {
      throw ParseError(dgp_raw->second, std::string("bad dgp header: ") + e.what());
    }
  }
  if (ate_raw.has_value()) {
    f.true_ate = detail::parse_double(ate_raw->first, ate_raw->second, "true_ate");
  }
  f.data.validate();
  return f;
}

inline void write_dataset_file(const std::filesystem::path& path, const DatasetFile& f) {
  write_file_atomic(path, dataset_file_to_csv(f));
}

inline DatasetFile read_dataset_file(const std::filesystem::path& path) {
  return dataset_file_from_csv(read_file(path));
}

// ---------------------------------------------------------------------------
// Posterior summary files

struct SummaryRow {
  std::string quantity;
  EstimandSummary stats;
};

struct SummaryFile {
  std::vector<SummaryRow> rows;
  HeaderLines header;
};

inline constexpr const char* kSummaryColumns = "quantity,mean,sd,mcse,q2.5,q50,q97.5,ess,rhat";

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows,
                                  const HeaderLines& header = {}) {
  std::string out;
  detail::append_header(out, header);
  out += kSummaryColumns;
  out += '\n';
  for (const auto& r : rows) {
    out += csv_field(r.quantity);
    out += ',';
    out += fmt_double(r.stats.mean);
    out += ',';
    out += fmt_double(r.stats.sd);
    out += ',';
    out += detail::fmt_opt(r.stats.mcse);
    out += ',';
    out += fmt_double(r.stats.q025);
    out += ',';
    out += fmt_double(r.stats.q500);
    out += ',';
    out += fmt_double(r.stats.q975);
    out += ',';
    out += detail::fmt_opt(r.stats.ess);
    out += ',';
    out += detail::fmt_opt(r.stats.rhat);
    out += '\n';
  }
  return out;
}

inline SummaryFile summary_from_csv(const std::string& text) {
  SummaryFile f;
  bool saw_columns = false;
  f.header = detail::scan_lines(text, [&](const std::string& line, std::size_t lineno) {
    if (!saw_columns) {
      if (line != kSummaryColumns) {
        throw ParseError(lineno, std::string("expected column header ") + kSummaryColumns);
      }
      saw_columns = true;
      return;
    }
    const auto fields = split_csv_line(line, lineno);
    if (fields.size() != 9) {
      throw ParseError(lineno, "expected 9 fields, got " + std::to_string(fields.size()));
    }
    SummaryRow r;
    r.quantity = fields[0];
    r.stats.mean = detail::parse_double(fields[1], lineno, "mean");
    r.stats.sd = detail::parse_double(fields[2], lineno, "sd");
    r.stats.mcse = detail::parse_opt_double(fields[3], lineno, "mcse");
    r.stats.q025 = detail::parse_double(fields[4], lineno, "q2.5");
    r.stats.q500 = detail::parse_double(fields[5], lineno, "q50");
    r.stats.q975 = detail::parse_double(fields[6], lineno, "q97.5");
    r.stats.ess = detail::parse_opt_double(fields[7], lineno, "ess");
    r.stats.rhat = detail::parse_opt_double(fields[8], lineno, "rhat");
    f.rows.push_back(std::move(r));
  });
  if (!saw_columns) throw ParseError(1, "no summary table found");
  return f;
}

// ---------------------------------------------------------------------------
// Draws files: one row per retained iteration, all chains stacked.

inline std::string draws_to_csv(const DrawsMatrix& m, const HeaderLines& header = {}) {
  std::string out;
  out += "# warmup: " + std::to_string(m.warmup) + "\n";
  detail::append_header(out, header);
  out += "chain,iteration,divergent";
  for (const auto& name : m.names) {
    out += ',';
    out += csv_field(name);
  }
  out += '\n';
  for (int c = 0; c < m.n_chains; ++c) {
    for (int i = 0; i < m.n_iter; ++i) {
      out += std::to_string(c);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += m.divergent[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] ? '1' : '0';
      for (std::size_t q = 0; q < m.n_quantities(); ++q) {
        out += ',';
        out += fmt_double(m.value(c, i, q));
      }
      out += '\n';
    }
  }
  return out;
}

inline DrawsMatrix draws_from_csv(const std::string& text) {
  DrawsMatrix m;
  bool saw_columns = false;
  const HeaderLines header =
      detail::scan_lines(text, [&](const std::string& line, std::size_t lineno) {
        if (!saw_columns) {
          const auto cols = split_csv_line(line, lineno);
          if (cols.size() < 4 || cols[0] != "chain" || cols[1] != "iteration" ||
              cols[2] != "divergent") {
            throw ParseError(lineno, "expected columns chain,iteration,divergent,<quantities>");
          }
          m.names.assign(cols.begin() + 3, cols.end());
          saw_columns = true;
          return;
        }
        const auto fields = split_csv_line(line, lineno);
        if (fields.size() != m.names.size() + 3) {
          throw ParseError(lineno, "expected " + std::to_string(m.names.size() + 3) +
                                       " fields, got " + std::to_string(fields.size()));
        }
        const long long chain = detail::parse_int(fields[0], lineno, "chain");
        const long long iter = detail::parse_int(fields[1], lineno, "iteration");
        if (chain < 0) throw ParseError(lineno, "chain must be nonnegative");
        if (chain >= static_cast<long long>(m.draws.size())) {
          if (chain != static_cast<long long>(m.draws.size())) {
            throw ParseError(lineno, "chains must be contiguous and in order");
          }
          m.draws.emplace_back();
          m.divergent.emplace_back();
        }
        auto& rows = m.draws[static_cast<std::size_t>(chain)];
        auto& divs = m.divergent[static_cast<std::size_t>(chain)];
        if (iter != static_cast<long long>(divs.size())) {
          throw ParseError(lineno, "iterations must be dense and in order");
        }
        if (fields[2] != "0" && fields[2] != "1") {
          throw ParseError(lineno, "divergent flag must be 0 or 1");
        }
        divs.push_back(fields[2] == "1" ? 1 : 0);
        for (std::size_t q = 0; q < m.names.size(); ++q) {
          rows.push_back(detail::parse_double(fields[3 + q], lineno, m.names[q].c_str()));
        }
      });
  if (!saw_columns) throw ParseError(1, "no draws table found");
  if (m.draws.empty()) throw ParseError(1, "draws table has no rows");
  m.n_chains = static_cast<int>(m.draws.size());
  m.n_iter = static_cast<int>(m.divergent[0].size());
  for (const auto& divs : m.divergent) {
    if (static_cast<int>(divs.size()) != m.n_iter) {
      throw ParseError(1, "chains carry different numbers of iterations");
    }
  }
  for (const auto& [key, value] : header) {
    if (key == "warmup") m.warmup = static_cast<int>(detail::parse_int(value, 1, "warmup"));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Sweep tables

struct SweepFile {
  SweepTable table;
  HeaderLines header;
};

inline std::string sweep_to_csv(const SweepTable& t, const HeaderLines& header = {}) {
  std::string out;
  out += "# base_seed: " + std::to_string(t.base_seed) + "\n";
  detail::append_header(out, header);
  out += "index";
  for (const auto& axis : t.axes) {
    out += ',';
    out += csv_field(axis);
  }
  out += ",mean,sd,mcse,q2.5,q50,q97.5,ess,rhat,divergences,seed,error\n";
  for (const auto& r : t.rows) {
    out += std::to_string(r.index);
    for (double v : r.values) {
      out += ',';
      out += fmt_double(v);
    }
    if (r.failed) {
      out += ",,,,,,,,,";  // eight statistics plus divergences stay empty
    } else {
      out += ',';
      out += fmt_double(r.ate.mean);
      out += ',';
      out += fmt_double(r.ate.sd);
      out += ',';
      out += detail::fmt_opt(r.ate.mcse);
      out += ',';
      out += fmt_double(r.ate.q025);
      out += ',';
      out += fmt_double(r.ate.q500);
      out += ',';
      out += fmt_double(r.ate.q975);
      out += ',';
      out += detail::fmt_opt(r.ate.ess);
      out += ',';
      out += detail::fmt_opt(r.ate.rhat);
      out += ',';
      out += std::to_string(r.divergences);
    }
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += csv_field(r.error);
    out += '\n';
  }
  return out;
}

inline SweepFile sweep_from_csv(const std::string& text) {
  SweepFile f;
  bool saw_columns = false;
  std::size_t n_axes = 0;
  static const char* kFixed[] = {"mean", "sd",   "mcse", "q2.5", "q50",  "q97.5",
                                 "ess",  "rhat", "divergences", "seed", "error"};
  const HeaderLines header =
      detail::scan_lines(text, [&](const std::string& line, std::size_t lineno) {
        if (!saw_columns) {
          const auto cols = split_csv_line(line, lineno);
          if (cols.size() < 13 || cols[0] != "index") {
            throw ParseError(lineno, "expected columns index,<axes>,mean,...,seed,error");
          }
          n_axes = cols.size() - 12;
          for (std::size_t k = 0; k < 11; ++k) {
            if (cols[1 + n_axes + k] != kFixed[k]) {
              throw ParseError(lineno, std::string("expected column '") + kFixed[k] + "', got '" +
                                           cols[1 + n_axes + k] + "'");
            }
          }
          f.table.axes.assign(cols.begin() + 1, cols.begin() + 1 + static_cast<long>(n_axes));
          f.table.grids.resize(n_axes);
          saw_columns = true;
          return;
        }
        const auto fields = split_csv_line(line, lineno);
        if (fields.size() != n_axes + 12) {
          throw ParseError(lineno, "expected " + std::to_string(n_axes + 12) + " fields, got " +
                                       std::to_string(fields.size()));
        }
        SweepRow r;
        r.index = static_cast<std::size_t>(detail::parse_u64(fields[0], lineno, "index"));
        for (std::size_t k = 0; k < n_axes; ++k) {
          const double v = detail::parse_double(fields[1 + k], lineno, f.table.axes[k].c_str());
          r.values.push_back(v);
          auto& grid = f.table.grids[k];
          bool seen = false;
          for (double g : grid) {
            if (g == v) {
              seen = true;
              break;
            }
          }
          if (!seen) grid.push_back(v);
        }
        const std::string& err = fields[n_axes + 11];
        r.seed = detail::parse_u64(fields[n_axes + 10], lineno, "seed");
        if (!err.empty()) {
          r.failed = true;
          r.error = err;
          for (std::size_t k = 1; k <= 9; ++k) {
            if (!fields[n_axes + k].empty()) {
              throw ParseError(lineno, "failed row carries statistics");
            }
          }
        } else {
          r.ate.mean = detail::parse_double(fields[n_axes + 1], lineno, "mean");
          r.ate.sd = detail::parse_double(fields[n_axes + 2], lineno, "sd");
          r.ate.mcse = detail::parse_opt_double(fields[n_axes + 3], lineno, "mcse");
          r.ate.q025 = detail::parse_double(fields[n_axes + 4], lineno, "q2.5");
          r.ate.q500 = detail::parse_double(fields[n_axes + 5], lineno, "q50");
          r.ate.q975 = detail::parse_double(fields[n_axes + 6], lineno, "q97.5");
          r.ate.ess = detail::parse_opt_double(fields[n_axes + 7], lineno, "ess");
          r.ate.rhat = detail::parse_opt_double(fields[n_axes + 8], lineno, "rhat");
          r.divergences = static_cast<std::size_t>(
              detail::parse_u64(fields[n_axes + 9], lineno, "divergences"));
        }
        f.table.rows.push_back(std::move(r));
      });
  if (!saw_columns) throw ParseError(1, "no sweep table found");
  for (const auto& [key, value] : header) {
    if (key == "base_seed") f.table.base_seed = detail::parse_u64(value, 1, "base_seed");
    else f.header.emplace_back(key, value);
  }
  return f;
}

inline void write_sweep_file(const std::filesystem::path& path, const SweepTable& t,
                             const HeaderLines& header = {}) {
  write_file_atomic(path, sweep_to_csv(t, header));
}

// ---------------------------------------------------------------------------
// Tipping-point reports

inline const char* cri_bound_name(CriBound b) { return b == CriBound::Lower ? "lower" : "upper"; }

inline nlohmann::json tipping_to_json(const SweepTable& t, const TippingResult& r, CriBound bound,
                                      double threshold) {
  nlohmann::json j;
  j["bound"] = cri_bound_name(bound);
  j["threshold"] = threshold;
  j["n_rows"] = t.rows.size();
  j["warnings"] = r.warnings;
  j["crossings"] = r.crossings;
  if (r.first_crossing.has_value()) {
    const SweepRow& row = t.rows[*r.first_crossing];
    nlohmann::json values;
    for (std::size_t k = 0; k < t.axes.size(); ++k) values[t.axes[k]] = row.values[k];
    j["first_crossing"] = {{"index", *r.first_crossing}, {"values", std::move(values)}};
  } else {
    j["first_crossing"] = nullptr;
  }
  return j;
}

}  // namespace causalsens
