#pragma once

// Grid sweeps: refit the model across the cartesian product of grid-valued
// sensitivity entries, one deterministic seed per grid point, and locate
// tipping points where a credible-interval bound crosses a threshold
// relative to the first (null-value) row's side.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "causalsens/dataset.hpp"
#include "causalsens/errors.hpp"
#include "causalsens/estimands.hpp"
#include "causalsens/hmc.hpp"
#include "causalsens/models.hpp"
#include "causalsens/sensitivity.hpp"

namespace causalsens {

struct SweepRow {
  std::size_t index = 0;
  std::vector<double> values;  // swept-parameter values, axis order
  std::uint64_t seed = 0;      // sampler seed used at this point
  bool failed = false;
  std::string error;
  EstimandSummary ate{};
  std::size_t divergences = 0;
};

struct SweepTable {
  std::vector<std::string> axes;           // swept parameter names
  std::vector<std::vector<double>> grids;  // grid per axis
  std::uint64_t base_seed = 0;
  std::vector<SweepRow> rows;  // grid order, last axis fastest
};

inline SweepTable grid_sweep(ModelKind kind, const Dataset& data, const SensitivityConfig& sens,
                             const SamplerConfig& cfg, const MixtureOptions& mixture = {},
                             int threads = 1) {
  cfg.validate();
  SweepTable table;
  table.base_seed = cfg.seed;
  SensitivityConfig pass_through;
  for (const auto& [name, entry] : sens.entries) {
    if (entry.kind == SensitivityEntry::Kind::Grid) {
      table.axes.push_back(name);
      table.grids.push_back(entry.grid);
    } else {
      pass_through.entries[name] = entry;
    }
  }
  if (table.axes.empty()) {
    throw ValidationError("sweep: needs at least one grid-valued sensitivity entry");
  }
  std::size_t total = 1;
  for (const auto& g : table.grids) total *= g.size();
  table.rows.resize(total);

  auto run_point = [&](std::size_t idx) {
    SweepRow& row = table.rows[idx];
    row.index = idx;
    row.seed = derive_seed(cfg.seed, 0x53F7u, idx);
    row.values.resize(table.axes.size());
    std::size_t rem = idx;
    for (std::size_t k = table.axes.size(); k-- > 0;) {
      row.values[k] = table.grids[k][rem % table.grids[k].size()];
      rem /= table.grids[k].size();
    }
    try {
      SensitivityConfig pinned = pass_through;
      for (std::size_t k = 0; k < table.axes.size(); ++k) {
        pinned.entries[table.axes[k]] = SensitivityEntry::point(row.values[k]);
      }
      auto point_cfg = cfg;
      point_cfg.seed = row.seed;
      const DrawsMatrix fit = hmc_sample(build_model(kind, data, pinned, mixture), point_cfg);
      const auto q = fit.index_of("ate");
      if (!q) throw SamplingError("sweep: model exposes no effect quantity");
      row.ate = summarize(fit.by_chain(*q));
      row.divergences = fit.total_divergences();
    } catch (const std::exception& e) {
      // a failed point must not abort the sweep; the row carries the reason
      row.failed = true;
      row.error = e.what();
    }
  };

  if (threads <= 1) {
    for (std::size_t i = 0; i < total; ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(threads), total);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) run_point(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return table;
}

enum class CriBound { Lower, Upper };

struct TippingResult {
  // first row (sweep order) whose bound reaches the far side of the threshold
  std::optional<std::size_t> first_crossing;
  std::vector<std::size_t> crossings;  // every such row; the heatmap answer
  std::vector<std::string> warnings;
};

// The first non-failed row fixes which side of the threshold counts as the
// starting side; a crossing is any later value at or beyond the threshold in
// the other direction. Failed rows are skipped and reported.
inline TippingResult tipping_point(const SweepTable& table, CriBound bound, double threshold) {
  TippingResult out;
  const auto value = [bound](const SweepRow& r) {
    return bound == CriBound::Lower ? r.ate.q025 : r.ate.q975;
  };
  bool have_ref = false;
  bool ref_below = false;
  for (const auto& row : table.rows) {
    if (row.failed) {
      out.warnings.push_back("row " + std::to_string(row.index) + " skipped: " + row.error);
      continue;
    }
    if (!have_ref) {
      have_ref = true;
      ref_below = value(row) < threshold;
    }
    const double b = value(row);
    const bool crossed = ref_below ? b >= threshold : b <= threshold;
    if (crossed) {
      if (!out.first_crossing) out.first_crossing = row.index;
      out.crossings.push_back(row.index);
    }
  }
  return out;
}

}  // namespace causalsens
