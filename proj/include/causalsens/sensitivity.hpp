#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace causalsens {

/// Prior on one sensitivity parameter: a fixed value (point mass), a sweep
/// grid (expanded by the sweep driver, never by a single fit), or a normal
/// prior that promotes the parameter to a sampled one.
struct SensitivityEntry {
  enum class Kind { PointMass, Grid, NormalPrior };

  Kind kind = Kind::PointMass;
  double value = 0.0;                        // PointMass
  std::vector<double> grid;                  // Grid
  double prior_mean = 0.0, prior_sd = 1.0;   // NormalPrior

  static SensitivityEntry point(double v) {
    if (!std::isfinite(v)) throw ValidationError("sensitivity: point-mass value must be finite");
    SensitivityEntry e;
    e.value = v;
    return e;
  }

  static SensitivityEntry grid_of(std::vector<double> values) {
    if (values.empty()) throw ValidationError("sensitivity: grid must be nonempty");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) throw ValidationError("sensitivity: grid values must be finite");
      for (std::size_t j = 0; j < i; ++j) {
        if (values[i] == values[j]) throw ValidationError("sensitivity: grid values must be distinct");
      }
    }
    SensitivityEntry e;
    e.kind = Kind::Grid;
    e.grid = std::move(values);
    return e;
  }

  static SensitivityEntry normal(double mean, double sd) {
    if (!std::isfinite(mean) || !std::isfinite(sd) || !(sd > 0.0)) {
      throw ValidationError("sensitivity: normal prior needs finite mean and sd > 0");
    }
    SensitivityEntry e;
    e.kind = Kind::NormalPrior;
    e.prior_mean = mean;
    e.prior_sd = sd;
    return e;
  }
};

struct SensitivityConfig {
  std::map<std::string, SensitivityEntry> entries;

  const SensitivityEntry* find(const std::string& name) const {
    const auto it = entries.find(name);
    return it == entries.end() ? nullptr : &it->second;
  }

  bool has_grid() const {
    for (const auto& [name, e] : entries) {
      if (e.kind == SensitivityEntry::Kind::Grid) return true;
    }
    return false;
  }
};

}  // namespace causalsens
