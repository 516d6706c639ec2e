#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace causalsens {

/// One row per subject: missingness flag delta (1 = outcome missing),
/// outcome y, treatment a, covariate l. y[i] is meaningful only where
/// delta[i] == 0 and must be NaN elsewhere so a stale value can never
/// leak into a likelihood.
struct Dataset {
  std::vector<int> delta;
  std::vector<double> y;
  std::vector<int> a;
  std::vector<double> l;

  std::size_t n() const { return delta.size(); }

  std::size_t n_missing() const {
    std::size_t m = 0;
    for (int d : delta) m += d == 1;
    return m;
  }

  std::size_t n_observed() const { return n() - n_missing(); }

  void validate() const {
    if (y.size() != n() || a.size() != n() || l.size() != n()) {
      throw ValidationError("dataset: column lengths disagree");
    }
    for (std::size_t i = 0; i < n(); ++i) {
      const std::string row = " (row " + std::to_string(i) + ")";
      if (delta[i] != 0 && delta[i] != 1) throw ValidationError("dataset: delta must be 0 or 1" + row);
      if (a[i] != 0 && a[i] != 1) throw ValidationError("dataset: treatment must be 0 or 1" + row);
      if (!std::isfinite(l[i])) throw ValidationError("dataset: covariate must be finite" + row);
      if (delta[i] == 0 && !std::isfinite(y[i])) {
        throw ValidationError("dataset: outcome absent on an observed row" + row);
      }
      if (delta[i] == 1 && !std::isnan(y[i])) {
        throw ValidationError("dataset: outcome present on a row marked missing" + row);
      }
    }
  }

  void require_complete(const std::string& model) const {
    if (n_missing() != 0) {
      throw ValidationError("model '" + model +
                            "' cannot handle missing outcomes; use an outcome-missingness model "
                            "(mnar-binary for binary outcomes, mnar-mixture for continuous ones)");
    }
  }

  void require_binary_outcome(const std::string& model) const {
    for (std::size_t i = 0; i < n(); ++i) {
      if (delta[i] == 0 && y[i] != 0.0 && y[i] != 1.0) {
        throw ValidationError("model '" + model + "': outcomes must be 0/1 (row " +
                              std::to_string(i) + ")");
      }
    }
  }

  void require_binary_covariate(const std::string& model) const {
    for (std::size_t i = 0; i < n(); ++i) {
      if (l[i] != 0.0 && l[i] != 1.0) {
        throw ValidationError("model '" + model + "': covariate must be 0/1 (row " +
                              std::to_string(i) + ")");
      }
    }
  }
};

}  // namespace causalsens
