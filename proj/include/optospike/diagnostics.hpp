#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "optospike/presets.hpp"

namespace optospike {

struct Check {
  std::string name;
  bool passed = false;
  bool hard = true;  // soft checks are reported but never fail the battery
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct DiagnosticsReport {
  std::vector<Check> checks;
  std::vector<std::pair<double, double>> ml_locus;  // (nu, omega)
  bool ok() const;
  nlohmann::json to_json() const;
};

struct DiagnosticsOptions {
  std::vector<std::pair<std::string, double>> overrides;  // applied to every model/channel pair that knows the key
  int samples = 100;
  int locus_points = 1000;
  unsigned seed = 20240607;
};

// Invariant battery: resting states, Jacobians, bracket identities, singular locus, h-fit, u_max.
DiagnosticsReport run_diagnostics(const PresetRegistry& registry, const DiagnosticsOptions& opts = {});

}  // namespace optospike
