#pragma once

#include <random>

#include "optospike/chr2.hpp"
#include "optospike/presets.hpp"

namespace optospike::test {

inline ControlledSystem preset_system(const std::string& model, const std::string& channel, double u_max) {
  static const PresetRegistry reg;
  const NeuronPreset& n = reg.neuron(model);
  return couple(n.model(), channel_for(n, reg.channel(channel)), u_max);
}

inline const NeuronPreset& preset(const std::string& model) {
  static const PresetRegistry reg;
  return reg.neuron(model);
}

// Random point in the gate box and channel simplex.
inline Vec random_state(std::mt19937& rng, const ControlledSystem& sys, double lo, double hi) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vec x(sys.dim());
  x[0] = lo + (hi - lo) * U(rng);
  for (int i = 1; i < sys.neuron_dim(); ++i) x[i] = U(rng);
  double budget = 1.0;
  for (int i = sys.neuron_dim(); i < sys.dim(); ++i) {
    x[i] = 0.8 * budget * U(rng);
    budget -= x[i];
  }
  return x;
}

inline double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(b.norm(), 1e-12); }

}  // namespace optospike::test
