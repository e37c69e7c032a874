#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "optospike/chr2.hpp"
#include "optospike/neuron.hpp"

namespace optospike {

// Unknown preset, unknown override key or malformed config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct NeuronPreset {
  std::string name;
  NeuronModel::Params params;
  RestScan scan;
  double v_s = 0.0;     // default spike threshold
  double h = 0.005;     // integration step, ms
  double u_max = 0.028;
  std::optional<double> v_chr2;  // channel reversal used with this neuron, when it differs from the channel preset

  NeuronModel model() const { return NeuronModel(params, scan); }
};

struct ChannelPreset {
  std::string name;
  ChannelParams params;
};

// Frozen linear fit h = a + b n along the periodic HH orbit (I = 10, v0 = 0, 100 ms).
inline constexpr double kHh2dA = 0.873189;
inline constexpr double kHh2dB = -1.06947;

class PresetRegistry {
 public:
  PresetRegistry();

  // JSON object {"neurons": {name: {"base": preset, key: value...}}, "channels": {...}}.
  void load_file(const std::string& path);
  void load_json_text(const std::string& text);

  const NeuronPreset& neuron(const std::string& name) const;
  const ChannelPreset& channel(const std::string& name) const;
  std::vector<std::string> neuron_names() const;
  std::vector<std::string> channel_names() const;

 private:
  std::string resolve(const std::string& name) const;
  std::map<std::string, NeuronPreset> neurons_;
  std::map<std::string, ChannelPreset> channels_;
  std::map<std::string, std::string> aliases_;
};

// Channel parameters as coupled to this neuron (reversal override applied).
ChannelParams channel_for(const NeuronPreset& neuron, const ChannelPreset& channel);

// Sets a named constant. Run-level keys are "V_s" and "h". Throws ConfigError for unknown keys.
void apply_override(NeuronPreset& neuron, ChannelParams& channel, const std::string& key, double value);

// Parses "key=value".
std::pair<std::string, double> parse_override(const std::string& text);

std::vector<std::string> override_keys(const NeuronPreset& neuron, const ChannelParams& channel);

}  // namespace optospike
