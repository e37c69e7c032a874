#include "optospike/presets.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace optospike {

namespace {

using Field = std::pair<const char*, double*>;

std::vector<Field> fields(FhnParams& p) { return {{"a", &p.a}, {"b", &p.b}, {"c", &p.c}, {"C", &p.C}}; }

std::vector<Field> fields(MlParams& p) {
  return {{"V1", &p.V1},     {"V2", &p.V2},   {"V3", &p.V3},   {"V4", &p.V4},   {"g_Ca", &p.g_Ca},
          {"g_K", &p.g_K},   {"g_L", &p.g_L}, {"V_Ca", &p.V_Ca}, {"V_K", &p.V_K}, {"V_L", &p.V_L},
          {"C", &p.C},       {"phi", &p.phi}};
}

std::vector<Field> fields(HhParams& p) {
  return {{"g_K", &p.g_K}, {"g_Na", &p.g_Na}, {"g_L", &p.g_L}, {"E_K", &p.E_K},
          {"E_Na", &p.E_Na}, {"E_L", &p.E_L},  {"C", &p.C}};
}

std::vector<Field> fields(Hh2dParams& p) {
  auto f = fields(p.hh);
  f.emplace_back("a_h", &p.a_h);
  f.emplace_back("b_h", &p.b_h);
  return f;
}

std::vector<Field> fields(ChR2ThreeParams& p) {
  return {{"K_d", &p.K_d}, {"K_r", &p.K_r}, {"g_ChR2", &p.g}, {"V_ChR2", &p.V_ChR2}};
}

std::vector<Field> fields(ChR2FourParams& p) {
  return {{"K_d1", &p.K_d1}, {"K_d2", &p.K_d2}, {"e12", &p.e12},   {"e21", &p.e21},     {"K_r", &p.K_r},
          {"eps1", &p.eps1}, {"eps2", &p.eps2}, {"rho", &p.rho},   {"g_ChR2", &p.g},    {"V_ChR2", &p.V_ChR2}};
}

std::vector<Field> all_fields(NeuronPreset& n, ChannelParams& c) {
  std::vector<Field> out{{"V_s", &n.v_s}, {"h", &n.h}};
  auto nf = std::visit([](auto& p) { return fields(p); }, n.params);
  auto cf = std::visit([](auto& p) { return fields(p); }, c);
  out.insert(out.end(), nf.begin(), nf.end());
  out.insert(out.end(), cf.begin(), cf.end());
  return out;
}

MlParams longtin_params() {
  MlParams p;
  p.V1 = -0.01;
  p.V2 = 0.15;
  p.V3 = 0.1;
  p.V4 = 0.145;
  p.g_Ca = 1.0;
  p.g_K = 2.0;
  p.g_L = 0.5;
  p.V_Ca = 1.0;
  p.V_K = -0.7;
  p.V_L = -0.5;
  p.C = 1.0;
  p.phi = 0.333;
  return p;
}

// Translates every potential so that the resting voltage sits at 0.
NeuronPreset shifted(NeuronPreset base, const std::string& name) {
  const double rest = resting_state(base.model())[0];
  auto& p = std::get<MlParams>(base.params);
  p.V1 -= rest;
  p.V3 -= rest;
  p.V_Ca -= rest;
  p.V_K -= rest;
  p.V_L -= rest;
  base.scan.lo -= rest;
  base.scan.hi -= rest;
  base.v_s -= rest;
  base.name = name;
  return base;
}

}  // namespace

PresetRegistry::PresetRegistry() {
  NeuronPreset fhn{"fhn-classic", FhnParams{}, RestScan{}, 1.5, 0.005, 0.5, 1.0};
  NeuronPreset ml{"ml-ditlevsen", MlParams{}, RestScan{}, 30.0, 0.005, 0.028, std::nullopt};
  NeuronPreset longtin{"ml-longtin", longtin_params(), RestScan{-1.0, 1.0, 0.001}, 0.3, 0.005, 0.028, 0.1};
  HhParams hh;
  hh.E_L = calibrate_leak(hh);
  NeuronPreset hh1952{"hh-1952", hh, RestScan{}, 90.0, 0.0025, 0.028, std::nullopt};
  NeuronPreset hh2d{"hh2d", Hh2dParams{hh, kHh2dA, kHh2dB}, RestScan{}, 90.0, 0.0025, 0.028, std::nullopt};
  for (const auto& p : {fhn, ml, longtin, hh1952, hh2d}) neurons_.emplace(p.name, p);
  neurons_.emplace("ml-ditlevsen-shifted", shifted(ml, "ml-ditlevsen-shifted"));
  neurons_.emplace("ml-longtin-shifted", shifted(longtin, "ml-longtin-shifted"));

  channels_.emplace("chr2-3-nikolic", ChannelPreset{"chr2-3-nikolic", ChR2ThreeParams{}});
  channels_.emplace("chr2-4-foutz", ChannelPreset{"chr2-4-foutz", ChR2FourParams{}});

  aliases_ = {{"fhn", "fhn-classic"}, {"ml", "ml-ditlevsen"},       {"hh", "hh-1952"},
              {"chr2-3", "chr2-3-nikolic"}, {"chr2-4", "chr2-4-foutz"}};
}

std::string PresetRegistry::resolve(const std::string& name) const {
  auto it = aliases_.find(name);
  return it == aliases_.end() ? name : it->second;
}

const NeuronPreset& PresetRegistry::neuron(const std::string& name) const {
  auto it = neurons_.find(resolve(name));
  if (it == neurons_.end()) throw ConfigError("unknown model preset '" + name + "'");
  return it->second;
}

const ChannelPreset& PresetRegistry::channel(const std::string& name) const {
  auto it = channels_.find(resolve(name));
  if (it == channels_.end()) throw ConfigError("unknown channel preset '" + name + "'");
  return it->second;
}

std::vector<std::string> PresetRegistry::neuron_names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : neurons_) out.push_back(k);
  return out;
}

std::vector<std::string> PresetRegistry::channel_names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : channels_) out.push_back(k);
  return out;
}

void PresetRegistry::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open preset file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  load_json_text(ss.str());
}

void PresetRegistry::load_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("preset file: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("preset file must hold a JSON object");
  auto constants = [](const nlohmann::json& entry, auto&& apply) {
    for (const auto& [key, value] : entry.items()) {
      if (key == "base") continue;
      if (!value.is_number()) throw ConfigError("preset constant '" + key + "' must be a number");
      apply(key, value.template get<double>());
    }
  };
  if (j.contains("neurons")) {
    for (const auto& [name, entry] : j["neurons"].items()) {
      if (!entry.is_object() || !entry.contains("base")) throw ConfigError("neuron preset '" + name + "' needs a base");
      NeuronPreset p = neuron(entry["base"].get<std::string>());
      p.name = name;
      ChannelParams dummy = ChR2ThreeParams{};
      constants(entry, [&](const std::string& k, double v) {
        if (k == "V_ChR2") {
          p.v_chr2 = v;
        } else if (k == "u_max") {
          p.u_max = v;
        } else {
          apply_override(p, dummy, k, v);
        }
      });
      neurons_[name] = p;
    }
  }
  if (j.contains("channels")) {
    for (const auto& [name, entry] : j["channels"].items()) {
      if (!entry.is_object() || !entry.contains("base")) throw ConfigError("channel preset '" + name + "' needs a base");
      ChannelPreset c = channel(entry["base"].get<std::string>());
      c.name = name;
      constants(entry, [&](const std::string& k, double v) {
        bool hit = false;
        std::visit(
            [&](auto& p) {
              for (auto& [fk, ptr] : fields(p))
                if (k == fk) {
                  *ptr = v;
                  hit = true;
                }
            },
            c.params);
        if (!hit) throw ConfigError("unknown channel constant '" + k + "'");
      });
      channels_[name] = c;
    }
  }
}

ChannelParams channel_for(const NeuronPreset& neuron, const ChannelPreset& channel) {
  ChannelParams out = channel.params;
  if (neuron.v_chr2) std::visit([&](auto& p) { p.V_ChR2 = *neuron.v_chr2; }, out);
  return out;
}

void apply_override(NeuronPreset& neuron, ChannelParams& channel, const std::string& key, double value) {
  for (auto& [name, ptr] : all_fields(neuron, channel)) {
    if (key == name) {
      *ptr = value;
      return;
    }
  }
  throw ConfigError("unknown constant '" + key + "'");
}

std::pair<std::string, double> parse_override(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + text + "'");
  std::string key = text.substr(0, eq);
  std::string val = text.substr(eq + 1);
  try {
    std::size_t used = 0;
    double v = std::stod(val, &used);
    if (used != val.size()) throw std::invalid_argument(val);
    return {key, v};
  } catch (const std::exception&) {
    throw ConfigError("override value is not a number: '" + text + "'");
  }
}

std::vector<std::string> override_keys(const NeuronPreset& neuron, const ChannelParams& channel) {
  NeuronPreset n = neuron;
  ChannelParams c = channel;
  std::vector<std::string> out;
  for (const auto& [name, ptr] : all_fields(n, c)) out.emplace_back(name);
  return out;
}

}  // namespace optospike
