#include "optospike/io.hpp"

#include <cstdio>
#include <fstream>

#include "optospike/presets.hpp"

namespace optospike {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void header(std::ostream& out, const std::vector<std::string>& names, const std::string& prefix,
            const std::string& last) {
  out << "t";
  for (const auto& n : names) out << ',' << prefix << n;
  out << ',' << last << '\n';
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const std::vector<std::string>& names, const Trajectory& tr) {
  header(out, names, "", "u");
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    out << num(tr.t[i]);
    for (int k = 0; k < tr.x[i].size(); ++k) out << ',' << num(tr.x[i][k]);
    out << ',' << num(tr.u[i]) << '\n';
  }
}

void write_adjoint_csv(std::ostream& out, const std::vector<std::string>& names, const AdjointPath& ad,
                       const std::vector<double>& phi) {
  if (phi.size() != ad.t.size()) throw ContractError("phi and adjoint grids differ");
  header(out, names, "p_", "phi");
  for (std::size_t i = 0; i < ad.t.size(); ++i) {
    out << num(ad.t[i]);
    for (int k = 0; k < ad.p[i].size(); ++k) out << ',' << num(ad.p[i][k]);
    out << ',' << num(phi[i]) << '\n';
  }
}

void write_plot_data(std::ostream& out, const Trajectory& tr, const std::string& label) {
  out << "# " << label << "\n# index 0: t V\n";
  for (std::size_t i = 0; i < tr.t.size(); ++i) out << num(tr.t[i]) << ' ' << num(tr.x[i][0]) << '\n';
  out << "\n\n# index 1: t u\n";
  for (std::size_t i = 0; i < tr.t.size(); ++i) out << num(tr.t[i]) << ' ' << num(tr.u[i]) << '\n';
}

void write_direct_csv(std::ostream& out, const std::vector<std::string>& names, const DirectSolution& sol) {
  header(out, names, "", "u");
  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    out << num(sol.t[i]);
    for (int k = 0; k < sol.x[i].size(); ++k) out << ',' << num(sol.x[i][k]);
    const double u = i < sol.u.size() ? sol.u[i] : sol.u.back();
    out << ',' << num(u) << '\n';
  }
}

nlohmann::json to_json(const ExtremalReport& r) {
  nlohmann::json j;
  j["t_f"] = r.t_f;
  j["lambda1"] = r.lambda1;
  j["p0"] = r.p0;
  j["sign_consistency"] = r.sign_consistency;
  j["max_abs_H"] = r.max_abs_H;
  j["H_scale"] = r.H_scale;
  j["phi_max"] = r.phi_max;
  j["singular_intervals"] = nlohmann::json::array();
  for (const auto& [a, b] : r.singular_intervals) j["singular_intervals"].push_back({a, b});
  j["phi_crossings"] = r.phi_crossings;
  j["negligible_crossings"] = r.negligible_crossings;
  j["switch_times"] = r.switch_times;
  j["max_switch_offset"] = r.max_switch_offset ? nlohmann::json(*r.max_switch_offset) : nlohmann::json();
  j["samples"] = r.samples;
  j["passes"] = r.passes();
  return j;
}

nlohmann::json to_json(const DirectSolution& s) {
  return {{"N", s.N},
          {"t_f", s.t_f},
          {"defect_max", s.defect_max},
          {"kkt", s.kkt},
          {"converged", s.converged},
          {"outer_iterations", s.outer_iterations},
          {"inner_iterations", s.inner_iterations},
          {"interior_plateau_fraction", interior_plateau_fraction(s)}};
}

nlohmann::json to_json(const ComparisonRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"u_max", r.u_max},
          {"t_f3", opt(r.t_f3)},
          {"t_f4", opt(r.t_f4)},
          {"light_on3", r.light_on3},
          {"light_on4", r.light_on4},
          {"switches3", r.switches3},
          {"switches4", r.switches4},
          {"schedule3", r.schedule3},
          {"schedule4", r.schedule4},
          {"consistency3", r.consistency3},
          {"consistency4", r.consistency4},
          {"gain", opt(r.gain())},
          {"error3", r.error3},
          {"error4", r.error4}};
}

nlohmann::json to_json(const SolutionRecord& s) {
  nlohmann::json j;
  j["model"] = s.model;
  j["channel"] = s.channel;
  j["overrides"] = s.overrides;
  j["u_max"] = s.u_max;
  j["V_s"] = s.v_s;
  j["t_max"] = s.t_max;
  j["h"] = s.h;
  j["start_on"] = s.start_on;
  j["switch_times"] = s.switch_times;
  j["t_f"] = s.t_f;
  j["light_on_ms"] = s.light_on_ms;
  j["t_constant"] = s.t_constant ? nlohmann::json(*s.t_constant) : nlohmann::json();
  j["verification"] = s.verification;
  if (!s.direct.is_null()) j["direct"] = s.direct;
  return j;
}

SolutionRecord solution_from_json(const nlohmann::json& j) {
  try {
    SolutionRecord s;
    s.model = j.at("model").get<std::string>();
    s.channel = j.at("channel").get<std::string>();
    if (j.contains("overrides")) s.overrides = j.at("overrides").get<std::map<std::string, double>>();
    s.u_max = j.at("u_max").get<double>();
    s.v_s = j.at("V_s").get<double>();
    s.t_max = j.value("t_max", 300.0);
    s.h = j.value("h", 0.005);
    s.start_on = j.value("start_on", true);
    s.switch_times = j.at("switch_times").get<std::vector<double>>();
    s.t_f = j.value("t_f", 0.0);
    s.light_on_ms = j.value("light_on_ms", 0.0);
    if (j.contains("t_constant") && j["t_constant"].is_number()) s.t_constant = j["t_constant"].get<double>();
    if (j.contains("verification")) s.verification = j["verification"];
    if (j.contains("direct")) s.direct = j["direct"];
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("solution file: ") + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

}  // namespace optospike
