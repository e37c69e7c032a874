#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "optospike/optimize.hpp"
#include "optospike/pmp.hpp"

namespace optospike {

// t,<names...>,u
void write_trajectory_csv(std::ostream& out, const std::vector<std::string>& names, const Trajectory& tr);

// t,<p_names...>,phi
void write_adjoint_csv(std::ostream& out, const std::vector<std::string>& names, const AdjointPath& ad,
                       const std::vector<double>& phi);

// Gnuplot data with two indexed blocks: voltage against t, then u against t.
void write_plot_data(std::ostream& out, const Trajectory& tr, const std::string& label);

// t,<names...>,u for a direct-transcription solution (u on the last node repeats the last interval).
void write_direct_csv(std::ostream& out, const std::vector<std::string>& names, const DirectSolution& sol);

nlohmann::json to_json(const ExtremalReport& r);
nlohmann::json to_json(const DirectSolution& s);
nlohmann::json to_json(const ComparisonRow& r);

// Everything needed to rebuild the system and re-verify a schedule.
struct SolutionRecord {
  std::string model;
  std::string channel;
  std::map<std::string, double> overrides;
  double u_max = 0.0;
  double v_s = 0.0;
  double t_max = 300.0;
  double h = 0.005;
  bool start_on = true;
  std::vector<double> switch_times;
  double t_f = 0.0;
  double light_on_ms = 0.0;
  std::optional<double> t_constant;
  nlohmann::json verification;
  nlohmann::json direct;
};

nlohmann::json to_json(const SolutionRecord& s);
// Throws ConfigError on missing or mistyped fields.
SolutionRecord solution_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace optospike
