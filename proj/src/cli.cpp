#include "optospike/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "optospike/diagnostics.hpp"
#include "optospike/io.hpp"
#include "optospike/optimize.hpp"
#include "optospike/presets.hpp"

namespace optospike {

namespace {

struct RunConfig {
  std::string model = "fhn";
  std::string channel = "chr2-3";
  std::optional<double> u_max;
  std::vector<double> umax_list;
  std::optional<double> v_s;
  std::string solver = "bang";
  std::string preset_file;
  std::vector<std::string> sets;
  std::string out = ".";
  std::optional<double> t_max;
  int k_max = 4;
  int nodes = 400;
};

struct Resolved {
  NeuronPreset neuron;
  ChannelParams channel;
  std::map<std::string, double> overrides;
  double v_s;
  double t_max;
};

PresetRegistry load_registry(const std::string& preset_file) {
  PresetRegistry reg;
  if (!preset_file.empty()) reg.load_file(preset_file);
  return reg;
}

Resolved resolve(const PresetRegistry& reg, const std::string& model, const std::string& channel,
                 const std::map<std::string, double>& overrides, std::optional<double> v_s, std::optional<double> t_max) {
  Resolved r{reg.neuron(model), channel_for(reg.neuron(model), reg.channel(channel)), overrides, 0.0, 300.0};
  for (const auto& [k, v] : overrides) apply_override(r.neuron, r.channel, k, v);
  r.v_s = v_s ? *v_s : r.neuron.v_s;
  r.t_max = t_max ? *t_max : 300.0;
  return r;
}

std::map<std::string, double> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, double> out;
  for (const auto& s : sets) {
    auto [k, v] = parse_override(s);
    out[k] = v;
  }
  return out;
}

std::filesystem::path out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

std::string file_text(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

std::string num_label(double u) {
  std::ostringstream ss;
  ss << u;
  return ss.str();
}

void failure_json(const std::filesystem::path& dir, const std::string& what, std::ostream& err) {
  nlohmann::json j{{"status", "solver_failure"}, {"error", what}};
  write_json_file((dir / "failure.json").string(), j);
  err << j.dump(2) << '\n';
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  PresetRegistry reg = load_registry(cfg.preset_file);
  Resolved r = resolve(reg, cfg.model, cfg.channel, parse_sets(cfg.sets), cfg.v_s, cfg.t_max);
  const double u_max = cfg.u_max ? *cfg.u_max : r.neuron.u_max;
  ControlledSystem sys = couple(r.neuron.model(), r.channel, u_max);
  auto dir = out_dir(cfg.out);
  auto names = sys.state_names();

  SolutionRecord rec;
  rec.model = cfg.model;
  rec.channel = cfg.channel;
  rec.overrides = r.overrides;
  rec.u_max = u_max;
  rec.v_s = r.v_s;
  rec.t_max = r.t_max;
  rec.h = r.neuron.h;
  int code = kExitOk;

  if (cfg.solver == "bang" || cfg.solver == "both") {
    BangOptions bo;
    bo.k_max = cfg.k_max;
    bo.t_max = r.t_max;
    bo.h = r.neuron.h;
    BangResult res;
    try {
      res = solve_bangbang(sys, r.v_s, bo);
    } catch (const UnreachableError& e) {
      failure_json(dir, e.what(), err);
      return kExitSolver;
    } catch (const DivergenceError& e) {
      failure_json(dir, e.what(), err);
      return kExitSolver;
    }
    VerifyOptions vo;
    vo.t_max = r.t_max;
    vo.h = r.neuron.h;
    ExtremalArtifacts art = verify_extremal_full(sys, res.schedule, r.v_s, vo);
    rec.switch_times = res.schedule.switches;
    rec.t_f = res.t_f;
    rec.light_on_ms = res.light_on;
    rec.t_constant = res.t_constant;
    rec.verification = to_json(art.report);
    write_text_file((dir / "trajectory.csv").string(),
                    file_text([&](std::ostream& o) { write_trajectory_csv(o, names, art.trajectory); }));
    write_text_file((dir / "adjoint.csv").string(),
                    file_text([&](std::ostream& o) { write_adjoint_csv(o, names, art.adjoint, art.phi); }));
    write_text_file((dir / "plot.dat").string(), file_text([&](std::ostream& o) {
                      write_plot_data(o, art.trajectory, cfg.model + " + " + cfg.channel + ", u_max = " + num_label(u_max));
                    }));
    if (!art.report.passes()) code = kExitVerify;
  }
  if (cfg.solver == "direct" || cfg.solver == "both") {
    DirectOptions d;
    d.t_max = r.t_max;
    d.h = r.neuron.h;
    DirectSolution sol = solve_direct(sys, r.v_s, cfg.nodes, d);
    rec.direct = to_json(sol);
    write_text_file((dir / "direct.csv").string(),
                    file_text([&](std::ostream& o) { write_direct_csv(o, names, sol); }));
    if (cfg.solver == "direct") rec.t_f = sol.t_f;
    if (!sol.converged) code = kExitSolver;
  }
  nlohmann::json j = to_json(rec);
  write_json_file((dir / "solution.json").string(), j);
  out << j.dump(2) << '\n';
  return code;
}

int cmd_verify(const std::string& file, const std::string& preset_file, const std::string& report_path,
               std::ostream& out) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open '" + file + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot parse solution file: ") + e.what());
  }
  SolutionRecord rec = solution_from_json(j);
  PresetRegistry reg = load_registry(preset_file);
  Resolved r = resolve(reg, rec.model, rec.channel, rec.overrides, rec.v_s, rec.t_max);
  ControlledSystem sys = couple(r.neuron.model(), r.channel, rec.u_max);
  VerifyOptions vo;
  vo.t_max = rec.t_max;
  vo.h = rec.h;
  BangBangSchedule s{rec.u_max, rec.switch_times, rec.start_on};
  ExtremalReport rep = verify_extremal(sys, s, rec.v_s, vo);
  nlohmann::json rj = to_json(rep);
  if (!report_path.empty()) write_json_file(report_path, rj);
  out << rj.dump(2) << '\n';
  return rep.passes() ? kExitOk : kExitVerify;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  if (cfg.umax_list.empty()) throw ConfigError("--umax-list must be nonempty");
  PresetRegistry reg = load_registry(cfg.preset_file);
  const NeuronPreset& base = reg.neuron(cfg.model);
  NeuronPreset neuron = base;
  ChannelParams c3 = channel_for(base, reg.channel("chr2-3"));
  ChannelParams c4 = channel_for(base, reg.channel("chr2-4"));
  for (const auto& [k, v] : parse_sets(cfg.sets)) {
    bool hit = false;
    for (ChannelParams* c : {&c3, &c4}) {
      try {
        apply_override(neuron, *c, k, v);
        hit = true;
      } catch (const ConfigError&) {
      }
    }
    if (!hit) throw ConfigError("unknown constant '" + k + "'");
  }
  const double v_s = cfg.v_s ? *cfg.v_s : neuron.v_s;
  BangOptions bo;
  bo.k_max = cfg.k_max;
  bo.t_max = cfg.t_max.value_or(300.0);
  bo.h = neuron.h;
  NeuronModel model = neuron.model();
  auto rows = sweep(model, std::get<ChR2ThreeParams>(c3), std::get<ChR2FourParams>(c4), cfg.umax_list, v_s, bo);

  auto dir = out_dir(cfg.out);
  std::ostringstream csv;
  csv << "u_max,t_f3,t_f4,gain,switches3,switches4,light_on3,light_on4,consistency3,consistency4,error3,error4\n";
  nlohmann::json arr = nlohmann::json::array();
  bool any = false;
  for (const auto& row : rows) {
    auto opt = [](const std::optional<double>& v) { return v ? num_label(*v) : std::string(); };
    csv << row.u_max << ',' << opt(row.t_f3) << ',' << opt(row.t_f4) << ',' << opt(row.gain()) << ',' << row.switches3
        << ',' << row.switches4 << ',' << row.light_on3 << ',' << row.light_on4 << ',' << row.consistency3 << ','
        << row.consistency4 << ",\"" << row.error3 << "\",\"" << row.error4 << "\"\n";
    arr.push_back(to_json(row));
    any = any || row.t_f3 || row.t_f4;

    std::ostringstream plot;
    for (int which = 0; which < 2; ++which) {
      const auto& tf = which == 0 ? row.t_f3 : row.t_f4;
      if (!tf) continue;
      ControlledSystem sys = couple(model, which == 0 ? c3 : c4, row.u_max);
      BangBangSchedule s{row.u_max, which == 0 ? row.schedule3 : row.schedule4, true};
      Trajectory tr = integrate_to_hit(sys, ControlSignal::bang(s), sys.dark_rest(), v_s, bo.t_max, IntegrateOptions{bo.h});
      write_plot_data(plot, tr, which == 0 ? "3-state" : "4-state");
      plot << "\n\n";
    }
    write_text_file((dir / ("plot_umax_" + num_label(row.u_max) + ".dat")).string(), plot.str());
  }
  write_text_file((dir / "comparison.csv").string(), csv.str());
  nlohmann::json j{{"model", cfg.model}, {"V_s", v_s}, {"rows", arr}};
  write_json_file((dir / "comparison.json").string(), j);
  out << csv.str();
  return any ? kExitOk : kExitSolver;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.umax_list.empty()) throw ConfigError("--umax-list must be nonempty");
  PresetRegistry reg = load_registry(cfg.preset_file);
  Resolved r = resolve(reg, cfg.model, cfg.channel, parse_sets(cfg.sets), cfg.v_s, cfg.t_max);
  BangOptions bo;
  bo.k_max = cfg.k_max;
  bo.t_max = r.t_max;
  bo.h = r.neuron.h;
  auto dir = out_dir(cfg.out);
  std::ostringstream csv;
  csv << "u_max,t_f,switches,light_on,consistency,error\n";
  nlohmann::json arr = nlohmann::json::array();
  std::vector<std::pair<double, double>> tfs;
  for (double u : cfg.umax_list) {
    nlohmann::json row{{"u_max", u}};
    try {
      ControlledSystem sys = couple(r.neuron.model(), r.channel, u);
      BangResult res = solve_bangbang(sys, r.v_s, bo);
      VerifyOptions vo;
      vo.t_max = r.t_max;
      vo.h = r.neuron.h;
      ExtremalArtifacts art = verify_extremal_full(sys, res.schedule, r.v_s, vo);
      row["t_f"] = res.t_f;
      row["switch_times"] = res.schedule.switches;
      row["light_on_ms"] = res.light_on;
      row["verification"] = to_json(art.report);
      csv << u << ',' << num_label(res.t_f) << ',' << res.schedule.k() << ',' << res.light_on << ','
          << art.report.sign_consistency << ",\n";
      tfs.emplace_back(u, res.t_f);
      std::ostringstream plot;
      write_plot_data(plot, art.trajectory, cfg.model + " + " + cfg.channel + ", u_max = " + num_label(u));
      write_text_file((dir / ("plot_umax_" + num_label(u) + ".dat")).string(), plot.str());
    } catch (const Error& e) {
      row["error"] = e.what();
      csv << u << ",,,,,\"" << e.what() << "\"\n";
    }
    arr.push_back(row);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < tfs.size(); ++i)
    if (tfs[i].first > tfs[i - 1].first && tfs[i].second > tfs[i - 1].second + bo.resolution) monotone = false;
  write_text_file((dir / "sweep.csv").string(), csv.str());
  write_json_file((dir / "sweep.json").string(),
                  {{"model", cfg.model}, {"channel", cfg.channel}, {"V_s", r.v_s}, {"monotone", monotone}, {"rows", arr}});
  out << csv.str();
  return tfs.empty() ? kExitSolver : kExitOk;
}

int cmd_diagnostics(const RunConfig& cfg, std::ostream& out) {
  PresetRegistry reg = load_registry(cfg.preset_file);
  DiagnosticsOptions o;
  for (const auto& [k, v] : parse_sets(cfg.sets)) o.overrides.emplace_back(k, v);
  DiagnosticsReport rep = run_diagnostics(reg, o);
  auto dir = out_dir(cfg.out);
  nlohmann::json j = rep.to_json();
  write_json_file((dir / "diagnostics.json").string(), j);
  std::ostringstream csv;
  csv << "nu,omega\n";
  for (const auto& [nu, w] : rep.ml_locus) csv << num_label(nu) << ',' << num_label(w) << '\n';
  write_text_file((dir / "ml_locus.csv").string(), csv.str());
  out << j.dump(2) << '\n';
  return rep.ok() ? kExitOk : kExitVerify;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimal-time optogenetic spike control"};
  app.require_subcommand(1);
  RunConfig cfg;
  double umax = 0, vs = 0, tmax = 0;

  auto common = [&](CLI::App* c) {
    c->add_option("--model", cfg.model, "Neuron preset (fhn, ml, ml-longtin, hh, hh2d, ...)");
    c->add_option("--preset-file", cfg.preset_file, "JSON file with extra presets")->check(CLI::ExistingFile);
    c->add_option("--set", cfg.sets, "Constant override key=value (repeatable)");
    c->add_option("--out", cfg.out, "Output directory");
    c->add_option("--tmax", tmax, "Search horizon in ms")->check(CLI::PositiveNumber);
    c->add_option("--kmax", cfg.k_max, "Largest switch count tried")->check(CLI::NonNegativeNumber);
  };

  auto* solve = app.add_subcommand("solve", "Solve one minimal-time problem and verify it");
  common(solve);
  solve->add_option("--channel", cfg.channel, "Channel preset (chr2-3, chr2-4)");
  solve->add_option("--umax", umax, "Maximal light intensity, 1/ms")->check(CLI::PositiveNumber);
  solve->add_option("--vs", vs, "Spike threshold")->required();
  solve->add_option("--solver", cfg.solver, "Solver")->check(CLI::IsMember({"bang", "direct", "both"}));
  solve->add_option("--nodes", cfg.nodes, "Direct transcription intervals")->check(CLI::Range(50, 100000));

  std::string verify_file, report_path;
  auto* verify = app.add_subcommand("verify", "Re-verify a solution.json against the maximum principle");
  verify->add_option("solution", verify_file, "solution.json")->required();
  verify->add_option("--preset-file", cfg.preset_file, "JSON file with extra presets");
  verify->add_option("--report", report_path, "Write the report JSON here");

  auto* sweep_cmd = app.add_subcommand("sweep", "Solve one coupling over a list of u_max values");
  common(sweep_cmd);
  sweep_cmd->add_option("--channel", cfg.channel, "Channel preset (chr2-3, chr2-4)");
  sweep_cmd->add_option("--umax-list", cfg.umax_list, "u_max values")->required()->delimiter(',');
  sweep_cmd->add_option("--vs", vs, "Spike threshold (default: preset)");

  auto* compare = app.add_subcommand("compare", "Compare 3-state and 4-state channels over u_max values");
  common(compare);
  compare->add_option("--umax-list", cfg.umax_list, "u_max values")->required()->delimiter(',');
  compare->add_option("--vs", vs, "Spike threshold (default: preset)");

  auto* diag = app.add_subcommand("diagnostics", "Run the invariant battery");
  diag->add_option("--preset-file", cfg.preset_file, "JSON file with extra presets");
  diag->add_option("--set", cfg.sets, "Constant override key=value (repeatable)");
  diag->add_option("--out", cfg.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  auto given = [](CLI::App* c, const char* name) { return c->count(name) > 0; };
  try {
    if (*solve) {
      if (given(solve, "--umax")) cfg.u_max = umax;
      cfg.v_s = vs;
      if (given(solve, "--tmax")) cfg.t_max = tmax;
      return cmd_solve(cfg, out, err);
    }
    if (*verify) return cmd_verify(verify_file, cfg.preset_file, report_path, out);
    if (*sweep_cmd) {
      if (given(sweep_cmd, "--vs")) cfg.v_s = vs;
      if (given(sweep_cmd, "--tmax")) cfg.t_max = tmax;
      return cmd_sweep(cfg, out);
    }
    if (*compare) {
      if (given(compare, "--vs")) cfg.v_s = vs;
      if (given(compare, "--tmax")) cfg.t_max = tmax;
      return cmd_compare(cfg, out);
    }
    if (*diag) return cmd_diagnostics(cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitUsage;
}

}  // namespace optospike
