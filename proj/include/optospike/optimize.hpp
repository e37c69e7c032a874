#pragma once

#include <optional>
#include <string>
#include <vector>

#include "optospike/chr2.hpp"
#include "optospike/integrator.hpp"
#include "optospike/pmp.hpp"

namespace optospike {

struct BangOptions {
  int k_max = 4;
  double t_max = 300.0;
  double h = 0.005;
  double resolution = 1e-3;  // golden-section bracket width, ms
  int starts = 8;            // Latin-grid starts per k
  int refine_best = 3;       // screened seeds taken into refinement
  int max_sweeps = 6;
  double tie_tol = 1e-3;     // t_f window for preferring fewer switches, ms
  std::optional<Vec> x0;     // defaults to the dark resting state
};

struct BangCandidate {
  int k_requested = 0;
  BangBangSchedule schedule;  // pruned: only switches before t_f, no zero-length arcs
  std::optional<double> t_f;
  double light_on = 0.0;
  std::size_t evaluations = 0;
};

struct BangResult {
  BangBangSchedule schedule;
  double t_f = 0.0;
  double light_on = 0.0;
  std::optional<double> t_constant;  // hit time under u = u_max throughout
  std::vector<BangCandidate> per_k;
  std::size_t evaluations = 0;
};

// Minimum-time bang-bang schedule over k = 0..k_max switches. Deterministic.
BangResult solve_bangbang(const ControlledSystem& sys, double v_s, const BangOptions& opts = {});

// Light-on duration of a schedule up to t_f.
double light_on_time(const BangBangSchedule& s, double t_f);

struct DirectOptions {
  double t_max = 300.0;
  double h = 0.005;  // step of the warm-start simulation
  int max_outer = 40;
  int max_inner = 200;
  double defect_tol = 1e-6;
  double grad_tol = 1e-5;
  std::optional<Vec> x0;
};

struct DirectSolution {
  int N = 0;
  std::vector<double> t;  // node times
  std::vector<Vec> x;     // N + 1 node states
  std::vector<double> u;  // N interval controls
  double t_f = 0.0;
  double u_max = 0.0;
  double v_s = 0.0;
  double defect_max = 0.0;  // trapezoidal defect max-norm, per unit step and state scale
  double kkt = 0.0;         // projected-gradient norm of the augmented Lagrangian
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
};

// Trapezoidal collocation, augmented-Lagrangian outer loop, projected Gauss-Newton inner solver.
DirectSolution solve_direct(const ControlledSystem& sys, double v_s, int N, const DirectOptions& opts = {},
                            const DirectSolution* warm = nullptr);

// Doubles N and re-solves from the interpolated solution.
DirectSolution refine_mesh(const ControlledSystem& sys, const DirectSolution& sol, const DirectOptions& opts = {});

// Largest node deviation from an RK4 replay of the solution's own controls, relative to 1 + |x|.
double simulation_gap(const ControlledSystem& sys, const DirectSolution& sol, double h);

// Longest run of nodes with u strictly inside (0, u_max), as a fraction of N.
double interior_plateau_fraction(const DirectSolution& sol, double band = 0.02);

struct ComparisonRow {
  double u_max = 0.0;
  std::optional<double> t_f3, t_f4;
  double light_on3 = 0.0, light_on4 = 0.0;
  int switches3 = -1, switches4 = -1;
  std::vector<double> schedule3, schedule4;
  double consistency3 = 0.0, consistency4 = 0.0;
  std::string error3, error4;

  std::optional<double> gain() const {
    if (!t_f3 || !t_f4) return std::nullopt;
    return (*t_f3 - *t_f4) / *t_f3;
  }
};

// One row per u_max: both channels solved and verified. Failures are recorded per row.
std::vector<ComparisonRow> sweep(const NeuronModel& neuron, const ChR2ThreeParams& ch3, const ChR2FourParams& ch4,
                                 const std::vector<double>& umax_list, double v_s, const BangOptions& opts = {});

struct MonotonicityReport {
  bool ok = true;
  std::vector<std::pair<double, double>> t_f;  // (u_max, t_f)
  std::optional<std::pair<double, double>> offending;
};

MonotonicityReport monotonicity_check(const ControlledSystem& sys, const std::vector<double>& umax_list, double v_s,
                                      const BangOptions& opts = {});

}  // namespace optospike
