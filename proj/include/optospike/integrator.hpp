#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "optospike/types.hpp"

namespace optospike {

// Anything with a state dimension and a controlled vector field x' = f(x, u).
template <class S>
concept ControlledField = requires(const S& s, const Vec& x, double u) {
  { s.dim() } -> std::convertible_to<int>;
  { s.eval(x, u) } -> std::convertible_to<Vec>;
};

// Alternating bang-bang control; the first arc is at u_max when start_on.
struct BangBangSchedule {
  double u_max = 0.0;
  std::vector<double> switches;
  bool start_on = true;

  std::size_t k() const { return switches.size(); }
  double level(double t) const;
  void validate() const;
};

// Piecewise-constant control: level(j) on [start(j), end(j)).
class ControlSignal {
 public:
  static ControlSignal constant(double u);
  static ControlSignal bang(const BangBangSchedule& s);
  // values[i] applies on [times[i], times[i+1]); the last value extends forever.
  static ControlSignal sampled(std::vector<double> times, std::vector<double> values);

  std::size_t segments() const { return levels_.size(); }
  double start(std::size_t j) const { return starts_[j]; }
  double end(std::size_t j) const {
    return j + 1 < starts_.size() ? starts_[j + 1] : std::numeric_limits<double>::infinity();
  }
  double level(std::size_t j) const { return levels_[j]; }
  double value_at(double t) const;

 private:
  std::vector<double> starts_;
  std::vector<double> levels_;
};

struct IntegrateOptions {
  double h = 0.005;  // ms
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<double> u;  // u[i] is applied on [t[i], t[i+1]); the last entry repeats the final level
  std::string integrator = "rk4";
  double step = 0.0;
  bool hit = false;  // set by integrate_to_hit when the threshold was reached at t.back()
};

struct HitProbe {
  std::optional<double> t;
  double v_max = -std::numeric_limits<double>::infinity();
};

template <ControlledField S>
Vec rk4_step(const S& sys, const Vec& x, double u, double h) {
  Vec k1 = sys.eval(x, u);
  Vec k2 = sys.eval(x + 0.5 * h * k1, u);
  Vec k3 = sys.eval(x + 0.5 * h * k2, u);
  Vec k4 = sys.eval(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

inline void check_start(int dim, const Vec& x0, double horizon, double h) {
  if (x0.size() != dim) throw ContractError("initial state dimension mismatch");
  if (!x0.allFinite()) throw ContractError("non-finite initial state");
  if (!(horizon > 0)) throw ContractError("horizon must be positive");
  if (!(h > 0)) throw ContractError("step must be positive");
}

// Fixed-step RK4 over [0, horizon] with every control discontinuity on the grid.
// visit(t0, x0, t1, x1, u) returns true to stop early.
template <ControlledField S, class Visit>
void march(const S& sys, const ControlSignal& ctrl, Vec x, double horizon, double h, Visit&& visit) {
  for (std::size_t j = 0; j < ctrl.segments(); ++j) {
    const double a = ctrl.start(j);
    if (a >= horizon) return;
    const double b = std::min(ctrl.end(j), horizon);
    const double u = ctrl.level(j);
    const long n = static_cast<long>(std::ceil((b - a) / h - 1e-9));
    for (long i = 0; i < n; ++i) {
      const double t0 = a + static_cast<double>(i) * h;
      const double t1 = (i + 1 == n) ? b : a + static_cast<double>(i + 1) * h;
      Vec x1 = rk4_step(sys, x, u, t1 - t0);
      if (!x1.allFinite()) throw DivergenceError("integration diverged", t0);
      if (visit(t0, x, t1, x1, u)) return;
      x = x1;
    }
  }
}

}  // namespace detail

template <ControlledField S>
Trajectory integrate(const S& sys, const ControlSignal& ctrl, const Vec& x0, double horizon,
                     const IntegrateOptions& opts = {}) {
  detail::check_start(sys.dim(), x0, horizon, opts.h);
  Trajectory tr;
  tr.step = opts.h;
  tr.t.push_back(0.0);
  tr.x.push_back(x0);
  detail::march(sys, ctrl, x0, horizon, opts.h, [&](double, const Vec&, double t1, const Vec& x1, double u) {
    tr.u.push_back(u);
    tr.t.push_back(t1);
    tr.x.push_back(x1);
    return false;
  });
  tr.u.push_back(tr.u.empty() ? ctrl.value_at(0.0) : tr.u.back());
  return tr;
}

// First upward crossing of the threshold by x[0], with the maximum voltage seen before it.
template <ControlledField S>
HitProbe hit_probe(const S& sys, const ControlSignal& ctrl, const Vec& x0, double v_s, double t_max,
                   const IntegrateOptions& opts = {}) {
  detail::check_start(sys.dim(), x0, t_max, opts.h);
  if (!(x0[0] < v_s)) throw ContractError("threshold must lie above the initial voltage");
  HitProbe out;
  out.v_max = x0[0];
  detail::march(sys, ctrl, x0, t_max, opts.h, [&](double t0, const Vec& xa, double t1, const Vec& xb, double) {
    if (xb[0] >= v_s) {
      out.t = t0 + (t1 - t0) * (v_s - xa[0]) / (xb[0] - xa[0]);
      out.v_max = v_s;
      return true;
    }
    out.v_max = std::max(out.v_max, xb[0]);
    return false;
  });
  return out;
}

template <ControlledField S>
std::optional<double> hit_time(const S& sys, const ControlSignal& ctrl, const Vec& x0, double v_s, double t_max,
                               const IntegrateOptions& opts = {}) {
  return hit_probe(sys, ctrl, x0, v_s, t_max, opts).t;
}

// Trajectory up to the first crossing; the final sample sits exactly at the hit time.
template <ControlledField S>
Trajectory integrate_to_hit(const S& sys, const ControlSignal& ctrl, const Vec& x0, double v_s, double t_max,
                            const IntegrateOptions& opts = {}) {
  detail::check_start(sys.dim(), x0, t_max, opts.h);
  if (!(x0[0] < v_s)) throw ContractError("threshold must lie above the initial voltage");
  Trajectory tr;
  tr.step = opts.h;
  tr.t.push_back(0.0);
  tr.x.push_back(x0);
  detail::march(sys, ctrl, x0, t_max, opts.h, [&](double t0, const Vec& xa, double t1, const Vec& xb, double u) {
    tr.u.push_back(u);
    if (xb[0] >= v_s) {
      double th = t0 + (t1 - t0) * (v_s - xa[0]) / (xb[0] - xa[0]);
      if (th > t0) {
        tr.t.push_back(th);
        tr.x.push_back(rk4_step(sys, xa, u, th - t0));
      } else {
        tr.u.pop_back();
      }
      tr.hit = true;
      return true;
    }
    tr.t.push_back(t1);
    tr.x.push_back(xb);
    return false;
  });
  tr.u.push_back(tr.u.empty() ? ctrl.value_at(0.0) : tr.u.back());
  return tr;
}

// Largest deviation between stored samples and a fresh RK4 step from their predecessors.
template <ControlledField S>
double reintegration_residual(const S& sys, const Trajectory& tr) {
  double r = 0.0;
  for (std::size_t i = 0; i + 1 < tr.t.size(); ++i) {
    Vec y = rk4_step(sys, tr.x[i], tr.u[i], tr.t[i + 1] - tr.t[i]);
    r = std::max(r, (y - tr.x[i + 1]).cwiseAbs().maxCoeff() / (1.0 + tr.x[i + 1].cwiseAbs().maxCoeff()));
  }
  return r;
}

}  // namespace optospike
