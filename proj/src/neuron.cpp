#include "optospike/neuron.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "optospike/integrator.hpp"

namespace optospike {

namespace {

ModelKind kind_of(const NeuronModel::Params& p) {
  switch (p.index()) {
    case 0: return ModelKind::fhn;
    case 1: return ModelKind::ml;
    case 2: return ModelKind::hh;
    default: return ModelKind::hh2d;
  }
}

void check_state(const NeuronModel& model, const Vec& x) {
  if (x.size() != model.dim()) throw ContractError("state dimension does not match the neuron model");
  if (!x.allFinite()) throw ContractError("non-finite neuron state");
}

// Full state with every gate at its steady state for voltage V.
Vec steady_state_at(const NeuronModel& model, double V) {
  Vec x(model.dim());
  x[0] = V;
  switch (model.kind()) {
    case ModelKind::fhn: {
      const auto& p = std::get<FhnParams>(model.params());
      x[1] = (V + p.a) / p.b;
      break;
    }
    case ModelKind::ml: x[1] = steady_gate(model, Gate::w, V); break;
    case ModelKind::hh2d: x[1] = steady_gate(model, Gate::n, V); break;
    case ModelKind::hh:
      x[1] = steady_gate(model, Gate::n, V);
      x[2] = steady_gate(model, Gate::m, V);
      x[3] = steady_gate(model, Gate::h, V);
      break;
  }
  return x;
}

double voltage_residual(const NeuronModel& model, double V) { return drift(model, steady_state_at(model, V))[0]; }

// Safeguarded Newton inside a sign-change bracket.
double refine_root(const NeuronModel& model, double lo, double hi, double tol) {
  double flo = voltage_residual(model, lo);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double fx = voltage_residual(model, x);
    if (std::abs(fx) <= 0.01 * tol || hi - lo < 1e-14 * (1.0 + std::abs(x))) return x;
    if ((fx < 0) == (flo < 0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
    }
    double dh = 1e-7 * (1.0 + std::abs(x));
    double df = (voltage_residual(model, x + dh) - voltage_residual(model, x - dh)) / (2.0 * dh);
    double xn = (df != 0.0) ? x - fx / df : 0.5 * (lo + hi);
    x = (xn > lo && xn < hi) ? xn : 0.5 * (lo + hi);
  }
  return x;
}

bool is_stable(const NeuronModel& model, const Vec& x) {
  Eigen::MatrixXd J = drift_jacobian(model, x);
  Eigen::EigenSolver<Eigen::MatrixXd> es(J, false);
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i].real() >= 0.0) return false;
  return true;
}

// Injected-current view of the HH model for the h-fit simulation.
struct CurrentDrivenHh {
  NeuronModel model;
  int dim() const { return 4; }
  Vec eval(const Vec& x, double i_in) const {
    Vec out(4);
    model.eval(x.data(), i_in, out.data());
    return out;
  }
};

}  // namespace

NeuronModel::NeuronModel(Params p, RestScan scan) : params_(std::move(p)), kind_(kind_of(params_)), scan_(scan) {
  std::visit(
      [](const auto& q) {
        using Q = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<Q, FhnParams>) {
          if (!(q.b > 0 && q.c > 0 && q.C > 0)) throw ContractError("FHN requires b > 0, c > 0, C > 0");
        } else if constexpr (std::is_same_v<Q, MlParams>) {
          if (!(q.g_Ca > 0 && q.g_K > 0 && q.g_L > 0 && q.C > 0)) throw ContractError("ML conductances and C must be positive");
          if (q.V2 == 0 || q.V4 == 0) throw ContractError("ML requires V2 != 0 and V4 != 0");
        } else {
          const HhParams& h = [&]() -> const HhParams& {
            if constexpr (std::is_same_v<Q, Hh2dParams>) return q.hh; else return q;
          }();
          if (!(h.g_K > 0 && h.g_Na > 0 && h.g_L > 0 && h.C > 0)) throw ContractError("HH conductances and C must be positive");
        }
      },
      params_);
  if (!(scan_.step > 0 && scan_.hi > scan_.lo)) throw ContractError("invalid resting-state scan range");
}

double NeuronModel::capacitance() const {
  switch (kind_) {
    case ModelKind::fhn: return std::get<FhnParams>(params_).C;
    case ModelKind::ml: return std::get<MlParams>(params_).C;
    case ModelKind::hh: return std::get<HhParams>(params_).C;
    case ModelKind::hh2d: return std::get<Hh2dParams>(params_).hh.C;
  }
  return 1.0;
}

std::vector<std::string> NeuronModel::state_names() const {
  switch (kind_) {
    case ModelKind::fhn: return {"v", "w"};
    case ModelKind::ml: return {"v", "w"};
    case ModelKind::hh2d: return {"v", "n"};
    case ModelKind::hh: return {"v", "n", "m", "h"};
  }
  return {};
}

Vec drift(const NeuronModel& model, const Vec& x) {
  check_state(model, x);
  Vec out(model.dim());
  model.eval(x.data(), 0.0, out.data());
  return out;
}

RatePair gate_rates(const NeuronModel& model, Gate gate, double V) {
  if (!std::isfinite(V)) throw ContractError("non-finite voltage");
  if (model.kind() == ModelKind::ml) {
    if (gate != Gate::w) throw ContractError("ML has kinetics only for the w gate");
    double a, b;
    ml_rates(std::get<MlParams>(model.params()), V, a, b);
    return {a, b};
  }
  if (model.kind() == ModelKind::fhn) throw ContractError("FHN has no gate kinetics");
  auto r = hh_rates(V);
  switch (gate) {
    case Gate::n: return {r.an, r.bn};
    case Gate::m: return {r.am, r.bm};
    case Gate::h: return {r.ah, r.bh};
    default: throw ContractError("unknown HH gate");
  }
}

RatePair gate_rate_derivatives(const NeuronModel& model, Gate gate, double V) {
  if (!std::isfinite(V)) throw ContractError("non-finite voltage");
  if (model.kind() == ModelKind::ml) {
    if (gate != Gate::w) throw ContractError("ML has kinetics only for the w gate");
    const auto& p = std::get<MlParams>(model.params());
    double th = (V - p.V3) / p.V4;
    double c = std::cosh(th / 2.0), sh = std::sinh(th / 2.0), t = std::tanh(th);
    double dc = sh / (2.0 * p.V4), dt = (1.0 - t * t) / p.V4;
    return {0.5 * p.phi * (dc * (1.0 + t) + c * dt), 0.5 * p.phi * (dc * (1.0 - t) - c * dt)};
  }
  if (model.kind() == ModelKind::fhn) throw ContractError("FHN has no gate kinetics");
  switch (gate) {
    case Gate::n: return {-0.01 * detail::bern_prime(1.0 - 0.1 * V), -0.125 / 80.0 * std::exp(-V / 80.0)};
    case Gate::m: return {-0.1 * detail::bern_prime(2.5 - 0.1 * V), -4.0 / 18.0 * std::exp(-V / 18.0)};
    case Gate::h: {
      double e = std::exp(3.0 - 0.1 * V);
      return {-0.07 / 20.0 * std::exp(-V / 20.0), 0.1 * e / ((e + 1.0) * (e + 1.0))};
    }
    default: throw ContractError("unknown HH gate");
  }
}

double steady_gate(const NeuronModel& model, Gate gate, double V) {
  if (gate == Gate::m_ml) {
    if (model.kind() != ModelKind::ml) throw ContractError("m_ml gate belongs to ML");
    return ml_minf(std::get<MlParams>(model.params()), V);
  }
  RatePair r = gate_rates(model, gate, V);
  return r.alpha / (r.alpha + r.beta);
}

Mat drift_jacobian(const NeuronModel& model, const Vec& x) {
  check_state(model, x);
  const double v = x[0];
  Mat J = Mat::Zero(model.dim(), model.dim());
  switch (model.kind()) {
    case ModelKind::fhn: {
      const auto& p = std::get<FhnParams>(model.params());
      J << 1.0 - v * v, -1.0, p.c, -p.b * p.c;
      break;
    }
    case ModelKind::ml: {
      const auto& p = std::get<MlParams>(model.params());
      const double w = x[1];
      double m = ml_minf(p, v);
      double tm = std::tanh((v - p.V1) / p.V2);
      double dm = 0.5 * (1.0 - tm * tm) / p.V2;
      RatePair r = gate_rates(model, Gate::w, v);
      RatePair dr = gate_rate_derivatives(model, Gate::w, v);
      J(0, 0) = (-p.g_K * w + p.g_Ca * dm * (p.V_Ca - v) - p.g_Ca * m - p.g_L) / p.C;
      J(0, 1) = p.g_K * (p.V_K - v) / p.C;
      J(1, 0) = dr.alpha * (1.0 - w) - dr.beta * w;
      J(1, 1) = -(r.alpha + r.beta);
      break;
    }
    case ModelKind::hh2d: {
      const auto& q = std::get<Hh2dParams>(model.params());
      const auto& p = q.hh;
      const double n = x[1];
      RatePair rm = gate_rates(model, Gate::m, v), drm = gate_rate_derivatives(model, Gate::m, v);
      RatePair rn = gate_rates(model, Gate::n, v), drn = gate_rate_derivatives(model, Gate::n, v);
      double s = rm.alpha + rm.beta;
      double M = rm.alpha / s;
      double dM = (drm.alpha * rm.beta - rm.alpha * drm.beta) / (s * s);
      double H = q.a_h + q.b_h * n;
      double n3 = n * n * n;
      J(0, 0) = (-p.g_K * n3 * n + p.g_Na * 3.0 * M * M * dM * H * (p.E_Na - v) - p.g_Na * M * M * M * H - p.g_L) / p.C;
      J(0, 1) = (4.0 * p.g_K * n3 * (p.E_K - v) + p.g_Na * M * M * M * q.b_h * (p.E_Na - v)) / p.C;
      J(1, 0) = drn.alpha * (1.0 - n) - drn.beta * n;
      J(1, 1) = -(rn.alpha + rn.beta);
      break;
    }
    case ModelKind::hh: {
      const auto& p = std::get<HhParams>(model.params());
      const double n = x[1], m = x[2], h = x[3];
      double n3 = n * n * n, m2 = m * m;
      J(0, 0) = (-p.g_K * n3 * n - p.g_Na * m2 * m * h - p.g_L) / p.C;
      J(0, 1) = 4.0 * p.g_K * n3 * (p.E_K - v) / p.C;
      J(0, 2) = 3.0 * p.g_Na * m2 * h * (p.E_Na - v) / p.C;
      J(0, 3) = p.g_Na * m2 * m * (p.E_Na - v) / p.C;
      const Gate gates[3] = {Gate::n, Gate::m, Gate::h};
      for (int i = 0; i < 3; ++i) {
        RatePair r = gate_rates(model, gates[i], v), dr = gate_rate_derivatives(model, gates[i], v);
        J(i + 1, 0) = dr.alpha * (1.0 - x[i + 1]) - dr.beta * x[i + 1];
        J(i + 1, i + 1) = -(r.alpha + r.beta);
      }
      break;
    }
  }
  return J;
}

Vec resting_state(const NeuronModel& model, double tol) {
  if (!(tol > 0)) throw ContractError("tolerance must be positive");
  const RestScan& s = model.scan();
  const int steps = static_cast<int>(std::ceil((s.hi - s.lo) / s.step - 1e-9));
  std::vector<Vec> roots;
  double va = s.lo, fa = voltage_residual(model, va);
  for (int i = 1; i <= steps; ++i) {
    double vb = std::min(s.lo + i * s.step, s.hi), fb = voltage_residual(model, vb);
    if (fa == 0.0) {
      roots.push_back(steady_state_at(model, va));
    } else if ((fa < 0) != (fb < 0) && fb != 0.0) {
      roots.push_back(steady_state_at(model, refine_root(model, va, vb, tol)));
    }
    va = vb;
    fa = fb;
  }
  if (roots.empty()) throw Error("no resting state in range");
  for (const Vec& x : roots) {
    if (drift(model, x).cwiseAbs().maxCoeff() > tol) continue;
    if (is_stable(model, x)) return x;
  }
  throw Error("no stable resting state in range");
}

double calibrate_leak(const HhParams& p) {
  if (!(p.g_L > 0)) throw ContractError("g_L must be positive");
  auto r = hh_rates(0.0);
  double n = r.an / (r.an + r.bn), m = r.am / (r.am + r.bm), h = r.ah / (r.ah + r.bh);
  return -(p.g_K * n * n * n * n * p.E_K + p.g_Na * m * m * m * h * p.E_Na) / p.g_L;
}

HFit fit_h_linear(const HhParams& p, double i_ext, double v0, double horizon, const HFitOptions& opts) {
  if (!(horizon > 0)) throw ContractError("horizon must be positive");
  CurrentDrivenHh sys{NeuronModel(p)};
  auto r = hh_rates(0.0);
  Vec x0(4);
  x0 << v0, r.an / (r.an + r.bn), r.am / (r.am + r.bm), r.ah / (r.ah + r.bh);
  ControlSignal current = std::isfinite(opts.hold_ms) ? ControlSignal::sampled({0.0, opts.hold_ms}, {i_ext, 0.0})
                                                     : ControlSignal::constant(i_ext);
  Trajectory tr = integrate(sys, current, x0, horizon, IntegrateOptions{opts.dt});
  HFit fit;
  fit.samples = tr.t.size();
  double mn = 0, mh = 0;
  for (const Vec& x : tr.x) {
    mn += x[1];
    mh += x[3];
  }
  mn /= fit.samples;
  mh /= fit.samples;
  double snn = 0, snh = 0, shh = 0;
  for (const Vec& x : tr.x) {
    snn += (x[1] - mn) * (x[1] - mn);
    snh += (x[1] - mn) * (x[3] - mh);
    shh += (x[3] - mh) * (x[3] - mh);
  }
  if (snn <= 1e-14 * fit.samples) {
    fit.degenerate = true;
    fit.a_h = mh;
    return fit;
  }
  fit.b_h = snh / snn;
  fit.a_h = mh - fit.b_h * mn;
  fit.r2 = shh > 0 ? snh * snh / (snn * shh) : 1.0;
  return fit;
}

}  // namespace optospike
