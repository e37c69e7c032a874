#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "optospike/dual.hpp"
#include "optospike/types.hpp"

namespace optospike {

struct FhnParams {
  double a = 0.7;
  double b = 0.8;
  double c = 0.08;
  double C = 1.0;
};

struct MlParams {
  double V1 = -1.2, V2 = 18.0, V3 = 2.0, V4 = 30.0;
  double g_Ca = 4.4, g_K = 8.0, g_L = 2.0;
  double V_Ca = 120.0, V_K = -84.0, V_L = -60.0;
  double C = 20.0;
  double phi = 0.04;
};

struct HhParams {
  double g_K = 36.0, g_Na = 120.0, g_L = 0.3;
  double E_K = -12.0, E_Na = 115.0, E_L = 10.598919;
  double C = 0.9;
};

// Two-dimensional reduction: m at its steady state, h = a_h + b_h n.
struct Hh2dParams {
  HhParams hh;
  double a_h = 0.0;
  double b_h = 0.0;
};

enum class ModelKind { fhn, ml, hh2d, hh };

// n, m, h are HH gates; w is the ML recovery gate; m_ml is the instantaneous ML calcium gate.
enum class Gate { n, m, h, w, m_ml };

// Voltage window and grid for the resting-state sign-change scan.
struct RestScan {
  double lo = -100.0;
  double hi = 50.0;
  double step = 1.0;
};

struct RatePair {
  double alpha;
  double beta;
};

template <class T>
struct HhRates {
  T an, bn, am, bm, ah, bh;
};

namespace detail {

// z / (e^z - 1), with its series near the removable singularity.
template <class T>
T bern(const T& z) {
  using std::exp;
  T den = exp(z) - 1.0;
  if (std::abs(value_of(den)) < 1e-6) return 1.0 - z / 2.0 + z * z / 12.0;
  return z / den;
}

inline double bern_prime(double z) {
  double ez = std::exp(z);
  double den = ez - 1.0;
  if (std::abs(den) < 1e-6) return -0.5 + z / 6.0;
  return (den - z * ez) / (den * den);
}

}  // namespace detail

template <class T>
HhRates<T> hh_rates(const T& V) {
  using std::exp;
  HhRates<T> r;
  r.an = 0.1 * detail::bern(T(1.0 - 0.1 * V));
  r.bn = 0.125 * exp(T(-V / 80.0));
  r.am = detail::bern(T(2.5 - 0.1 * V));
  r.bm = 4.0 * exp(T(-V / 18.0));
  r.ah = 0.07 * exp(T(-V / 20.0));
  r.bh = 1.0 / (exp(T(3.0 - 0.1 * V)) + 1.0);
  return r;
}

template <class T>
void ml_rates(const MlParams& p, const T& nu, T& alpha, T& beta) {
  using std::cosh;
  using std::tanh;
  T ch = cosh(T((nu - p.V3) / (2.0 * p.V4)));
  T th = tanh(T((nu - p.V3) / p.V4));
  alpha = 0.5 * p.phi * ch * (1.0 + th);
  beta = 0.5 * p.phi * ch * (1.0 - th);
}

template <class T>
T ml_minf(const MlParams& p, const T& nu) {
  using std::tanh;
  return 0.5 * (1.0 + tanh(T((nu - p.V1) / p.V2)));
}

class NeuronModel {
 public:
  using Params = std::variant<FhnParams, MlParams, HhParams, Hh2dParams>;

  explicit NeuronModel(Params p, RestScan scan = {});

  ModelKind kind() const { return kind_; }
  int dim() const { return kind_ == ModelKind::hh ? 4 : 2; }
  double capacitance() const;
  const Params& params() const { return params_; }
  const RestScan& scan() const { return scan_; }
  std::vector<std::string> state_names() const;

  // Vector field with an injected current i_in (uA/cm^2) entering as i_in / C.
  template <class T>
  void eval(const T* x, const T& i_in, T* out) const;

 private:
  Params params_;
  ModelKind kind_;
  RestScan scan_;
};

template <class T>
void NeuronModel::eval(const T* x, const T& i_in, T* out) const {
  using std::exp;
  const T& v = x[0];
  switch (kind_) {
    case ModelKind::fhn: {
      const auto& p = *std::get_if<FhnParams>(&params_);
      const T& w = x[1];
      out[0] = v - v * v * v / 3.0 - w + i_in / p.C;
      out[1] = p.c * (v + p.a - p.b * w);
      return;
    }
    case ModelKind::ml: {
      const auto& p = *std::get_if<MlParams>(&params_);
      const T& w = x[1];
      T alpha, beta;
      ml_rates(p, v, alpha, beta);
      T minf = ml_minf(p, v);
      out[0] = (p.g_K * w * (p.V_K - v) + p.g_Ca * minf * (p.V_Ca - v) + p.g_L * (p.V_L - v) + i_in) / p.C;
      out[1] = alpha * (1.0 - w) - beta * w;
      return;
    }
    case ModelKind::hh2d: {
      const auto& q = *std::get_if<Hh2dParams>(&params_);
      const auto& p = q.hh;
      const T& n = x[1];
      auto r = hh_rates(v);
      T minf = r.am / (r.am + r.bm);
      T n2 = n * n;
      out[0] = (p.g_K * n2 * n2 * (p.E_K - v) + p.g_Na * minf * minf * minf * (q.a_h + q.b_h * n) * (p.E_Na - v) +
                p.g_L * (p.E_L - v) + i_in) /
               p.C;
      out[1] = r.an * (1.0 - n) - r.bn * n;
      return;
    }
    case ModelKind::hh: {
      const auto& p = *std::get_if<HhParams>(&params_);
      const T& n = x[1];
      const T& m = x[2];
      const T& h = x[3];
      auto r = hh_rates(v);
      T n2 = n * n;
      out[0] = (p.g_K * n2 * n2 * (p.E_K - v) + p.g_Na * m * m * m * h * (p.E_Na - v) + p.g_L * (p.E_L - v) + i_in) / p.C;
      out[1] = r.an * (1.0 - n) - r.bn * n;
      out[2] = r.am * (1.0 - m) - r.bm * m;
      out[3] = r.ah * (1.0 - h) - r.bh * h;
      return;
    }
  }
}

// Uncontrolled drift f0(x). Rejects dimension mismatch and non-finite input.
Vec drift(const NeuronModel& model, const Vec& x);

// Analytic Jacobian of the uncontrolled drift.
Mat drift_jacobian(const NeuronModel& model, const Vec& x);

RatePair gate_rates(const NeuronModel& model, Gate gate, double V);

// d alpha / dV and d beta / dV.
RatePair gate_rate_derivatives(const NeuronModel& model, Gate gate, double V);

double steady_gate(const NeuronModel& model, Gate gate, double V);

// Stable equilibrium from a sign-change scan of the voltage equation with gates at steady state.
Vec resting_state(const NeuronModel& model, double tol = 1e-10);

// Leak reversal putting the HH equilibrium at V = 0.
double calibrate_leak(const HhParams& p);

struct HFit {
  double a_h = 0.0;
  double b_h = 0.0;
  double r2 = 0.0;
  bool degenerate = false;
  std::size_t samples = 0;
};

struct HFitOptions {
  double hold_ms = std::numeric_limits<double>::infinity();  // current switched off after this time
  double dt = 0.01;
};

// Least-squares fit of h against n along an HH trajectory driven by a constant current.
HFit fit_h_linear(const HhParams& p, double i_ext, double v0, double horizon, const HFitOptions& opts = {});

}  // namespace optospike
