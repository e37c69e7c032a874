#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "optospike/chr2.hpp"
#include "optospike/dual.hpp"
#include "optospike/integrator.hpp"

namespace optospike {

template <class S>
concept DifferentiableField = ControlledField<S> && requires(const S& s, const Vec& x, double u) {
  { s.jacobian(x, u) } -> std::convertible_to<Mat>;
};

struct AdjointPath {
  std::vector<double> t;
  std::vector<Vec> p;
  double p0 = -1.0;
  double lambda1 = 0.0;
};

double hamiltonian(const ControlledSystem& sys, const Vec& x, const Vec& p, double p0, double u);

// Backward RK4 for p' = -J(x, u)^T p on the trajectory grid. State values at step midpoints
// come from cubic Hermite interpolation of the stored samples.
template <DifferentiableField S>
AdjointPath adjoint_backward(const S& sys, const Trajectory& tr, const Vec& p_tf, double p0,
                             double consistency_tol = 1e-8) {
  const std::size_t N = tr.t.size();
  if (N < 2 || tr.x.size() != N || tr.u.size() != N) throw ContractError("malformed trajectory");
  if (p_tf.size() != sys.dim()) throw ContractError("terminal costate dimension mismatch");
  if (p0 > 0) throw ContractError("abnormal multiplier must be nonpositive");
  if (consistency_tol > 0 && reintegration_residual(sys, tr) > consistency_tol) {
    throw ContractError("trajectory is inconsistent with its control");
  }
  AdjointPath ad;
  ad.t = tr.t;
  ad.p0 = p0;
  ad.p.assign(N, Vec::Zero(sys.dim()));
  ad.p[N - 1] = p_tf;
  for (std::size_t i = N - 1; i-- > 0;) {
    const double h = tr.t[i + 1] - tr.t[i];
    const double u = tr.u[i];
    const Vec& xa = tr.x[i];
    const Vec& xb = tr.x[i + 1];
    Vec xm = 0.5 * (xa + xb) + (h / 8.0) * (sys.eval(xa, u) - sys.eval(xb, u));
    Mat Jb = sys.jacobian(xb, u).transpose();
    Mat Jm = sys.jacobian(xm, u).transpose();
    Mat Ja = sys.jacobian(xa, u).transpose();
    const Vec& p = ad.p[i + 1];
    Vec k1 = Jb * p;
    Vec k2 = Jm * (p + 0.5 * h * k1);
    Vec k3 = Jm * (p + 0.5 * h * k2);
    Vec k4 = Ja * (p + h * k3);
    ad.p[i] = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return ad;
}

// phi(t) = <p(t), F1(x(t))> samplewise.
std::vector<double> switching_function(const ControlledSystem& sys, const Trajectory& tr, const AdjointPath& ad);

struct VerifyOptions {
  double t_max = 300.0;
  double h = 0.005;
  double tol_phi_rel = 1e-8;
  // Crossings bounding an arc whose first-order time gain u_max * int |phi| dt is below this (ms)
  // are reported as negligible instead of as switches.
  double negligible_gain = 1e-6;
  std::optional<Vec> x0;  // defaults to the dark resting state
};

struct ExtremalReport {
  double t_f = 0.0;
  double lambda1 = 0.0;
  double p0 = -1.0;
  double sign_consistency = 0.0;
  double max_abs_H = 0.0;
  double H_scale = 0.0;  // max |<p, F0>| along the path
  double phi_max = 0.0;
  std::vector<std::pair<double, double>> singular_intervals;
  std::vector<double> phi_crossings;
  std::vector<double> negligible_crossings;
  std::vector<double> switch_times;  // schedule switches before t_f
  std::optional<double> max_switch_offset;
  std::size_t samples = 0;

  bool passes(double min_consistency = 0.99) const {
    return sign_consistency >= min_consistency && singular_intervals.empty();
  }
};

struct ExtremalArtifacts {
  Trajectory trajectory;
  AdjointPath adjoint;
  std::vector<double> phi;
  ExtremalReport report;
};

// Builds p(t_f) = (lambda1, 0, ...) with p0 = -1 and H(t_f) = 0, integrates the adjoint
// backward and checks the maximum condition along the schedule.
ExtremalArtifacts verify_extremal_full(const ControlledSystem& sys, const BangBangSchedule& schedule, double v_s,
                                       const VerifyOptions& opts = {});
ExtremalReport verify_extremal(const ControlledSystem& sys, const BangBangSchedule& schedule, double v_s,
                               const VerifyOptions& opts = {});

using Field = std::function<Vec(const Vec&)>;

// [f, g](x) = J_g f - J_f g with central-difference Jacobians, step h (1 + |x_j|) per direction.
Vec lie_bracket_numeric(const Field& f, const Field& g, const Vec& x, double h = 1e-3);

// Forward-mode directional derivative J_f(x) v.
template <class F, class T>
VecT<T> jvp(const F& f, const VecT<T>& x, const VecT<T>& v) {
  const int n = static_cast<int>(x.size());
  VecT<Dual<T>> xd(n);
  for (int i = 0; i < n; ++i) xd[i] = Dual<T>(x[i], v[i]);
  VecT<Dual<T>> y = f(xd);
  VecT<T> out(n);
  for (int i = 0; i < n; ++i) out[i] = y[i].d;
  return out;
}

// Bracket of two scalar-generic fields, itself scalar-generic so it can be nested.
template <class F, class G>
auto exact_bracket(F f, G g) {
  return [f, g](const auto& x) {
    using V = std::decay_t<decltype(x)>;
    V fx = f(x);
    V gx = g(x);
    V a = jvp(g, x, fx);
    V b = jvp(f, x, gx);
    V out(x.size());
    for (int i = 0; i < static_cast<int>(x.size()); ++i) out[i] = a[i] - b[i];
    return out;
  };
}

// ad_f^K g = [f, [f, ... [f, g]]].
template <int K, class F, class G>
auto ad_power(F f, G g) {
  if constexpr (K == 0) {
    return g;
  } else {
    return exact_bracket(f, ad_power<K - 1>(f, g));
  }
}

inline auto drift_field(const ControlledSystem& sys) {
  return [&sys](const auto& x) { return sys.F0(x); };
}
inline auto control_field(const ControlledSystem& sys) {
  return [&sys](const auto& x) { return sys.F1(x); };
}

// Closed forms of [f0, f2](z) and ad^2_{f2} f0(z) for a 4-state coupling.
std::pair<Vec, Vec> chr2_4_brackets(const ControlledSystem& sys, const Vec& z);

// <q, ad^2_{f0} f2> / <q, ad^2_{f2} f0>, or none when the denominator is below 1e-12.
std::optional<double> singular_control_candidate(const ControlledSystem& sys, const Vec& z, const Vec& q);

// omega = alpha'(nu) / (alpha'(nu) + beta'(nu)); nu = V3 is excluded.
double ml_singular_locus(const NeuronModel& ml, double nu);

struct BracketCheckOptions {
  int exclude_steps = 3;
};

// Max over bang arcs of |d/dt <p, h(x)> - <p, [F0, h]> - u <p, [F1, h]>|, relative to the largest
// |d/dt <p, h(x)>|. The derivative is a central difference on the samples.
double bracket_derivative_check(const ControlledSystem& sys, const Trajectory& tr, const AdjointPath& ad,
                                const Field& h, const BracketCheckOptions& opts = {});

struct PrereductionReport {
  double identity_rel_err = 0.0;  // |ad^3_{F1} F0 + [F0, F1]| / |[F0, F1]|
  std::vector<Vec> costates;      // samples of the two-parameter family
  std::vector<std::array<double, 4>> products;  // k = 1, 2, 3 and <p, [F1, ad^2_{F0} F1]>
  double violating_k1 = 0.0;     // k = 1 product for a costate outside the family
};

// Costate family with p_o = 0 and (g/C)(V_ChR2 - v) p_v + K_d p_d = 0, parametrised by (p_v, p_w).
Vec ml_singular_costate(const ControlledSystem& sys, const Vec& x, double p_v, double p_w);

PrereductionReport ml_prereduction_identities(const ControlledSystem& sys, const Vec& x);

}  // namespace optospike
