#include "optospike/pmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optospike {

double hamiltonian(const ControlledSystem& sys, const Vec& x, const Vec& p, double p0, double u) {
  if (x.size() != sys.dim() || p.size() != sys.dim()) throw ContractError("dimension mismatch in Hamiltonian");
  if (p0 > 0) throw ContractError("abnormal multiplier must be nonpositive");
  return p.dot(sys.F0<double>(x)) + u * p.dot(sys.F1<double>(x)) + p0;
}

std::vector<double> switching_function(const ControlledSystem& sys, const Trajectory& tr, const AdjointPath& ad) {
  if (tr.t.size() != ad.t.size()) throw ContractError("trajectory and adjoint grids differ");
  std::vector<double> phi(tr.t.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = ad.p[i].dot(sys.F1<double>(tr.x[i]));
  return phi;
}

ExtremalArtifacts verify_extremal_full(const ControlledSystem& sys, const BangBangSchedule& schedule, double v_s,
                                       const VerifyOptions& opts) {
  schedule.validate();
  Vec x0 = opts.x0 ? *opts.x0 : sys.dark_rest();
  ExtremalArtifacts art;
  art.trajectory = integrate_to_hit(sys, ControlSignal::bang(schedule), x0, v_s, opts.t_max, IntegrateOptions{opts.h});
  const Trajectory& tr = art.trajectory;
  if (!tr.hit) throw ContractError("schedule does not reach the threshold before T_max");
  const std::size_t N = tr.t.size();
  ExtremalReport& rep = art.report;
  rep.t_f = tr.t.back();
  rep.samples = N;

  const double vdot = sys.eval(tr.x.back(), tr.u.back())[0];
  if (!(vdot > 1e-12)) throw Error("tangential arrival, lambda1 undefined");
  rep.lambda1 = 1.0 / vdot;
  Vec ptf = Vec::Zero(sys.dim());
  ptf[0] = rep.lambda1;
  // The stored trajectory is regenerated from its own control, so the consistency check is skipped.
  art.adjoint = adjoint_backward(sys, tr, ptf, -1.0, 0.0);
  art.adjoint.lambda1 = rep.lambda1;
  art.phi = switching_function(sys, tr, art.adjoint);
  const auto& phi = art.phi;

  for (double v : phi) rep.phi_max = std::max(rep.phi_max, std::abs(v));
  const double zero_band = 1e-9 * rep.phi_max;
  std::size_t consistent = 0;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    bool on = tr.u[i] > 0.5 * sys.u_max();
    if (std::abs(phi[i]) <= zero_band || (on && phi[i] > 0) || (!on && phi[i] < 0)) ++consistent;
  }
  rep.sign_consistency = N > 1 ? static_cast<double>(consistent) / static_cast<double>(N - 1) : 1.0;

  for (std::size_t i = 0; i < N; ++i) {
    const Vec& p = art.adjoint.p[i];
    double pf0 = p.dot(sys.F0<double>(tr.x[i]));
    rep.H_scale = std::max(rep.H_scale, std::abs(pf0));
    rep.max_abs_H = std::max(rep.max_abs_H, std::abs(pf0 + tr.u[i] * p.dot(sys.F1<double>(tr.x[i])) - 1.0));
  }

  // Sign arcs of phi, each with its first-order time gain u_max * int |phi| dt.
  std::vector<double> cross;
  std::vector<double> gain{0.0};
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const double dt = tr.t[i + 1] - tr.t[i];
    if ((phi[i] > 0 && phi[i + 1] < 0) || (phi[i] < 0 && phi[i + 1] > 0)) {
      const double a = phi[i] / (phi[i] - phi[i + 1]);
      cross.push_back(tr.t[i] + dt * a);
      gain.back() += 0.5 * std::abs(phi[i]) * a * dt;
      gain.push_back(0.5 * std::abs(phi[i + 1]) * (1.0 - a) * dt);
    } else {
      gain.back() += 0.5 * (std::abs(phi[i]) + std::abs(phi[i + 1])) * dt;
    }
  }
  for (std::size_t c = 0; c < cross.size(); ++c) {
    const double g = sys.u_max() * std::min(gain[c], gain[c + 1]);
    (g < opts.negligible_gain ? rep.negligible_crossings : rep.phi_crossings).push_back(cross[c]);
  }

  const double tol = opts.tol_phi_rel * rep.phi_max;
  std::size_t run = 0;
  for (std::size_t i = 0; i <= N; ++i) {
    bool small = i < N && std::abs(phi[i]) <= tol;
    if (small) {
      ++run;
    } else {
      if (run > 5) rep.singular_intervals.emplace_back(tr.t[i - run], tr.t[i - 1]);
      run = 0;
    }
  }

  for (double s : schedule.switches) {
    if (s < rep.t_f) rep.switch_times.push_back(s);
  }
  if (!rep.switch_times.empty()) {
    double worst = 0.0;
    for (double s : rep.switch_times) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : rep.phi_crossings) best = std::min(best, std::abs(c - s));
      worst = std::max(worst, best);
    }
    if (std::isfinite(worst)) rep.max_switch_offset = worst;
  }
  return art;
}

ExtremalReport verify_extremal(const ControlledSystem& sys, const BangBangSchedule& schedule, double v_s,
                               const VerifyOptions& opts) {
  return verify_extremal_full(sys, schedule, v_s, opts).report;
}

namespace {

Mat numeric_jacobian(const Field& f, const Vec& x, double h) {
  const int n = static_cast<int>(x.size());
  Vec f0 = f(x);
  Mat J(f0.size(), n);
  for (int j = 0; j < n; ++j) {
    double hj = h * (1.0 + std::abs(x[j]));
    Vec xp = x, xm = x;
    xp[j] += hj;
    xm[j] -= hj;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * hj);
  }
  return J;
}

}  // namespace

Vec lie_bracket_numeric(const Field& f, const Field& g, const Vec& x, double h) {
  if (!(h > 0)) throw ContractError("finite-difference scale must be positive");
  return numeric_jacobian(g, x, h) * f(x) - numeric_jacobian(f, x, h) * g(x);
}

std::pair<Vec, Vec> chr2_4_brackets(const ControlledSystem& sys, const Vec& z) {
  if (sys.channel_kind() != ChannelKind::four) throw UnsupportedError("closed-form brackets need a 4-state coupling");
  if (z.size() != sys.dim()) throw ContractError("state dimension mismatch");
  const auto& p = std::get<ChR2FourParams>(sys.channel());
  const int n = sys.neuron_dim();
  const double o1 = z[n], o2 = z[n + 1], c2 = z[n + 2];
  const double s = 1.0 - o1 - o2 - c2;
  const double q = p.g / sys.neuron().capacitance() * (p.V_ChR2 - z[0]);
  const double e1 = p.eps1, e2 = p.eps2;

  Vec b1 = Vec::Zero(sys.dim());
  b1[0] = -(e1 * s + e2 * p.rho * c2) * q;
  b1[n] = e1 * s * (p.e12 + p.K_d1) + e1 * p.K_d1 * o1 + (e1 * p.K_r - e2 * p.e21) * c2;
  b1[n + 1] = -e1 * s * p.e12 + e2 * p.K_d2 * o2 + e2 * (p.e21 + p.K_d2 - p.K_r) * c2;
  b1[n + 2] = -e2 * p.K_d2 * (o2 + c2);

  Vec b2 = Vec::Zero(sys.dim());
  b2[0] = -(e1 * e1 * s + e2 * e2 * p.rho * c2) * q;
  b2[n] = e1 * e1 * s * (p.e12 - p.K_d1) - e1 * e1 * p.K_d1 * o1 +
          (2.0 * e1 * e2 * p.K_r - e1 * e1 * p.K_r - e2 * e2 * p.e21) * c2;
  b2[n + 1] = -e1 * e1 * s * p.e12 - e2 * e2 * p.K_d2 * o2 + e2 * e2 * (p.e21 - p.K_d2 - p.K_r) * c2;
  b2[n + 2] = e2 * e2 * p.K_d2 * (o2 + c2);
  return {b1, b2};
}

std::optional<double> singular_control_candidate(const ControlledSystem& sys, const Vec& z, const Vec& q) {
  if (sys.channel_kind() != ChannelKind::four) throw UnsupportedError("singular candidate needs a 4-state coupling");
  if (q.size() != sys.dim()) throw ContractError("costate dimension mismatch");
  Field f0 = [&sys](const Vec& x) { return sys.F0<double>(x); };
  Field f2 = [&sys](const Vec& x) { return sys.F1<double>(x); };
  Field b = [&](const Vec& x) { return lie_bracket_numeric(f0, f2, x); };
  double den = q.dot(chr2_4_brackets(sys, z).second);
  if (std::abs(den) < 1e-12) return std::nullopt;
  return q.dot(lie_bracket_numeric(f0, b, z)) / den;
}

double ml_singular_locus(const NeuronModel& ml, double nu) {
  if (ml.kind() != ModelKind::ml) throw ContractError("singular locus is defined for ML");
  const auto& p = std::get<MlParams>(ml.params());
  if (nu == p.V3) throw ContractError("nu = V3 is excluded from the singular locus");
  RatePair d = gate_rate_derivatives(ml, Gate::w, nu);
  return d.alpha / (d.alpha + d.beta);
}

double bracket_derivative_check(const ControlledSystem& sys, const Trajectory& tr, const AdjointPath& ad,
                                const Field& h, const BracketCheckOptions& opts) {
  const std::size_t N = tr.t.size();
  if (ad.t.size() != N) throw ContractError("trajectory and adjoint grids differ");
  Field f0 = [&sys](const Vec& x) { return sys.F0<double>(x); };
  Field f1 = [&sys](const Vec& x) { return sys.F1<double>(x); };
  std::vector<double> s(N);
  for (std::size_t i = 0; i < N; ++i) s[i] = ad.p[i].dot(h(tr.x[i]));

  // A sample is usable when the control is constant over the surrounding exclusion window.
  const std::size_t w = static_cast<std::size_t>(std::max(1, opts.exclude_steps));
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = w; i + w + 1 < N; ++i) {
    bool flat = true;
    for (std::size_t j = i - w; j <= i + w && flat; ++j) flat = tr.u[j] == tr.u[i];
    if (!flat) continue;
    double ds = (s[i + 1] - s[i - 1]) / (tr.t[i + 1] - tr.t[i - 1]);
    double rhs = ad.p[i].dot(lie_bracket_numeric(f0, h, tr.x[i])) + tr.u[i] * ad.p[i].dot(lie_bracket_numeric(f1, h, tr.x[i]));
    worst = std::max(worst, std::abs(ds - rhs));
    scale = std::max(scale, std::abs(ds));
  }
  return scale > 0 ? worst / scale : worst;
}

Vec ml_singular_costate(const ControlledSystem& sys, const Vec& x, double p_v, double p_w) {
  if (sys.channel_kind() != ChannelKind::three || sys.neuron().kind() != ModelKind::ml) {
    throw ContractError("singular costate family is defined for ML with the 3-state channel");
  }
  const auto& c = std::get<ChR2ThreeParams>(sys.channel());
  Vec p = Vec::Zero(4);
  p[0] = p_v;
  p[1] = p_w;
  p[3] = -(c.g / sys.neuron().capacitance()) * (c.V_ChR2 - x[0]) * p_v / c.K_d;
  return p;
}

PrereductionReport ml_prereduction_identities(const ControlledSystem& sys, const Vec& x) {
  if (sys.channel_kind() != ChannelKind::three || sys.neuron().kind() != ModelKind::ml) {
    throw ContractError("pre-reduction identities are defined for ML with the 3-state channel");
  }
  if (x.size() != sys.dim()) throw ContractError("state dimension mismatch");
  auto F0 = drift_field(sys);
  auto F1 = control_field(sys);
  PrereductionReport rep;
  Vec lhs = ad_power<3>(F1, F0)(x);
  Vec rhs = exact_bracket(F0, F1)(x);
  rep.identity_rel_err = (lhs + rhs).norm() / std::max(rhs.norm(), 1e-300);

  Vec k1 = ad_power<1>(F0, F1)(x);
  Vec k2 = ad_power<2>(F0, F1)(x);
  Vec k3 = ad_power<3>(F0, F1)(x);
  Vec mixed = exact_bracket(F1, ad_power<2>(F0, F1))(x);
  const double grid[3] = {-1.0, 0.5, 2.0};
  for (double pv : grid) {
    for (double pw : grid) {
      Vec p = ml_singular_costate(sys, x, pv, pw);
      rep.costates.push_back(p);
      rep.products.push_back({p.dot(k1), p.dot(k2), p.dot(k3), p.dot(mixed)});
    }
  }
  Vec bad = ml_singular_costate(sys, x, 1.0, 0.5);
  bad[2] = 1.0;
  rep.violating_k1 = bad.dot(k1);
  return rep;
}

}  // namespace optospike
