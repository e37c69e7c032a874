#include "optospike/optimize.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace optospike {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sorted switch list with coincident pairs (zero-length arcs) removed.
std::vector<double> normalized(std::vector<double> sw) {
  std::sort(sw.begin(), sw.end());
  std::vector<double> out;
  for (double s : sw) {
    if (!out.empty() && std::abs(out.back() - s) < 1e-12) {
      out.pop_back();
    } else {
      out.push_back(s);
    }
  }
  return out;
}

// Hit time of the alternating schedule, or T_max plus a shortfall penalty when it never fires.
class HitObjective {
 public:
  HitObjective(const ControlledSystem& sys, Vec x0, double v_s, const BangOptions& o)
      : sys_(sys), x0_(std::move(x0)), v_s_(v_s), t_max_(o.t_max), h_(o.h) {}

  double operator()(const std::vector<double>& sw) const {
    ++evaluations;
    BangBangSchedule s{sys_.u_max(), normalized(sw), true};
    try {
      HitProbe p = hit_probe(sys_, ControlSignal::bang(s), x0_, v_s_, t_max_, IntegrateOptions{h_});
      if (p.t) return *p.t;
      return t_max_ * (1.0 + (v_s_ - p.v_max) / (v_s_ - x0_[0]));
    } catch (const DivergenceError&) {
      return 3.0 * t_max_;
    }
  }

  std::optional<double> hit(const std::vector<double>& sw) const {
    double j = (*this)(sw);
    return j <= t_max_ ? std::optional<double>(j) : std::nullopt;
  }

  mutable std::size_t evaluations = 0;

 private:
  const ControlledSystem& sys_;
  Vec x0_;
  double v_s_, t_max_, h_;
};

// Golden-section search of coordinate i over [a, b]; updates s and best on improvement.
void golden(const HitObjective& J, std::vector<double>& s, std::size_t i, double a, double b, double& best,
            double resolution) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  auto at = [&](double v) {
    auto c = s;
    c[i] = v;
    return J(c);
  };
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = at(x1), f2 = at(x2);
  double bx = s[i], bf = best;
  auto keep = [&](double x, double f) {
    if (f < bf) {
      bf = f;
      bx = x;
    }
  };
  keep(x1, f1);
  keep(x2, f2);
  while (b - a > resolution) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = at(x1);
      keep(x1, f1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = at(x2);
      keep(x2, f2);
    }
  }
  s[i] = bx;
  best = bf;
}

// Coordinate-wise refinement: coarse grid then golden section per switch, repeated in sweeps.
double refine(const HitObjective& J, std::vector<double>& s, double t_ref, const BangOptions& o) {
  double best = J(s);
  for (int sweep = 0; sweep < o.max_sweeps; ++sweep) {
    const double before = best;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double lo = i == 0 ? o.resolution : s[i - 1];
      const double hi = i + 1 < s.size() ? s[i + 1] : t_ref;
      if (hi - lo <= o.resolution) continue;
      double a, b;
      if (sweep == 0) {
        const int m = 12;
        const double step = (hi - lo) / m;
        for (int g = 0; g <= m; ++g) {
          auto c = s;
          c[i] = lo + g * step;
          double f = J(c);
          if (f < best) {
            best = f;
            s[i] = c[i];
          }
        }
        a = std::max(lo, s[i] - step);
        b = std::min(hi, s[i] + step);
      } else {
        const double w = std::max(8.0 * o.resolution, 0.05 * (hi - lo));
        a = std::max(lo, s[i] - w);
        b = std::min(hi, s[i] + w);
      }
      golden(J, s, i, a, b, best, o.resolution);
    }
    if (sweep > 0 && before - best < 1e-9) break;
  }
  return best;
}

// Deterministic Latin grid of starting switch vectors over [lo, t_ref].
std::vector<std::vector<double>> latin_starts(int k, int count, double lo, double t_ref) {
  std::vector<std::vector<double>> out;
  for (int j = 0; j < count; ++j) {
    std::vector<double> s(k);
    for (int i = 0; i < k; ++i) {
      int stratum = (j * (2 * i + 1) + 3 * i) % count;
      s[i] = lo + (stratum + 0.5) / count * (t_ref - lo) + i * 1e-6;
    }
    std::sort(s.begin(), s.end());
    out.push_back(s);
  }
  return out;
}

BangCandidate make_candidate(const HitObjective& J, int k, const std::vector<double>& raw, double u_max,
                             const BangOptions& o) {
  BangCandidate c;
  c.k_requested = k;
  c.schedule.u_max = u_max;
  auto tf = J.hit(raw);
  if (!tf) {
    c.schedule.switches = normalized(raw);
    return c;
  }
  // Drop switches at or after t_f and arcs shorter than the time resolution.
  std::vector<double> kept;
  for (double s : normalized(raw)) {
    if (s >= *tf) break;
    if (!kept.empty() && s - kept.back() < o.resolution) {
      kept.pop_back();
    } else {
      kept.push_back(s);
    }
  }
  auto tf_kept = J.hit(kept);
  if (tf_kept && *tf_kept <= *tf + o.tie_tol) {
    c.schedule.switches = kept;
    c.t_f = tf_kept;
  } else {
    std::vector<double> before;
    for (double s : normalized(raw))
      if (s < *tf) before.push_back(s);
    c.schedule.switches = before;
    c.t_f = J.hit(before);
  }
  if (c.t_f) c.light_on = light_on_time(c.schedule, *c.t_f);
  return c;
}

}  // namespace

double light_on_time(const BangBangSchedule& s, double t_f) {
  double on = 0.0, start = 0.0;
  bool lit = s.start_on;
  for (double t : s.switches) {
    double end = std::min(t, t_f);
    if (lit && end > start) on += end - start;
    start = t;
    lit = !lit;
    if (t >= t_f) return on;
  }
  if (lit && t_f > start) on += t_f - start;
  return on;
}

BangResult solve_bangbang(const ControlledSystem& sys, double v_s, const BangOptions& opts) {
  if (opts.k_max < 0 || !(opts.t_max > 0) || !(opts.resolution > 0)) throw ContractError("invalid solver options");
  Vec x0 = opts.x0 ? *opts.x0 : sys.dark_rest();
  if (!(x0[0] < v_s)) throw ContractError("threshold must lie above the initial voltage");
  HitObjective J(sys, x0, v_s, opts);
  BangResult res;
  res.t_constant = J.hit({});
  const double t_ref = res.t_constant ? *res.t_constant : opts.t_max;

  std::vector<std::optional<std::vector<double>>> raw(opts.k_max + 1);
  raw[0] = std::vector<double>{};
  res.per_k.push_back(make_candidate(J, 0, {}, sys.u_max(), opts));
  std::vector<double> best_by_k{J({})};

  for (int k = 1; k <= opts.k_max; ++k) {
    std::vector<std::vector<double>> seeds = latin_starts(k, opts.starts, opts.resolution, t_ref);
    if (k == 1) {
      for (int g = 1; g < 64; ++g) seeds.push_back({t_ref * g / 64.0});
    }
    if (raw[k - 1] && k >= 2) {
      double span = J.hit(*raw[k - 1]).value_or(t_ref);
      for (int m = 0; m < 8; ++m) {
        auto s = *raw[k - 1];
        s.push_back(std::max(opts.resolution, span * (m + 0.5) / 8.0));
        std::sort(s.begin(), s.end());
        seeds.push_back(s);
      }
    }
    if (k >= 2 && raw[k - 2]) {
      double span = J.hit(*raw[k - 2]).value_or(t_ref);
      for (int m = 0; m < 8; ++m) {
        for (double w : {0.02, 0.1}) {
          auto s = *raw[k - 2];
          double a = std::max(opts.resolution, span * (m + 0.5) / 8.0);
          s.push_back(a);
          s.push_back(a + w * span);
          std::sort(s.begin(), s.end());
          seeds.push_back(s);
        }
      }
    }
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      for (std::size_t j = 1; j < seeds[i].size(); ++j)
        if (seeds[i][j] <= seeds[i][j - 1]) seeds[i][j] = seeds[i][j - 1] + opts.resolution;
      scored.emplace_back(J(seeds[i]), i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    double best = kInf;
    std::vector<double> best_s;
    int refined = 0;
    double last_score = kInf;
    for (const auto& [score, idx] : scored) {
      if (refined >= opts.refine_best) break;
      if (score == last_score) continue;
      last_score = score;
      auto s = seeds[idx];
      double f = refine(J, s, t_ref, opts);
      ++refined;
      if (f < best) {
        best = f;
        best_s = s;
      }
    }
    raw[k] = best_s;
    res.per_k.push_back(make_candidate(J, k, best_s, sys.u_max(), opts));
    best_by_k.push_back(best);
    // Without any spike so far, stop once an extra switch no longer raises the peak voltage.
    const bool any_hit = std::any_of(res.per_k.begin(), res.per_k.end(), [](const auto& c) { return c.t_f.has_value(); });
    if (!any_hit && k >= 2 && best_by_k[k - 1] - best <= opts.tie_tol) break;
  }
  res.evaluations = J.evaluations;

  double best_tf = kInf;
  for (const auto& c : res.per_k)
    if (c.t_f) best_tf = std::min(best_tf, *c.t_f);
  if (!std::isfinite(best_tf)) throw UnreachableError("unreachable under constant max and every tried schedule");
  const BangCandidate* pick = nullptr;
  for (const auto& c : res.per_k) {
    if (!c.t_f || *c.t_f > best_tf + opts.tie_tol) continue;
    if (!pick || c.schedule.k() < pick->schedule.k() ||
        (c.schedule.k() == pick->schedule.k() && c.light_on < pick->light_on)) {
      pick = &c;
    }
  }
  res.schedule = pick->schedule;
  res.t_f = *pick->t_f;
  res.light_on = pick->light_on;
  return res;
}

namespace {

struct Layout {
  int n, N;
  int xi(int j) const { return 1 + (j - 1) * n; }  // node j >= 1
  int ui(int j) const { return 1 + N * n + j; }
  int size() const { return 1 + N * n + N; }
};

struct DirectProblem {
  const ControlledSystem& sys;
  Vec x0;
  double v_s;
  Layout L;
  double tf_ref;
  Vec scale;

  Vec node(const Eigen::VectorXd& z, int j) const {
    if (j == 0) return x0;
    Vec x(L.n);
    for (int i = 0; i < L.n; ++i) x[i] = z[L.xi(j) + i] * scale[i];
    return x;
  }

  // Defects are divided by the reference step so the tolerance bounds a rate, not a per-interval jump,
  // and the accumulated state error stays independent of N.
  double rate() const { return L.N / tf_ref; }

  // Scaled constraint vector: N*n trapezoidal defects followed by the terminal voltage condition.
  Eigen::VectorXd constraints(const Eigen::VectorXd& z) const {
    Eigen::VectorXd c(L.N * L.n + 1);
    const double dt = z[0] * tf_ref / L.N;
    const double r = rate();
    Vec xa = node(z, 0);
    for (int j = 0; j < L.N; ++j) {
      Vec xb = node(z, j + 1);
      const double u = z[L.ui(j)] * sys.u_max();
      Vec d = xb - xa - 0.5 * dt * (sys.eval(xa, u) + sys.eval(xb, u));
      for (int i = 0; i < L.n; ++i) c[j * L.n + i] = r * d[i] / scale[i];
      xa = xb;
    }
    c[L.N * L.n] = (xa[0] - v_s) / scale[0];
    return c;
  }

  // Constraints and their sparse Jacobian with respect to the scaled decision vector.
  void linearize(const Eigen::VectorXd& z, Eigen::VectorXd& c, Eigen::SparseMatrix<double>& J) const {
    const int n = L.n;
    const double dt = z[0] * tf_ref / L.N;
    const double r = rate();
    c.resize(L.N * n + 1);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(L.N) * n * (2 * n + 2) + 1);
    Vec xa = node(z, 0);
    for (int j = 0; j < L.N; ++j) {
      Vec xb = node(z, j + 1);
      const double u = z[L.ui(j)] * sys.u_max();
      Vec fa = sys.eval(xa, u), fb = sys.eval(xb, u);
      Mat Ja = sys.jacobian(xa, u), Jb = sys.jacobian(xb, u);
      Vec g1 = sys.F1<double>(xa) + sys.F1<double>(xb);
      for (int i = 0; i < n; ++i) {
        const int row = j * n + i;
        const double w = r / scale[i];
        c[row] = w * (xb[i] - xa[i] - 0.5 * dt * (fa[i] + fb[i]));
        for (int k = 0; k < n; ++k) {
          double db = w * ((i == k ? 1.0 : 0.0) - 0.5 * dt * Jb(i, k)) * scale[k];
          if (db != 0.0) trip.emplace_back(row, L.xi(j + 1) + k, db);
          if (j > 0) {
            double da = w * (-(i == k ? 1.0 : 0.0) - 0.5 * dt * Ja(i, k)) * scale[k];
            if (da != 0.0) trip.emplace_back(row, L.xi(j) + k, da);
          }
        }
        if (g1[i] != 0.0) trip.emplace_back(row, L.ui(j), -0.5 * w * dt * g1[i] * sys.u_max());
        trip.emplace_back(row, 0, -0.5 * w * tf_ref / L.N * (fa[i] + fb[i]));
      }
      xa = xb;
    }
    c[L.N * n] = (xa[0] - v_s) / scale[0];
    trip.emplace_back(L.N * n, L.xi(L.N), 1.0);
    J.resize(L.N * n + 1, L.size());
    J.setFromTriplets(trip.begin(), trip.end());
  }
};

double al_value(double tau, const Eigen::VectorXd& c, const Eigen::VectorXd& lam, double mu) {
  return tau + lam.dot(c) + 0.5 * mu * c.squaredNorm();
}

struct BoxBounds {
  Eigen::VectorXd lo, hi;
  Eigen::VectorXd project(const Eigen::VectorXd& z) const { return z.cwiseMax(lo).cwiseMin(hi); }
};

double projected_gradient_norm(const Eigen::VectorXd& z, const Eigen::VectorXd& g, const BoxBounds& b) {
  return (b.project(z - g) - z).lpNorm<Eigen::Infinity>();
}

// Projected Gauss-Newton on the augmented Lagrangian: the quasi-Newton model mu J^T J + delta I is
// solved on the free variables, bound-active variables stay fixed, and a projected Armijo search
// accepts the step. Returns the iterations used; pg receives the final projected-gradient norm.
int projected_gauss_newton(const DirectProblem& P, Eigen::VectorXd& z, const Eigen::VectorXd& lam, double mu,
                           const BoxBounds& box, double tol, int max_iter, double& pg) {
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> J;
  P.linearize(z, c, J);
  double f = al_value(z[0], c, lam, mu);
  double delta = 1e-8 * mu;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd g = J.transpose() * (lam + mu * c);
    g[0] += 1.0;
    pg = projected_gradient_norm(z, g, box);
    if (pg <= tol) break;
    const double eps = std::min(1e-8, pg);
    std::vector<char> active(z.size(), 0);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      active[i] = (z[i] <= box.lo[i] + eps && g[i] > 0) || (z[i] >= box.hi[i] - eps && g[i] < 0);
    }
    Eigen::SparseMatrix<double> H = mu * (J.transpose() * J);
    Eigen::VectorXd rhs = -g;
    for (int k = 0; k < H.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator e(H, k); e; ++e) {
        if (active[e.row()] || active[e.col()]) e.valueRef() = 0.0;
      }
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (active[i]) rhs[i] = 0.0;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::VectorXd diag(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) diag[i] = active[i] ? 1.0 : delta;
      Eigen::SparseMatrix<double> D(z.size(), z.size());
      D.setIdentity();
      D = D * diag.asDiagonal();
      Eigen::SparseMatrix<double> Hd = H + D;
      ldlt.compute(Hd);
      if (ldlt.info() != Eigen::Success) {
        delta *= 100.0;
        continue;
      }
      Eigen::VectorXd d = ldlt.solve(rhs);
      double step = 1.0;
      for (int ls = 0; ls < 30; ++ls) {
        Eigen::VectorXd zn = box.project(z + step * d);
        Eigen::VectorXd cn = P.constraints(zn);
        double fn = al_value(zn[0], cn, lam, mu);
        if (std::isfinite(fn) && fn <= f + 1e-4 * g.dot(zn - z)) {
          z = zn;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (accepted) {
        delta = std::max(delta * (step == 1.0 ? 0.3 : 1.0), 1e-12 * mu);
      } else {
        delta *= 100.0;
      }
    }
    if (!accepted) break;
    P.linearize(z, c, J);
    f = al_value(z[0], c, lam, mu);
  }
  Eigen::VectorXd g = J.transpose() * (lam + mu * c);
  g[0] += 1.0;
  pg = projected_gradient_norm(z, g, box);
  return it;
}

Vec lerp_state(const std::vector<double>& t, const std::vector<Vec>& x, double tq) {
  auto it = std::upper_bound(t.begin(), t.end(), tq);
  if (it == t.begin()) return x.front();
  if (it == t.end()) return x.back();
  std::size_t i = static_cast<std::size_t>(it - t.begin());
  double w = (tq - t[i - 1]) / (t[i] - t[i - 1]);
  return (1.0 - w) * x[i - 1] + w * x[i];
}

}  // namespace

DirectSolution solve_direct(const ControlledSystem& sys, double v_s, int N, const DirectOptions& opts,
                            const DirectSolution* warm) {
  if (N < 50) throw ContractError("direct transcription needs N >= 50");
  Vec x0 = opts.x0 ? *opts.x0 : sys.dark_rest();
  if (!(x0[0] < v_s)) throw ContractError("threshold must lie above the initial voltage");
  const int n = sys.dim();

  std::vector<Vec> init_x(N + 1);
  std::vector<double> init_u(N, 1.0);
  double tf0;
  if (warm) {
    if (warm->N != N) throw ContractError("warm start has a different mesh size");
    tf0 = warm->t_f;
    init_x = warm->x;
    for (int j = 0; j < N; ++j) init_u[j] = warm->u[j] / sys.u_max();
  } else {
    Trajectory tr = integrate_to_hit(sys, ControlSignal::constant(sys.u_max()), x0, v_s, opts.t_max, IntegrateOptions{opts.h});
    if (tr.hit) {
      tf0 = tr.t.back();
    } else {
      std::size_t imax = 0;
      for (std::size_t i = 0; i < tr.x.size(); ++i)
        if (tr.x[i][0] > tr.x[imax][0]) imax = i;
      tf0 = std::max(tr.t[imax], tr.t[1]);
    }
    for (int j = 0; j <= N; ++j) init_x[j] = lerp_state(tr.t, tr.x, tf0 * j / N);
  }

  DirectProblem P{sys, x0, v_s, Layout{n, N}, tf0, Vec::Ones(n)};
  for (int i = 0; i < n; ++i) {
    double m = 0.0;
    for (const Vec& x : init_x) m = std::max(m, std::abs(x[i]));
    P.scale[i] = std::max(m, 1e-2);
  }

  Eigen::VectorXd z(P.L.size());
  z[0] = 1.0;
  for (int j = 1; j <= N; ++j)
    for (int i = 0; i < n; ++i) z[P.L.xi(j) + i] = init_x[j][i] / P.scale[i];
  for (int j = 0; j < N; ++j) z[P.L.ui(j)] = init_u[j];

  BoxBounds box{Eigen::VectorXd::Constant(z.size(), -kInf), Eigen::VectorXd::Constant(z.size(), kInf)};
  box.lo[0] = 1e-3;
  for (int j = 0; j < N; ++j) {
    box.lo[P.L.ui(j)] = 0.0;
    box.hi[P.L.ui(j)] = 1.0;
  }

  Eigen::VectorXd lam = Eigen::VectorXd::Zero(N * n + 1);
  double mu = 10.0;
  double prev_viol = kInf;
  DirectSolution sol;
  sol.N = N;
  sol.u_max = sys.u_max();
  sol.v_s = v_s;
  double pg = kInf;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    sol.inner_iterations += projected_gauss_newton(P, z, lam, mu, box, opts.grad_tol, opts.max_inner, pg);
    sol.outer_iterations = outer + 1;
    Eigen::VectorXd c = P.constraints(z);
    double viol = c.lpNorm<Eigen::Infinity>();
    sol.defect_max = viol;
    sol.kkt = pg;
    if (viol <= opts.defect_tol && pg <= opts.grad_tol) {
      sol.converged = true;
      break;
    }
    lam += mu * c;
    if (viol > 0.25 * prev_viol) mu = std::min(mu * 10.0, 1e9);
    prev_viol = viol;
  }

  sol.t_f = z[0] * tf0;
  sol.t.resize(N + 1);
  sol.x.resize(N + 1);
  sol.u.resize(N);
  for (int j = 0; j <= N; ++j) {
    sol.t[j] = sol.t_f * j / N;
    sol.x[j] = P.node(z, j);
  }
  for (int j = 0; j < N; ++j) sol.u[j] = z[P.L.ui(j)] * sys.u_max();
  return sol;
}

DirectSolution refine_mesh(const ControlledSystem& sys, const DirectSolution& sol, const DirectOptions& opts) {
  if (!sol.converged) throw ContractError("mesh refinement needs a converged solution");
  DirectSolution warm = sol;
  warm.N = 2 * sol.N;
  warm.x.assign(warm.N + 1, Vec());
  warm.u.assign(warm.N, 0.0);
  for (int j = 0; j < sol.N; ++j) {
    warm.x[2 * j] = sol.x[j];
    warm.x[2 * j + 1] = 0.5 * (sol.x[j] + sol.x[j + 1]);
    warm.u[2 * j] = warm.u[2 * j + 1] = sol.u[j];
  }
  warm.x[warm.N] = sol.x[sol.N];
  DirectOptions o = opts;
  if (!o.x0) o.x0 = sol.x.front();
  return solve_direct(sys, sol.v_s, warm.N, o, &warm);
}

double simulation_gap(const ControlledSystem& sys, const DirectSolution& sol, double h) {
  std::vector<double> times(sol.t.begin(), sol.t.end() - 1);
  ControlSignal ctrl = ControlSignal::sampled(times, sol.u);
  Trajectory tr = integrate(sys, ctrl, sol.x.front(), sol.t_f, IntegrateOptions{h});
  double gap = 0.0;
  std::size_t i = 0;
  for (std::size_t j = 0; j < sol.t.size(); ++j) {
    while (i + 1 < tr.t.size() && tr.t[i] < sol.t[j]) ++i;
    const Vec& xs = tr.x[i];
    gap = std::max(gap, (xs - sol.x[j]).cwiseAbs().cwiseQuotient((Vec::Ones(xs.size()) + xs.cwiseAbs())).maxCoeff());
  }
  return gap;
}

double interior_plateau_fraction(const DirectSolution& sol, double band) {
  int run = 0, longest = 0;
  for (double u : sol.u) {
    if (u > band * sol.u_max && u < (1.0 - band) * sol.u_max) {
      longest = std::max(longest, ++run);
    } else {
      run = 0;
    }
  }
  return sol.N > 0 ? static_cast<double>(longest) / sol.N : 0.0;
}

std::vector<ComparisonRow> sweep(const NeuronModel& neuron, const ChR2ThreeParams& ch3, const ChR2FourParams& ch4,
                                 const std::vector<double>& umax_list, double v_s, const BangOptions& opts) {
  if (umax_list.empty()) throw ContractError("u_max list must be nonempty");
  std::vector<ComparisonRow> rows;
  for (double u : umax_list) {
    ComparisonRow row;
    row.u_max = u;
    auto run = [&](const ChannelParams& ch, std::optional<double>& tf, double& light, int& k, std::vector<double>& sched,
                   double& consistency, std::string& err) {
      try {
        ControlledSystem sys = couple(neuron, ch, u);
        BangResult r = solve_bangbang(sys, v_s, opts);
        tf = r.t_f;
        light = r.light_on;
        k = static_cast<int>(r.schedule.k());
        sched = r.schedule.switches;
        VerifyOptions vo;
        vo.t_max = opts.t_max;
        vo.h = opts.h;
        vo.x0 = opts.x0;
        consistency = verify_extremal(sys, r.schedule, v_s, vo).sign_consistency;
      } catch (const std::exception& e) {
        err = e.what();
      }
    };
    run(ch3, row.t_f3, row.light_on3, row.switches3, row.schedule3, row.consistency3, row.error3);
    run(ch4, row.t_f4, row.light_on4, row.switches4, row.schedule4, row.consistency4, row.error4);
    rows.push_back(row);
  }
  return rows;
}

MonotonicityReport monotonicity_check(const ControlledSystem& sys, const std::vector<double>& umax_list, double v_s,
                                      const BangOptions& opts) {
  if (!std::is_sorted(umax_list.begin(), umax_list.end())) throw ContractError("u_max list must be sorted");
  MonotonicityReport rep;
  for (double u : umax_list) {
    BangResult r = solve_bangbang(sys.with_u_max(u), v_s, opts);
    if (!rep.t_f.empty() && r.t_f > rep.t_f.back().second + opts.resolution && rep.ok) {
      rep.ok = false;
      rep.offending = std::make_pair(rep.t_f.back().first, u);
    }
    rep.t_f.emplace_back(u, r.t_f);
  }
  return rep;
}

}  // namespace optospike
