#include "optospike/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "optospike/optimize.hpp"
#include "optospike/pmp.hpp"

namespace optospike {

namespace {

struct Builder {
  const PresetRegistry& reg;
  const DiagnosticsOptions& opts;
  std::vector<bool>& used;

  std::pair<NeuronPreset, ChannelParams> pair(const std::string& model, const std::string& channel) const {
    NeuronPreset n = reg.neuron(model);
    ChannelParams c = channel_for(n, reg.channel(channel));
    for (std::size_t i = 0; i < opts.overrides.size(); ++i) {
      try {
        apply_override(n, c, opts.overrides[i].first, opts.overrides[i].second);
        used[i] = true;
      } catch (const ConfigError&) {
      }
    }
    return {n, c};
  }

  ControlledSystem system(const std::string& model, const std::string& channel, double u_max) const {
    auto [n, c] = pair(model, channel);
    return couple(n.model(), c, u_max);
  }
};

// Uniform random state: voltage in [lo, hi], gates and channel fractions inside their simplex.
Vec random_state(std::mt19937& rng, const ControlledSystem& sys, double lo, double hi) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vec x(sys.dim());
  x[0] = lo + (hi - lo) * U(rng);
  const int n = sys.neuron_dim();
  for (int i = 1; i < n; ++i) x[i] = U(rng);
  if (sys.neuron().kind() == ModelKind::fhn) x[1] = -1.0 + 2.0 * U(rng);
  double budget = 1.0;
  for (int i = n; i < sys.dim(); ++i) {
    x[i] = budget * U(rng) * 0.8;
    budget -= x[i];
  }
  return x;
}

Mat fd_jacobian(const ControlledSystem& sys, const Vec& x, double u) {
  Mat J(sys.dim(), sys.dim());
  for (int j = 0; j < sys.dim(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    Vec a = x, b = x;
    a[j] += h;
    b[j] -= h;
    J.col(j) = (sys.eval(a, u) - sys.eval(b, u)) / (2.0 * h);
  }
  return J;
}

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(b.norm(), 1e-12); }

struct Range {
  double lo, hi;
};

Range voltage_range(const NeuronPreset& p) {
  switch (p.model().kind()) {
    case ModelKind::fhn:
      return {-2.0, 2.0};
    case ModelKind::ml:
      return {p.scan.lo + 0.2 * (p.scan.hi - p.scan.lo), p.scan.hi + 0.5 * (p.scan.hi - p.scan.lo)};
    default:
      return {-20.0, 110.0};
  }
}

}  // namespace

bool DiagnosticsReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed || !c.hard; });
}

nlohmann::json DiagnosticsReport::to_json() const {
  nlohmann::json j;
  j["ok"] = ok();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"passed", c.passed},
                           {"hard", c.hard},
                           {"value", c.value},
                           {"threshold", c.threshold},
                           {"detail", c.detail}});
  }
  return j;
}

DiagnosticsReport run_diagnostics(const PresetRegistry& registry, const DiagnosticsOptions& opts) {
  DiagnosticsReport rep;
  std::vector<bool> used(opts.overrides.size(), false);
  Builder B{registry, opts, used};
  std::mt19937 rng(opts.seed);

  auto run = [&](const std::string& name, double threshold, bool hard, auto&& body) {
    Check c;
    c.name = name;
    c.threshold = threshold;
    c.hard = hard;
    try {
      c.value = body(c);
      c.passed = std::isfinite(c.value) && c.value <= threshold;
    } catch (const std::exception& e) {
      c.passed = false;
      c.value = std::numeric_limits<double>::quiet_NaN();
      c.detail = std::string("precondition failure: ") + e.what();
    }
    rep.checks.push_back(c);
  };

  for (const std::string model : {"fhn-classic", "ml-ditlevsen", "ml-longtin", "hh-1952", "hh2d"}) {
    run("rest_drift/" + model, 1e-8, true, [&](Check&) {
      NeuronModel m = B.pair(model, "chr2-3").first.model();
      return drift(m, resting_state(m)).lpNorm<Eigen::Infinity>();
    });
    run("jacobian/" + model + "+chr2-3", 1e-5, true, [&](Check&) {
      auto [n, c] = B.pair(model, "chr2-3");
      ControlledSystem sys = couple(n.model(), c, n.u_max);
      Range r = voltage_range(n);
      double worst = 0.0;
      for (int k = 0; k < opts.samples; ++k) {
        Vec x = random_state(rng, sys, r.lo, r.hi);
        Mat J = sys.jacobian(x, sys.u_max());
        Mat F = fd_jacobian(sys, x, sys.u_max());
        worst = std::max(worst, (J - F).norm() / std::max(J.norm(), 1e-12));
      }
      return worst;
    });
  }

  run("hh_leak_calibration", 1e-10, true, [&](Check& c) {
    NeuronModel m = B.pair("hh-1952", "chr2-3").first.model();
    Vec x(4);
    x << 0.0, steady_gate(m, Gate::n, 0.0), steady_gate(m, Gate::m, 0.0), steady_gate(m, Gate::h, 0.0);
    c.detail = "E_L = " + std::to_string(std::get<HhParams>(m.params()).E_L);
    return std::abs(drift(m, x)[0]);
  });

  run("bracket_antisymmetry/hh-1952+chr2-4", 1e-8, true, [&](Check&) {
    ControlledSystem sys = B.system("hh-1952", "chr2-4", 1.0);
    Field f0 = [&](const Vec& x) { return sys.F0<double>(x); };
    Field f1 = [&](const Vec& x) { return sys.F1<double>(x); };
    double worst = 0.0;
    for (int k = 0; k < opts.samples; ++k) {
      Vec x = random_state(rng, sys, -20.0, 110.0);
      Vec a = lie_bracket_numeric(f0, f1, x), b = lie_bracket_numeric(f1, f0, x);
      worst = std::max(worst, (a + b).norm() / std::max(a.norm(), 1e-12));
    }
    return worst;
  });

  run("closed_form_brackets/hh-1952+chr2-4", 1e-6, true, [&](Check&) {
    ControlledSystem sys = B.system("hh-1952", "chr2-4", 1.0);
    auto f0 = drift_field(sys);
    auto f2 = control_field(sys);
    auto b1 = exact_bracket(f0, f2);
    auto b2 = ad_power<2>(f2, f0);
    Field nf0 = [&](const Vec& x) { return sys.F0<double>(x); };
    Field nf2 = [&](const Vec& x) { return sys.F1<double>(x); };
    Field nb = [&](const Vec& x) { return lie_bracket_numeric(nf2, nf0, x); };
    double worst = 0.0;
    for (int k = 0; k < opts.samples; ++k) {
      Vec z = random_state(rng, sys, -20.0, 110.0);
      auto [c1, c2] = chr2_4_brackets(sys, z);
      worst = std::max(worst, rel(c1, lie_bracket_numeric(nf0, nf2, z)));
      worst = std::max(worst, rel(c2, lie_bracket_numeric(nf2, nb, z)));
      worst = std::max(worst, rel(c1, b1(z)));
      worst = std::max(worst, rel(c2, b2(z)));
    }
    return worst;
  });

  run("ml_identity_ad3/ml-ditlevsen+chr2-3", 1e-6, true, [&](Check&) {
    ControlledSystem sys = B.system("ml-ditlevsen", "chr2-3", 0.028);
    double worst = 0.0;
    for (int k = 0; k < opts.samples; ++k) {
      Vec x = random_state(rng, sys, -80.0, 40.0);
      worst = std::max(worst, ml_prereduction_identities(sys, x).identity_rel_err);
    }
    return worst;
  });

  double k2 = 0.0, k3 = 0.0, kk = 0.0, viol = 0.0;
  run("ml_singular_family_k1/ml-ditlevsen+chr2-3", 1e-10, true, [&](Check&) {
    ControlledSystem sys = B.system("ml-ditlevsen", "chr2-3", 0.028);
    double worst = 0.0;
    for (int k = 0; k < opts.samples; ++k) {
      Vec x = random_state(rng, sys, -80.0, 40.0);
      PrereductionReport r = ml_prereduction_identities(sys, x);
      for (std::size_t i = 0; i < r.products.size(); ++i) {
        const double scale = std::max(1.0, r.costates[i].norm());
        worst = std::max(worst, std::abs(r.products[i][0]) / scale);
        k2 = std::max(k2, std::abs(r.products[i][1]));
        k3 = std::max(k3, std::abs(r.products[i][2]));
        kk = std::max(kk, std::abs(r.products[i][3]));
      }
      viol = std::max(viol, std::abs(r.violating_k1));
    }
    return worst;
  });
  // Reported, not asserted: higher brackets on the constraint family.
  rep.checks.push_back({"ml_singular_family_k2_max", true, false, k2, 0.0, "reported"});
  rep.checks.push_back({"ml_singular_family_k3_max", true, false, k3, 0.0, "reported"});
  rep.checks.push_back({"ml_singular_family_f1_ad2_max", true, false, kk, 0.0, "reported"});
  run("ml_violating_costate_k1_nonzero", 0.0, true, [&](Check&) { return viol > 1e-8 ? 0.0 : 1.0; });

  run("ml_singular_locus_outside_unit_interval", 0.0, true, [&](Check& c) {
    NeuronModel m = B.pair("ml-ditlevsen", "chr2-3").first.model();
    const double V3 = std::get<MlParams>(m.params()).V3;
    int inside = 0;
    for (int i = 0; i < opts.locus_points; ++i) {
      double nu = -80.0 + 200.0 * (i + 0.5) / opts.locus_points;
      if (std::abs(nu - V3) < 1e-9) continue;
      double w = ml_singular_locus(m, nu);
      rep.ml_locus.emplace_back(nu, w);
      if (w >= 0.0 && w <= 1.0) ++inside;
    }
    c.detail = std::to_string(rep.ml_locus.size()) + " grid points";
    return static_cast<double>(inside);
  });

  run("h_fit_periodic_r2_deficit", 0.05, true, [&](Check& c) {
    auto n = B.pair("hh2d", "chr2-3").first;
    HFit fit = fit_h_linear(std::get<Hh2dParams>(n.params).hh, 10.0, 0.0, 100.0);
    c.detail = "a_h = " + std::to_string(fit.a_h) + ", b_h = " + std::to_string(fit.b_h);
    return 1.0 - fit.r2;
  });

  run("physiological_umax", 1e-3, true,
      [&](Check& c) {
        double u = physiological_umax(0.5, 1e-8, 6.2e9, 1.1);
        c.detail = "u_max = " + std::to_string(u);
        return std::abs(u - 0.028);
      });

  run("fhn_bracket_derivative/fhn-classic+chr2-3", 1e-4, true, [&](Check& c) {
    auto [n, ch] = B.pair("fhn-classic", "chr2-3");
    ControlledSystem sys = couple(n.model(), ch, n.u_max);
    BangOptions bo;
    bo.h = n.h;
    BangResult r = solve_bangbang(sys, n.v_s, bo);
    VerifyOptions vo;
    vo.h = n.h;
    ExtremalArtifacts art = verify_extremal_full(sys, r.schedule, n.v_s, vo);
    Field f1 = [&](const Vec& x) { return sys.F1<double>(x); };
    c.detail = "sign consistency " + std::to_string(art.report.sign_consistency);
    return bracket_derivative_check(sys, art.trajectory, art.adjoint, f1);
  });

  for (std::size_t i = 0; i < opts.overrides.size(); ++i) {
    if (!used[i]) throw ConfigError("unknown constant '" + opts.overrides[i].first + "'");
  }
  return rep;
}

}  // namespace optospike
