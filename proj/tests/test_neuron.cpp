#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "optospike/integrator.hpp"
#include "optospike/neuron.hpp"

using namespace optospike;
using doctest::Approx;

TEST_SUITE("neuron") {
  TEST_CASE("fhn drift at the origin") {
    NeuronModel m(FhnParams{});
    Vec x(2);
    x << 0.0, 0.0;
    Vec f = drift(m, x);
    CHECK(f[0] == Approx(0.0));
    CHECK(f[1] == Approx(0.056).epsilon(1e-12));
  }

  TEST_CASE("drift rejects bad input") {
    NeuronModel m(FhnParams{});
    CHECK_THROWS_AS(drift(m, Vec::Zero(3)), ContractError);
    Vec x(2);
    x << NAN, 0.0;
    CHECK_THROWS_AS(drift(m, x), ContractError);
  }

  TEST_CASE("resting states are equilibria") {
    for (const char* name : {"fhn-classic", "ml-ditlevsen", "ml-longtin", "hh-1952", "hh2d"}) {
      CAPTURE(name);
      NeuronModel m = test::preset(name).model();
      Vec r = resting_state(m);
      CHECK(drift(m, r).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
  }

  TEST_CASE("fhn rest matches a bisection root") {
    FhnParams p;
    auto g = [&](double v) { return v - v * v * v / 3.0 - (v + p.a) / p.b; };
    double lo = -3.0, hi = 0.0;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (g(lo) * g(mid) <= 0 ? hi : lo) = mid;
    }
    Vec r = resting_state(NeuronModel(p));
    CHECK(r[0] == Approx(lo).epsilon(1e-9));
    CHECK(r[0] == Approx(-1.19941).epsilon(1e-5));
    CHECK(r[1] == Approx(-0.62426).epsilon(1e-5));
  }

  TEST_CASE("ml rest window and gate") {
    NeuronModel m = test::preset("ml-ditlevsen").model();
    Vec r = resting_state(m);
    CHECK(r[0] > -65.0);
    CHECK(r[0] < -55.0);
    CHECK(r[1] == Approx(steady_gate(m, Gate::w, r[0])).epsilon(1e-12));
  }

  TEST_CASE("hh rest sits at zero") {
    NeuronModel m = test::preset("hh-1952").model();
    Vec r = resting_state(m);
    CHECK(std::abs(r[0]) <= 1e-9);
    CHECK(r[1] == Approx(steady_gate(m, Gate::n, 0.0)));
    CHECK(r[2] == Approx(steady_gate(m, Gate::m, 0.0)));
    CHECK(r[3] == Approx(steady_gate(m, Gate::h, 0.0)));
    Vec x(4);
    x << 0.0, steady_gate(m, Gate::n, 0.0), steady_gate(m, Gate::m, 0.0), steady_gate(m, Gate::h, 0.0);
    CHECK(drift(m, x).lpNorm<Eigen::Infinity>() <= 1e-10);
  }

  TEST_CASE("hh gate rates and limits") {
    NeuronModel m(HhParams{});
    RatePair n0 = gate_rates(m, Gate::n, 0.0);
    CHECK(n0.alpha == Approx(0.1 / (std::exp(1.0) - 1.0)).epsilon(1e-12));
    CHECK(n0.alpha == Approx(0.05820).epsilon(1e-4));
    CHECK(n0.beta == Approx(0.125));
    CHECK(gate_rates(m, Gate::n, 10.0).alpha == Approx(0.1).epsilon(1e-12));
    CHECK(gate_rates(m, Gate::n, 10.0 + 1e-7).alpha == Approx(0.1).epsilon(1e-6));
    CHECK(gate_rates(m, Gate::m, 25.0).alpha == Approx(1.0).epsilon(1e-12));
    for (double v = -100.0; v <= 120.0; v += 0.5) {
      for (Gate g : {Gate::n, Gate::m, Gate::h}) {
        RatePair r = gate_rates(m, g, v);
        CHECK(r.alpha >= 0.0);
        CHECK(r.beta >= 0.0);
        double s = steady_gate(m, g, v);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
      }
    }
  }

  TEST_CASE("steady gates") {
    NeuronModel hh(HhParams{});
    CHECK(steady_gate(hh, Gate::n, 0.0) == Approx(0.3177).epsilon(1e-3));
    CHECK(steady_gate(hh, Gate::h, 0.0) == Approx(0.07 / (0.07 + 1.0 / (std::exp(3.0) + 1.0))).epsilon(1e-12));
    CHECK(steady_gate(hh, Gate::h, 0.0) == Approx(0.5961).epsilon(1e-3));
    NeuronModel ml(MlParams{});
    CHECK(steady_gate(ml, Gate::m_ml, -1.2) == Approx(0.5));
  }

  TEST_CASE("ml w-gate at V3") {
    NeuronModel ml(MlParams{});
    RatePair r = gate_rates(ml, Gate::w, 2.0);
    CHECK(r.alpha == Approx(0.02));
    CHECK(r.beta == Approx(0.02));
    Vec x(2);
    x << 2.0, 0.3;
    CHECK(drift_jacobian(ml, x)(1, 1) == Approx(-0.04));
  }

  TEST_CASE("leak calibration") {
    HhParams p;
    double el = calibrate_leak(p);
    CHECK(std::abs(el) == Approx(10.6).epsilon(0.1));
    HhParams q = p;
    q.E_Na += 1.0;
    NeuronModel m(p);
    double minf = steady_gate(m, Gate::m, 0.0), hinf = steady_gate(m, Gate::h, 0.0);
    CHECK(calibrate_leak(q) - el == Approx(-p.g_Na * minf * minf * minf * hinf / p.g_L).epsilon(1e-9));
    for (double gl : {0.1, 0.3, 0.6}) {
      HhParams r = p;
      r.g_L = gl;
      r.E_L = calibrate_leak(r);
      Vec x(4);
      x << 0.0, steady_gate(m, Gate::n, 0.0), minf, hinf;
      CHECK(std::abs(drift(NeuronModel(r), x)[0]) <= 1e-12);
    }
  }

  TEST_CASE("fhn jacobian at the origin") {
    FhnParams p;
    Mat J = drift_jacobian(NeuronModel(p), Vec::Zero(2));
    CHECK(J(0, 0) == Approx(1.0));
    CHECK(J(0, 1) == Approx(-1.0));
    CHECK(J(1, 0) == Approx(p.c));
    CHECK(J(1, 1) == Approx(-p.b * p.c));
  }

  TEST_CASE("jacobians match finite differences") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const char* name : {"fhn-classic", "ml-ditlevsen", "hh-1952", "hh2d"}) {
      CAPTURE(name);
      NeuronModel m = test::preset(name).model();
      for (int k = 0; k < 20; ++k) {
        Vec x(m.dim());
        x[0] = m.kind() == ModelKind::fhn ? -2.0 + 4.0 * U(rng) : -70.0 + 180.0 * U(rng);
        for (int i = 1; i < m.dim(); ++i) x[i] = U(rng);
        Mat J = drift_jacobian(m, x);
        Mat F(m.dim(), m.dim());
        for (int j = 0; j < m.dim(); ++j) {
          double h = 1e-6 * (1.0 + std::abs(x[j]));
          Vec a = x, b = x;
          a[j] += h;
          b[j] -= h;
          F.col(j) = (drift(m, a) - drift(m, b)) / (2.0 * h);
        }
        CHECK((J - F).norm() / J.norm() <= 1e-5);
      }
    }
  }

  TEST_CASE("gates stay in the unit box") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const char* name : {"ml-ditlevsen", "hh-1952", "hh2d"}) {
      CAPTURE(name);
      const NeuronPreset& np = test::preset(name);
      ControlledSystem sys = couple(np.model(), ChR2ThreeParams{}, 1.0);
      double worst = 0.0;
      for (int k = 0; k < 100; ++k) {
        Vec x = Vec::Zero(sys.dim());
        x[0] = -70.0 + 160.0 * U(rng);
        for (int i = 1; i < sys.neuron_dim(); ++i) x[i] = U(rng);
        Trajectory tr = integrate(sys, ControlSignal::constant(0.0), x, 200.0, IntegrateOptions{2.0 * np.h});
        for (const Vec& y : tr.x) {
          for (int i = 1; i < sys.neuron_dim(); ++i) worst = std::max({worst, -y[i], y[i] - 1.0});
        }
      }
      CHECK(worst <= 1e-9);
    }
  }

  TEST_CASE("h against n fits") {
    HhParams p;
    p.E_L = calibrate_leak(p);
    HFit periodic = fit_h_linear(p, 10.0, 0.0, 100.0);
    CHECK(periodic.r2 >= 0.95);
    CHECK(periodic.a_h == Approx(kHh2dA).epsilon(1e-5));
    CHECK(periodic.b_h == Approx(kHh2dB).epsilon(1e-5));
    HFit transitory = fit_h_linear(p, 0.0, 30.0, 50.0);
    CHECK(transitory.b_h < 0.0);
    HFit rest = fit_h_linear(p, 0.0, 0.0, 50.0);
    CHECK(rest.degenerate);
    CHECK_THROWS_AS(fit_h_linear(p, 10.0, 0.0, 0.0), ContractError);
  }
}
