#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "optospike/integrator.hpp"

using namespace optospike;
using doctest::Approx;

namespace {

struct Decay {
  int dim() const { return 1; }
  Vec eval(const Vec& x, double) const { return -x; }
};

struct Ramp {
  int dim() const { return 1; }
  Vec eval(const Vec&, double) const { return Vec::Ones(1); }
};

struct BlowUp {
  int dim() const { return 1; }
  Vec eval(const Vec& x, double) const { return x.cwiseProduct(x); }
};

}  // namespace

TEST_SUITE("integrator") {
  TEST_CASE("rest is invariant without light") {
    for (const char* m : {"fhn", "ml", "hh", "hh2d"}) {
      ControlledSystem s = test::preset_system(m, "chr2-3", 1.0);
      Trajectory tr = integrate(s, ControlSignal::constant(0.0), s.dark_rest(), 100.0);
      CAPTURE(m);
      CHECK((tr.x.back() - tr.x.front()).lpNorm<Eigen::Infinity>() <= 1e-6);
      CHECK_FALSE(hit_time(s, ControlSignal::constant(0.0), s.dark_rest(), test::preset(m).v_s, 100.0).has_value());
    }
  }

  TEST_CASE("linear decay closed form") {
    Trajectory tr = integrate(Decay{}, ControlSignal::constant(0.0), Vec::Ones(1), 1.0);
    CHECK(tr.t.back() == Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(tr.x.back()[0] - std::exp(-1.0)) <= 1e-9);
  }

  TEST_CASE("ramp crossing") {
    auto t = hit_time(Ramp{}, ControlSignal::constant(0.0), Vec::Zero(1), 1.0, 5.0);
    REQUIRE(t.has_value());
    CHECK(std::abs(*t - 1.0) <= 1e-9);
    Trajectory tr = integrate_to_hit(Ramp{}, ControlSignal::constant(0.0), Vec::Zero(1), 1.0, 5.0);
    CHECK(tr.hit);
    CHECK(std::abs(tr.t.back() - 1.0) <= 1e-9);
    CHECK_THROWS_AS(hit_time(Ramp{}, ControlSignal::constant(0.0), Vec::Ones(1), 0.5, 5.0), ContractError);
  }

  TEST_CASE("fourth-order convergence") {
    ControlledSystem s = test::preset_system("fhn", "chr2-3", 0.5);
    ControlSignal u = ControlSignal::constant(0.5);
    auto final_state = [&](double h) {
      return integrate(s, u, s.dark_rest(), 10.0, IntegrateOptions{h}).x.back();
    };
    Vec ref = final_state(0.025);
    double e1 = (final_state(0.1) - ref).norm();
    double e2 = (final_state(0.05) - ref).norm();
    CHECK(e1 / e2 == Approx(16.0).epsilon(0.3));
  }

  TEST_CASE("switch times land on the grid") {
    ControlledSystem s = test::preset_system("fhn", "chr2-3", 0.5);
    BangBangSchedule b{0.5, {1.0003, 2.71828}, true};
    Trajectory tr = integrate(s, ControlSignal::bang(b), s.dark_rest(), 4.0, IntegrateOptions{0.01});
    for (double sw : b.switches) CHECK(std::find(tr.t.begin(), tr.t.end(), sw) != tr.t.end());
    CHECK(tr.u.size() == tr.t.size());
  }

  TEST_CASE("determinism and horizon independence") {
    ControlledSystem s = test::preset_system("hh2d", "chr2-3", 0.028);
    ControlSignal u = ControlSignal::constant(0.028);
    Trajectory a = integrate(s, u, s.dark_rest(), 20.0, IntegrateOptions{0.0025});
    Trajectory b = integrate(s, u, s.dark_rest(), 20.0, IntegrateOptions{0.0025});
    REQUIRE(a.x.size() == b.x.size());
    for (std::size_t i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);
    auto h1 = hit_time(s, u, s.dark_rest(), 90.0, 50.0, IntegrateOptions{0.0025});
    auto h2 = hit_time(s, u, s.dark_rest(), 90.0, 300.0, IntegrateOptions{0.0025});
    REQUIRE(h1.has_value());
    CHECK(*h1 == *h2);
  }

  TEST_CASE("divergence is reported with the last valid time") {
    Vec x0 = Vec::Ones(1);
    try {
      integrate(BlowUp{}, ControlSignal::constant(0.0), x0, 2.0, IntegrateOptions{0.01});
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.last_time() < 1.1);
      CHECK(e.last_time() > 0.5);
    }
  }

  TEST_CASE("control signal validation") {
    CHECK_THROWS_AS(ControlSignal::constant(-1.0), ContractError);
    CHECK_THROWS_AS(ControlSignal::sampled({0.0, 1.0, 1.0}, {1.0, 0.0, 1.0}), ContractError);
    CHECK_THROWS_AS(ControlSignal::bang(BangBangSchedule{1.0, {2.0, 1.0}, true}), ContractError);
    ControlSignal c = ControlSignal::bang(BangBangSchedule{1.0, {2.0}, true});
    CHECK(c.value_at(1.0) == 1.0);
    CHECK(c.value_at(2.0) == 0.0);
  }
}
