#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "optospike/optimize.hpp"

using namespace optospike;
using doctest::Approx;

namespace {

struct FhnCase {
  ControlledSystem sys = test::preset_system("fhn", "chr2-3", 0.5);
  BangResult bang;
  DirectSolution direct;
  FhnCase() {
    bang = solve_bangbang(sys, 1.5);
    direct = solve_direct(sys, 1.5, 200);
  }
};

const FhnCase& fhn() {
  static const FhnCase f;
  return f;
}

}  // namespace

TEST_SUITE("optimize") {
  TEST_CASE("light-on time") {
    CHECK(light_on_time(BangBangSchedule{1.0, {}, true}, 5.0) == 5.0);
    CHECK(light_on_time(BangBangSchedule{1.0, {}, false}, 5.0) == 0.0);
    CHECK(light_on_time(BangBangSchedule{1.0, {1.0, 2.5, 4.0}, true}, 5.0) == Approx(1.0 + 1.5));
    CHECK(light_on_time(BangBangSchedule{1.0, {1.0, 2.5, 6.0}, true}, 5.0) == Approx(1.0 + 2.5));
  }

  TEST_CASE("fhn optimum has one switch from the light") {
    const BangResult& r = fhn().bang;
    CHECK(r.schedule.start_on);
    CHECK(r.schedule.k() == 1);
    REQUIRE(r.t_constant.has_value());
    CHECK(r.t_f < *r.t_constant);
    CHECK(r.light_on == Approx(r.schedule.switches[0]));
    for (const auto& c : r.per_k) {
      if (c.t_f) CHECK(*c.t_f >= r.t_f - BangOptions{}.tie_tol);
    }
  }

  TEST_CASE("bang solver is deterministic") {
    BangResult again = solve_bangbang(fhn().sys, 1.5);
    CHECK(again.t_f == fhn().bang.t_f);
    CHECK(again.schedule.switches == fhn().bang.schedule.switches);
  }

  TEST_CASE("bang solver preconditions") {
    const ControlledSystem& s = fhn().sys;
    CHECK_THROWS_AS(solve_bangbang(s, -2.0), ContractError);
    BangOptions o;
    o.t_max = 20.0;
    o.k_max = 2;
    CHECK_THROWS_AS(solve_bangbang(s, 5.0, o), UnreachableError);
  }

  TEST_CASE("direct solver agrees with the bang solver") {
    const DirectSolution& d = fhn().direct;
    CHECK(d.converged);
    CHECK(d.defect_max <= 1e-6);
    CHECK(d.kkt <= 1e-5);
    CHECK(std::abs(d.t_f - fhn().bang.t_f) / fhn().bang.t_f <= 0.01);
    int interior = 0;
    for (double u : d.u) {
      if (u > 0.01 * d.u_max && u < 0.99 * d.u_max) ++interior;
    }
    CHECK(interior <= 0.05 * d.N);
    CHECK(interior_plateau_fraction(d) <= 0.05);
    CHECK(d.x.back()[0] == Approx(1.5).epsilon(1e-6));
  }

  TEST_CASE("mesh refinement") {
    const DirectSolution& d = fhn().direct;
    DirectSolution r = refine_mesh(fhn().sys, d);
    CHECK(r.N == 2 * d.N);
    CHECK(r.converged);
    CHECK(std::abs(r.t_f - d.t_f) / d.t_f < 0.003);
    CHECK(simulation_gap(fhn().sys, r, 0.005) <= simulation_gap(fhn().sys, d, 0.005));
    DirectSolution bad = d;
    bad.converged = false;
    CHECK_THROWS_AS(refine_mesh(fhn().sys, bad), ContractError);
  }

  TEST_CASE("direct solver flags an unreachable threshold") {
    DirectOptions o;
    o.max_outer = 8;
    DirectSolution d = solve_direct(fhn().sys, 3.0, 50, o);
    CHECK_FALSE(d.converged);
    CHECK_THROWS_AS(solve_direct(fhn().sys, 1.5, 10), ContractError);
  }

  TEST_CASE("plateau fraction") {
    DirectSolution s;
    s.N = 10;
    s.u_max = 1.0;
    s.u = {1, 1, 0.5, 0.5, 0.5, 0, 0, 0.4, 1, 1};
    CHECK(interior_plateau_fraction(s) == Approx(0.3));
    s.u = {1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    CHECK(interior_plateau_fraction(s) == 0.0);
  }

  TEST_CASE("monotonicity in the light bound") {
    MonotonicityReport r = monotonicity_check(fhn().sys, {0.5, 1.0, 10.0, 100.0}, 1.5);
    CHECK(r.ok);
    CHECK(r.t_f.size() == 4);
    CHECK_FALSE(r.offending.has_value());
    CHECK(monotonicity_check(fhn().sys, {1.0}, 1.5).ok);
    CHECK_THROWS_AS(monotonicity_check(fhn().sys, {1.0, 0.5}, 1.5), ContractError);
  }

  TEST_CASE("sweep records failures per row") {
    const NeuronPreset& n = test::preset("fhn");
    BangOptions o;
    o.t_max = 20.0;
    o.k_max = 2;
    ChR2ThreeParams c3;
    c3.V_ChR2 = 1.0;
    ChR2FourParams c4;
    c4.V_ChR2 = 1.0;
    auto rows = sweep(n.model(), c3, c4, {0.5, 1.0}, 5.0, o);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
      CHECK_FALSE(r.t_f3.has_value());
      CHECK_FALSE(r.error3.empty());
      CHECK_FALSE(r.gain().has_value());
    }
    auto ok = sweep(n.model(), c3, c4, {0.5}, 1.5);
    REQUIRE(ok.size() == 1);
    REQUIRE(ok[0].t_f3.has_value());
    CHECK(*ok[0].t_f3 == fhn().bang.t_f);
    CHECK(ok[0].switches3 == 1);
    CHECK(ok[0].consistency3 >= 0.99);
    CHECK_THROWS_AS(sweep(n.model(), c3, c4, {}, 1.5), ContractError);
  }
}
