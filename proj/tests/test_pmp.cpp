#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "optospike/optimize.hpp"
#include "optospike/pmp.hpp"

using namespace optospike;
using doctest::Approx;

namespace {

struct Linear1 {
  double a;
  int dim() const { return 1; }
  Vec eval(const Vec& x, double) const { return a * x; }
  Mat jacobian(const Vec&, double) const { return Mat::Constant(1, 1, a); }
};

struct FhnOptimum {
  ControlledSystem sys = test::preset_system("fhn", "chr2-3", 0.5);
  BangBangSchedule schedule;
  ExtremalArtifacts art;
  FhnOptimum() {
    BangResult r = solve_bangbang(sys, 1.5);
    schedule = r.schedule;
    art = verify_extremal_full(sys, schedule, 1.5);
  }
};

const FhnOptimum& fhn_optimum() {
  static const FhnOptimum f;
  return f;
}

}  // namespace

TEST_SUITE("pmp") {
  TEST_CASE("hamiltonian basics") {
    ControlledSystem s = test::preset_system("fhn", "chr2-3", 0.5);
    Vec x = s.dark_rest();
    x[2] = 0.2;
    CHECK(hamiltonian(s, x, Vec::Zero(4), -1.0, 0.3) == -1.0);
    Vec p(4);
    p << 0.3, -0.2, 1.1, 0.4;
    CHECK(hamiltonian(s, x, p, -1.0, 0.0) == Approx(p.dot(s.F0<double>(x)) - 1.0));
    double lin = hamiltonian(s, x, p, -1.0, 0.1) + hamiltonian(s, x, p, -1.0, 0.5) - 2.0 * hamiltonian(s, x, p, -1.0, 0.3);
    CHECK(std::abs(lin) <= 1e-14);
    CHECK_THROWS_AS(hamiltonian(s, x, p, 1.0, 0.0), ContractError);
  }

  TEST_CASE("adjoint closed forms") {
    Linear1 sys{0.7};
    Trajectory tr;
    for (int i = 0; i <= 200; ++i) {
      tr.t.push_back(0.01 * i);
      tr.x.push_back(Vec::Constant(1, std::exp(0.7 * 0.01 * i)));
      tr.u.push_back(0.0);
    }
    AdjointPath ad = adjoint_backward(sys, tr, Vec::Ones(1), -1.0, 0.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < ad.t.size(); ++i) worst = std::max(worst, std::abs(ad.p[i][0] - std::exp(0.7 * (2.0 - ad.t[i]))));
    CHECK(worst <= 1e-8);
    AdjointPath zero = adjoint_backward(sys, tr, Vec::Zero(1), -1.0, 0.0);
    for (const Vec& p : zero.p) CHECK(p[0] == 0.0);
  }

  TEST_CASE("adjoint rejects an inconsistent trajectory") {
    ControlledSystem s = test::preset_system("fhn", "chr2-3", 0.5);
    Trajectory tr = integrate(s, ControlSignal::constant(0.5), s.dark_rest(), 1.0);
    tr.x[10][0] += 1e-3;
    CHECK_THROWS_AS(adjoint_backward(s, tr, Vec::Zero(4), -1.0), ContractError);
  }

  TEST_CASE("switching function formulas") {
    ControlledSystem s3 = test::preset_system("fhn", "chr2-3", 0.5);
    Trajectory tr = integrate(s3, ControlSignal::constant(0.5), s3.dark_rest(), 2.0);
    AdjointPath ad;
    ad.t = tr.t;
    std::mt19937 rng(1);
    std::normal_distribution<double> N(0.0, 1.0);
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      Vec p(4);
      p << N(rng), N(rng), N(rng), N(rng);
      ad.p.push_back(p);
    }
    auto phi = switching_function(s3, tr, ad);
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const Vec& x = tr.x[i];
      CHECK(phi[i] == Approx((1.0 - x[2] - x[3]) * ad.p[i][2]).epsilon(1e-14));
      ad.p[i][2] = 0.0;
    }
    for (double v : switching_function(s3, tr, ad)) CHECK(v == 0.0);

    ControlledSystem s4 = test::preset_system("fhn", "chr2-4", 0.5);
    const auto& p4 = std::get<ChR2FourParams>(s4.channel());
    Vec q(5);
    q << 0.4, -0.1, 1.7, -2.0, 3.0;
    Trajectory dark;
    dark.t = {0.0};
    dark.x = {s4.dark_rest()};
    dark.u = {0.0};
    AdjointPath qa;
    qa.t = {0.0};
    qa.p = {q};
    CHECK(switching_function(s4, dark, qa)[0] == Approx(p4.eps1 * q[2]));
  }

  TEST_CASE("fhn extremal verifies") {
    const auto& f = fhn_optimum();
    const ExtremalReport& r = f.art.report;
    CHECK(f.schedule.start_on);
    CHECK(f.schedule.k() == 1);
    CHECK(r.sign_consistency >= 0.99);
    CHECK(r.passes());
    CHECK(r.max_abs_H <= 1e-3 * r.H_scale);
    REQUIRE(r.max_switch_offset.has_value());
    CHECK(*r.max_switch_offset <= 2.0 * 0.005);
    CHECK(r.lambda1 > 0.0);
  }

  TEST_CASE("hamiltonian is constant on bang arcs") {
    const auto& f = fhn_optimum();
    const Trajectory& tr = f.art.trajectory;
    const AdjointPath& ad = f.art.adjoint;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < tr.t.size(); ++i) {
      double h0 = hamiltonian(f.sys, tr.x[i], ad.p[i], -1.0, tr.u[i]);
      double h1 = hamiltonian(f.sys, tr.x[i + 1], ad.p[i + 1], -1.0, tr.u[i]);
      worst = std::max(worst, std::abs(h1 - h0) / (tr.t[i + 1] - tr.t[i]));
    }
    CHECK(worst * 10.0 <= 1e-6 * std::max(1.0, f.art.report.H_scale));
  }

  TEST_CASE("a shifted switch is less consistent") {
    const auto& f = fhn_optimum();
    BangBangSchedule wrong = f.schedule;
    wrong.switches[0] *= 1.2;
    ExtremalReport r = verify_extremal(f.sys, wrong, 1.5);
    CHECK(r.sign_consistency < f.art.report.sign_consistency - 0.01);
  }

  TEST_CASE("light-on-all-the-way has no interior switch") {
    ControlledSystem s = test::preset_system("hh2d", "chr2-3", 0.028);
    VerifyOptions vo;
    vo.h = 0.0025;
    ExtremalReport r = verify_extremal(s, BangBangSchedule{0.028, {}, true}, 90.0, vo);
    CHECK(r.phi_crossings.empty());
    CHECK(r.sign_consistency >= 0.99);
    // Above V_ChR2 the photocurrent is outward, so phi dips below zero just before t_f.
    for (double c : r.negligible_crossings) CHECK(c > r.t_f - 0.05);
  }

  TEST_CASE("numeric brackets") {
    std::mt19937 rng(4);
    ControlledSystem s = test::preset_system("hh", "chr2-4", 1.0);
    Field f0 = [&](const Vec& x) { return s.F0<double>(x); };
    Field f1 = [&](const Vec& x) { return s.F1<double>(x); };
    Field c = [](const Vec& x) { return Vec::Constant(x.size(), 0.3); };
    for (int k = 0; k < 20; ++k) {
      Vec x = test::random_state(rng, s, -20.0, 100.0);
      CHECK(lie_bracket_numeric(f0, f0, x).norm() <= 1e-8);
      Vec a = lie_bracket_numeric(f0, f1, x), b = lie_bracket_numeric(f1, f0, x);
      CHECK((a + b).norm() <= 1e-8 * std::max(1.0, a.norm()));
      CHECK(lie_bracket_numeric(c, c, x).norm() == 0.0);
    }
  }

  TEST_CASE("closed-form brackets") {
    std::mt19937 rng(8);
    ControlledSystem s = test::preset_system("hh", "chr2-4", 1.0);
    Field f0 = [&](const Vec& x) { return s.F0<double>(x); };
    Field f2 = [&](const Vec& x) { return s.F1<double>(x); };
    Field b = [&](const Vec& x) { return lie_bracket_numeric(f2, f0, x); };
    for (int k = 0; k < 100; ++k) {
      Vec z = test::random_state(rng, s, -20.0, 110.0);
      auto [c1, c2] = chr2_4_brackets(s, z);
      CHECK(test::rel_err(c1, lie_bracket_numeric(f0, f2, z)) <= 1e-6);
      CHECK(test::rel_err(c2, lie_bracket_numeric(f2, b, z)) <= 1e-6);
      for (int i = 1; i < 4; ++i) {
        CHECK(c1[i] == 0.0);
        CHECK(c2[i] == 0.0);
      }
    }
    auto [d1, d2] = chr2_4_brackets(s, s.dark_rest());
    CHECK(d1[6] == 0.0);
    CHECK(d2[6] == 0.0);
    Vec z = test::random_state(rng, s, 0.0, 1.0);
    z[0] = s.v_chr2();
    CHECK(std::abs(chr2_4_brackets(s, z).first[0]) <= 1e-12);
    CHECK_THROWS(chr2_4_brackets(test::preset_system("hh", "chr2-3", 1.0), z.head(6)));
  }

  TEST_CASE("singular control candidate") {
    std::mt19937 rng(12);
    ControlledSystem s = test::preset_system("hh", "chr2-4", 1.0);
    Vec z = test::random_state(rng, s, -20.0, 100.0);
    CHECK_FALSE(singular_control_candidate(s, z, Vec::Zero(7)).has_value());
    Vec q = Vec::Zero(7);
    q[0] = 1.0;
    q[4] = -0.5;
    auto a = singular_control_candidate(s, z, q);
    auto b = singular_control_candidate(s, z, 3.5 * q);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(*a == Approx(*b).epsilon(1e-9));
    // The denominator changes sign along a voltage sweep through V_ChR2.
    Vec lo = z, hi = z;
    lo[0] = s.v_chr2() - 30.0;
    hi[0] = s.v_chr2() + 30.0;
    Vec e0 = Vec::Unit(7, 0);
    double dl = e0.dot(chr2_4_brackets(s, lo).second), dh = e0.dot(chr2_4_brackets(s, hi).second);
    CHECK(dl * dh < 0.0);
  }

  TEST_CASE("ml singular locus") {
    NeuronModel ml = test::preset("ml-ditlevsen").model();
    const auto& p = std::get<MlParams>(ml.params());
    for (int i = 0; i < 1000; ++i) {
      double nu = -80.0 + 200.0 * (i + 0.5) / 1000.0;
      double w = ml_singular_locus(ml, nu);
      CHECK((w < 0.0 || w > 1.0));
      RatePair d = gate_rate_derivatives(ml, Gate::w, nu);
      double target = p.phi * std::sinh((nu - p.V3) / (2.0 * p.V4)) / (2.0 * p.V4);
      CHECK(d.alpha + d.beta == Approx(target).epsilon(1e-10));
    }
    CHECK_THROWS_AS(ml_singular_locus(ml, p.V3), ContractError);
    double above = ml_singular_locus(ml, p.V3 + 1e-6), below = ml_singular_locus(ml, p.V3 - 1e-6);
    CHECK(((above > 1.0 && below < 0.0) || (above < 0.0 && below > 1.0)));
  }

  TEST_CASE("bracket derivative identity along the fhn extremal") {
    const auto& f = fhn_optimum();
    Field f1 = [&](const Vec& x) { return f.sys.F1<double>(x); };
    double r1 = bracket_derivative_check(f.sys, f.art.trajectory, f.art.adjoint, f1);
    CHECK(r1 <= 1e-4);
    Field c = [](const Vec& x) { return Vec::Constant(x.size(), 1.0); };
    CHECK(bracket_derivative_check(f.sys, f.art.trajectory, f.art.adjoint, c) <= 1e-4);

    VerifyOptions coarse;
    coarse.h = 0.02;
    VerifyOptions fine;
    fine.h = 0.01;
    auto a = verify_extremal_full(f.sys, f.schedule, 1.5, coarse);
    auto b = verify_extremal_full(f.sys, f.schedule, 1.5, fine);
    double rc = bracket_derivative_check(f.sys, a.trajectory, a.adjoint, f1);
    double rf = bracket_derivative_check(f.sys, b.trajectory, b.adjoint, f1);
    CHECK(rf <= 0.5 * rc);
  }

  TEST_CASE("ml pre-reduction identities") {
    std::mt19937 rng(21);
    ControlledSystem s = test::preset_system("ml", "chr2-3", 0.028);
    for (int k = 0; k < 100; ++k) {
      Vec x = test::random_state(rng, s, -80.0, 40.0);
      PrereductionReport r = ml_prereduction_identities(s, x);
      CHECK(r.identity_rel_err <= 1e-6);
      for (std::size_t i = 0; i < r.products.size(); ++i) {
        CHECK(std::abs(r.products[i][0]) <= 1e-10 * std::max(1.0, r.costates[i].norm()));
      }
      CHECK(std::abs(r.violating_k1) > 1e-8);
    }
  }
}
