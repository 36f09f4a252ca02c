#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "omt/errors.hpp"
#include "omt/pricing.hpp"
#include "omt/verify.hpp"

using namespace omt;
using omt::test::scalar;

namespace {

constexpr unsigned kThreads = 1;

KernelSpec optimal_for(const FactorModel& m, const TimeGrid& g) {
  return optimal_kernel(std::make_shared<const RiccatiSolution>(solve_model(m, g)), m);
}

}  // namespace

TEST_SUITE("verify") {
  TEST_CASE("entropy examples") {
    const FactorModel vas{test::vasicek()};
    const TimeGrid g{0.0, 1.0, 200};
    const auto zero = entropy_estimate(vas, scalar(0.05), KernelSpec::zero(1), g, 500, 1, kThreads);
    CHECK(zero.mean == 0.0);
    CHECK(zero.std_error == 0.0);

    const auto c = entropy_estimate(vas, scalar(0.05), KernelSpec::constant(scalar(0.3)), g, 500, 1, kThreads);
    CHECK(c.mean == doctest::Approx(0.045).epsilon(1e-12));
    CHECK(c.std_error < 1e-15);

    // deterministic Z: quadrature of 1/2 (U_s sigma)^2, frozen from an adaptive integration
    const auto opt = entropy_estimate(vas, scalar(0.05), optimal_for(vas, g), g, 20000, 3, kThreads);
    CHECK(std::abs(opt.mean - 0.0008404562036228915) < 3.0 * opt.std_error + 1e-5);
  }

  TEST_CASE("objective examples") {
    const FactorModel vas{test::vasicek()};
    const TimeGrid g{0.0, 1.0, 200};
    const double V = bond_price(vas, 0.0, 1.0, scalar(0.05), 200).value_function;
    const auto j0 = omt_objective(vas, scalar(0.05), KernelSpec::zero(1), g, 5000, 4, kThreads);
    CHECK(j0.mean >= V - 3.0 * j0.std_error);

    const FactorModel det{test::deterministic_rate(0.03)};
    const TimeGrid g2{0.0, 2.0, 400};
    const auto jd0 = omt_objective(det, scalar(0.05), KernelSpec::zero(1), g2, 50, 4, kThreads);
    CHECK(jd0.mean == doctest::Approx(0.06).epsilon(1e-12));
    const auto jd = omt_objective(det, scalar(0.05), KernelSpec::constant(scalar(0.4)), g2, 50, 4, kThreads);
    CHECK(jd.mean == doctest::Approx(0.06 + 0.5 * 0.16 * 2.0).epsilon(1e-12));
    CHECK(jd.mean > jd0.mean);

    const auto jopt = omt_objective(vas, scalar(0.05), optimal_for(vas, g), g, 20000, 5, kThreads);
    CHECK(std::abs(jopt.mean - V) <= 3.0 * jopt.std_error);
  }

  TEST_CASE("duality on a deterministic rate") {
    const FactorModel det{test::deterministic_rate(0.03)};
    const TimeGrid g{0.0, 1.0, 100};
    auto zero = KernelSpec::zero(1);
    zero.label = "zero";
    auto half = KernelSpec::constant(scalar(0.5));
    half.label = "half";
    const auto r = duality_check(det, scalar(0.0), {zero, half}, g, 100, 1, kThreads);
    REQUIRE(r.rows.size() == 2);
    CHECK(std::abs(r.rows[0].gap) < 1e-12);
    CHECK(r.rows[1].gap == doctest::Approx(0.125).epsilon(1e-10));
    CHECK(r.rows[1].gap > 0.0);
  }

  TEST_CASE("duality on the Vasicek model") {
    const FactorModel vas{test::vasicek()};
    const TimeGrid g{0.0, 1.0, 200};
    auto zero = KernelSpec::zero(1);
    zero.label = "zero";
    auto plus = KernelSpec::constant(scalar(0.3));
    plus.label = "plus";
    auto minus = KernelSpec::constant(scalar(-0.3));
    minus.label = "minus";
    auto opt = optimal_for(vas, g);
    opt.label = "optimal";
    const auto r = duality_check(vas, scalar(0.05), {zero, plus, minus, opt}, g, 10000, 21, kThreads);
    CHECK(r.value_closed_form == doctest::Approx(0.049159543796377166).epsilon(1e-9));
    for (const auto& row : r.rows) {
      INFO(row.kernel);
      CHECK(row.lower_bound_ok);
      CHECK(row.entropy_ok);
      CHECK(row.attained_ok);
      CHECK(row.not_beaten_ok);
    }
    CHECK(r.rows.back().is_optimal);
    CHECK(r.passed());
  }

  TEST_CASE("density identity degenerate cases") {
    const TimeGrid g{0.0, 1.0, 100};
    const auto det = density_identity_check(FactorModel{test::deterministic_rate(0.03)}, scalar(0.05),
                                            g, 50, 1, kThreads);
    CHECK(det.max_abs < 1e-13);

    // zero volatility: both sides deterministic, only the rate quadrature differs
    auto flat = test::vasicek();
    flat.S(0, 0) = 0.0;
    const auto z1 = density_identity_check(FactorModel{flat}, scalar(0.2), g, 20, 1, kThreads);
    const auto z2 = density_identity_check(FactorModel{flat}, scalar(0.2), TimeGrid{0.0, 1.0, 400}, 20, 1,
                                           kThreads);
    CHECK(z1.max_abs < 1e-3);
    CHECK(z2.max_abs < z1.max_abs);
    CHECK(z1.max_abs == z1.median_abs);
  }

  TEST_CASE("density discrepancy shrinks under refinement") {
    const FactorModel vas{test::vasicek()};
    const auto a = density_identity_check(vas, scalar(0.05), TimeGrid{0.0, 1.0, 50}, 2000, 2, kThreads);
    const auto b = density_identity_check(vas, scalar(0.05), TimeGrid{0.0, 1.0, 200}, 2000, 2, kThreads);
    CHECK(b.median_abs < a.median_abs);
    CHECK(b.dt == doctest::Approx(0.005));
  }

  TEST_CASE("BSDE residual degenerate cases") {
    const TimeGrid g{0.0, 1.0, 50};
    const auto det = fbsde_residual_check(FactorModel{test::deterministic_rate(0.03)}, scalar(0.05), g,
                                          20, 1, 1, kThreads);
    for (const auto& lvl : det.levels) {
      CHECK(lvl.max_abs_residual < 1e-13);
      CHECK(lvl.terminal_mismatch == 0.0);
    }

    auto flat = test::vasicek();
    flat.S(0, 0) = 0.0;
    const auto z = fbsde_residual_check(FactorModel{flat}, scalar(0.2), g, 10, 1, 2, kThreads);
    for (const auto& lvl : z.levels) CHECK(lvl.max_abs_residual < 1e-3);
    CHECK(z.monotone());
  }

  TEST_CASE("BSDE residual convergence on the Vasicek model") {
    const auto r = fbsde_residual_check(FactorModel{test::vasicek()}, scalar(0.05), TimeGrid{0.0, 1.0, 125},
                                        3000, 7, 2, kThreads);
    REQUIRE(r.levels.size() == 3);
    REQUIRE(r.ratios.size() == 2);
    CHECK(r.levels[1].steps == 250);
    for (double ratio : r.ratios) {
      CHECK(ratio >= 1.3);
      CHECK(ratio <= 3.0);
    }
    for (const auto& lvl : r.levels) CHECK(lvl.terminal_mismatch == 0.0);
  }

  TEST_CASE("BSDE residual with a futures terminal and with jumps") {
    PriceModelSpec pm;
    pm.kind = PriceModelKind::APM;
    pm.A_T = scalar(1.0);
    pm.B_T = Matrix::Zero(1, 1);
    const auto t = TerminalCondition::from_payoff(pm, 1, true, false);
    const auto r = fbsde_residual_check(FactorModel{test::vasicek()}, scalar(0.05), TimeGrid{0.0, 1.0, 50},
                                        t, 500, 3, 1, kThreads);
    for (const auto& lvl : r.levels) {
      CHECK(std::isfinite(lvl.mean_abs_residual));
      CHECK(lvl.terminal_mismatch == 0.0);
    }
    const auto j = fbsde_residual_check(FactorModel{test::vasicek_with_jump()}, scalar(0.05),
                                        TimeGrid{0.0, 1.0, 50}, 1000, 3, 2, kThreads);
    CHECK(j.monotone());
  }

  TEST_CASE("OSC equivalence") {
    auto zero = test::qtsm2();
    zero.Q.setZero();
    zero.R.setZero();
    zero.k = 0.0;
    const TimeGrid g{0.0, 1.0, 49};
    const std::vector<Vector> one{test::qtsm2_x0()};
    const auto rz = osc_equivalence_check(zero, g, one);
    CHECK(rz.max_kernel_diff == 0.0);
    CHECK(rz.max_value_diff == 0.0);
    CHECK(rz.nodes == 50);

    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    auto spec = test::qtsm2();
    const Matrix M = Matrix::NullaryExpr(2, 2, [&] { return nd(gen); });
    spec.Q = 0.2 * M * M.transpose();
    std::vector<Vector> states;
    for (int i = 0; i < 10; ++i) states.push_back(Vector::NullaryExpr(2, [&] { return nd(gen); }));
    const auto r = osc_equivalence_check(spec, g, states);
    CHECK(r.states == 10);
    CHECK(r.passed(1e-8));

    const auto osc = solve_osc_lqg(spec, g);
    for (const auto& x : states) CHECK(osc.feedback(1.0, x).norm() == 0.0);
  }

  TEST_CASE("jump reduction") {
    const TimeGrid g{0.0, 1.0, 100};
    const auto w0 = jump_reduction_check(FactorModel{test::vasicek_with_jump(0.2, 0.1, 0.1, 0.0)}, g);
    CHECK(w0.removable);
    CHECK(w0.max_coefficient_diff == 0.0);
    const auto l0 = jump_reduction_check(FactorModel{test::vasicek_with_jump(0.0, 0.0)}, g);
    CHECK(l0.removable);
    CHECK(l0.max_coefficient_diff == 0.0);
    const auto z0 = jump_reduction_check(FactorModel{test::vasicek_with_jump(0.2, 0.1, 0.0, 0.5)}, g);
    CHECK(z0.removable);
    CHECK(z0.passed());
    const auto live = jump_reduction_check(FactorModel{test::vasicek_with_jump()}, g);
    CHECK_FALSE(live.removable);
    CHECK(live.max_coefficient_diff > 1e-6);
  }
}
