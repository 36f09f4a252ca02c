#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "omt/errors.hpp"
#include "omt/kernel.hpp"
#include "omt/riccati.hpp"
#include "oracles.hpp"

using namespace omt;
using omt::test::scalar;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// |c(dt) - c(dt/2)| / |c(dt/2) - c(dt/4)| on the t0 coefficients.
template <class Solve>
double richardson_ratio(Solve solve, int steps) {
  const Vector a = solve(steps).node_coefficients(0);
  const Vector b = solve(2 * steps).node_coefficients(0);
  const Vector c = solve(4 * steps).node_coefficients(0);
  return (a - b).norm() / (b - c).norm();
}

}  // namespace

TEST_SUITE("riccati") {
  TEST_CASE("time grid") {
    CHECK(default_steps(0.0, 1.0) == 200);
    CHECK(default_steps(0.0, 2.001) == 401);
    CHECK(default_steps(0.0, 1e-6) == 1);
    const TimeGrid g{0.0, 2.0, 8};
    CHECK(g.dt() == 0.25);
    CHECK(g.node(8) == 2.0);
    CHECK_THROWS_AS((TimeGrid{1.0, 1.0, 4}).validate(), InvalidArgument);
    CHECK_THROWS_AS((TimeGrid{0.0, 1.0, 0}).validate(), InvalidArgument);
  }

  TEST_CASE("k decomposition examples") {
    const auto v = k_decomposition(test::vasicek());
    CHECK(v.k0(0, 0) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(v.k[0](0, 0) == 0.0);
    const auto c = k_decomposition(test::cir(0.3));
    CHECK(c.k0(0, 0) == 0.0);
    CHECK(c.k[0](0, 0) == doctest::Approx(0.09).epsilon(1e-15));
  }

  TEST_CASE("k decomposition reconstructs S diag(alpha + beta x) S' for n = 2") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> nd;
    AffineModelSpec m;
    m.A = -Matrix::Identity(2, 2);
    m.B = Vector::Zero(2);
    m.R = Vector::Ones(2);
    m.S = Matrix::NullaryExpr(2, 2, [&] { return nd(gen); });
    m.alpha = Vector::NullaryExpr(2, [&] { return std::abs(nd(gen)); });
    m.beta = Matrix::NullaryExpr(2, 2, [&] { return nd(gen); });
    const auto kd = k_decomposition(m);
    for (const auto& kj : kd.k) CHECK(max_abs(kj - kj.transpose()) == 0.0);
    for (int t = 0; t < 100; ++t) {
      const Vector x = Vector::NullaryExpr(2, [&] { return nd(gen); });
      const Vector var = m.alpha + m.beta * x;
      const Matrix direct = m.S * var.asDiagonal() * m.S.transpose();
      Matrix rebuilt = kd.k0;
      for (int j = 0; j < 2; ++j) rebuilt += x(j) * kd.k[j];
      CHECK(max_abs(direct - rebuilt) < 1e-12);
    }
  }

  TEST_CASE("jump transforms") {
    DiscreteMeasure zero_atom{{scalar(0.0)}, {3.0}};
    CHECK(jump_transform_affine(scalar(1.7), zero_atom) == 0.0);

    DiscreteMeasure one{{scalar(1.0)}, {2.0}};
    CHECK(jump_transform_affine(scalar(std::log(2.0)), one) == doctest::Approx(2.0).epsilon(1e-15));

    Vector U(2);
    U << 0.5, -0.5;
    Vector z1(2), z2(2);
    z1 << 1.0, 0.0;
    z2 << 0.0, 2.0;
    DiscreteMeasure two{{z1, z2}, {1.0, 0.5}};
    CHECK(jump_transform_affine(U, two) ==
          doctest::Approx(std::expm1(0.5) + 0.5 * std::expm1(-1.0)).epsilon(1e-15));

    CHECK(jump_transform_quadratic(Matrix::Zero(2, 2), Vector::Zero(2), two) == 0.0);
    CHECK(jump_transform_quadratic(Matrix::Zero(2, 2), U, two) == jump_transform_affine(U, two));
    DiscreteMeasure unit{{scalar(1.0)}, {1.0}};
    CHECK(jump_transform_quadratic(Matrix::Ones(1, 1), scalar(0.0), unit) ==
          doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
  }

  TEST_CASE("affine terminal node and constant rate") {
    const auto sol = solve_affine(test::deterministic_rate(0.03), TimeGrid{0.0, 2.0, 400},
                                  TerminalCondition::zero_affine(1));
    CHECK(sol.U.back()(0) == 0.0);
    CHECK(sol.p.back() == 0.0);
    for (int i = 0; i <= 400; i += 50) {
      const double s = sol.grid.node(i);
      CHECK(sol.U[i](0) == 0.0);
      CHECK(sol.p[i] == doctest::Approx(-0.03 * (2.0 - s)).epsilon(1e-13));
    }
  }

  TEST_CASE("vasicek coefficients against the textbook formula") {
    const auto sol = solve_affine(test::vasicek(), TimeGrid{0.0, 1.0, 200},
                                  TerminalCondition::zero_affine(1));
    // U = -(1 - e^{-tau}); p from the textbook bond price with x0 = 0.05
    const double U = -(1.0 - std::exp(-1.0));
    const double lnP = std::log(test::vasicek_bond(1.0, 0.05, 0.1, 0.05, 1.0));
    CHECK(std::abs(sol.U[0](0) - U) < 1e-10);
    CHECK(std::abs(sol.p[0] - (lnP - U * 0.05)) < 1e-10);
    // frozen reference values from an independent high-accuracy integration
    CHECK(std::abs(sol.U[0](0) - (-0.6321205588285577)) < 1e-10);
    CHECK(std::abs(sol.p[0] - (-0.017553515854949284)) < 1e-10);
  }

  TEST_CASE("jump part that cannot act leaves the coefficients unchanged") {
    const TimeGrid g{0.0, 1.0, 200};
    const auto base = solve_affine(test::vasicek(), g, TerminalCondition::zero_affine(1));
    auto check_same = [&](const AffineModelSpec& m) {
      const auto sol = solve_affine(m, g, TerminalCondition::zero_affine(1));
      for (int i = 0; i <= g.steps; ++i) {
        CHECK(max_abs(sol.node_coefficients(i) - base.node_coefficients(i)) <= 1e-10);
      }
    };
    check_same(test::vasicek_with_jump(0.2, 0.1, 0.1, 0.0));  // zero weight
    check_same(test::vasicek_with_jump(0.0, 0.0, 0.1, 0.5));  // no intensity
    check_same(test::vasicek_with_jump(0.2, 0.1, 0.0, 0.5));  // atom at zero
  }

  TEST_CASE("jump affine bond coefficients") {
    const auto sol = solve_affine(test::vasicek_with_jump(), TimeGrid{0.0, 1.0, 200},
                                  TerminalCondition::zero_affine(1));
    // independent adaptive integration of the same system, frozen
    CHECK(std::abs(sol.U[0](0) - (-0.6347071079977761)) < 1e-10);
    CHECK(std::abs(sol.p[0] - (-0.019402236750478266)) < 1e-10);
  }

  TEST_CASE("quadratic boundary and symmetry") {
    const TimeGrid g{0.0, 1.0, 100};
    const auto sol = solve_quadratic(test::qtsm2(), g, TerminalCondition::zero_quadratic(2));
    CHECK(max_abs(sol.q.back()) == 0.0);
    CHECK(max_abs(sol.u.back()) == 0.0);
    CHECK(sol.p.back() == 0.0);
    for (const auto& q : sol.q) CHECK(max_abs(q - q.transpose()) < 1e-10);
  }

  TEST_CASE("asymmetric quadratic terminal is refused") {
    auto term = TerminalCondition::zero_quadratic(2);
    auto& qt = std::get<QuadraticTerminal>(term.value);
    qt.q(0, 1) = 0.1;
    CHECK_THROWS_AS((void)solve_quadratic(test::qtsm2(), TimeGrid{0.0, 1.0, 10}, term), SymmetryLoss);
  }

  TEST_CASE("quadratic with Q = 0 matches the Gaussian affine model") {
    auto q = test::qtsm2();
    q.Q.setZero();
    AffineModelSpec a;
    a.A = q.A;
    a.B = q.B;
    a.S = q.Sigma;
    a.alpha = Vector::Ones(2);
    a.beta = Matrix::Zero(2, 2);
    a.R = q.R;
    a.k = q.k;
    const TimeGrid g{0.0, 2.0, 400};
    const auto sq = solve_quadratic(q, g, TerminalCondition::zero_quadratic(2));
    const auto sa = solve_affine(a, g, TerminalCondition::zero_affine(2));
    for (int i = 0; i <= g.steps; i += 40) {
      CHECK(max_abs(sq.q[i]) == 0.0);
      CHECK(max_abs(sq.u[i] - sa.U[i]) < 1e-13);
      CHECK(std::abs(sq.p[i] - sa.p[i]) < 1e-13);
    }
  }

  TEST_CASE("scalar quadratic model against an adaptive reference") {
    const auto sol = solve_quadratic(test::qtsm1(), TimeGrid{0.0, 1.0, 200},
                                     TerminalCondition::zero_quadratic(1));
    const auto [q_ref, p_ref] = test::scalar_qtsm(-1.0, 0.1, 1.0, 0.0, 1.0);
    CHECK(std::abs(sol.q[0](0, 0) - q_ref) < 1e-10);
    CHECK(std::abs(sol.p[0] - p_ref) < 1e-10);
    CHECK(std::abs(sol.u[0](0)) == 0.0);
    // frozen reference values
    CHECK(std::abs(sol.q[0](0, 0) - (-0.4312355555739871)) < 1e-10);
    CHECK(std::abs(sol.p[0] - (-0.0028343336079992617)) < 1e-10);
  }

  TEST_CASE("finite-time blow-up is reported") {
    QuadraticModelSpec m = test::qtsm1();
    m.A(0, 0) = 0.0;
    m.Sigma(0, 0) = 1.0;
    m.Q(0, 0) = -10.0;  // dq/dtau = 2q^2 + 10 explodes near tau = 0.35
    CHECK_THROWS_AS((void)solve_quadratic(m, TimeGrid{0.0, 5.0, 1000}, TerminalCondition::zero_quadratic(1)),
                    NonFinite);
  }

  TEST_CASE("futures terminal reproduces the payoff at maturity") {
    PriceModelSpec pm;
    pm.kind = PriceModelKind::APM;
    pm.A_T = scalar(1.3);
    pm.B_T = Matrix::Zero(1, 1);
    pm.h_T = -0.2;
    const auto sol = solve_affine(test::vasicek(), TimeGrid{0.0, 1.0, 50},
                                  TerminalCondition::from_payoff(pm, 1, true, false));
    for (double x : {-0.3, 0.0, 0.7}) {
      CHECK(std::exp(sol.exponent(1.0, scalar(x))) == pm.payoff(scalar(x)));
    }
    PriceModelSpec qpm = pm;
    qpm.kind = PriceModelKind::QPM;
    qpm.B_T = Matrix::Constant(1, 1, 0.25);
    const auto sq = solve_quadratic(test::qtsm1(), TimeGrid{0.0, 1.0, 50},
                                    TerminalCondition::from_payoff(qpm, 1, false, false));
    for (double x : {-0.3, 0.0, 0.7}) {
      CHECK(std::exp(sq.exponent(1.0, scalar(x))) == doctest::Approx(qpm.payoff(scalar(x))).epsilon(1e-15));
    }
  }

  TEST_CASE("OSC system: trivial data, boundary and sign bridge") {
    auto zero = test::qtsm2();
    zero.Q.setZero();
    zero.R.setZero();
    zero.k = 0.0;
    const TimeGrid g{0.0, 1.0, 50};
    const auto z = solve_osc_lqg(zero, g);
    for (int i = 0; i <= g.steps; ++i) {
      CHECK(max_abs(z.q[i]) == 0.0);
      CHECK(max_abs(z.v[i]) == 0.0);
      CHECK(z.p[i] == 0.0);
    }

    const auto spec = test::qtsm2();
    const auto osc = solve_osc_lqg(spec, g);
    const auto sol = solve_quadratic(spec, g, TerminalCondition::zero_quadratic(2));
    CHECK(osc.value(1.0, test::qtsm2_x0()) == 0.0);
    for (int i = 0; i <= g.steps; ++i) {
      CHECK(max_abs(osc.q[i] + sol.q[i]) <= 1e-8);
      CHECK(max_abs(osc.v[i] + sol.u[i]) <= 1e-8);
      CHECK(std::abs(osc.p[i] + sol.p[i]) <= 1e-8);
    }
  }

  TEST_CASE("OSC value equals minus the log bond price, scalar model") {
    const TimeGrid g{0.0, 1.0, 200};
    const auto osc = solve_osc_lqg(test::qtsm1(), g);
    const auto sol = solve_quadratic(test::qtsm1(), g, TerminalCondition::zero_quadratic(1));
    for (double x : {-0.5, 0.1, 0.4}) {
      CHECK(std::abs(osc.value(0.0, scalar(x)) + sol.exponent(0.0, scalar(x))) < 1e-10);
    }
  }

  TEST_CASE("OSC refuses jump models") {
    auto m = test::qtsm1();
    JumpSpecQuadratic j;
    j.L2 = Matrix::Zero(1, 1);
    j.L1 = Vector::Zero(1);
    j.l = 0.1;
    j.measure = DiscreteMeasure{{scalar(0.1)}, {1.0}};
    m.jump = j;
    CHECK_THROWS_AS((void)solve_osc_lqg(m, TimeGrid{0.0, 1.0, 10}), UnsupportedCombination);
  }

  TEST_CASE("RK4 self-convergence ratios lie in [8, 32]") {
    auto affine_ratio = [](const AffineModelSpec& m) {
      return richardson_ratio(
          [&](int steps) {
            return solve_affine(m, TimeGrid{0.0, 1.0, steps}, TerminalCondition::zero_affine(m.dim()));
          },
          8);
    };
    auto quad_ratio = [](const QuadraticModelSpec& m) {
      return richardson_ratio(
          [&](int steps) {
            return solve_quadratic(m, TimeGrid{0.0, 1.0, steps},
                                   TerminalCondition::zero_quadratic(m.dim()));
          },
          8);
    };
    for (double r : {affine_ratio(test::vasicek()), affine_ratio(test::cir()),
                     affine_ratio(test::vasicek_with_jump()), quad_ratio(test::qtsm1()),
                     quad_ratio(test::qtsm2())}) {
      CHECK(r >= 8.0);
      CHECK(r <= 32.0);
    }
  }

  TEST_CASE("coefficient interpolation and CSV export") {
    const TimeGrid g{0.0, 1.0, 4};
    const auto sol = solve_affine(test::vasicek(), g, TerminalCondition::zero_affine(1));
    CHECK(sol.U_at(0.125)(0) == doctest::Approx(0.5 * (sol.U[0](0) + sol.U[1](0))));
    CHECK(sol.p_at(1.0) == 0.0);
    std::ostringstream os;
    sol.write_csv(os);
    const std::string text = os.str();
    CHECK(text.rfind("s,U0,p\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  }

  TEST_CASE("optimal kernel formulas") {
    const TimeGrid g{0.0, 1.0, 100};
    // U = 0 when the rate does not depend on the state
    const FactorModel det{test::deterministic_rate(0.03)};
    auto sd = std::make_shared<const RiccatiSolution>(solve_model(det, g));
    CHECK(optimal_kernel(sd, det).eval(0.3, scalar(0.2))(0) == 0.0);

    const FactorModel vas{test::vasicek()};
    auto sv = std::make_shared<const RiccatiSolution>(solve_model(vas, g));
    const auto kv = optimal_kernel(sv, vas);
    CHECK(kv.eval(0.3, scalar(-1.0))(0) == kv.eval(0.3, scalar(2.0))(0));
    CHECK(kv.eval(0.3, scalar(0.0))(0) == doctest::Approx(sv->U_at(0.3)(0) * 0.1).epsilon(1e-14));

    // Z equals U_s times the volatility matrix at x, state-dependent for CIR
    const FactorModel c{test::cir(0.2)};
    auto sc = std::make_shared<const RiccatiSolution>(solve_model(c, g));
    const auto kc = optimal_kernel(sc, c);
    Matrix vol(1, 1);
    for (double x : {0.01, 0.05, 0.2}) {
      std::get<AffineModelSpec>(c).volatility(scalar(x), vol);
      const Vector expect = (sc->U_at(0.37).transpose() * vol).transpose();
      CHECK(std::abs(kc.eval(0.37, scalar(x))(0) - expect(0)) < 1e-15);
    }

    const FactorModel q{test::qtsm2()};
    auto sq = std::make_shared<const RiccatiSolution>(solve_model(q, g));
    const auto kq = optimal_kernel(sq, q);
    const Vector x = test::qtsm2_x0();
    const Matrix qs = sq->q_at(0.5);
    const Vector expect = test::qtsm2().Sigma.transpose() * (2.0 * qs * x + sq->u_at(0.5));
    CHECK(max_abs(kq.eval(0.5, x) - expect) < 1e-15);
    CHECK_FALSE(kq.has_jump_kernel());

    const FactorModel j{test::vasicek_with_jump()};
    auto sj = std::make_shared<const RiccatiSolution>(solve_model(j, g));
    const auto kj = optimal_kernel(sj, j);
    CHECK(kj.has_jump_kernel());
    CHECK(kj.jump_kernel(0.5, scalar(0.1)) == doctest::Approx(sj->U_at(0.5)(0) * 0.1).epsilon(1e-14));
  }
}
