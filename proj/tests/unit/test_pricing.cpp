#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "omt/errors.hpp"
#include "omt/pricing.hpp"
#include "omt/simulate.hpp"
#include "oracles.hpp"

using namespace omt;
using omt::test::scalar;

namespace {

PriceModelSpec apm(double a, double h = 0.0) {
  PriceModelSpec pm;
  pm.kind = PriceModelKind::APM;
  pm.A_T = scalar(a);
  pm.B_T = Matrix::Zero(1, 1);
  pm.h_T = h;
  return pm;
}

}  // namespace

TEST_SUITE("pricing") {
  TEST_CASE("bond price examples") {
    const FactorModel vas{test::vasicek()};
    const auto at_maturity = bond_price(vas, 1.0, 1.0, scalar(0.05));
    CHECK(at_maturity.value == 1.0);
    CHECK(at_maturity.value_function == 0.0);

    const auto det = bond_price(FactorModel{test::deterministic_rate(0.03)}, 0.0, 2.0, scalar(0.05));
    CHECK(std::abs(det.value - std::exp(-0.06)) < 1e-13);
    CHECK(std::abs(det.value - 0.9417645) < 1e-7);

    const auto v = bond_price(vas, 0.0, 1.0, scalar(0.05));
    const double oracle = test::vasicek_bond(1.0, 0.05, 0.1, 0.05, 1.0);
    CHECK(std::abs(v.value - oracle) < 1e-10);
    CHECK(std::abs(v.value - 0.952029227224105) < 1e-10);
    CHECK(std::abs(v.value_function + std::log(oracle)) < 1e-10);
    CHECK(std::abs(v.value_function - 0.049159543796377166) < 1e-10);
    CHECK(v.method == PriceMethod::closed_form);
  }

  TEST_CASE("CIR and quadratic bond prices") {
    for (double sigma : {0.1, 0.2}) {
      const auto c = bond_price(FactorModel{test::cir(sigma)}, 0.0, 1.0, scalar(0.05));
      CHECK(std::abs(c.value - test::cir_bond(1.0, 0.05, sigma, 0.05, 1.0)) < 1e-10);
    }
    const auto q = bond_price(FactorModel{test::qtsm1()}, 0.0, 1.0, scalar(0.3));
    const auto [qr, pr] = test::scalar_qtsm(-1.0, 0.1, 1.0, 0.0, 1.0);
    CHECK(std::abs(q.value - std::exp(qr * 0.09 + pr)) < 1e-10);
  }

  TEST_CASE("value function") {
    CHECK(value_function(PriceResult::make(1.0, 0, 1, PriceMethod::closed_form)) == 0.0);
    CHECK(value_function(PriceResult::make(std::exp(-0.06), 0, 1, PriceMethod::closed_form)) ==
          doctest::Approx(0.06).epsilon(1e-14));
    const double oracle = test::vasicek_bond(1.0, 0.05, 0.1, 0.05, 1.0);
    CHECK(std::abs(value_function(PriceResult::make(oracle, 0, 1, PriceMethod::monte_carlo)) +
                   std::log(oracle)) < 1e-15);
    PriceResult bad;
    bad.value = 0.0;
    CHECK_THROWS_AS((void)value_function(bad), InvalidArgument);
    CHECK_THROWS_AS((void)PriceResult::make(-1.0, 0, 1, PriceMethod::closed_form), NonFinite);
  }

  TEST_CASE("futures price examples") {
    const FactorModel vas{test::vasicek()};
    const auto pm = apm(1.0);
    const auto boundary = futures_price(vas, pm, 1.0, 1.0, scalar(0.3));
    CHECK(boundary.value == pm.payoff(scalar(0.3)));

    const auto constant = apm(0.0, 0.25);
    for (double t : {0.0, 0.4, 0.9}) {
      CHECK(std::abs(futures_price(vas, constant, t, 1.0, scalar(0.05)).value - std::exp(0.25)) < 1e-14);
    }

    // exp of a Gaussian: mean 0.05, variance 0.005 (1 - e^{-2})
    const auto g = futures_price(vas, pm, 0.0, 1.0, scalar(0.05));
    const double var = 0.005 * (1.0 - std::exp(-2.0));
    CHECK(std::abs(g.value - std::exp(0.05 + 0.5 * var)) < 1e-10);
    CHECK(std::abs(g.value - 1.0535460468889368) < 1e-10);

    const auto ens = simulate(vas, scalar(0.05), TimeGrid{0.0, 1.0, 200}, 20000, 11,
                              KernelSpec::zero(1), {.threads = 1});
    const auto mc = mc_futures_price(ens, pm);
    CHECK(std::abs(mc.mean - g.value) < 3.0 * mc.std_error);
  }

  TEST_CASE("futures and forwards reject unsupported combinations") {
    PriceModelSpec qpm = apm(1.0);
    qpm.kind = PriceModelKind::QPM;
    qpm.B_T(0, 0) = 0.1;
    const FactorModel vas{test::vasicek()};
    CHECK_THROWS_AS((void)futures_price(vas, qpm, 0.0, 1.0, scalar(0.05)), UnsupportedCombination);
    CHECK_THROWS_AS((void)forward_price(vas, qpm, 0.0, 1.0, scalar(0.05)), UnsupportedCombination);
    const FactorModel jump{test::vasicek_with_jump()};
    CHECK_THROWS_AS((void)futures_price(jump, apm(1.0), 0.0, 1.0, scalar(0.05)), UnsupportedCombination);
    // QPM payoffs are fine on quadratic factors
    const auto q = futures_price(FactorModel{test::qtsm1()}, qpm, 0.0, 1.0, scalar(0.2));
    CHECK(q.value > 0.0);
  }

  TEST_CASE("forward price examples") {
    const auto pm = apm(1.0);
    const FactorModel det{test::deterministic_rate(0.03)};
    const auto f = forward_price(det, pm, 0.0, 1.0, scalar(0.05));
    const auto g = futures_price(det, pm, 0.0, 1.0, scalar(0.05));
    CHECK(std::abs(f.forward - g.value) <= 1e-10);

    const FactorModel vas{test::vasicek()};
    const auto boundary = forward_price(vas, pm, 1.0, 1.0, scalar(0.2));
    CHECK(boundary.forward == pm.payoff(scalar(0.2)));

    const auto fv = forward_price(vas, pm, 0.0, 1.0, scalar(0.05));
    CHECK(fv.forward * fv.bond.value == doctest::Approx(fv.numerator.value).epsilon(1e-14));
    CHECK(std::abs(fv.numerator.value - 1.0010047404048616) < 1e-10);
    CHECK(std::abs(fv.numerator.value_function + std::log(fv.numerator.value)) < 1e-15);

    const auto ens = simulate(vas, scalar(0.05), TimeGrid{0.0, 1.0, 200}, 20000, 12,
                              KernelSpec::zero(1), {.threads = 1});
    const auto mc = mc_forward_numerator(ens, pm);
    CHECK(std::abs(mc.mean - fv.numerator.value) < 3.0 * mc.std_error);
  }

  TEST_CASE("value function identity across pricing paths") {
    const FactorModel vas{test::vasicek()};
    for (double T : {0.5, 1.0, 3.0}) {
      const auto r = bond_price(vas, 0.0, T, scalar(0.05));
      CHECK(std::abs(r.value_function + std::log(r.value)) <= 1e-12);
    }
    const auto ens = simulate(vas, scalar(0.05), TimeGrid{0.0, 1.0, 50}, 500, 3, KernelSpec::zero(1),
                              {.threads = 1});
    const auto mc = PriceResult::make(mc_bond_price(ens).mean, 0, 1, PriceMethod::monte_carlo);
    CHECK(std::abs(mc.value_function + std::log(mc.value)) <= 1e-12);
  }

  TEST_CASE("CIR bond prices are nonincreasing in maturity") {
    const FactorModel c{test::cir(0.2)};
    std::vector<double> Ts;
    for (int i = 1; i <= 40; ++i) Ts.push_back(0.25 * i);
    const auto ts = term_structure(c, 0.0, Ts, scalar(0.05));
    REQUIRE(ts.size() == Ts.size());
    for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i].price <= ts[i - 1].price);
  }

  TEST_CASE("term structure agrees with direct pricing") {
    const FactorModel vas{test::vasicek()};
    const std::vector<double> Ts{0.5, 1.0, 2.0};
    const auto ts = term_structure(vas, 0.0, Ts, scalar(0.05), 400);
    for (std::size_t i = 0; i < Ts.size(); ++i) {
      CHECK(std::abs(ts[i].price - test::vasicek_bond(1.0, 0.05, 0.1, 0.05, Ts[i])) < 1e-9);
      CHECK(ts[i].yield == doctest::Approx(-std::log(ts[i].price) / Ts[i]).epsilon(1e-14));
      CHECK(ts[i].value_function == doctest::Approx(-std::log(ts[i].price)).epsilon(1e-14));
    }
    std::ostringstream os;
    write_term_structure_csv(os, ts);
    CHECK(os.str().rfind("T,P,V,yield\n", 0) == 0);
  }
}
