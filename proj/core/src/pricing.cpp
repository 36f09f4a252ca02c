#include "omt/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "omt/csv.hpp"
#include "omt/errors.hpp"

namespace omt {

namespace {

TimeGrid pricing_grid(double t, double T, int steps) {
  return steps > 0 ? TimeGrid{t, T, steps} : TimeGrid::with_default_steps(t, T);
}

void check_horizon(double t, double T) {
  if (!(T >= t)) throw InvalidArgument("pricing requires T >= t");
}

void check_no_jumps(const FactorModel& model, const char* what) {
  if (has_jumps(model)) {
    throw UnsupportedCombination(std::string(what) + " is defined for jump-free factor models");
  }
}

}  // namespace

PriceResult PriceResult::make(double value, double t, double T, PriceMethod method) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw NonFinite("price must be finite and strictly positive");
  }
  return PriceResult{value, -std::log(value), t, T, method};
}

double value_function(const PriceResult& result) {
  if (!(result.value > 0.0)) throw InvalidArgument("value function needs a positive price");
  return -std::log(result.value);
}

PriceResult bond_price(const FactorModel& model, double t, double T, const Vector& x, int steps) {
  check_horizon(t, T);
  if (x.size() != dimension(model)) throw InvalidArgument("bond_price: state has wrong dimension");
  if (T == t) return PriceResult::make(1.0, t, T, PriceMethod::closed_form);
  const RiccatiSolution sol = solve_model(model, pricing_grid(t, T, steps));
  return PriceResult::make(std::exp(sol.exponent(t, x)), t, T, PriceMethod::closed_form);
}

PriceResult futures_price(const FactorModel& model, const PriceModelSpec& pm, double t, double T,
                          const Vector& x, int steps) {
  check_horizon(t, T);
  check_no_jumps(model, "futures_price");
  const int n = dimension(model);
  if (x.size() != n) throw InvalidArgument("futures_price: state has wrong dimension");
  const TerminalCondition terminal =
      TerminalCondition::from_payoff(pm, n, is_affine(model), /*include_rate=*/false);
  if (T == t) return PriceResult::make(pm.payoff(x), t, T, PriceMethod::closed_form);
  const RiccatiSolution sol = solve_model(model, pricing_grid(t, T, steps), terminal);
  return PriceResult::make(std::exp(sol.exponent(t, x)), t, T, PriceMethod::closed_form);
}

ForwardPriceResult forward_price(const FactorModel& model, const PriceModelSpec& pm, double t,
                                 double T, const Vector& x, int steps) {
  check_horizon(t, T);
  check_no_jumps(model, "forward_price");
  const int n = dimension(model);
  if (x.size() != n) throw InvalidArgument("forward_price: state has wrong dimension");
  const TerminalCondition terminal =
      TerminalCondition::from_payoff(pm, n, is_affine(model), /*include_rate=*/true);
  ForwardPriceResult out;
  if (T == t) {
    out.numerator = PriceResult::make(pm.payoff(x), t, T, PriceMethod::closed_form);
    out.bond = PriceResult::make(1.0, t, T, PriceMethod::closed_form);
  } else {
    const TimeGrid grid = pricing_grid(t, T, steps);
    const RiccatiSolution num = solve_model(model, grid, terminal);
    out.numerator = PriceResult::make(std::exp(num.exponent(t, x)), t, T, PriceMethod::closed_form);
    out.bond = bond_price(model, t, T, x, grid.steps);
  }
  out.forward = out.numerator.value / out.bond.value;
  return out;
}

std::vector<TermStructurePoint> term_structure(const FactorModel& model, double t,
                                               const std::vector<double>& maturities,
                                               const Vector& x, int steps) {
  std::vector<TermStructurePoint> out;
  if (maturities.empty()) return out;
  const double T_max = *std::max_element(maturities.begin(), maturities.end());
  for (double T : maturities) check_horizon(t, T);
  if (T_max == t) {
    for (double T : maturities) out.push_back({T, 1.0, 0.0, 0.0});
    return out;
  }
  const RiccatiSolution sol = solve_model(model, pricing_grid(t, T_max, steps));
  for (double T : maturities) {
    // The system is autonomous: coefficients for maturity T at time t equal
    // those for maturity T_max at time T_max - (T - t).
    const PriceResult r =
        T == t ? PriceResult::make(1.0, t, T, PriceMethod::closed_form)
               : PriceResult::make(std::exp(sol.exponent(T_max - (T - t), x)), t, T,
                                   PriceMethod::closed_form);
    const double yield = T > t ? r.value_function / (T - t) : 0.0;
    out.push_back({T, r.value, r.value_function, yield});
  }
  return out;
}

void write_term_structure_csv(std::ostream& os, const std::vector<TermStructurePoint>& points) {
  csv::write_header(os, {"T", "P", "V", "yield"});
  for (const auto& pt : points) {
    const double row[] = {pt.T, pt.price, pt.value_function, pt.yield};
    csv::write_row(os, row);
  }
}

}  // namespace omt
