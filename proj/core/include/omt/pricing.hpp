#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "omt/linalg.hpp"
#include "omt/model.hpp"
#include "omt/riccati.hpp"

namespace omt {

enum class PriceMethod { closed_form, monte_carlo, decomposition };

/// A price together with its optimal-measure value function V = -ln(value).
struct PriceResult {
  double value = 1.0;
  double value_function = 0.0;
  double t = 0.0;
  double T = 0.0;
  PriceMethod method = PriceMethod::closed_form;

  static PriceResult make(double value, double t, double T, PriceMethod method);
};

/// -ln(value); throws InvalidArgument when value <= 0.
[[nodiscard]] double value_function(const PriceResult& result);

/// Zero-coupon bond P(t, T) = exp(U_t x + p_t) (or the quadratic form).
/// `steps` = 0 selects the default resolution.
[[nodiscard]] PriceResult bond_price(const FactorModel& model, double t, double T,
                                     const Vector& x, int steps = 0);

/// Futures price G(t, T) = E[S(T, X_T) | X_t = x].
[[nodiscard]] PriceResult futures_price(const FactorModel& model, const PriceModelSpec& pm,
                                        double t, double T, const Vector& x, int steps = 0);

/// Forward price split into the discounted payoff N = F P and the bond P.
struct ForwardPriceResult {
  double forward = 1.0;  // F(t, T) = N / P
  PriceResult numerator;  // value N, value_function V^F = -ln N
  PriceResult bond;
};

[[nodiscard]] ForwardPriceResult forward_price(const FactorModel& model, const PriceModelSpec& pm,
                                               double t, double T, const Vector& x, int steps = 0);

struct TermStructurePoint {
  double T;
  double price;
  double value_function;
  double yield;
};

/// Bond prices for several maturities from a single backward solve on
/// [t, max(maturities)]. Intermediate maturities read the coefficients at
/// time-to-maturity tau by linear interpolation.
[[nodiscard]] std::vector<TermStructurePoint> term_structure(const FactorModel& model, double t,
                                                             const std::vector<double>& maturities,
                                                             const Vector& x, int steps = 0);

/// CSV columns T, P, V, yield.
void write_term_structure_csv(std::ostream& os, const std::vector<TermStructurePoint>& points);

}  // namespace omt
