#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "omt/linalg.hpp"
#include "omt/model.hpp"
#include "omt/riccati.hpp"
#include "omt/simulate.hpp"

namespace omt {

struct DefaultOutcome {
  std::optional<double> tau;  // default time when it happens before T
  bool defaulted = false;
  double payoff = 1.0;  // C_T
};

/// Cox default times: tau is where the integral of max(lambda_d(X), 0),
/// piecewise constant on the grid, first reaches an independent Exp(1)
/// threshold. Needs an ensemble simulated under P with stored paths. The
/// model is only used for the pre-default recovery, which needs P(tau-, T).
[[nodiscard]] std::vector<DefaultOutcome> sample_default(const PathEnsemble& ensemble,
                                                         const FactorModel& model,
                                                         const CreditSpec& credit,
                                                         std::uint64_t seed2);

struct DefaultablePrice {
  McEstimate estimate;          // D(t, T)
  double value_function = 0.0;  // -ln D
};

/// Mean of exp(-int r) C_T on the ensemble's paths.
[[nodiscard]] DefaultablePrice mc_defaultable_price(const PathEnsemble& ensemble,
                                                    const std::vector<DefaultOutcome>& outcomes);

enum class PBsdeMethod { plain_mc, lsmc };

/// Regression of E[1/C_T | X_s, survival] on {1, x_j, x_j x_k, 1{tau > s}}.
struct LsmcNode {
  double s = 0.0;
  int node = 0;
  Vector coefficients;
  double r2 = 0.0;
  double integral_c = 0.0;  // integral of c from s to T
};

struct PBsdeSolution {
  double p_t = 0.0;        // -ln p_tilde
  double p_tilde = 1.0;    // e^{int c} E[1/C_T]
  double integral_c = 0.0; // deterministic part, integral of c over [t, T]
  McEstimate inverse_payoff;  // E[1/C_T]
  PBsdeMethod method = PBsdeMethod::plain_mc;
  double r2 = 0.0;  // mean R^2 over regression nodes (lsmc only)
  std::vector<LsmcNode> surfaces;

  /// p_s(x) from an lsmc surface, for a surviving or defaulted state.
  [[nodiscard]] double surface_value(std::size_t index, const Vector& x, bool survived) const;
};

/// Basis used by the lsmc regression.
[[nodiscard]] Vector lsmc_basis(const Vector& x, bool survived);

/// Cole-Hopf solution of the (p, z)-BSDE: p_tilde = e^{int c} E[1/C_T] with c
/// the deterministic driver of the default-free p-equation. Throws
/// SingularTerminal if a sampled C_T <= 0.
[[nodiscard]] PBsdeSolution solve_p_bsde(const FactorModel& model, const CreditSpec& credit,
                                         const Vector& x0, const TimeGrid& grid, int n_paths,
                                         std::uint64_t seed, PBsdeMethod method,
                                         unsigned threads = 0, int lsmc_stride = 0);

/// Same as above on already simulated paths and outcomes.
[[nodiscard]] PBsdeSolution solve_p_bsde(const FactorModel& model, const PathEnsemble& ensemble,
                                         const std::vector<DefaultOutcome>& outcomes,
                                         PBsdeMethod method, int lsmc_stride = 0);

struct DecompositionReport {
  McEstimate d_mc;             // direct estimate, the reference value
  double d_decomp = 0.0;       // exp(U_t x) / p_tilde (quadratic: exp(x'q x + u x) / p_tilde)
  double d_decomp_se = 0.0;    // delta-method standard error
  double joint_se = 0.0;       // standard error of d_mc - d_decomp on common paths
  double discrepancy = 0.0;    // d_mc - d_decomp
  double bond = 0.0;           // default-free P(t, T)
  PBsdeSolution p_bsde;
};

/// Diagnostic comparison of the direct price and the decomposition. It does
/// not assert equality.
[[nodiscard]] DecompositionReport decomposition_check(const FactorModel& model,
                                                      const CreditSpec& credit, const Vector& x0,
                                                      const TimeGrid& grid, int n_paths,
                                                      std::uint64_t seed, unsigned threads = 0);

}  // namespace omt
