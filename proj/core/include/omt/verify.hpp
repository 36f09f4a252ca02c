#pragma once

#include <string>
#include <vector>

#include "omt/kernel.hpp"
#include "omt/linalg.hpp"
#include "omt/model.hpp"
#include "omt/riccati.hpp"
#include "omt/simulate.hpp"

namespace omt {

/// Relative entropy H = E_Q[integral of the entropy density] under the
/// kernel-tilted measure. Diffusion part is 1/2 |u|^2 per unit time.
[[nodiscard]] McEstimate entropy_estimate(const FactorModel& model, const Vector& x0,
                                          const KernelSpec& kernel, const TimeGrid& grid,
                                          int n_paths, std::uint64_t seed, unsigned threads = 0);

/// J(u) = E_Q[integral of r] + H from one ensemble.
[[nodiscard]] McEstimate omt_objective(const FactorModel& model, const Vector& x0,
                                       const KernelSpec& kernel, const TimeGrid& grid, int n_paths,
                                       std::uint64_t seed, unsigned threads = 0);

struct DualityRow {
  std::string kernel;
  bool is_optimal = false;
  McEstimate objective;  // J(u)
  McEstimate entropy;    // H(Q^u | P)
  double gap = 0.0;      // J(u) - V
  double gap_se = 0.0;
  // J(u) - J(optimal) with common random numbers; zero when no optimal kernel was given
  McEstimate vs_optimal;
  bool lower_bound_ok = true;   // gap >= -3 se
  bool entropy_ok = true;       // H >= -4 se
  bool attained_ok = true;      // |gap| <= 3 se, optimal kernel only
  bool not_beaten_ok = true;    // J(u) - J(opt) >= -3 joint se
};

struct DualityReport {
  double value_closed_form = 0.0;
  std::vector<DualityRow> rows;

  [[nodiscard]] bool passed() const;
};

/// Runs every kernel on the same seed so the rows share random numbers.
[[nodiscard]] DualityReport duality_check(const FactorModel& model, const Vector& x0,
                                          const std::vector<KernelSpec>& kernels,
                                          const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                          unsigned threads = 0);

/// Per-path log discrepancy between e^{-int r}/P and the exponential density
/// built from the optimal kernel.
struct DensityReport {
  double dt = 0.0;
  int steps = 0;
  double mean_abs = 0.0;
  double median_abs = 0.0;
  double max_abs = 0.0;
};

[[nodiscard]] DensityReport density_identity_check(const FactorModel& model, const Vector& x0,
                                                   const TimeGrid& grid, int n_paths,
                                                   std::uint64_t seed, unsigned threads = 0);

struct ResidualLevel {
  double dt = 0.0;
  int steps = 0;
  double mean_abs_residual = 0.0;  // mean over paths of |sum of step residuals|
  double max_abs_residual = 0.0;
  double mean_abs_step_residual = 0.0;
  double terminal_mismatch = 0.0;  // max |Y_T - terminal value|
};

struct ResidualReport {
  std::vector<ResidualLevel> levels;
  std::vector<double> ratios;  // mean_abs_residual[i] / mean_abs_residual[i+1]

  [[nodiscard]] bool monotone() const;
};

/// Discretized BSDE residual along simulated P-paths with Y, Z (and G) from
/// the explicit solution, on `grid` and `halvings` successively halved steps.
/// The terminal defaults to the zero-coupon bond.
[[nodiscard]] ResidualReport fbsde_residual_check(const FactorModel& model, const Vector& x0,
                                                  const TimeGrid& grid, int n_paths,
                                                  std::uint64_t seed, int halvings = 2,
                                                  unsigned threads = 0);
[[nodiscard]] ResidualReport fbsde_residual_check(const FactorModel& model, const Vector& x0,
                                                  const TimeGrid& grid,
                                                  const TerminalCondition& terminal, int n_paths,
                                                  std::uint64_t seed, int halvings = 2,
                                                  unsigned threads = 0);

struct OscReport {
  int nodes = 0;
  int states = 0;
  double max_kernel_diff = 0.0;  // max |u*(s, x) - Z(s, x)|
  double max_value_diff = 0.0;   // max |W(s, x) - V(s, x)|

  [[nodiscard]] bool passed(double tol = 1e-8) const {
    return max_kernel_diff <= tol && max_value_diff <= tol;
  }
};

[[nodiscard]] OscReport osc_equivalence_check(const QuadraticModelSpec& spec, const TimeGrid& grid,
                                              const std::vector<Vector>& states);

struct JumpReductionReport {
  bool removable = false;  // the jump block cannot move the coefficients
  double max_coefficient_diff = 0.0;

  [[nodiscard]] bool passed(double tol = 1e-10) const { return max_coefficient_diff <= tol; }
};

[[nodiscard]] JumpReductionReport jump_reduction_check(const FactorModel& model,
                                                       const TimeGrid& grid);

}  // namespace omt
