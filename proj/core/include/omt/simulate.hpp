#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "omt/kernel.hpp"
#include "omt/linalg.hpp"
#include "omt/model.hpp"
#include "omt/riccati.hpp"

namespace omt {

enum class MeasureTag { P, Q_u };

struct JumpMark {
  int step = 0;  // jump happens during [s_step, s_step+1)
  int atom = 0;
};

struct SimulationOptions {
  bool store_paths = false;       // keep X at every node
  bool store_increments = false;  // keep the P-Brownian increments of every step
  unsigned threads = 0;           // 0 = hardware concurrency
};

/// Simulated factor paths with the per-path bookkeeping the pricing and
/// verification code needs. Flat arrays are path-major.
struct PathEnsemble {
  std::uint64_t seed = 0;
  TimeGrid grid;
  int n_paths = 0;
  int dim = 0;
  MeasureTag measure_tag = MeasureTag::P;
  Vector x0;

  std::vector<double> terminal_states;    // n_paths * dim
  std::vector<double> states;             // n_paths * (steps + 1) * dim, optional
  std::vector<double> increments;         // n_paths * steps * dim, optional
  std::vector<double> rate_integrals;     // left-point sum of r(X) dt
  std::vector<double> log_rn_weights;     // ln dQ^u/dP along the path
  std::vector<double> entropy_integrals;  // integrated relative-entropy density
  std::vector<std::vector<JumpMark>> jump_marks;

  [[nodiscard]] bool has_paths() const { return !states.empty(); }
  [[nodiscard]] bool has_increments() const { return !increments.empty(); }
  [[nodiscard]] Eigen::Map<const Vector> terminal(int path) const;
  [[nodiscard]] Eigen::Map<const Vector> state(int path, int node) const;
  [[nodiscard]] Eigen::Map<const Vector> increment(int path, int step) const;
};

/// Monte Carlo mean with standard error and a 95% normal interval.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  static McEstimate from_samples(std::span<const double> samples);
};

/// Euler-Maruyama with full truncation of square-root diffusions. A non-zero
/// kernel tilts the drift by g(s, X) u(s, X)' and, when it carries a jump
/// kernel, reweights the jump atoms by exp(G(s, z)). Bit-identical output
/// for identical inputs, independent of `options.threads`.
[[nodiscard]] PathEnsemble simulate(const FactorModel& model, const Vector& x0,
                                    const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                    const KernelSpec& kernel, const SimulationOptions& options = {});

[[nodiscard]] McEstimate mc_bond_price(const PathEnsemble& ensemble);
[[nodiscard]] McEstimate mc_futures_price(const PathEnsemble& ensemble, const PriceModelSpec& pm);
[[nodiscard]] McEstimate mc_forward_numerator(const PathEnsemble& ensemble,
                                              const PriceModelSpec& pm);

struct ReweightResult {
  McEstimate under_p;  // mean(payoff * exp(-log_rn_weight))
  McEstimate under_q;  // mean(payoff)
};

[[nodiscard]] ReweightResult reweight(const PathEnsemble& ensemble, std::span<const double> payoff);

/// Per-path discount factors exp(-rate_integral).
[[nodiscard]] std::vector<double> discount_factors(const PathEnsemble& ensemble);

/// Little-endian dump. Header: magic "OMTE", u32 version, u64 seed, f64 t0,
/// f64 T, i32 steps, i32 n_paths, i32 dim, u8 measure_tag, u8 has_paths,
/// u8 has_increments, u8 pad, dim x f64 x0. Then per path: rate_integral,
/// log_rn_weight, entropy_integral, terminal state (dim), stored path nodes
/// (when present), stored increments (when present), u32 jump count and
/// (i32 step, i32 atom) per jump.
void write_ensemble_binary(std::ostream& os, const PathEnsemble& ensemble);
[[nodiscard]] PathEnsemble read_ensemble_binary(std::istream& is);

/// CSV with columns estimate, mean, std_error, n, ci_lo, ci_hi.
void write_estimates_csv(std::ostream& os,
                         const std::vector<std::pair<std::string, McEstimate>>& rows);

}  // namespace omt
