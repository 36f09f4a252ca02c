#pragma once

#include <iosfwd>
#include <variant>
#include <vector>

#include "omt/linalg.hpp"
#include "omt/model.hpp"

namespace omt {

/// Uniform grid t0 = s_0 < s_1 < ... < s_steps = T.
struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int steps = 1;

  [[nodiscard]] double dt() const { return (T - t0) / steps; }
  [[nodiscard]] double node(int i) const { return i == steps ? T : t0 + i * dt(); }
  /// Throws InvalidArgument unless T > t0 and steps >= 1.
  void validate() const;
  /// Grid with the default resolution of 200 steps per unit time (rounded up).
  static TimeGrid with_default_steps(double t0, double T);
};

[[nodiscard]] int default_steps(double t0, double T);

struct AffineTerminal {
  Vector U;
  double p = 0.0;
};

struct QuadraticTerminal {
  Matrix q;
  Vector u;
  double p = 0.0;
};

/// Terminal data of the backward system. Zero terminals price the bond;
/// nonzero ones encode ln S(T, x) for futures and forwards.
struct TerminalCondition {
  std::variant<AffineTerminal, QuadraticTerminal> value;
  bool include_rate = true;

  static TerminalCondition zero_affine(int n, bool include_rate = true);
  static TerminalCondition zero_quadratic(int n, bool include_rate = true);
  /// Terminal matching ln S(T, x) of `pm` for a model of kind `affine`.
  static TerminalCondition from_payoff(const PriceModelSpec& pm, int n, bool affine,
                                       bool include_rate);
};

enum class SolutionKind { affine, quadratic };

/// Coefficient functions on a time grid. The log-price is
///   U_s x + p_s            (affine)
///   x'q_s x + u_s x + p_s  (quadratic)
/// and values between nodes are linearly interpolated.
struct RiccatiSolution {
  TimeGrid grid;
  SolutionKind kind = SolutionKind::affine;
  int n = 0;
  std::vector<Vector> U;  // affine
  std::vector<Matrix> q;  // quadratic
  std::vector<Vector> u;  // quadratic
  std::vector<double> p;

  [[nodiscard]] Vector U_at(double s) const;
  [[nodiscard]] Matrix q_at(double s) const;
  [[nodiscard]] Vector u_at(double s) const;
  [[nodiscard]] double p_at(double s) const;

  /// Log-price exponent at (s, x).
  [[nodiscard]] double exponent(double s, const Vector& x) const;
  /// Gradient of the exponent in x: U_s' or (q_s + q_s')x + u_s'.
  [[nodiscard]] Vector gradient(double s, const Vector& x) const;

  /// Flattened coefficients (U or q row-major then u) followed by p at node i.
  [[nodiscard]] Vector node_coefficients(int i) const;

  /// CSV with columns s, coefficient entries (row-major), p.
  void write_csv(std::ostream& os) const;

  // position of s on the grid: lower node index and interpolation weight
  void locate(double s, int& index, double& weight) const;
};

/// S diag(alpha + beta x) S' = k0 + sum_j k_j x_j.
struct KDecomposition {
  Matrix k0;
  std::vector<Matrix> k;
};

[[nodiscard]] KDecomposition k_decomposition(const AffineModelSpec& spec);

/// sum_i w_i (exp(U . z_i) - 1).
[[nodiscard]] double jump_transform_affine(const Vector& U, const DiscreteMeasure& measure);
/// sum_i w_i (exp(z_i' q z_i + u . z_i) - 1).
[[nodiscard]] double jump_transform_quadratic(const Matrix& q, const Vector& u,
                                              const DiscreteMeasure& measure);

/// Backward RK4 for the affine (jump-)Riccati system; p is carried in the
/// same RK4 state. Throws NonFinite on blow-up.
[[nodiscard]] RiccatiSolution solve_affine(const AffineModelSpec& spec, const TimeGrid& grid,
                                           const TerminalCondition& terminal);

/// Backward RK4 for the coupled (q, u, p) system with q symmetrized after
/// every step. Throws NonFinite or SymmetryLoss.
[[nodiscard]] RiccatiSolution solve_quadratic(const QuadraticModelSpec& spec,
                                              const TimeGrid& grid,
                                              const TerminalCondition& terminal);

/// Dispatches on the model kind. Zero terminal with include_rate = true
/// unless a terminal is given.
[[nodiscard]] RiccatiSolution solve_model(const FactorModel& model, const TimeGrid& grid);
[[nodiscard]] RiccatiSolution solve_model(const FactorModel& model, const TimeGrid& grid,
                                          const TerminalCondition& terminal);

/// Value function W = x'q x + v x + p of the LQG control problem and its
/// optimal feedback law.
struct OscSolution {
  TimeGrid grid;
  int n = 0;
  Matrix Sigma;
  std::vector<Matrix> q;
  std::vector<Vector> v;
  std::vector<double> p;

  [[nodiscard]] double value(double s, const Vector& x) const;
  /// u*(s, x) = -(x'(q_s + q_s') + v_s) Sigma, the minimizer of the HJB
  /// Hamiltonian; returned as a column holding the row's entries.
  [[nodiscard]] Vector feedback(double s, const Vector& x) const;
};

[[nodiscard]] OscSolution solve_osc_lqg(const QuadraticModelSpec& spec, const TimeGrid& grid);

}  // namespace omt
