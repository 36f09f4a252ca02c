#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "omt/linalg.hpp"

namespace omt {

/// Finite jump measure nu(dz) = sum_i w_i delta_{z_i}.
struct DiscreteMeasure {
  std::vector<Vector> atoms;
  std::vector<double> weights;

  [[nodiscard]] double total_mass() const;
  [[nodiscard]] bool empty() const { return atoms.empty(); }
};

/// Jump block of an affine model: intensity L'x + l and jump-size measure.
struct JumpSpecAffine {
  Vector L;
  double l = 0.0;
  DiscreteMeasure measure;
};

/// dX = (AX + B)ds + S diag(sqrt(alpha_i + beta_i X)) dW [+ jumps], r = R'X + k.
struct AffineModelSpec {
  Matrix A;
  Vector B;
  Matrix S;
  Vector alpha;
  Matrix beta;  // row i is beta_i
  Vector R;
  double k = 0.0;
  std::optional<JumpSpecAffine> jump;

  [[nodiscard]] int dim() const { return static_cast<int>(B.size()); }
  [[nodiscard]] double short_rate(const Vector& x) const { return R.dot(x) + k; }
  /// Raw jump intensity L'x + l (zero when the model has no jump block).
  [[nodiscard]] double jump_intensity(const Vector& x) const;
  /// Writes S diag(sqrt(max(alpha_i + beta_i x, 0))) into `out`.
  void volatility(const Vector& x, Matrix& out) const;
};

struct JumpSpecQuadratic {
  Matrix L2;
  Vector L1;
  double l = 0.0;
  DiscreteMeasure measure;
};

/// dX = (AX + B)ds + Sigma dW [+ jumps], r = X'QX + R'X + k.
struct QuadraticModelSpec {
  Matrix A;
  Vector B;
  Matrix Sigma;
  Matrix Q;
  Vector R;
  double k = 0.0;
  std::optional<JumpSpecQuadratic> jump;

  [[nodiscard]] int dim() const { return static_cast<int>(B.size()); }
  [[nodiscard]] double short_rate(const Vector& x) const { return x.dot(Q * x) + R.dot(x) + k; }
  [[nodiscard]] double jump_intensity(const Vector& x) const;
};

using FactorModel = std::variant<AffineModelSpec, QuadraticModelSpec>;

[[nodiscard]] int dimension(const FactorModel& model);
[[nodiscard]] double short_rate(const FactorModel& model, const Vector& x);
[[nodiscard]] double jump_intensity(const FactorModel& model, const Vector& x);
[[nodiscard]] const DiscreteMeasure* jump_measure(const FactorModel& model);
[[nodiscard]] bool has_jumps(const FactorModel& model);
/// Same model with the jump block removed.
[[nodiscard]] FactorModel without_jumps(const FactorModel& model);
[[nodiscard]] bool is_affine(const FactorModel& model);

enum class PriceModelKind { APM, QPM };

/// ln S(T, x) = x'B_T x + A_T'x + h_T.
struct PriceModelSpec {
  PriceModelKind kind = PriceModelKind::APM;
  Matrix B_T;
  Vector A_T;
  double h_T = 0.0;

  [[nodiscard]] double log_payoff(const Vector& x) const;
  [[nodiscard]] double payoff(const Vector& x) const;
};

enum class RecoveryScheme { FractionalFace, FractionalPreDefault };

/// Reduced-form default: intensity Lambda'x + lambda0, recovery fraction eta.
struct CreditSpec {
  Vector Lambda;
  double lambda0 = 0.0;
  RecoveryScheme recovery = RecoveryScheme::FractionalFace;
  double eta = 1.0;

  [[nodiscard]] double intensity(const Vector& x) const { return Lambda.dot(x) + lambda0; }
};

struct ValidationIssue {
  std::string check;
  std::string message;
  std::vector<int> indices;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  [[nodiscard]] bool ok() const { return issues.empty(); }
  [[nodiscard]] bool failed(const std::string& check) const;
  [[nodiscard]] std::string summary() const;
};

[[nodiscard]] ValidationReport validate_affine(const AffineModelSpec& spec, const Vector& x0);
[[nodiscard]] ValidationReport validate_quadratic(const QuadraticModelSpec& spec);
[[nodiscard]] ValidationReport validate_price_model(const PriceModelSpec& pm, int n);
[[nodiscard]] ValidationReport validate_credit(const CreditSpec& credit, int n);

}  // namespace omt
