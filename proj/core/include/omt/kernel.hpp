#pragma once

#include <memory>
#include <string>
#include <variant>

#include "omt/linalg.hpp"
#include "omt/model.hpp"
#include "omt/riccati.hpp"

namespace omt {

/// A Girsanov kernel u(s, x) (1 x n row, stored as a column) together with an
/// optional jump kernel G(s, z) for measure changes with jumps.
class KernelSpec {
 public:
  enum class Kind { zero, constant, affine, optimal };

  static KernelSpec zero(int n);
  static KernelSpec constant(Vector u);
  /// u(s, x) = c + M x.
  static KernelSpec affine(Vector c, Matrix M);
  /// Z(s, x) from the explicit FBSDE solution; adds G(s, z) when the model jumps.
  static KernelSpec optimal(std::shared_ptr<const RiccatiSolution> solution, FactorModel model);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] int dim() const { return n_; }
  [[nodiscard]] bool is_zero() const { return kind_ == Kind::zero; }
  [[nodiscard]] bool has_jump_kernel() const { return jump_kernel_; }

  /// Writes u(s, x) into `out` (size n).
  void eval(double s, const Vector& x, Vector& out) const;
  [[nodiscard]] Vector eval(double s, const Vector& x) const;
  /// G(s, z); zero when there is no jump kernel.
  [[nodiscard]] double jump_kernel(double s, const Vector& z) const;

  [[nodiscard]] const RiccatiSolution* solution() const { return solution_.get(); }

  std::string label;

 private:
  Kind kind_ = Kind::zero;
  int n_ = 0;
  Vector c_;
  Matrix M_;
  std::shared_ptr<const RiccatiSolution> solution_;
  std::shared_ptr<const FactorModel> model_;
  bool jump_kernel_ = false;
};

/// Optimal kernel for the bond/futures/forward measure encoded by `sol`.
[[nodiscard]] KernelSpec optimal_kernel(std::shared_ptr<const RiccatiSolution> sol,
                                        const FactorModel& model);

}  // namespace omt
