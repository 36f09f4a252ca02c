#include "omt/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "omt/errors.hpp"

namespace omt {

KernelSpec KernelSpec::zero(int n) {
  KernelSpec k;
  k.kind_ = Kind::zero;
  k.n_ = n;
  k.label = "zero";
  return k;
}

KernelSpec KernelSpec::constant(Vector u) {
  KernelSpec k;
  k.kind_ = Kind::constant;
  k.n_ = static_cast<int>(u.size());
  k.c_ = std::move(u);
  k.label = "constant";
  return k;
}

KernelSpec KernelSpec::affine(Vector c, Matrix M) {
  if (M.rows() != c.size() || M.cols() != c.size()) {
    throw InvalidArgument("affine kernel: M must be n x n with n = len(c)");
  }
  KernelSpec k;
  k.kind_ = Kind::affine;
  k.n_ = static_cast<int>(c.size());
  k.c_ = std::move(c);
  k.M_ = std::move(M);
  k.label = "affine";
  return k;
}

KernelSpec KernelSpec::optimal(std::shared_ptr<const RiccatiSolution> solution,
                               FactorModel model) {
  if (!solution) throw InvalidArgument("optimal kernel needs a Riccati solution");
  const bool affine_model = is_affine(model);
  if (affine_model != (solution->kind == SolutionKind::affine)) {
    throw InvalidArgument("optimal kernel: solution and model kinds differ");
  }
  if (solution->n != dimension(model)) {
    throw InvalidArgument("optimal kernel: solution and model dimensions differ");
  }
  KernelSpec k;
  k.kind_ = Kind::optimal;
  k.n_ = solution->n;
  k.jump_kernel_ = has_jumps(model);
  k.solution_ = std::move(solution);
  k.model_ = std::make_shared<const FactorModel>(std::move(model));
  k.label = "optimal";
  return k;
}

void KernelSpec::eval(double s, const Vector& x, Vector& out) const {
  switch (kind_) {
    case Kind::zero:
      out.setZero(n_);
      return;
    case Kind::constant:
      out = c_;
      return;
    case Kind::affine:
      out.noalias() = M_ * x;
      out += c_;
      return;
    case Kind::optimal:
      break;
  }
  // Inline interpolation keeps the simulation inner loop allocation-free.
  int i;
  double w;
  solution_->locate(s, i, w);
  const int j = (w == 0.0) ? i : i + 1;
  out.resize(n_);
  if (const auto* a = std::get_if<AffineModelSpec>(model_.get())) {
    // Z = U_s S diag(sqrt(alpha_i + beta_i x))
    const Vector& U0 = solution_->U[i];
    const Vector& U1 = solution_->U[j];
    for (int c = 0; c < n_; ++c) {
      double us = 0.0;
      for (int r = 0; r < n_; ++r) us += ((1.0 - w) * U0(r) + w * U1(r)) * a->S(r, c);
      const double var = a->alpha(c) + a->beta.row(c).dot(x);
      out(c) = us * std::sqrt(std::max(var, 0.0));
    }
    return;
  }
  // Z = (x'(q + q') + u) Sigma
  const auto& qm = std::get<QuadraticModelSpec>(*model_);
  const Matrix& q0 = solution_->q[i];
  const Matrix& q1 = solution_->q[j];
  const Vector& u0 = solution_->u[i];
  const Vector& u1 = solution_->u[j];
  for (int c = 0; c < n_; ++c) out(c) = 0.0;
  for (int r = 0; r < n_; ++r) {
    double g = (1.0 - w) * u0(r) + w * u1(r);
    for (int m = 0; m < n_; ++m) {
      g += ((1.0 - w) * (q0(r, m) + q0(m, r)) + w * (q1(r, m) + q1(m, r))) * x(m);
    }
    for (int c = 0; c < n_; ++c) out(c) += g * qm.Sigma(r, c);
  }
}

Vector KernelSpec::eval(double s, const Vector& x) const {
  Vector out(n_);
  eval(s, x, out);
  return out;
}

double KernelSpec::jump_kernel(double s, const Vector& z) const {
  if (!jump_kernel_) return 0.0;
  if (solution_->kind == SolutionKind::affine) return solution_->U_at(s).dot(z);
  return z.dot(solution_->q_at(s) * z) + solution_->u_at(s).dot(z);
}

KernelSpec optimal_kernel(std::shared_ptr<const RiccatiSolution> sol, const FactorModel& model) {
  return KernelSpec::optimal(std::move(sol), model);
}

}  // namespace omt
