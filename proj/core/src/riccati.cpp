#include "omt/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "omt/csv.hpp"
#include "omt/errors.hpp"

namespace omt {

namespace {

constexpr double kSymmetryAssertTol = 1e-10;

// Classical RK4 in reversed time tau = T - s, from the terminal state at
// s = T down to s = t0. `post` may adjust the state after every step.
template <class Rhs, class Post>
std::vector<Vector> integrate_backward(const TimeGrid& grid, const Vector& terminal, Rhs&& rhs,
                                       Post&& post, const char* what) {
  grid.validate();
  std::vector<Vector> nodes(grid.steps + 1);
  Vector y = terminal;
  nodes[grid.steps] = y;
  const double h = grid.dt();
  for (int i = grid.steps; i > 0; --i) {
    const Vector k1 = rhs(y);
    const Vector k2 = rhs(y + 0.5 * h * k1);
    const Vector k3 = rhs(y + 0.5 * h * k2);
    const Vector k4 = rhs(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      std::ostringstream os;
      os << what << ": non-finite coefficients at s = " << grid.node(i - 1)
         << " (Riccati solution blows up before T = " << grid.T << ")";
      throw NonFinite(os.str());
    }
    post(y, i - 1);
    nodes[i - 1] = y;
  }
  return nodes;
}

double indicator(bool b) { return b ? 1.0 : 0.0; }

void require_dims(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

// Symmetrizes the leading n*n block (column-major q) in place and returns
// the asymmetry that was removed.
double symmetrize_block(Vector& y, int n) {
  Eigen::Map<Matrix> q(y.data(), n, n);
  const double asym = (q - q.transpose()).cwiseAbs().maxCoeff();
  const Matrix sym = 0.5 * (q + q.transpose());
  q = sym;
  return asym;
}

}  // namespace

void TimeGrid::validate() const {
  if (!(T > t0)) throw InvalidArgument("TimeGrid requires T > t0");
  if (steps < 1) throw InvalidArgument("TimeGrid requires steps >= 1");
}

int default_steps(double t0, double T) {
  return std::max(1, static_cast<int>(std::ceil(200.0 * (T - t0) - 1e-9)));
}

TimeGrid TimeGrid::with_default_steps(double t0, double T) {
  return TimeGrid{t0, T, default_steps(t0, T)};
}

TerminalCondition TerminalCondition::zero_affine(int n, bool include_rate) {
  return {AffineTerminal{Vector::Zero(n), 0.0}, include_rate};
}

TerminalCondition TerminalCondition::zero_quadratic(int n, bool include_rate) {
  return {QuadraticTerminal{Matrix::Zero(n, n), Vector::Zero(n), 0.0}, include_rate};
}

TerminalCondition TerminalCondition::from_payoff(const PriceModelSpec& pm, int n, bool affine,
                                                 bool include_rate) {
  if (pm.A_T.size() != n) throw InvalidArgument("price model A_T has wrong dimension");
  const bool quadratic_payoff = pm.kind == PriceModelKind::QPM && pm.B_T.size() != 0 &&
                                !pm.B_T.isZero(0.0);
  if (affine) {
    if (quadratic_payoff) {
      throw UnsupportedCombination(
          "quadratic price model has no exponential-affine closed form under an affine factor "
          "model");
    }
    return {AffineTerminal{pm.A_T, pm.h_T}, include_rate};
  }
  Matrix q = Matrix::Zero(n, n);
  if (pm.kind == PriceModelKind::QPM && pm.B_T.size() != 0) {
    if (pm.B_T.rows() != n || pm.B_T.cols() != n) {
      throw InvalidArgument("price model B_T has wrong dimension");
    }
    q = pm.B_T;
  }
  return {QuadraticTerminal{q, pm.A_T, pm.h_T}, include_rate};
}

void RiccatiSolution::locate(double s, int& index, double& weight) const {
  const double f = (s - grid.t0) / grid.dt();
  if (f <= 0.0) {
    index = 0;
    weight = 0.0;
    return;
  }
  if (f >= grid.steps) {
    index = grid.steps - 1;
    weight = 1.0;
    return;
  }
  index = std::min(static_cast<int>(f), grid.steps - 1);
  weight = f - index;
}

Vector RiccatiSolution::U_at(double s) const {
  int i;
  double w;
  locate(s, i, w);
  if (w == 0.0) return U[i];
  return (1.0 - w) * U[i] + w * U[i + 1];
}

Matrix RiccatiSolution::q_at(double s) const {
  int i;
  double w;
  locate(s, i, w);
  if (w == 0.0) return q[i];
  return (1.0 - w) * q[i] + w * q[i + 1];
}

Vector RiccatiSolution::u_at(double s) const {
  int i;
  double w;
  locate(s, i, w);
  if (w == 0.0) return u[i];
  return (1.0 - w) * u[i] + w * u[i + 1];
}

double RiccatiSolution::p_at(double s) const {
  int i;
  double w;
  locate(s, i, w);
  if (w == 0.0) return p[i];
  return (1.0 - w) * p[i] + w * p[i + 1];
}

double RiccatiSolution::exponent(double s, const Vector& x) const {
  if (kind == SolutionKind::affine) return U_at(s).dot(x) + p_at(s);
  return x.dot(q_at(s) * x) + u_at(s).dot(x) + p_at(s);
}

Vector RiccatiSolution::gradient(double s, const Vector& x) const {
  if (kind == SolutionKind::affine) return U_at(s);
  const Matrix qs = q_at(s);
  return (qs + qs.transpose()) * x + u_at(s);
}

Vector RiccatiSolution::node_coefficients(int i) const {
  if (kind == SolutionKind::affine) {
    Vector out(n + 1);
    out.head(n) = U[i];
    out(n) = p[i];
    return out;
  }
  Vector out(n * n + n + 1);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out(r * n + c) = q[i](r, c);
  }
  out.segment(n * n, n) = u[i];
  out(n * n + n) = p[i];
  return out;
}

void RiccatiSolution::write_csv(std::ostream& os) const {
  std::vector<std::string> cols{"s"};
  if (kind == SolutionKind::affine) {
    for (int j = 0; j < n; ++j) cols.push_back("U" + std::to_string(j));
  } else {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) cols.push_back("q" + std::to_string(r) + std::to_string(c));
    }
    for (int j = 0; j < n; ++j) cols.push_back("u" + std::to_string(j));
  }
  cols.push_back("p");
  csv::write_header(os, cols);
  std::vector<double> row;
  for (int i = 0; i <= grid.steps; ++i) {
    const Vector c = node_coefficients(i);
    row.assign(1, grid.node(i));
    row.insert(row.end(), c.data(), c.data() + c.size());
    csv::write_row(os, row);
  }
}

KDecomposition k_decomposition(const AffineModelSpec& spec) {
  const int n = spec.dim();
  KDecomposition out{Matrix::Zero(n, n), std::vector<Matrix>(n, Matrix::Zero(n, n))};
  for (int i = 0; i < n; ++i) {
    const Matrix outer = spec.S.col(i) * spec.S.col(i).transpose();
    out.k0 += spec.alpha(i) * outer;
    for (int j = 0; j < n; ++j) out.k[j] += spec.beta(i, j) * outer;
  }
  return out;
}

double jump_transform_affine(const Vector& U, const DiscreteMeasure& measure) {
  double sum = 0.0;
  for (std::size_t i = 0; i < measure.atoms.size(); ++i) {
    sum += measure.weights[i] * std::expm1(U.dot(measure.atoms[i]));
  }
  return sum;
}

double jump_transform_quadratic(const Matrix& q, const Vector& u, const DiscreteMeasure& measure) {
  double sum = 0.0;
  for (std::size_t i = 0; i < measure.atoms.size(); ++i) {
    const Vector& z = measure.atoms[i];
    sum += measure.weights[i] * std::expm1(z.dot(q * z) + u.dot(z));
  }
  return sum;
}

RiccatiSolution solve_affine(const AffineModelSpec& spec, const TimeGrid& grid,
                             const TerminalCondition& terminal) {
  const int n = spec.dim();
  const auto* term = std::get_if<AffineTerminal>(&terminal.value);
  require_dims(term != nullptr, "solve_affine needs an affine terminal condition");
  require_dims(term->U.size() == n, "solve_affine: terminal U has wrong dimension");
  require_dims(spec.A.rows() == n && spec.A.cols() == n && spec.R.size() == n &&
                   spec.S.rows() == n && spec.beta.rows() == n && spec.alpha.size() == n,
               "solve_affine: model dimensions are inconsistent");

  const KDecomposition kd = k_decomposition(spec);
  const double rate_on = indicator(terminal.include_rate);
  const DiscreteMeasure* measure = spec.jump ? &spec.jump->measure : nullptr;

  auto rhs = [&](const Vector& y) {
    const auto U = y.head(n);
    Vector dy(n + 1);
    // dU/dtau = U A + 1/2 (U k_j U')_j + theta(U) L' - R'
    dy.head(n) = spec.A.transpose() * U - rate_on * spec.R;
    for (int j = 0; j < n; ++j) dy(j) += 0.5 * U.dot(kd.k[j] * U);
    double theta = 0.0;
    if (measure) {
      theta = jump_transform_affine(U, *measure);
      dy.head(n) += theta * spec.jump->L;
    }
    const double l = spec.jump ? spec.jump->l : 0.0;
    // dp/dtau = -(k - l theta - 1/2 U k0 U' - U B)
    dy(n) = -(rate_on * spec.k - l * theta - 0.5 * U.dot(kd.k0 * U) - U.dot(spec.B));
    return dy;
  };

  Vector y_T(n + 1);
  y_T.head(n) = term->U;
  y_T(n) = term->p;
  auto nodes = integrate_backward(grid, y_T, rhs, [](Vector&, int) {}, "solve_affine");

  RiccatiSolution sol;
  sol.grid = grid;
  sol.kind = SolutionKind::affine;
  sol.n = n;
  sol.U.reserve(nodes.size());
  sol.p.reserve(nodes.size());
  for (const auto& y : nodes) {
    sol.U.emplace_back(y.head(n));
    sol.p.push_back(y(n));
  }
  return sol;
}

RiccatiSolution solve_quadratic(const QuadraticModelSpec& spec, const TimeGrid& grid,
                                const TerminalCondition& terminal) {
  const int n = spec.dim();
  const auto* term = std::get_if<QuadraticTerminal>(&terminal.value);
  require_dims(term != nullptr, "solve_quadratic needs a quadratic terminal condition");
  require_dims(term->q.rows() == n && term->q.cols() == n && term->u.size() == n,
               "solve_quadratic: terminal has wrong dimension");
  require_dims(spec.A.rows() == n && spec.Sigma.rows() == n && spec.Q.rows() == n &&
                   spec.R.size() == n,
               "solve_quadratic: model dimensions are inconsistent");
  if ((term->q - term->q.transpose()).cwiseAbs().maxCoeff() > kSymmetryAssertTol) {
    throw SymmetryLoss("solve_quadratic: terminal q is not symmetric");
  }

  const Matrix ss = spec.Sigma * spec.Sigma.transpose();
  const double rate_on = indicator(terminal.include_rate);
  const DiscreteMeasure* measure = spec.jump ? &spec.jump->measure : nullptr;
  const int m = n * n;

  auto rhs = [&](const Vector& y) {
    const Eigen::Map<const Matrix> q(y.data(), n, n);
    const auto u = y.segment(m, n);
    const Matrix qs = q + q.transpose();
    Vector dy(m + n + 1);
    Eigen::Map<Matrix> dq(dy.data(), n, n);
    dq = q * spec.A + spec.A.transpose() * q + 0.5 * qs * ss * qs - rate_on * spec.Q;
    // column form of u A + B'(q+q') + u SS'(q+q') - R'
    dy.segment(m, n) = spec.A.transpose() * u + qs * spec.B + qs * ss * u - rate_on * spec.R;
    double theta = 0.0;
    if (measure) {
      theta = jump_transform_quadratic(q, u, *measure);
      dq += theta * spec.jump->L2;
      dy.segment(m, n) += theta * spec.jump->L1;
    }
    const double l = spec.jump ? spec.jump->l : 0.0;
    dy(m + n) = -(rate_on * spec.k - l * theta - u.dot(spec.B) - 0.5 * (qs * ss).trace() -
                  0.5 * u.dot(ss * u));
    return dy;
  };

  auto post = [&](Vector& y, int node) {
    const double asym = symmetrize_block(y, n);
    if (asym > kSymmetryAssertTol) {
      std::ostringstream os;
      os << "solve_quadratic: |q - q'| = " << asym << " at s = " << grid.node(node);
      throw SymmetryLoss(os.str());
    }
  };

  Vector y_T(m + n + 1);
  Eigen::Map<Matrix>(y_T.data(), n, n) = term->q;
  y_T.segment(m, n) = term->u;
  y_T(m + n) = term->p;
  auto nodes = integrate_backward(grid, y_T, rhs, post, "solve_quadratic");

  RiccatiSolution sol;
  sol.grid = grid;
  sol.kind = SolutionKind::quadratic;
  sol.n = n;
  for (const auto& y : nodes) {
    sol.q.emplace_back(Eigen::Map<const Matrix>(y.data(), n, n));
    sol.u.emplace_back(y.segment(m, n));
    sol.p.push_back(y(m + n));
  }
  return sol;
}

RiccatiSolution solve_model(const FactorModel& model, const TimeGrid& grid) {
  const int n = dimension(model);
  if (is_affine(model)) {
    return solve_affine(std::get<AffineModelSpec>(model), grid, TerminalCondition::zero_affine(n));
  }
  return solve_quadratic(std::get<QuadraticModelSpec>(model), grid,
                         TerminalCondition::zero_quadratic(n));
}

RiccatiSolution solve_model(const FactorModel& model, const TimeGrid& grid,
                            const TerminalCondition& terminal) {
  if (is_affine(model)) return solve_affine(std::get<AffineModelSpec>(model), grid, terminal);
  return solve_quadratic(std::get<QuadraticModelSpec>(model), grid, terminal);
}

double OscSolution::value(double s, const Vector& x) const {
  const double f = std::clamp((s - grid.t0) / grid.dt(), 0.0, static_cast<double>(grid.steps));
  const int i = std::min(static_cast<int>(f), grid.steps - 1);
  const double w = f - i;
  const Matrix qs = (1.0 - w) * q[i] + w * q[i + 1];
  const Vector vs = (1.0 - w) * v[i] + w * v[i + 1];
  const double ps = (1.0 - w) * p[i] + w * p[i + 1];
  return x.dot(qs * x) + vs.dot(x) + ps;
}

Vector OscSolution::feedback(double s, const Vector& x) const {
  const double f = std::clamp((s - grid.t0) / grid.dt(), 0.0, static_cast<double>(grid.steps));
  const int i = std::min(static_cast<int>(f), grid.steps - 1);
  const double w = f - i;
  const Matrix qs = (1.0 - w) * q[i] + w * q[i + 1];
  const Vector vs = (1.0 - w) * v[i] + w * v[i + 1];
  const Vector grad = (qs + qs.transpose()) * x + vs;
  return -(Sigma.transpose() * grad);
}

OscSolution solve_osc_lqg(const QuadraticModelSpec& spec, const TimeGrid& grid) {
  if (spec.jump) {
    throw UnsupportedCombination("solve_osc_lqg: the control problem is diffusion-only");
  }
  const int n = spec.dim();
  const int m = n * n;
  const Matrix ss = spec.Sigma * spec.Sigma.transpose();

  auto rhs = [&](const Vector& y) {
    const Eigen::Map<const Matrix> q(y.data(), n, n);
    const auto v = y.segment(m, n);
    Vector dy(m + n + 1);
    Eigen::Map<Matrix>(dy.data(), n, n) =
        spec.A.transpose() * q + q * spec.A - 2.0 * q * ss * q + spec.Q;
    dy.segment(m, n) = spec.A.transpose() * v + 2.0 * q * spec.B - 2.0 * q * ss * v + spec.R;
    dy(m + n) = v.dot(spec.B) + (spec.Sigma.transpose() * q * spec.Sigma).trace() -
                0.5 * v.dot(ss * v) + spec.k;
    return dy;
  };
  auto post = [&](Vector& y, int node) {
    const double asym = symmetrize_block(y, n);
    if (asym > kSymmetryAssertTol) {
      std::ostringstream os;
      os << "solve_osc_lqg: |q - q'| = " << asym << " at s = " << grid.node(node);
      throw SymmetryLoss(os.str());
    }
  };

  const Vector y_T = Vector::Zero(m + n + 1);
  auto nodes = integrate_backward(grid, y_T, rhs, post, "solve_osc_lqg");

  OscSolution sol;
  sol.grid = grid;
  sol.n = n;
  sol.Sigma = spec.Sigma;
  for (const auto& y : nodes) {
    sol.q.emplace_back(Eigen::Map<const Matrix>(y.data(), n, n));
    sol.v.emplace_back(y.segment(m, n));
    sol.p.push_back(y(m + n));
  }
  return sol;
}

}  // namespace omt
