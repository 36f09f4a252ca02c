#include "omt/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace omt {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kEigenTol = 1e-12;

void check_shape(ValidationReport& report, const std::string& name, const Matrix& m, int rows,
                 int cols) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << name << " has shape " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
       << cols;
    report.issues.push_back({"dimension", os.str(), {}});
  }
}

void check_size(ValidationReport& report, const std::string& name, const Vector& v, int n) {
  if (v.size() != n) {
    std::ostringstream os;
    os << name << " has length " << v.size() << ", expected " << n;
    report.issues.push_back({"dimension", os.str(), {}});
  }
}

void check_measure(ValidationReport& report, const DiscreteMeasure& m, int n) {
  if (m.atoms.empty()) {
    report.issues.push_back({"measure_empty", "jump measure has no atoms", {}});
  }
  if (m.atoms.size() != m.weights.size()) {
    report.issues.push_back({"dimension", "jump measure atoms/weights length mismatch", {}});
    return;
  }
  std::vector<int> bad_weights;
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    if (m.atoms[i].size() != n) {
      report.issues.push_back(
          {"dimension", "jump atom " + std::to_string(i) + " has wrong length", {static_cast<int>(i)}});
    }
    if (!(m.weights[i] > 0.0)) bad_weights.push_back(static_cast<int>(i));
  }
  if (!bad_weights.empty()) {
    report.issues.push_back({"measure_weight", "jump weights must be > 0", bad_weights});
  }
}

void check_symmetric_psd(ValidationReport& report, const std::string& name, const Matrix& m) {
  if (m.rows() != m.cols()) return;
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    report.issues.push_back({name + "_symmetric", name + " is not symmetric", {}});
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  std::vector<int> negative;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) < -kEigenTol) negative.push_back(i);
  }
  if (!negative.empty()) {
    report.issues.push_back({name + "_psd", name + " has a negative eigenvalue", negative});
  }
}

}  // namespace

double DiscreteMeasure::total_mass() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double AffineModelSpec::jump_intensity(const Vector& x) const {
  if (!jump) return 0.0;
  return jump->L.dot(x) + jump->l;
}

void AffineModelSpec::volatility(const Vector& x, Matrix& out) const {
  const int n = dim();
  out.resize(n, n);
  for (int i = 0; i < n; ++i) {
    const double var = alpha(i) + beta.row(i).dot(x);
    out.col(i) = S.col(i) * std::sqrt(std::max(var, 0.0));
  }
}

double QuadraticModelSpec::jump_intensity(const Vector& x) const {
  if (!jump) return 0.0;
  return x.dot(jump->L2 * x) + jump->L1.dot(x) + jump->l;
}

int dimension(const FactorModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

double short_rate(const FactorModel& model, const Vector& x) {
  return std::visit([&](const auto& m) { return m.short_rate(x); }, model);
}

double jump_intensity(const FactorModel& model, const Vector& x) {
  return std::visit([&](const auto& m) { return m.jump_intensity(x); }, model);
}

const DiscreteMeasure* jump_measure(const FactorModel& model) {
  return std::visit(
      [](const auto& m) -> const DiscreteMeasure* { return m.jump ? &m.jump->measure : nullptr; },
      model);
}

bool has_jumps(const FactorModel& model) { return jump_measure(model) != nullptr; }

FactorModel without_jumps(const FactorModel& model) {
  return std::visit(
      [](auto m) -> FactorModel {
        m.jump.reset();
        return m;
      },
      model);
}

bool is_affine(const FactorModel& model) {
  return std::holds_alternative<AffineModelSpec>(model);
}

double PriceModelSpec::log_payoff(const Vector& x) const {
  double v = A_T.dot(x) + h_T;
  if (kind == PriceModelKind::QPM) v += x.dot(B_T * x);
  return v;
}

double PriceModelSpec::payoff(const Vector& x) const { return std::exp(log_payoff(x)); }

bool ValidationReport::failed(const std::string& check) const {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const ValidationIssue& i) { return i.check == check; });
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) os << "; ";
    os << issues[i].check << ": " << issues[i].message;
    if (!issues[i].indices.empty()) {
      os << " [";
      for (std::size_t j = 0; j < issues[i].indices.size(); ++j) {
        if (j) os << ",";
        os << issues[i].indices[j];
      }
      os << "]";
    }
  }
  return os.str();
}

ValidationReport validate_affine(const AffineModelSpec& spec, const Vector& x0) {
  ValidationReport report;
  const int n = spec.dim();
  if (n == 0) {
    report.issues.push_back({"dimension", "model has zero factors", {}});
    return report;
  }
  check_shape(report, "A", spec.A, n, n);
  check_shape(report, "S", spec.S, n, n);
  check_shape(report, "beta", spec.beta, n, n);
  check_size(report, "alpha", spec.alpha, n);
  check_size(report, "R", spec.R, n);
  check_size(report, "x0", x0, n);
  if (spec.jump) {
    check_size(report, "L", spec.jump->L, n);
    check_measure(report, spec.jump->measure, n);
    if (spec.jump->l < 0.0) report.issues.push_back({"intensity_level", "l must be >= 0", {}});
  }
  if (!report.ok()) return report;

  Eigen::JacobiSVD<Matrix> svd(spec.S);
  const auto& sv = svd.singularValues();
  if (!(sv.maxCoeff() > 0.0) || sv.minCoeff() <= 1e-12 * sv.maxCoeff()) {
    report.issues.push_back({"singular_S", "S is singular", {}});
  }

  std::vector<int> negative_var;
  for (int i = 0; i < n; ++i) {
    if (spec.alpha(i) + spec.beta.row(i).dot(x0) < 0.0) negative_var.push_back(i);
  }
  if (!negative_var.empty()) {
    report.issues.push_back(
        {"variance_at_x0", "alpha_i + beta_i x0 < 0", std::move(negative_var)});
  }

  if (spec.beta.isZero(0.0)) {
    std::vector<int> negative_alpha;
    for (int i = 0; i < n; ++i) {
      if (spec.alpha(i) < 0.0) negative_alpha.push_back(i);
    }
    if (!negative_alpha.empty()) {
      report.issues.push_back(
          {"negative_alpha", "alpha_i < 0 with beta = 0", std::move(negative_alpha)});
    }
  }
  return report;
}

ValidationReport validate_quadratic(const QuadraticModelSpec& spec) {
  ValidationReport report;
  const int n = spec.dim();
  if (n == 0) {
    report.issues.push_back({"dimension", "model has zero factors", {}});
    return report;
  }
  check_shape(report, "A", spec.A, n, n);
  check_shape(report, "Sigma", spec.Sigma, n, n);
  check_shape(report, "Q", spec.Q, n, n);
  check_size(report, "R", spec.R, n);
  if (spec.jump) {
    check_shape(report, "L2", spec.jump->L2, n, n);
    check_size(report, "L1", spec.jump->L1, n);
    check_measure(report, spec.jump->measure, n);
  }
  if (!report.ok()) return report;
  check_symmetric_psd(report, "Q", spec.Q);
  if (spec.jump) check_symmetric_psd(report, "L2", spec.jump->L2);
  return report;
}

ValidationReport validate_price_model(const PriceModelSpec& pm, int n) {
  ValidationReport report;
  check_size(report, "A_T", pm.A_T, n);
  if (pm.kind == PriceModelKind::APM) {
    if (pm.B_T.size() != 0 && !pm.B_T.isZero(0.0)) {
      report.issues.push_back({"apm_B_T", "B_T must be exactly zero for an affine price model", {}});
    }
  } else {
    check_shape(report, "B_T", pm.B_T, n, n);
    if (report.ok() && (pm.B_T - pm.B_T.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
      report.issues.push_back({"B_T_symmetric", "B_T is not symmetric", {}});
    }
  }
  return report;
}

ValidationReport validate_credit(const CreditSpec& credit, int n) {
  ValidationReport report;
  check_size(report, "Lambda", credit.Lambda, n);
  if (!(credit.eta > 0.0) || credit.eta > 1.0) {
    report.issues.push_back({"eta_range", "eta must lie in (0, 1]", {}});
  }
  if (credit.lambda0 < 0.0) {
    report.issues.push_back({"lambda0_sign", "lambda0 must be >= 0", {}});
  }
  return report;
}

}  // namespace omt
