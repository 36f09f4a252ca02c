#include "omt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>
#include <variant>
#include <memory>

#include "omt/errors.hpp"
#include "omt/pricing.hpp"

namespace omt {

McEstimate entropy_estimate(const FactorModel& model, const Vector& x0, const KernelSpec& kernel,
                            const TimeGrid& grid, int n_paths, std::uint64_t seed,
                            unsigned threads) {
  SimulationOptions opts;
  opts.threads = threads;
  const auto ens = simulate(model, x0, grid, n_paths, seed, kernel, opts);
  return McEstimate::from_samples(ens.entropy_integrals);
}

namespace {

std::vector<double> objective_samples(const PathEnsemble& ens) {
  std::vector<double> j(ens.rate_integrals.size());
  for (std::size_t i = 0; i < j.size(); ++i) j[i] = ens.rate_integrals[i] + ens.entropy_integrals[i];
  return j;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

McEstimate omt_objective(const FactorModel& model, const Vector& x0, const KernelSpec& kernel,
                         const TimeGrid& grid, int n_paths, std::uint64_t seed, unsigned threads) {
  SimulationOptions opts;
  opts.threads = threads;
  const auto ens = simulate(model, x0, grid, n_paths, seed, kernel, opts);
  return McEstimate::from_samples(objective_samples(ens));
}

bool DualityReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const DualityRow& r) {
    return r.lower_bound_ok && r.entropy_ok && r.attained_ok && r.not_beaten_ok;
  });
}

DualityReport duality_check(const FactorModel& model, const Vector& x0,
                            const std::vector<KernelSpec>& kernels, const TimeGrid& grid,
                            int n_paths, std::uint64_t seed, unsigned threads) {
  DualityReport report;
  report.value_closed_form = bond_price(model, grid.t0, grid.T, x0).value_function;

  SimulationOptions opts;
  opts.threads = threads;
  std::vector<std::vector<double>> samples;
  int optimal_index = -1;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    const auto ens = simulate(model, x0, grid, n_paths, seed, kernels[k], opts);
    samples.push_back(objective_samples(ens));
    DualityRow row;
    row.kernel = kernels[k].label;
    row.is_optimal = kernels[k].kind() == KernelSpec::Kind::optimal;
    row.objective = McEstimate::from_samples(samples.back());
    row.entropy = McEstimate::from_samples(ens.entropy_integrals);
    row.gap = row.objective.mean - report.value_closed_form;
    row.gap_se = row.objective.std_error;
    row.lower_bound_ok = row.gap >= -3.0 * row.gap_se;
    row.entropy_ok = row.entropy.mean >= -4.0 * row.entropy.std_error;
    if (row.is_optimal) {
      row.attained_ok = std::abs(row.gap) <= 3.0 * row.gap_se;
      if (optimal_index < 0) optimal_index = static_cast<int>(k);
    }
    report.rows.push_back(std::move(row));
  }

  if (optimal_index >= 0) {
    const auto& opt = samples[static_cast<std::size_t>(optimal_index)];
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      std::vector<double> diff(opt.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = samples[k][i] - opt[i];
      auto& row = report.rows[k];
      row.vs_optimal = McEstimate::from_samples(diff);
      row.not_beaten_ok = row.vs_optimal.mean >= -3.0 * row.vs_optimal.std_error;
    }
  }
  return report;
}

namespace {

// Jump transform theta_s at every node of the solution.
std::vector<double> node_thetas(const RiccatiSolution& sol, const DiscreteMeasure* measure) {
  std::vector<double> theta(static_cast<std::size_t>(sol.grid.steps + 1), 0.0);
  if (measure == nullptr || measure->empty()) return theta;
  for (int i = 0; i <= sol.grid.steps; ++i) {
    theta[i] = sol.kind == SolutionKind::affine
                   ? jump_transform_affine(sol.U[i], *measure)
                   : jump_transform_quadratic(sol.q[i], sol.u[i], *measure);
  }
  return theta;
}

double terminal_exponent(const TerminalCondition& terminal, const Vector& x) {
  return std::visit(
      [&](const auto& term) -> double {
        using T = std::decay_t<decltype(term)>;
        if constexpr (std::is_same_v<T, AffineTerminal>) {
          return term.U.dot(x) + term.p;
        } else {
          return x.dot(term.q * x) + term.u.dot(x) + term.p;
        }
      },
      terminal.value);
}

struct PathWalk {
  double residual_sum = 0.0;     // sum of step residuals e_i
  double abs_step_sum = 0.0;     // sum of |e_i|
  double density_log_rhs = 0.0;  // log of the exponential density
  double terminal_mismatch = 0.0;
};

// Walks one stored path. The step residual is
//   e_i = dY + (r - lambda theta - 1/2 |Z|^2) dt + Z dW + G 1{jump}
// with Y = -(log-price exponent).
PathWalk walk_path(const PathEnsemble& ens, int path, const FactorModel& model,
                   const RiccatiSolution& sol, const KernelSpec& kernel,
                   const std::vector<double>& theta, const TerminalCondition& terminal) {
  const auto& grid = ens.grid;
  const double dt = grid.dt();
  const DiscreteMeasure* measure = jump_measure(model);
  const bool jumps = measure != nullptr && !measure->empty();
  const auto& marks = ens.jump_marks[static_cast<std::size_t>(path)];
  std::size_t next_mark = 0;

  PathWalk w;
  Vector x = ens.state(path, 0);
  Vector z(ens.dim);
  double y = -sol.exponent(grid.node(0), x);
  for (int i = 0; i < grid.steps; ++i) {
    const double s = grid.node(i);
    const Vector xn = ens.state(path, i + 1);
    const double yn = -sol.exponent(grid.node(i + 1), xn);
    const double r = terminal.include_rate ? short_rate(model, x) : 0.0;
    kernel.eval(s, x, z);
    const auto dW = ens.increment(path, i);
    double jump_comp = 0.0;
    double jump_term = 0.0;
    if (jumps) {
      jump_comp = std::max(jump_intensity(model, x), 0.0) * theta[static_cast<std::size_t>(i)];
      if (next_mark < marks.size() && marks[next_mark].step == i) {
        jump_term = kernel.jump_kernel(s, measure->atoms[static_cast<std::size_t>(marks[next_mark].atom)]);
        ++next_mark;
      }
    }
    const double half_z2 = 0.5 * z.squaredNorm();
    const double zdw = z.dot(dW);
    const double e = (yn - y) + (r - jump_comp - half_z2) * dt + zdw + jump_term;
    w.residual_sum += e;
    w.abs_step_sum += std::abs(e);
    w.density_log_rhs += -half_z2 * dt + zdw + jump_term - jump_comp * dt;
    x = xn;
    y = yn;
  }
  w.terminal_mismatch = std::abs(y + terminal_exponent(terminal, x));
  return w;
}

struct Walked {
  PathEnsemble ens;
  std::vector<PathWalk> walks;
  double log_price = 0.0;
};

Walked walk_all(const FactorModel& model, const Vector& x0, const TimeGrid& grid,
                const TerminalCondition& terminal, int n_paths, std::uint64_t seed,
                unsigned threads) {
  auto sol = std::make_shared<const RiccatiSolution>(solve_model(model, grid, terminal));
  const auto kernel = optimal_kernel(sol, model);
  SimulationOptions opts;
  opts.store_paths = true;
  opts.store_increments = true;
  opts.threads = threads;
  Walked out{simulate(model, x0, grid, n_paths, seed, KernelSpec::zero(dimension(model)), opts),
             {},
             sol->exponent(grid.t0, x0)};
  const auto theta = node_thetas(*sol, jump_measure(model));
  out.walks.reserve(static_cast<std::size_t>(n_paths));
  for (int p = 0; p < n_paths; ++p) {
    out.walks.push_back(walk_path(out.ens, p, model, *sol, kernel, theta, terminal));
  }
  return out;
}

TerminalCondition bond_terminal(const FactorModel& model) {
  const int n = dimension(model);
  return is_affine(model) ? TerminalCondition::zero_affine(n) : TerminalCondition::zero_quadratic(n);
}

}  // namespace

DensityReport density_identity_check(const FactorModel& model, const Vector& x0,
                                     const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                     unsigned threads) {
  const auto walked = walk_all(model, x0, grid, bond_terminal(model), n_paths, seed, threads);
  std::vector<double> abs_disc(static_cast<std::size_t>(n_paths));
  for (int p = 0; p < n_paths; ++p) {
    // e^{-int r} / P  versus  exp(-1/2 int ZZ' + int Z dW + jump part)
    const double lhs = -walked.ens.rate_integrals[static_cast<std::size_t>(p)] - walked.log_price;
    abs_disc[static_cast<std::size_t>(p)] = std::abs(lhs - walked.walks[static_cast<std::size_t>(p)].density_log_rhs);
  }
  DensityReport rep;
  rep.dt = grid.dt();
  rep.steps = grid.steps;
  double sum = 0.0;
  for (double d : abs_disc) {
    sum += d;
    rep.max_abs = std::max(rep.max_abs, d);
  }
  rep.mean_abs = sum / n_paths;
  rep.median_abs = median_of(std::move(abs_disc));
  return rep;
}

bool ResidualReport::monotone() const {
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (!(levels[i].mean_abs_residual < levels[i - 1].mean_abs_residual)) return false;
  }
  return true;
}

ResidualReport fbsde_residual_check(const FactorModel& model, const Vector& x0,
                                    const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                    int halvings, unsigned threads) {
  return fbsde_residual_check(model, x0, grid, bond_terminal(model), n_paths, seed, halvings,
                              threads);
}

ResidualReport fbsde_residual_check(const FactorModel& model, const Vector& x0,
                                    const TimeGrid& grid, const TerminalCondition& terminal,
                                    int n_paths, std::uint64_t seed, int halvings,
                                    unsigned threads) {
  if (halvings < 0) throw InvalidArgument("fbsde_residual_check: halvings must be >= 0");
  ResidualReport report;
  TimeGrid g = grid;
  for (int level = 0; level <= halvings; ++level) {
    const auto walked = walk_all(model, x0, g, terminal, n_paths, seed, threads);
    ResidualLevel lv;
    lv.dt = g.dt();
    lv.steps = g.steps;
    double sum = 0.0;
    double step_sum = 0.0;
    for (const auto& w : walked.walks) {
      sum += std::abs(w.residual_sum);
      step_sum += w.abs_step_sum;
      lv.max_abs_residual = std::max(lv.max_abs_residual, std::abs(w.residual_sum));
      lv.terminal_mismatch = std::max(lv.terminal_mismatch, w.terminal_mismatch);
    }
    lv.mean_abs_residual = sum / n_paths;
    lv.mean_abs_step_residual = step_sum / (static_cast<double>(n_paths) * g.steps);
    report.levels.push_back(lv);
    g.steps *= 2;
  }
  for (std::size_t i = 0; i + 1 < report.levels.size(); ++i) {
    const double next = report.levels[i + 1].mean_abs_residual;
    report.ratios.push_back(next > 0.0 ? report.levels[i].mean_abs_residual / next
                                       : std::numeric_limits<double>::infinity());
  }
  return report;
}

OscReport osc_equivalence_check(const QuadraticModelSpec& spec, const TimeGrid& grid,
                                const std::vector<Vector>& states) {
  if (spec.jump) throw UnsupportedCombination("OSC equivalence is stated for jump-free models");
  const int n = spec.dim();
  auto sol = std::make_shared<const RiccatiSolution>(
      solve_quadratic(spec, grid, TerminalCondition::zero_quadratic(n)));
  const auto kernel = optimal_kernel(sol, FactorModel{spec});
  const auto osc = solve_osc_lqg(spec, grid);

  OscReport rep;
  rep.nodes = grid.steps + 1;
  rep.states = static_cast<int>(states.size());
  for (int i = 0; i <= grid.steps; ++i) {
    const double s = grid.node(i);
    for (const auto& x : states) {
      const Vector du = osc.feedback(s, x) - kernel.eval(s, x);
      rep.max_kernel_diff = std::max(rep.max_kernel_diff, du.cwiseAbs().maxCoeff());
      rep.max_value_diff =
          std::max(rep.max_value_diff, std::abs(osc.value(s, x) + sol->exponent(s, x)));
    }
  }
  return rep;
}

JumpReductionReport jump_reduction_check(const FactorModel& model, const TimeGrid& grid) {
  JumpReductionReport rep;
  const DiscreteMeasure* measure = jump_measure(model);
  if (measure == nullptr) {
    rep.removable = true;
    return rep;
  }
  const bool no_mass = std::all_of(measure->weights.begin(), measure->weights.end(),
                                   [](double w) { return w == 0.0; });
  const bool zero_atoms = std::all_of(measure->atoms.begin(), measure->atoms.end(),
                                      [](const Vector& z) { return z.isZero(0.0); });
  const bool zero_intensity = std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AffineModelSpec>) {
          return m.jump->L.isZero(0.0) && m.jump->l == 0.0;
        } else {
          return m.jump->L2.isZero(0.0) && m.jump->L1.isZero(0.0) && m.jump->l == 0.0;
        }
      },
      model);
  rep.removable = measure->empty() || no_mass || zero_atoms || zero_intensity;

  const auto with = solve_model(model, grid);
  const auto without = solve_model(without_jumps(model), grid);
  for (int i = 0; i <= grid.steps; ++i) {
    const Vector d = with.node_coefficients(i) - without.node_coefficients(i);
    rep.max_coefficient_diff = std::max(rep.max_coefficient_diff, d.cwiseAbs().maxCoeff());
  }
  return rep;
}

}  // namespace omt
