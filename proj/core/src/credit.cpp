#include "omt/credit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "omt/errors.hpp"
#include "omt/rng.hpp"

namespace omt {

std::vector<DefaultOutcome> sample_default(const PathEnsemble& ensemble, const FactorModel& model,
                                           const CreditSpec& credit, std::uint64_t seed2) {
  if (ensemble.measure_tag != MeasureTag::P) {
    throw InvalidArgument("sample_default needs an ensemble simulated under P");
  }
  if (!ensemble.has_paths()) throw InvalidArgument("sample_default needs stored paths");
  if (credit.Lambda.size() != ensemble.dim) {
    throw InvalidArgument("sample_default: credit intensity has wrong dimension");
  }
  const auto& grid = ensemble.grid;
  const double dt = grid.dt();
  const bool pre_default = credit.recovery == RecoveryScheme::FractionalPreDefault;
  std::optional<RiccatiSolution> bond;
  if (pre_default) bond = solve_model(model, grid);

  std::vector<DefaultOutcome> out(static_cast<std::size_t>(ensemble.n_paths));
  for (int p = 0; p < ensemble.n_paths; ++p) {
    Philox4x32 rng(derive_key(seed2, rng_purpose::defaults), static_cast<std::uint64_t>(p));
    const double threshold = -std::log(rng.uniform());
    double cum = 0.0;
    auto& o = out[static_cast<std::size_t>(p)];
    for (int i = 0; i < grid.steps; ++i) {
      const Vector x = ensemble.state(p, i);
      const double lambda = std::max(credit.intensity(x), 0.0);
      const double h = lambda * dt;
      if (cum + h >= threshold && lambda > 0.0) {
        const double tau = std::min(grid.node(i) + (threshold - cum) / lambda, grid.node(i + 1));
        o.tau = tau;
        o.defaulted = true;
        if (pre_default) {
          // remaining rate integral on the path from tau to T
          double rest = short_rate(model, x) * (grid.node(i + 1) - tau);
          for (int m = i + 1; m < grid.steps; ++m) rest += short_rate(model, ensemble.state(p, m)) * dt;
          o.payoff = credit.eta * std::exp(bond->exponent(tau, x) + rest);
        } else {
          o.payoff = credit.eta;
        }
        break;
      }
      cum += h;
    }
  }
  return out;
}

DefaultablePrice mc_defaultable_price(const PathEnsemble& ensemble,
                                      const std::vector<DefaultOutcome>& outcomes) {
  if (outcomes.size() != static_cast<std::size_t>(ensemble.n_paths)) {
    throw InvalidArgument("mc_defaultable_price: outcomes do not match the ensemble");
  }
  std::vector<double> v(outcomes.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::exp(-ensemble.rate_integrals[i]) * outcomes[i].payoff;
  }
  DefaultablePrice res;
  res.estimate = McEstimate::from_samples(v);
  if (!(res.estimate.mean > 0.0)) throw NonFinite("defaultable price is not positive");
  res.value_function = -std::log(res.estimate.mean);
  return res;
}

Vector lsmc_basis(const Vector& x, bool survived) {
  const auto n = x.size();
  Vector b(2 + n + n * (n + 1) / 2);
  Eigen::Index k = 0;
  b(k++) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) b(k++) = x(j);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index m = j; m < n; ++m) b(k++) = x(j) * x(m);
  }
  b(k) = survived ? 1.0 : 0.0;
  return b;
}

double PBsdeSolution::surface_value(std::size_t index, const Vector& x, bool survived) const {
  const auto& node = surfaces.at(index);
  const double fit = lsmc_basis(x, survived).dot(node.coefficients);
  if (!(fit > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return -node.integral_c - std::log(fit);
}

PBsdeSolution solve_p_bsde(const FactorModel& model, const PathEnsemble& ensemble,
                           const std::vector<DefaultOutcome>& outcomes, PBsdeMethod method,
                           int lsmc_stride) {
  if (outcomes.size() != static_cast<std::size_t>(ensemble.n_paths)) {
    throw InvalidArgument("solve_p_bsde: outcomes do not match the ensemble");
  }
  const auto& grid = ensemble.grid;
  // The default-free p solves dp/dtau = -c, so the integral of c over [s, T] is -p_s.
  const auto bond = solve_model(model, grid);

  std::vector<double> inv(outcomes.size());
  for (std::size_t i = 0; i < inv.size(); ++i) {
    if (!(outcomes[i].payoff > 0.0)) {
      throw SingularTerminal("terminal payoff C_T <= 0 makes 1/C_T singular");
    }
    inv[i] = 1.0 / outcomes[i].payoff;
  }

  PBsdeSolution sol;
  sol.method = method;
  sol.integral_c = -bond.p.front();
  sol.inverse_payoff = McEstimate::from_samples(inv);
  sol.p_tilde = std::exp(sol.integral_c) * sol.inverse_payoff.mean;
  sol.p_t = -sol.integral_c - std::log(sol.inverse_payoff.mean);
  if (method == PBsdeMethod::plain_mc) return sol;

  if (!ensemble.has_paths()) throw InvalidArgument("lsmc needs stored paths");
  const int stride = lsmc_stride > 0 ? lsmc_stride : std::max(1, grid.steps / 10);
  const auto n_paths = static_cast<Eigen::Index>(ensemble.n_paths);
  const Eigen::Map<const Vector> response(inv.data(), n_paths);
  const double mean = response.mean();
  const double sst = (response.array() - mean).square().sum();
  double r2_sum = 0.0;
  for (int j = grid.steps - stride; j > 0; j -= stride) {
    const double s = grid.node(j);
    const auto cols = lsmc_basis(ensemble.x0, true).size();
    Matrix design(n_paths, cols);
    for (Eigen::Index p = 0; p < n_paths; ++p) {
      const auto& o = outcomes[static_cast<std::size_t>(p)];
      const bool survived = !(o.defaulted && *o.tau <= s);
      design.row(p) = lsmc_basis(ensemble.state(static_cast<int>(p), j), survived).transpose();
    }
    LsmcNode node;
    node.s = s;
    node.node = j;
    node.integral_c = -bond.p[static_cast<std::size_t>(j)];
    node.coefficients = design.colPivHouseholderQr().solve(response);
    const double ssr = (response - design * node.coefficients).squaredNorm();
    node.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    r2_sum += node.r2;
    sol.surfaces.push_back(std::move(node));
  }
  if (!sol.surfaces.empty()) sol.r2 = r2_sum / static_cast<double>(sol.surfaces.size());
  return sol;
}

PBsdeSolution solve_p_bsde(const FactorModel& model, const CreditSpec& credit, const Vector& x0,
                           const TimeGrid& grid, int n_paths, std::uint64_t seed,
                           PBsdeMethod method, unsigned threads, int lsmc_stride) {
  if (!(credit.eta > 0.0)) throw SingularTerminal("eta <= 0 gives a singular terminal 1/C_T");
  SimulationOptions opts;
  opts.store_paths = true;
  opts.threads = threads;
  const auto ens = simulate(model, x0, grid, n_paths, seed, KernelSpec::zero(dimension(model)), opts);
  const auto outcomes = sample_default(ens, model, credit, seed);
  return solve_p_bsde(model, ens, outcomes, method, lsmc_stride);
}

DecompositionReport decomposition_check(const FactorModel& model, const CreditSpec& credit,
                                        const Vector& x0, const TimeGrid& grid, int n_paths,
                                        std::uint64_t seed, unsigned threads) {
  SimulationOptions opts;
  opts.store_paths = true;
  opts.threads = threads;
  const auto ens = simulate(model, x0, grid, n_paths, seed, KernelSpec::zero(dimension(model)), opts);
  const auto outcomes = sample_default(ens, model, credit, seed);

  DecompositionReport rep;
  rep.d_mc = mc_defaultable_price(ens, outcomes).estimate;
  rep.p_bsde = solve_p_bsde(model, ens, outcomes, PBsdeMethod::plain_mc);

  const auto bond = solve_model(model, grid);
  const double exponent = bond.exponent(grid.t0, x0);
  rep.bond = std::exp(exponent);
  const double lead = exponent - bond.p.front();  // U_t x (or x'q x + u x)
  rep.d_decomp = std::exp(lead) / rep.p_bsde.p_tilde;

  const double m = rep.p_bsde.inverse_payoff.mean;
  rep.d_decomp_se = rep.bond * rep.p_bsde.inverse_payoff.std_error / (m * m);
  std::vector<double> diff(outcomes.size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    const double a = std::exp(-ens.rate_integrals[i]) * outcomes[i].payoff;
    diff[i] = a + rep.bond / (m * m) / outcomes[i].payoff;
  }
  rep.joint_se = McEstimate::from_samples(diff).std_error;
  rep.discrepancy = rep.d_mc.mean - rep.d_decomp;
  return rep;
}

}  // namespace omt
