#include "omt/app/runner.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "omt/credit.hpp"
#include "omt/csv.hpp"
#include "omt/errors.hpp"
#include "omt/kernel.hpp"
#include "omt/pricing.hpp"
#include "omt/rng.hpp"
#include "omt/simulate.hpp"
#include "omt/verify.hpp"

namespace omt::app {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_ / "plotdata");
  }

  std::ofstream result() const { return open(dir_ / "result.csv"); }
  std::ofstream plot(const std::string& name) const { return open(dir_ / "plotdata" / name); }
  void summary(const ordered_json& s) const {
    auto os = open(dir_ / "summary.json");
    os << s.dump(2) << '\n';
  }

 private:
  static std::ofstream open(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
  }
  fs::path dir_;
};

// One labelled CSV row: text cells first, then numbers.
void labelled_row(std::ostream& os, std::initializer_list<std::string> labels,
                  std::initializer_list<double> values) {
  for (const auto& l : labels) os << l << ',';
  csv::write_row(os, std::span<const double>(values.begin(), values.size()));
}

ordered_json estimate_json(const McEstimate& e) {
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"n", e.n}, {"ci_lo", e.ci_lo},
          {"ci_hi", e.ci_hi}};
}

TimeGrid riccati_grid(const RunConfig& cfg) {
  return cfg.riccati_steps > 0 ? TimeGrid{cfg.grid.t0, cfg.grid.T, cfg.riccati_steps}
                               : TimeGrid::with_default_steps(cfg.grid.t0, cfg.grid.T);
}

SimulationOptions sim_options(unsigned threads, bool paths = false) {
  SimulationOptions o;
  o.threads = threads;
  o.store_paths = paths;
  return o;
}

void write_yield_curve(const RunConfig& cfg, const Outputs& out) {
  std::vector<double> mats = cfg.maturities;
  if (mats.empty()) {
    for (int i = 1; i <= 20; ++i) mats.push_back(cfg.grid.t0 + (cfg.grid.T - cfg.grid.t0) * i / 20.0);
  }
  const auto points = term_structure(cfg.model, cfg.grid.t0, mats, cfg.x0, cfg.riccati_steps);
  auto os = out.plot("yield_curve.csv");
  write_term_structure_csv(os, points);
}

void write_riccati(const RiccatiSolution& sol, const Outputs& out, const std::string& name) {
  auto os = out.plot(name);
  sol.write_csv(os);
}

const char* price_header[] = {"quantity", "method", "value", "value_function", "std_error", "ci_lo", "ci_hi"};

void price_header_row(std::ostream& os) {
  csv::write_header(os, {std::begin(price_header), std::end(price_header)});
}

void closed_form_row(std::ostream& os, const std::string& quantity, const PriceResult& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  labelled_row(os, {quantity, "closed_form"}, {r.value, r.value_function, 0.0, nan, nan});
}

void mc_row(std::ostream& os, const std::string& quantity, const McEstimate& e) {
  labelled_row(os, {quantity, "monte_carlo"},
               {e.mean, -std::log(e.mean), e.std_error, e.ci_lo, e.ci_hi});
}

bool within(double value, const McEstimate& e, double k) {
  return std::abs(value - e.mean) <= k * e.std_error;
}

ordered_json task_price_bond(const RunConfig& cfg, const Outputs& out, unsigned threads,
                             ordered_json& checks) {
  const auto cf = bond_price(cfg.model, cfg.grid.t0, cfg.grid.T, cfg.x0, cfg.riccati_steps);
  ordered_json head{{"P", cf.value}, {"V", cf.value_function}};
  checks["value_function_identity"] = std::abs(cf.value_function + std::log(cf.value)) <= 1e-12;
  auto os = out.result();
  price_header_row(os);
  closed_form_row(os, "bond", cf);
  if (cfg.mc) {
    const auto ens = simulate(cfg.model, cfg.x0, cfg.grid, cfg.mc->n_paths, cfg.mc->seed,
                              KernelSpec::zero(dimension(cfg.model)), sim_options(threads));
    const auto est = mc_bond_price(ens);
    mc_row(os, "bond", est);
    head["P_mc"] = estimate_json(est);
    checks["mc_within_3se"] = within(cf.value, est, 3.0);
  }
  write_yield_curve(cfg, out);
  write_riccati(solve_model(cfg.model, riccati_grid(cfg)), out, "riccati.csv");
  return head;
}

ordered_json task_price_futures(const RunConfig& cfg, const Outputs& out, unsigned threads,
                                ordered_json& checks) {
  const auto& pm = *cfg.price_model;
  const auto cf = futures_price(cfg.model, pm, cfg.grid.t0, cfg.grid.T, cfg.x0, cfg.riccati_steps);
  ordered_json head{{"G", cf.value}, {"V", cf.value_function}};
  checks["value_function_identity"] = std::abs(cf.value_function + std::log(cf.value)) <= 1e-12;
  auto os = out.result();
  price_header_row(os);
  closed_form_row(os, "futures", cf);
  if (cfg.mc) {
    const auto ens = simulate(cfg.model, cfg.x0, cfg.grid, cfg.mc->n_paths, cfg.mc->seed,
                              KernelSpec::zero(dimension(cfg.model)), sim_options(threads));
    const auto est = mc_futures_price(ens, pm);
    mc_row(os, "futures", est);
    head["G_mc"] = estimate_json(est);
    checks["mc_within_3se"] = within(cf.value, est, 3.0);
  }
  const int n = dimension(cfg.model);
  write_riccati(solve_model(cfg.model, riccati_grid(cfg),
                            TerminalCondition::from_payoff(pm, n, is_affine(cfg.model), false)),
                out, "riccati.csv");
  return head;
}

ordered_json task_price_forward(const RunConfig& cfg, const Outputs& out, unsigned threads,
                                ordered_json& checks) {
  const auto& pm = *cfg.price_model;
  const auto fr = forward_price(cfg.model, pm, cfg.grid.t0, cfg.grid.T, cfg.x0, cfg.riccati_steps);
  ordered_json head{{"F", fr.forward}, {"N", fr.numerator.value}, {"V_F", fr.numerator.value_function},
                    {"P", fr.bond.value}};
  checks["value_function_identity"] =
      std::abs(fr.numerator.value_function + std::log(fr.numerator.value)) <= 1e-12 &&
      std::abs(fr.bond.value_function + std::log(fr.bond.value)) <= 1e-12;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto os = out.result();
  price_header_row(os);
  closed_form_row(os, "numerator", fr.numerator);
  closed_form_row(os, "bond", fr.bond);
  labelled_row(os, {"forward", "closed_form"},
               {fr.forward, fr.numerator.value_function, 0.0, nan, nan});
  if (cfg.mc) {
    const auto ens = simulate(cfg.model, cfg.x0, cfg.grid, cfg.mc->n_paths, cfg.mc->seed,
                              KernelSpec::zero(dimension(cfg.model)), sim_options(threads));
    const auto num = mc_forward_numerator(ens, pm);
    const auto bond = mc_bond_price(ens);
    mc_row(os, "numerator", num);
    mc_row(os, "bond", bond);
    head["N_mc"] = estimate_json(num);
    head["P_mc"] = estimate_json(bond);
    head["F_mc"] = num.mean / bond.mean;
    checks["numerator_mc_within_3se"] = within(fr.numerator.value, num, 3.0);
    checks["bond_mc_within_3se"] = within(fr.bond.value, bond, 3.0);
  }
  const int n = dimension(cfg.model);
  write_riccati(solve_model(cfg.model, riccati_grid(cfg),
                            TerminalCondition::from_payoff(pm, n, is_affine(cfg.model), true)),
                out, "riccati.csv");
  return head;
}

ordered_json task_price_defaultable(const RunConfig& cfg, const Outputs& out, unsigned threads,
                                    ordered_json& checks) {
  const auto& credit = cfg.credit->spec;
  const auto ens = simulate(cfg.model, cfg.x0, cfg.grid, cfg.mc->n_paths, cfg.mc->seed,
                            KernelSpec::zero(dimension(cfg.model)), sim_options(threads, true));
  const auto outcomes = sample_default(ens, cfg.model, credit, cfg.mc->seed);
  const auto d = mc_defaultable_price(ens, outcomes);
  const auto bond = bond_price(cfg.model, cfg.grid.t0, cfg.grid.T, cfg.x0, cfg.riccati_steps);
  const auto bond_mc = mc_bond_price(ens);

  std::vector<double> defaulted(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) defaulted[i] = outcomes[i].defaulted ? 1.0 : 0.0;
  const auto fraction = McEstimate::from_samples(defaulted);

  auto os = out.result();
  price_header_row(os);
  mc_row(os, "defaultable", d.estimate);
  closed_form_row(os, "bond", bond);
  mc_row(os, "bond", bond_mc);

  ordered_json head{{"D_mc", estimate_json(d.estimate)}, {"V", d.value_function},
                    {"P", bond.value}, {"default_fraction", estimate_json(fraction)}};
  checks["value_function_identity"] =
      std::abs(d.value_function + std::log(d.estimate.mean)) <= 1e-12;
  if (credit.recovery == RecoveryScheme::FractionalFace) {
    const double se = d.estimate.std_error;
    checks["bounds_eta_P_le_D_le_P"] =
        d.estimate.mean >= credit.eta * bond.value - 3.0 * se && d.estimate.mean <= bond.value + 3.0 * se;
  }

  // empirical survival curve on the simulation grid
  auto sc = out.plot("survival.csv");
  csv::write_header(sc, {"s", "survival"});
  const int stride = std::max(1, cfg.grid.steps / 50);
  for (int j = 0; j <= cfg.grid.steps; j += stride) {
    const double s = cfg.grid.node(j);
    long alive = 0;
    for (const auto& o : outcomes) alive += (o.defaulted && *o.tau <= s) ? 0 : 1;
    const double row[] = {s, static_cast<double>(alive) / static_cast<double>(outcomes.size())};
    csv::write_row(sc, row);
  }
  return head;
}

ordered_json task_riccati_dump(const RunConfig& cfg, const Outputs& out, ordered_json& checks) {
  const TimeGrid g = cfg.riccati_steps > 0 ? TimeGrid{cfg.grid.t0, cfg.grid.T, cfg.riccati_steps} : cfg.grid;
  const auto sol = solve_model(cfg.model, g);
  auto os = out.result();
  sol.write_csv(os);
  write_riccati(sol, out, "riccati.csv");
  write_yield_curve(cfg, out);
  const double e = sol.exponent(g.t0, cfg.x0);
  checks["finite"] = std::isfinite(e);
  return {{"steps", g.steps}, {"P", std::exp(e)}, {"V", -e}};
}

std::vector<KernelSpec> build_kernels(const RunConfig& cfg, const TimeGrid& grid) {
  const int n = dimension(cfg.model);
  std::shared_ptr<const RiccatiSolution> sol;
  std::vector<KernelSpec> out;
  for (const auto& kc : cfg.kernels) {
    KernelSpec k = KernelSpec::zero(n);
    if (kc.kind == "constant") {
      k = KernelSpec::constant(kc.u);
    } else if (kc.kind == "affine") {
      k = KernelSpec::affine(kc.c, kc.M);
    } else if (kc.kind == "optimal") {
      if (!sol) sol = std::make_shared<const RiccatiSolution>(solve_model(cfg.model, grid));
      k = optimal_kernel(sol, cfg.model);
    }
    k.label = kc.label;
    out.push_back(std::move(k));
  }
  return out;
}

ordered_json task_verify_duality(const RunConfig& cfg, const Outputs& out, unsigned threads,
                                 ordered_json& checks) {
  const auto kernels = build_kernels(cfg, cfg.grid);
  const auto rep =
      duality_check(cfg.model, cfg.x0, kernels, cfg.grid, cfg.mc->n_paths, cfg.mc->seed, threads);
  auto os = out.result();
  csv::write_header(os, {"kernel", "objective", "objective_se", "entropy", "entropy_se", "gap",
                         "gap_se", "vs_optimal", "vs_optimal_se", "lower_bound_ok", "entropy_ok",
                         "attained_ok", "not_beaten_ok"});
  ordered_json rows = ordered_json::array();
  for (const auto& r : rep.rows) {
    labelled_row(os, {r.kernel},
                 {r.objective.mean, r.objective.std_error, r.entropy.mean, r.entropy.std_error,
                  r.gap, r.gap_se, r.vs_optimal.mean, r.vs_optimal.std_error,
                  r.lower_bound_ok ? 1.0 : 0.0, r.entropy_ok ? 1.0 : 0.0, r.attained_ok ? 1.0 : 0.0,
                  r.not_beaten_ok ? 1.0 : 0.0});
    rows.push_back({{"kernel", r.kernel}, {"J", r.objective.mean}, {"H", r.entropy.mean},
                    {"gap", r.gap}, {"gap_se", r.gap_se}});
    const std::string key = "kernel_" + r.kernel;
    checks[key + "_lower_bound"] = r.lower_bound_ok;
    checks[key + "_entropy_nonnegative"] = r.entropy_ok;
    checks[key + "_not_better_than_optimal"] = r.not_beaten_ok;
    if (r.is_optimal) checks[key + "_attains_value"] = r.attained_ok;
  }
  return {{"V", rep.value_closed_form}, {"rows", rows}};
}

ordered_json task_verify_fbsde(const RunConfig& cfg, const Outputs& out, unsigned threads,
                               ordered_json& checks) {
  const auto rep = fbsde_residual_check(cfg.model, cfg.x0, cfg.grid, cfg.mc->n_paths, cfg.mc->seed,
                                        cfg.verify.halvings, threads);
  auto os = out.result();
  csv::write_header(os, {"dt", "steps", "mean_abs_residual", "max_abs_residual",
                         "mean_abs_step_residual", "terminal_mismatch", "ratio"});
  bool finite = true;
  double terminal = 0.0;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    const auto& l = rep.levels[i];
    const double ratio = i == 0 ? std::numeric_limits<double>::quiet_NaN() : rep.ratios[i - 1];
    const double row[] = {l.dt, static_cast<double>(l.steps), l.mean_abs_residual, l.max_abs_residual,
                          l.mean_abs_step_residual, l.terminal_mismatch, ratio};
    csv::write_row(os, row);
    finite = finite && std::isfinite(l.mean_abs_residual) && std::isfinite(l.max_abs_residual);
    terminal = std::max(terminal, l.terminal_mismatch);
  }
  checks["finite"] = finite;
  checks["decreases_under_halving"] = rep.monotone();
  checks["terminal_condition_exact"] = terminal <= 1e-12;
  return {{"mean_abs_residual", rep.levels.front().mean_abs_residual}, {"ratios", rep.ratios}};
}

ordered_json task_verify_density(const RunConfig& cfg, const Outputs& out, unsigned threads,
                                 ordered_json& checks) {
  std::vector<DensityReport> levels;
  TimeGrid g = cfg.grid;
  for (int i = 0; i <= cfg.verify.refinements; ++i) {
    levels.push_back(density_identity_check(cfg.model, cfg.x0, g, cfg.mc->n_paths, cfg.mc->seed, threads));
    g.steps *= 4;
  }
  auto os = out.result();
  csv::write_header(os, {"dt", "steps", "mean_abs", "median_abs", "max_abs", "median_ratio"});
  bool decreasing = true;
  std::vector<double> ratios;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    double ratio = std::numeric_limits<double>::quiet_NaN();
    if (i > 0) {
      ratio = l.median_abs / levels[i - 1].median_abs;
      ratios.push_back(ratio);
      decreasing = decreasing && l.median_abs < levels[i - 1].median_abs;
    }
    const double row[] = {l.dt, static_cast<double>(l.steps), l.mean_abs, l.median_abs, l.max_abs, ratio};
    csv::write_row(os, row);
  }
  checks["discrepancy_decreases"] = decreasing;
  return {{"median_abs", levels.front().median_abs}, {"median_ratios_per_quartering", ratios}};
}

ordered_json task_verify_osc(const RunConfig& cfg, const Outputs& out, ordered_json& checks) {
  const auto& spec = std::get<QuadraticModelSpec>(cfg.model);
  std::vector<Vector> states = cfg.verify.states;
  if (states.empty()) {
    const std::uint64_t seed = cfg.mc ? cfg.mc->seed : 1;
    Philox4x32 rng(derive_key(seed, rng_purpose::sample_states), 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < cfg.verify.n_states; ++i) {
      Vector x(spec.dim());
      for (int j = 0; j < spec.dim(); ++j) x(j) = cfg.x0(j) + normal(rng);
      states.push_back(std::move(x));
    }
  }
  const auto rep = osc_equivalence_check(spec, cfg.grid, states);
  auto os = out.result();
  csv::write_header(os, {"nodes", "states", "max_kernel_diff", "max_value_diff"});
  const double row[] = {static_cast<double>(rep.nodes), static_cast<double>(rep.states),
                        rep.max_kernel_diff, rep.max_value_diff};
  csv::write_row(os, row);
  checks["kernel_identity"] = rep.max_kernel_diff <= 1e-8;
  checks["value_identity"] = rep.max_value_diff <= 1e-8;

  const auto osc = solve_osc_lqg(spec, cfg.grid);
  const auto sol = solve_model(cfg.model, cfg.grid);
  auto pc = out.plot("osc_value.csv");
  csv::write_header(pc, {"s", "W", "V"});
  for (int i = 0; i <= cfg.grid.steps; ++i) {
    const double s = cfg.grid.node(i);
    const double r[] = {s, osc.value(s, cfg.x0), -sol.exponent(s, cfg.x0)};
    csv::write_row(pc, r);
  }
  return {{"max_kernel_diff", rep.max_kernel_diff}, {"max_value_diff", rep.max_value_diff}};
}

ordered_json task_verify_jump_reduction(const RunConfig& cfg, const Outputs& out,
                                        ordered_json& checks) {
  const auto rep = jump_reduction_check(cfg.model, cfg.grid);
  auto os = out.result();
  csv::write_header(os, {"removable", "max_coefficient_diff"});
  const double row[] = {rep.removable ? 1.0 : 0.0, rep.max_coefficient_diff};
  csv::write_row(os, row);
  if (rep.removable) checks["agreement"] = rep.passed();
  return {{"removable", rep.removable}, {"max_coefficient_diff", rep.max_coefficient_diff}};
}

ordered_json task_credit_decomposition(const RunConfig& cfg, const Outputs& out, unsigned threads,
                                       ordered_json& checks) {
  const auto& credit = cfg.credit->spec;
  const auto rep =
      decomposition_check(cfg.model, credit, cfg.x0, cfg.grid, cfg.mc->n_paths, cfg.mc->seed, threads);
  auto os = out.result();
  csv::write_header(os, {"eta", "lambda0", "D_mc", "D_mc_se", "D_mc_ci_lo", "D_mc_ci_hi", "D_decomp",
                         "D_decomp_se", "discrepancy", "joint_se", "P", "p_t"});
  const double row[] = {credit.eta, credit.lambda0, rep.d_mc.mean, rep.d_mc.std_error, rep.d_mc.ci_lo,
                        rep.d_mc.ci_hi, rep.d_decomp, rep.d_decomp_se, rep.discrepancy,
                        rep.joint_se, rep.bond, rep.p_bsde.p_t};
  csv::write_row(os, row);
  checks["finite"] = std::isfinite(rep.d_decomp) && std::isfinite(rep.d_mc.mean);
  if (credit.recovery == RecoveryScheme::FractionalFace) {
    const double se = rep.d_mc.std_error;
    checks["bounds_eta_P_le_D_le_P"] =
        rep.d_mc.mean >= credit.eta * rep.bond - 3.0 * se && rep.d_mc.mean <= rep.bond + 3.0 * se;
  }
  ordered_json head{{"D_mc", estimate_json(rep.d_mc)}, {"D_decomp", rep.d_decomp},
                    {"discrepancy", rep.discrepancy}, {"joint_se", rep.joint_se},
                    {"p_t", rep.p_bsde.p_t}};

  if (cfg.credit->method == PBsdeMethod::lsmc) {
    const auto pb = solve_p_bsde(cfg.model, credit, cfg.x0, cfg.grid, cfg.mc->n_paths, cfg.mc->seed,
                                 PBsdeMethod::lsmc, threads);
    auto pc = out.plot("lsmc.csv");
    csv::write_header(pc, {"s", "r2", "p_alive_x0", "p_defaulted_x0"});
    for (std::size_t i = pb.surfaces.size(); i-- > 0;) {
      const auto& node = pb.surfaces[i];
      const double r[] = {node.s, node.r2, pb.surface_value(i, cfg.x0, true),
                          pb.surface_value(i, cfg.x0, false)};
      csv::write_row(pc, r);
    }
    head["lsmc_mean_r2"] = pb.r2;
  }
  return head;
}

}  // namespace

ordered_json run_task(const RunConfig& cfg, const fs::path& out_dir, unsigned threads,
                      std::ostream& log) {
  const Outputs out(out_dir);
  ordered_json checks = ordered_json::object();
  ordered_json head;
  const auto& t = cfg.task;
  if (t == "price-bond") {
    head = task_price_bond(cfg, out, threads, checks);
  } else if (t == "price-futures") {
    head = task_price_futures(cfg, out, threads, checks);
  } else if (t == "price-forward") {
    head = task_price_forward(cfg, out, threads, checks);
  } else if (t == "price-defaultable") {
    head = task_price_defaultable(cfg, out, threads, checks);
  } else if (t == "riccati-dump") {
    head = task_riccati_dump(cfg, out, checks);
  } else if (t == "verify-duality") {
    head = task_verify_duality(cfg, out, threads, checks);
  } else if (t == "verify-fbsde") {
    head = task_verify_fbsde(cfg, out, threads, checks);
  } else if (t == "verify-density") {
    head = task_verify_density(cfg, out, threads, checks);
  } else if (t == "verify-osc") {
    head = task_verify_osc(cfg, out, checks);
  } else if (t == "verify-jump-reduction") {
    head = task_verify_jump_reduction(cfg, out, checks);
  } else {
    head = task_credit_decomposition(cfg, out, threads, checks);
  }

  bool passed = true;
  for (const auto& [name, ok] : checks.items()) {
    passed = passed && ok.get<bool>();
    log << (ok.get<bool>() ? "PASS " : "FAIL ") << name << '\n';
  }
  ordered_json summary{{"task", t},
                       {"inputs_hash", inputs_hash(cfg.raw)},
                       {"headline", head},
                       {"checks", checks},
                       {"passed", passed}};
  out.summary(summary);
  return summary;
}

int run_command(const fs::path& config_path, const fs::path& out,
                const std::vector<std::string>& overrides, unsigned threads, std::ostream& log,
                std::ostream& err) {
  try {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("<file>", "cannot read " + config_path.string());
    nlohmann::json doc = nlohmann::json::parse(is, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("<root>", "not valid JSON");
    for (const auto& o : overrides) apply_override(doc, o);
    const RunConfig cfg = parse_config(doc);
    const auto summary = run_task(cfg, out, threads, log);
    return summary["passed"].get<bool>() ? exit_code::ok : exit_code::assertion_failed;
  } catch (const ConfigError& e) {
    err << "config error at " << e.what() << '\n';
    return exit_code::config_error;
  } catch (const UnsupportedCombination& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config_error;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config_error;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_code::numerical_failure;
  } catch (const fs::filesystem_error& e) {
    err << "output error: " << e.what() << '\n';
    return exit_code::config_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::numerical_failure;
  }
}

}  // namespace omt::app
