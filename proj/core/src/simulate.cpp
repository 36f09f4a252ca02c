#include "omt/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "omt/csv.hpp"
#include "omt/errors.hpp"
#include "omt/rng.hpp"

namespace omt {

namespace {

// Per-thread scratch so the inner loop does not allocate.
struct Workspace {
  Vector x, xn, drift, dW, u, tmp, wq;
  Matrix vol;

  explicit Workspace(int n)
      : x(n), xn(n), drift(n), dW(n), u(Vector::Zero(n)), tmp(n), wq(0), vol(n, n) {}
};

double rate_of(const AffineModelSpec& m, const Vector& x, Vector&) { return m.R.dot(x) + m.k; }

double rate_of(const QuadraticModelSpec& m, const Vector& x, Vector& tmp) {
  tmp.noalias() = m.Q * x;
  return x.dot(tmp) + m.R.dot(x) + m.k;
}

double intensity_of(const AffineModelSpec& m, const Vector& x, Vector&) {
  return m.jump->L.dot(x) + m.jump->l;
}

double intensity_of(const QuadraticModelSpec& m, const Vector& x, Vector& tmp) {
  tmp.noalias() = m.jump->L2 * x;
  return x.dot(tmp) + m.jump->L1.dot(x) + m.jump->l;
}

void volatility_of(const AffineModelSpec& m, const Vector& x, Matrix& vol) {
  const int n = m.dim();
  for (int i = 0; i < n; ++i) {
    const double var = m.alpha(i) + m.beta.row(i).dot(x);
    vol.col(i) = m.S.col(i) * std::sqrt(std::max(var, 0.0));
  }
}

void volatility_of(const QuadraticModelSpec& m, const Vector&, Matrix& vol) { vol = m.Sigma; }

struct PathOutputs {
  PathEnsemble* ens;
  bool store_paths;
  bool store_increments;
};

template <class Model>
void simulate_path(const Model& m, const TimeGrid& grid, std::uint64_t seed, int path,
                   const KernelSpec& kernel, Workspace& ws, PathOutputs out) {
  const int n = m.dim();
  const int steps = grid.steps;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const bool tilted = !kernel.is_zero();
  const DiscreteMeasure* measure = m.jump ? &m.jump->measure : nullptr;
  const bool jumps = measure != nullptr && !measure->empty();
  const bool tilt_jumps = jumps && kernel.has_jump_kernel();

  Philox4x32 diffusion_rng(derive_key(seed, rng_purpose::diffusion), static_cast<std::uint64_t>(path));
  Philox4x32 jump_rng(derive_key(seed, rng_purpose::jumps), static_cast<std::uint64_t>(path));
  std::normal_distribution<double> normal(0.0, 1.0);

  PathEnsemble& ens = *out.ens;
  ws.x = ens.x0;
  double rate = 0.0;
  double log_w = 0.0;
  double entropy = 0.0;
  auto& marks = ens.jump_marks[path];
  double* path_states =
      out.store_paths ? ens.states.data() + static_cast<std::size_t>(path) * (steps + 1) * n : nullptr;
  double* path_incs =
      out.store_increments ? ens.increments.data() + static_cast<std::size_t>(path) * steps * n
                           : nullptr;
  const double mass_p = jumps ? measure->total_mass() : 0.0;
  if (tilt_jumps) ws.wq.resize(static_cast<Eigen::Index>(measure->atoms.size()));

  for (int i = 0; i < steps; ++i) {
    const double s = grid.node(i);
    if (path_states) std::copy(ws.x.data(), ws.x.data() + n, path_states + static_cast<std::size_t>(i) * n);

    rate += rate_of(m, ws.x, ws.tmp) * dt;
    for (int j = 0; j < n; ++j) ws.dW(j) = sqdt * normal(diffusion_rng);

    volatility_of(m, ws.x, ws.vol);
    ws.drift.noalias() = m.A * ws.x;
    ws.drift += m.B;
    if (tilted) {
      kernel.eval(s, ws.x, ws.u);
      if (!ws.u.allFinite()) {
        std::ostringstream os;
        os << "kernel '" << kernel.label << "' is not finite at s = " << s << " on path " << path;
        throw InvalidKernel(os.str());
      }
      ws.drift.noalias() += ws.vol * ws.u;
      const double half_u2 = 0.5 * ws.u.squaredNorm();
      // ln dQ/dP increment: -1/2|u|^2 dt + u dW^P with dW^P = dW^Q + u dt
      log_w += half_u2 * dt + ws.u.dot(ws.dW);
      entropy += half_u2 * dt;
    }
    if (path_incs) {
      for (int j = 0; j < n; ++j) {
        path_incs[static_cast<std::size_t>(i) * n + j] = ws.dW(j) + (tilted ? ws.u(j) * dt : 0.0);
      }
    }
    ws.xn = ws.x;
    ws.xn.noalias() += dt * ws.drift;
    ws.xn.noalias() += ws.vol * ws.dW;

    if (jumps) {
      const double lambda = std::max(intensity_of(m, ws.x, ws.tmp), 0.0);
      double mass_q = mass_p;
      if (tilt_jumps) {
        mass_q = 0.0;
        double ent_density = 0.0;
        for (std::size_t a = 0; a < measure->atoms.size(); ++a) {
          const double g = kernel.jump_kernel(s, measure->atoms[a]);
          const double eg = std::exp(g);
          ws.wq(static_cast<Eigen::Index>(a)) = measure->weights[a] * eg;
          mass_q += measure->weights[a] * eg;
          ent_density += measure->weights[a] * (g * eg - eg + 1.0);
        }
        entropy += lambda * ent_density * dt;
      }
      const double prob_p = std::min(lambda * mass_p * dt, 1.0);
      const double prob_q = std::min(lambda * mass_q * dt, 1.0);
      const double prob = tilt_jumps ? prob_q : prob_p;
      const double u_jump = jump_rng.uniform();
      const double u_atom = jump_rng.uniform();
      if (u_jump < prob) {
        const double total = tilt_jumps ? mass_q : mass_p;
        double target = u_atom * total;
        std::size_t atom = 0;
        for (; atom + 1 < measure->atoms.size(); ++atom) {
          const double w = tilt_jumps ? ws.wq(static_cast<Eigen::Index>(atom)) : measure->weights[atom];
          if (target < w) break;
          target -= w;
        }
        ws.xn += measure->atoms[atom];
        marks.push_back({i, static_cast<int>(atom)});
        if (tilt_jumps) {
          const double pick_q = prob_q * ws.wq(static_cast<Eigen::Index>(atom)) / mass_q;
          const double pick_p = prob_p * measure->weights[atom] / mass_p;
          log_w += std::log(pick_q) - std::log(pick_p);
        }
      } else if (tilt_jumps) {
        log_w += std::log1p(-prob_q) - std::log1p(-prob_p);
      }
    }

    if (!ws.xn.allFinite()) {
      std::ostringstream os;
      os << "simulation produced a non-finite state at s = " << grid.node(i + 1) << " on path "
         << path;
      throw NonFinite(os.str());
    }
    std::swap(ws.x, ws.xn);
  }
  if (path_states) {
    std::copy(ws.x.data(), ws.x.data() + n, path_states + static_cast<std::size_t>(steps) * n);
  }
  std::copy(ws.x.data(), ws.x.data() + n, ens.terminal_states.data() + static_cast<std::size_t>(path) * n);
  ens.rate_integrals[path] = rate;
  ens.log_rn_weights[path] = log_w;
  ens.entropy_integrals[path] = entropy;
}

template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little,
                "ensemble dump assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw InvalidArgument("truncated ensemble dump");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

Eigen::Map<const Vector> PathEnsemble::terminal(int path) const {
  return Eigen::Map<const Vector>(terminal_states.data() + static_cast<std::size_t>(path) * dim, dim);
}

Eigen::Map<const Vector> PathEnsemble::state(int path, int node) const {
  if (!has_paths()) throw InvalidArgument("ensemble was simulated without stored paths");
  const std::size_t offset = (static_cast<std::size_t>(path) * (grid.steps + 1) + node) * dim;
  return Eigen::Map<const Vector>(states.data() + offset, dim);
}

Eigen::Map<const Vector> PathEnsemble::increment(int path, int step) const {
  if (!has_increments()) throw InvalidArgument("ensemble was simulated without increments");
  const std::size_t offset = (static_cast<std::size_t>(path) * grid.steps + step) * dim;
  return Eigen::Map<const Vector>(increments.data() + offset, dim);
}

McEstimate McEstimate::from_samples(std::span<const double> samples) {
  McEstimate est;
  est.n = static_cast<long>(samples.size());
  if (samples.empty()) return est;
  double sum = 0.0;
  for (double v : samples) sum += v;
  est.mean = sum / static_cast<double>(est.n);
  if (est.n > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - est.mean) * (v - est.mean);
    est.std_error = std::sqrt(ss / static_cast<double>(est.n - 1) / static_cast<double>(est.n));
  }
  est.ci_lo = est.mean - 1.96 * est.std_error;
  est.ci_hi = est.mean + 1.96 * est.std_error;
  return est;
}

PathEnsemble simulate(const FactorModel& model, const Vector& x0, const TimeGrid& grid, int n_paths,
                      std::uint64_t seed, const KernelSpec& kernel,
                      const SimulationOptions& options) {
  grid.validate();
  const int n = dimension(model);
  if (x0.size() != n) throw InvalidArgument("simulate: x0 has wrong dimension");
  if (n_paths < 1) throw InvalidArgument("simulate: n_paths must be >= 1");
  if (kernel.dim() != n) throw InvalidArgument("simulate: kernel has wrong dimension");

  PathEnsemble ens;
  ens.seed = seed;
  ens.grid = grid;
  ens.n_paths = n_paths;
  ens.dim = n;
  ens.measure_tag = kernel.is_zero() ? MeasureTag::P : MeasureTag::Q_u;
  ens.x0 = x0;
  const auto np = static_cast<std::size_t>(n_paths);
  ens.terminal_states.assign(np * n, 0.0);
  ens.rate_integrals.assign(np, 0.0);
  ens.log_rn_weights.assign(np, 0.0);
  ens.entropy_integrals.assign(np, 0.0);
  ens.jump_marks.assign(np, {});
  if (options.store_paths) ens.states.assign(np * (grid.steps + 1) * n, 0.0);
  if (options.store_increments) ens.increments.assign(np * grid.steps * n, 0.0);

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp(threads, 1u, static_cast<unsigned>(n_paths));

  const PathOutputs out{&ens, options.store_paths, options.store_increments};
  auto run_range = [&](int begin, int end) {
    Workspace ws(n);
    std::visit(
        [&](const auto& m) {
          for (int path = begin; path < end; ++path) simulate_path(m, grid, seed, path, kernel, ws, out);
        },
        model);
  };

  if (threads == 1) {
    run_range(0, n_paths);
    return ens;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const int chunk = (n_paths + static_cast<int>(threads) - 1) / static_cast<int>(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const int begin = static_cast<int>(t) * chunk;
    const int end = std::min(n_paths, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end] {
      try {
        run_range(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return ens;
}

std::vector<double> discount_factors(const PathEnsemble& ensemble) {
  std::vector<double> out(ensemble.rate_integrals.size());
  std::transform(ensemble.rate_integrals.begin(), ensemble.rate_integrals.end(), out.begin(),
                 [](double r) { return std::exp(-r); });
  return out;
}

namespace {

void require_p(const PathEnsemble& ensemble, const char* what) {
  if (ensemble.measure_tag != MeasureTag::P) {
    throw InvalidArgument(std::string(what) + " needs an ensemble simulated under P");
  }
}

}  // namespace

McEstimate mc_bond_price(const PathEnsemble& ensemble) {
  require_p(ensemble, "mc_bond_price");
  const auto df = discount_factors(ensemble);
  return McEstimate::from_samples(df);
}

McEstimate mc_futures_price(const PathEnsemble& ensemble, const PriceModelSpec& pm) {
  require_p(ensemble, "mc_futures_price");
  std::vector<double> v(static_cast<std::size_t>(ensemble.n_paths));
  for (int i = 0; i < ensemble.n_paths; ++i) v[i] = pm.payoff(ensemble.terminal(i));
  return McEstimate::from_samples(v);
}

McEstimate mc_forward_numerator(const PathEnsemble& ensemble, const PriceModelSpec& pm) {
  require_p(ensemble, "mc_forward_numerator");
  std::vector<double> v(static_cast<std::size_t>(ensemble.n_paths));
  for (int i = 0; i < ensemble.n_paths; ++i) {
    v[i] = std::exp(-ensemble.rate_integrals[i]) * pm.payoff(ensemble.terminal(i));
  }
  return McEstimate::from_samples(v);
}

ReweightResult reweight(const PathEnsemble& ensemble, std::span<const double> payoff) {
  if (payoff.size() != static_cast<std::size_t>(ensemble.n_paths)) {
    throw InvalidArgument("reweight: payoff length differs from n_paths");
  }
  std::vector<double> weighted(payoff.size());
  for (std::size_t i = 0; i < payoff.size(); ++i) {
    weighted[i] = payoff[i] * std::exp(-ensemble.log_rn_weights[i]);
  }
  return {McEstimate::from_samples(weighted), McEstimate::from_samples(payoff)};
}

void write_ensemble_binary(std::ostream& os, const PathEnsemble& e) {
  os.write("OMTE", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, e.seed);
  put<double>(os, e.grid.t0);
  put<double>(os, e.grid.T);
  put<std::int32_t>(os, e.grid.steps);
  put<std::int32_t>(os, e.n_paths);
  put<std::int32_t>(os, e.dim);
  put<std::uint8_t>(os, e.measure_tag == MeasureTag::P ? 0 : 1);
  put<std::uint8_t>(os, e.has_paths() ? 1 : 0);
  put<std::uint8_t>(os, e.has_increments() ? 1 : 0);
  put<std::uint8_t>(os, 0);
  for (int j = 0; j < e.dim; ++j) put<double>(os, e.x0(j));
  const std::size_t node_block = static_cast<std::size_t>(e.grid.steps + 1) * e.dim;
  const std::size_t inc_block = static_cast<std::size_t>(e.grid.steps) * e.dim;
  for (int p = 0; p < e.n_paths; ++p) {
    put<double>(os, e.rate_integrals[p]);
    put<double>(os, e.log_rn_weights[p]);
    put<double>(os, e.entropy_integrals[p]);
    for (int j = 0; j < e.dim; ++j) put<double>(os, e.terminal_states[static_cast<std::size_t>(p) * e.dim + j]);
    if (e.has_paths()) {
      for (std::size_t k = 0; k < node_block; ++k) put<double>(os, e.states[p * node_block + k]);
    }
    if (e.has_increments()) {
      for (std::size_t k = 0; k < inc_block; ++k) put<double>(os, e.increments[p * inc_block + k]);
    }
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.jump_marks[p].size()));
    for (const auto& m : e.jump_marks[p]) {
      put<std::int32_t>(os, m.step);
      put<std::int32_t>(os, m.atom);
    }
  }
}

PathEnsemble read_ensemble_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "OMTE", 4) != 0) {
    throw InvalidArgument("not an ensemble dump");
  }
  if (get<std::uint32_t>(is) != 1) throw InvalidArgument("unsupported ensemble dump version");
  PathEnsemble e;
  e.seed = get<std::uint64_t>(is);
  e.grid.t0 = get<double>(is);
  e.grid.T = get<double>(is);
  e.grid.steps = get<std::int32_t>(is);
  e.n_paths = get<std::int32_t>(is);
  e.dim = get<std::int32_t>(is);
  e.measure_tag = get<std::uint8_t>(is) == 0 ? MeasureTag::P : MeasureTag::Q_u;
  const bool paths = get<std::uint8_t>(is) != 0;
  const bool incs = get<std::uint8_t>(is) != 0;
  (void)get<std::uint8_t>(is);
  e.x0.resize(e.dim);
  for (int j = 0; j < e.dim; ++j) e.x0(j) = get<double>(is);
  const auto np = static_cast<std::size_t>(e.n_paths);
  const std::size_t node_block = static_cast<std::size_t>(e.grid.steps + 1) * e.dim;
  const std::size_t inc_block = static_cast<std::size_t>(e.grid.steps) * e.dim;
  e.rate_integrals.resize(np);
  e.log_rn_weights.resize(np);
  e.entropy_integrals.resize(np);
  e.terminal_states.resize(np * e.dim);
  e.jump_marks.resize(np);
  if (paths) e.states.resize(np * node_block);
  if (incs) e.increments.resize(np * inc_block);
  for (std::size_t p = 0; p < np; ++p) {
    e.rate_integrals[p] = get<double>(is);
    e.log_rn_weights[p] = get<double>(is);
    e.entropy_integrals[p] = get<double>(is);
    for (int j = 0; j < e.dim; ++j) e.terminal_states[p * e.dim + j] = get<double>(is);
    if (paths) {
      for (std::size_t k = 0; k < node_block; ++k) e.states[p * node_block + k] = get<double>(is);
    }
    if (incs) {
      for (std::size_t k = 0; k < inc_block; ++k) e.increments[p * inc_block + k] = get<double>(is);
    }
    const auto count = get<std::uint32_t>(is);
    e.jump_marks[p].reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
      const int step = get<std::int32_t>(is);
      const int atom = get<std::int32_t>(is);
      e.jump_marks[p].push_back({step, atom});
    }
  }
  return e;
}

void write_estimates_csv(std::ostream& os,
                         const std::vector<std::pair<std::string, McEstimate>>& rows) {
  csv::write_header(os, {"estimate", "mean", "std_error", "n", "ci_lo", "ci_hi"});
  for (const auto& [name, est] : rows) {
    os << name << ',';
    const double vals[] = {est.mean, est.std_error, static_cast<double>(est.n), est.ci_lo, est.ci_hi};
    csv::write_row(os, vals);
  }
}

}  // namespace omt
