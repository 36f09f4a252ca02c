#include "omt/app/config.hpp"

#include <algorithm>
#include <cstdio>

namespace omt::app {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key), "required field missing");
  return *it;
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ConfigError(join(path, key), "unknown field");
  }
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, join(path, key));
}

long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<long>();
}

Vector vector(const json& v, const std::string& path, int n = -1) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  if (n >= 0 && static_cast<int>(v.size()) != n) {
    throw ConfigError(path, "expected " + std::to_string(n) + " entries, got " +
                                std::to_string(v.size()));
  }
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = number(v[i], path + "." + std::to_string(i));
  }
  return out;
}

Matrix matrix(const json& v, const std::string& path, int rows, int cols) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows) {
    throw ConfigError(path, "expected " + std::to_string(rows) + " rows");
  }
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    out.row(i) = vector(v[static_cast<std::size_t>(i)], path + "." + std::to_string(i), cols).transpose();
  }
  return out;
}

DiscreteMeasure measure(const json& obj, const std::string& path, int n) {
  DiscreteMeasure m;
  const auto& atoms = require(obj, "atoms", path);
  const auto& weights = require(obj, "weights", path);
  if (!atoms.is_array()) throw ConfigError(join(path, "atoms"), "expected an array");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    m.atoms.push_back(vector(atoms[i], join(path, "atoms") + "." + std::to_string(i), n));
  }
  const Vector w = vector(weights, join(path, "weights"), static_cast<int>(m.atoms.size()));
  m.weights.assign(w.data(), w.data() + w.size());
  return m;
}

// Maps a failed validation check to the config field it concerns.
std::string field_for_check(const std::string& base, const std::string& check) {
  static const std::pair<const char*, const char*> map[] = {
      {"singular_S", "S"},        {"variance_at_x0", "alpha"}, {"negative_alpha", "alpha"},
      {"measure_empty", "jump.atoms"}, {"measure_weight", "jump.weights"},
      {"intensity_level", "jump.l"}, {"Q_symmetric", "Q"}, {"Q_psd", "Q"},
      {"apm_B_T", "B_T"},         {"B_T_symmetric", "B_T"}, {"eta_range", "eta"},
      {"lambda0_sign", "lambda0"}};
  for (const auto& [name, field] : map) {
    if (check == name) return join(base, field);
  }
  if (check.rfind("L2", 0) == 0) return join(base, "jump.L2");
  return base;
}

void raise_on(const ValidationReport& report, const std::string& base) {
  if (report.ok()) return;
  const auto& issue = report.issues.front();
  throw ConfigError(field_for_check(base, issue.check), issue.check + ": " + issue.message);
}

AffineModelSpec parse_affine(const json& obj, const std::string& path) {
  reject_unknown(obj, path, {"A", "B", "S", "alpha", "beta", "R", "k", "jump"});
  AffineModelSpec m;
  m.B = vector(require(obj, "B", path), join(path, "B"));
  const int n = m.dim();
  if (n < 1) throw ConfigError(join(path, "B"), "model needs at least one factor");
  m.A = matrix(require(obj, "A", path), join(path, "A"), n, n);
  m.S = matrix(require(obj, "S", path), join(path, "S"), n, n);
  m.alpha = vector(require(obj, "alpha", path), join(path, "alpha"), n);
  m.beta = matrix(require(obj, "beta", path), join(path, "beta"), n, n);
  m.R = vector(require(obj, "R", path), join(path, "R"), n);
  m.k = number_or(obj, "k", path, 0.0);
  if (const auto it = obj.find("jump"); it != obj.end()) {
    const std::string jp = join(path, "jump");
    reject_unknown(*it, jp, {"L", "l", "atoms", "weights"});
    JumpSpecAffine j;
    j.L = vector(require(*it, "L", jp), join(jp, "L"), n);
    j.l = number_or(*it, "l", jp, 0.0);
    j.measure = measure(*it, jp, n);
    m.jump = std::move(j);
  }
  return m;
}

QuadraticModelSpec parse_quadratic(const json& obj, const std::string& path) {
  reject_unknown(obj, path, {"A", "B", "Sigma", "Q", "R", "k", "jump"});
  QuadraticModelSpec m;
  m.B = vector(require(obj, "B", path), join(path, "B"));
  const int n = m.dim();
  if (n < 1) throw ConfigError(join(path, "B"), "model needs at least one factor");
  m.A = matrix(require(obj, "A", path), join(path, "A"), n, n);
  m.Sigma = matrix(require(obj, "Sigma", path), join(path, "Sigma"), n, n);
  m.Q = matrix(require(obj, "Q", path), join(path, "Q"), n, n);
  m.R = vector(require(obj, "R", path), join(path, "R"), n);
  m.k = number_or(obj, "k", path, 0.0);
  if (const auto it = obj.find("jump"); it != obj.end()) {
    const std::string jp = join(path, "jump");
    reject_unknown(*it, jp, {"L2", "L1", "l", "atoms", "weights"});
    JumpSpecQuadratic j;
    j.L2 = it->contains("L2") ? matrix((*it)["L2"], join(jp, "L2"), n, n) : Matrix::Zero(n, n);
    j.L1 = it->contains("L1") ? vector((*it)["L1"], join(jp, "L1"), n) : Vector::Zero(n);
    j.l = number_or(*it, "l", jp, 0.0);
    j.measure = measure(*it, jp, n);
    m.jump = std::move(j);
  }
  return m;
}

bool task_needs_mc(const std::string& task) {
  return task == "price-defaultable" || task == "verify-duality" || task == "verify-fbsde" ||
         task == "verify-density" || task == "credit-decomposition";
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path segment in override");
    const bool index = std::all_of(part.begin(), part.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
    json* next = nullptr;
    if (node->is_array()) {
      if (!index) throw ConfigError(key, "array segment '" + part + "' must be an index");
      const auto i = std::stoul(part);
      if (i >= node->size()) throw ConfigError(key, "index " + part + " out of range");
      next = &(*node)[i];
    } else {
      if (!node->is_object() && !node->is_null()) {
        throw ConfigError(key, "cannot descend into a scalar at '" + part + "'");
      }
      next = &(*node)[part];
    }
    if (dot == std::string::npos) {
      *next = value;
      return;
    }
    node = next;
    start = dot + 1;
  }
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  reject_unknown(doc, "", {"task", "model", "x0", "grid", "riccati", "mc", "price_model", "kernels",
                           "credit", "maturities", "verify", "description"});
  RunConfig cfg;
  cfg.raw = doc;

  const auto& task = require(doc, "task", "");
  if (!task.is_string()) throw ConfigError("task", "expected a string");
  cfg.task = task.get<std::string>();
  const auto& names = task_names();
  if (std::find(names.begin(), names.end(), cfg.task) == names.end()) {
    throw ConfigError("task", "unknown task '" + cfg.task + "'");
  }

  const auto& model = require(doc, "model", "");
  if (!model.is_object()) throw ConfigError("model", "expected an object");
  const bool has_affine = model.contains("affine");
  const bool has_quadratic = model.contains("quadratic");
  if (has_affine == has_quadratic) {
    throw ConfigError("model", "exactly one of 'affine' or 'quadratic' is required");
  }
  reject_unknown(model, "model", {"affine", "quadratic"});
  if (has_affine) {
    cfg.model = parse_affine(model["affine"], "model.affine");
  } else {
    cfg.model = parse_quadratic(model["quadratic"], "model.quadratic");
  }
  const int n = dimension(cfg.model);
  cfg.x0 = vector(require(doc, "x0", ""), "x0", n);
  if (has_affine) {
    raise_on(validate_affine(std::get<AffineModelSpec>(cfg.model), cfg.x0), "model.affine");
  } else {
    raise_on(validate_quadratic(std::get<QuadraticModelSpec>(cfg.model)), "model.quadratic");
  }

  const auto& grid = require(doc, "grid", "");
  reject_unknown(grid, "grid", {"t0", "T", "steps"});
  cfg.grid.t0 = number_or(grid, "t0", "grid", 0.0);
  cfg.grid.T = number(require(grid, "T", "grid"), "grid.T");
  cfg.grid.steps = static_cast<int>(integer(require(grid, "steps", "grid"), "grid.steps"));
  if (!(cfg.grid.T > cfg.grid.t0)) throw ConfigError("grid.T", "must exceed grid.t0");
  if (cfg.grid.steps < 1) throw ConfigError("grid.steps", "must be >= 1");

  if (const auto it = doc.find("riccati"); it != doc.end()) {
    reject_unknown(*it, "riccati", {"steps"});
    if (it->contains("steps")) {
      cfg.riccati_steps = static_cast<int>(integer((*it)["steps"], "riccati.steps"));
      if (cfg.riccati_steps < 0) throw ConfigError("riccati.steps", "must be >= 0");
    }
  }

  if (const auto it = doc.find("mc"); it != doc.end()) {
    reject_unknown(*it, "mc", {"n_paths", "seed"});
    McConfig mc;
    mc.n_paths = static_cast<int>(integer(require(*it, "n_paths", "mc"), "mc.n_paths"));
    if (mc.n_paths < 2) throw ConfigError("mc.n_paths", "must be >= 2");
    const auto& seed = require(*it, "seed", "mc");
    if (!seed.is_number_unsigned()) throw ConfigError("mc.seed", "expected a non-negative integer");
    mc.seed = seed.get<std::uint64_t>();
    cfg.mc = mc;
  } else if (task_needs_mc(cfg.task)) {
    throw ConfigError("mc", "required field missing for task " + cfg.task);
  }

  if (const auto it = doc.find("price_model"); it != doc.end()) {
    reject_unknown(*it, "price_model", {"kind", "A_T", "B_T", "h_T"});
    PriceModelSpec pm;
    const auto& kind = require(*it, "kind", "price_model");
    if (kind == "APM") {
      pm.kind = PriceModelKind::APM;
    } else if (kind == "QPM") {
      pm.kind = PriceModelKind::QPM;
    } else {
      throw ConfigError("price_model.kind", "expected APM or QPM");
    }
    pm.A_T = vector(require(*it, "A_T", "price_model"), "price_model.A_T", n);
    pm.B_T = it->contains("B_T") ? matrix((*it)["B_T"], "price_model.B_T", n, n) : Matrix::Zero(n, n);
    pm.h_T = number_or(*it, "h_T", "price_model", 0.0);
    raise_on(validate_price_model(pm, n), "price_model");
    cfg.price_model = pm;
  } else if (cfg.task == "price-futures" || cfg.task == "price-forward") {
    throw ConfigError("price_model", "required field missing for task " + cfg.task);
  }

  if (const auto it = doc.find("kernels"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("kernels", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string kp = "kernels." + std::to_string(i);
      const auto& k = (*it)[i];
      reject_unknown(k, kp, {"kind", "label", "u", "c", "M"});
      KernelConfig kc;
      const auto& kind = require(k, "kind", kp);
      if (!kind.is_string()) throw ConfigError(kp + ".kind", "expected a string");
      kc.kind = kind.get<std::string>();
      if (kc.kind == "constant") {
        kc.u = vector(require(k, "u", kp), kp + ".u", n);
      } else if (kc.kind == "affine") {
        kc.c = vector(require(k, "c", kp), kp + ".c", n);
        kc.M = matrix(require(k, "M", kp), kp + ".M", n, n);
      } else if (kc.kind != "zero" && kc.kind != "optimal") {
        throw ConfigError(kp + ".kind", "expected zero, constant, affine or optimal");
      }
      kc.label = k.contains("label") ? k["label"].get<std::string>() : kc.kind;
      cfg.kernels.push_back(std::move(kc));
    }
  }
  if (cfg.task == "verify-duality") {
    if (cfg.kernels.empty()) throw ConfigError("kernels", "required field missing for task verify-duality");
    const bool has_opt = std::any_of(cfg.kernels.begin(), cfg.kernels.end(),
                                     [](const KernelConfig& k) { return k.kind == "optimal"; });
    if (!has_opt) throw ConfigError("kernels", "the kernel list must include the optimal kernel");
  }

  if (const auto it = doc.find("credit"); it != doc.end()) {
    reject_unknown(*it, "credit", {"Lambda", "lambda0", "recovery", "eta", "method"});
    CreditConfig cc;
    cc.spec.Lambda = it->contains("Lambda") ? vector((*it)["Lambda"], "credit.Lambda", n) : Vector::Zero(n);
    cc.spec.lambda0 = number_or(*it, "lambda0", "credit", 0.0);
    cc.spec.eta = number(require(*it, "eta", "credit"), "credit.eta");
    const std::string recovery = it->value("recovery", std::string("face"));
    if (recovery == "face") {
      cc.spec.recovery = RecoveryScheme::FractionalFace;
    } else if (recovery == "pre-default") {
      cc.spec.recovery = RecoveryScheme::FractionalPreDefault;
    } else {
      throw ConfigError("credit.recovery", "expected face or pre-default");
    }
    const std::string method = it->value("method", std::string("plain_mc"));
    if (method == "plain_mc") {
      cc.method = PBsdeMethod::plain_mc;
    } else if (method == "lsmc") {
      cc.method = PBsdeMethod::lsmc;
    } else {
      throw ConfigError("credit.method", "expected plain_mc or lsmc");
    }
    raise_on(validate_credit(cc.spec, n), "credit");
    cfg.credit = cc;
  } else if (cfg.task == "price-defaultable" || cfg.task == "credit-decomposition") {
    throw ConfigError("credit", "required field missing for task " + cfg.task);
  }

  if (const auto it = doc.find("maturities"); it != doc.end()) {
    const Vector m = vector(*it, "maturities");
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (!(m(i) > cfg.grid.t0)) {
        throw ConfigError("maturities." + std::to_string(i), "must exceed grid.t0");
      }
      cfg.maturities.push_back(m(i));
    }
  }

  if (const auto it = doc.find("verify"); it != doc.end()) {
    reject_unknown(*it, "verify", {"halvings", "refinements", "states", "n_states"});
    if (it->contains("halvings")) {
      cfg.verify.halvings = static_cast<int>(integer((*it)["halvings"], "verify.halvings"));
      if (cfg.verify.halvings < 1) throw ConfigError("verify.halvings", "must be >= 1");
    }
    if (it->contains("refinements")) {
      cfg.verify.refinements = static_cast<int>(integer((*it)["refinements"], "verify.refinements"));
      if (cfg.verify.refinements < 1) throw ConfigError("verify.refinements", "must be >= 1");
    }
    if (it->contains("n_states")) {
      cfg.verify.n_states = static_cast<int>(integer((*it)["n_states"], "verify.n_states"));
      if (cfg.verify.n_states < 1) throw ConfigError("verify.n_states", "must be >= 1");
    }
    if (it->contains("states")) {
      const auto& st = (*it)["states"];
      if (!st.is_array()) throw ConfigError("verify.states", "expected an array");
      for (std::size_t i = 0; i < st.size(); ++i) {
        cfg.verify.states.push_back(vector(st[i], "verify.states." + std::to_string(i), n));
      }
    }
  }

  if (cfg.task == "verify-osc" && is_affine(cfg.model)) {
    throw ConfigError("model", "verify-osc needs a quadratic model");
  }
  if (cfg.task == "verify-osc" && has_jumps(cfg.model)) {
    throw ConfigError("model.quadratic.jump", "verify-osc needs a jump-free model");
  }
  if (cfg.task == "verify-jump-reduction" && jump_measure(cfg.model) == nullptr) {
    throw ConfigError(has_affine ? "model.affine.jump" : "model.quadratic.jump",
                      "required field missing for task verify-jump-reduction");
  }
  return cfg;
}

std::string inputs_hash(const json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace omt::app
