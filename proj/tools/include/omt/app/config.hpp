#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "omt/credit.hpp"
#include "omt/model.hpp"
#include "omt/riccati.hpp"

namespace omt::app {

/// Bad or missing config field. `path` is the dotted location, e.g. "grid.T".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {
      "price-bond",    "price-futures", "price-forward",  "price-defaultable",
      "riccati-dump",  "verify-duality", "verify-fbsde",  "verify-density",
      "verify-osc",    "verify-jump-reduction", "credit-decomposition"};
  return names;
}

struct McConfig {
  int n_paths = 10000;
  std::uint64_t seed = 1;
};

struct KernelConfig {
  std::string kind;  // zero | constant | affine | optimal
  std::string label;
  Vector u;  // constant
  Vector c;  // affine
  Matrix M;  // affine
};

struct CreditConfig {
  CreditSpec spec;
  PBsdeMethod method = PBsdeMethod::plain_mc;
};

struct VerifyConfig {
  int halvings = 2;     // verify-fbsde
  int refinements = 1;  // verify-density, each one quarters the step
  std::vector<Vector> states;  // verify-osc; random states when empty
  int n_states = 10;
};

struct RunConfig {
  std::string task;
  FactorModel model;
  Vector x0;
  TimeGrid grid;
  int riccati_steps = 0;  // 0 = default resolution
  std::optional<McConfig> mc;
  std::optional<PriceModelSpec> price_model;
  std::vector<KernelConfig> kernels;
  std::optional<CreditConfig> credit;
  std::vector<double> maturities;
  VerifyConfig verify;
  nlohmann::json raw;  // the document after overrides
};

/// Applies one "dotted.key=value" override. The value is read as JSON when it
/// parses, otherwise as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

[[nodiscard]] RunConfig parse_config(const nlohmann::json& doc);

/// 64-bit FNV-1a of the canonical JSON text, as 16 hex digits.
[[nodiscard]] std::string inputs_hash(const nlohmann::json& doc);

}  // namespace omt::app
