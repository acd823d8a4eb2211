#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sodbench/dataset.hpp"
#include "sodbench/eval.hpp"
#include "sodbench/gp.hpp"
#include "sodbench/model.hpp"

namespace sodbench {

struct ModelRef {
  std::string name;
  std::string kind;  // "linear" | "heuristic" | "gp"
  std::filesystem::path file;  // weight file (linear) or program file (gp)
};

struct ContinuityConfig {
  std::vector<double> deltas = {1.0, 4.0, 16.0};
  int samples = 32;
  std::string norm = "linf";  // or "l2"
  int images = 4;             // probes run on the first N test images
};

// The effective run configuration. Relative paths in the file resolve
// against the config file's directory.
struct RunConfig {
  std::filesystem::path train_root;
  std::filesystem::path test_root;
  std::string naming_rule = kDefaultNamingRule;
  std::string dataset_name;

  std::vector<ModelRef> models;
  std::string source_model;  // AE source for white-box / query attacks

  std::vector<AttackSpec> attacks;  // default suite when the file says "default"
  FBetaConfig eval;
  ContinuityConfig continuity;

  EvolutionParams gp;
  LinearFitParams linear_fit;

  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  bool desk_scale = false;
};

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool desk_scale = false;
};

RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides);

// Hash of the canonical serialized effective config; embedded in every
// report so artifacts can be traced to the exact run parameters.
std::string run_config_hash(const RunConfig& config);

}  // namespace sodbench
