#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sodbench/eval.hpp"
#include "sodbench/image.hpp"
#include "sodbench/model.hpp"
#include "sodbench/multipixel.hpp"
#include "sodbench/noise.hpp"
#include "sodbench/patch.hpp"

namespace sodbench {

struct DatasetPair {
  std::string stem;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
};

struct DatasetManifest {
  std::string name;
  std::string split;  // "train" or "test"
  std::vector<DatasetPair> pairs;      // lexicographic by stem
  std::vector<std::string> file_errors;  // orphans and dimension mismatches
};

// Naming rule: "<image-pattern>|<mask-pattern>", each pattern a path
// relative to the dataset root with one "{stem}" placeholder, e.g. the
// default "images/{stem}.png|GT/{stem}.png". Image files matching the image
// pattern define the stems; a missing mask or a mask whose header reports
// different dimensions is listed in file_errors and the pair is dropped.
inline const char* kDefaultNamingRule = "images/{stem}.png|GT/{stem}.png";

DatasetManifest scan_dataset(const std::filesystem::path& root,
                             const std::string& rule = kDefaultNamingRule,
                             const std::string& split = "test");

std::vector<LabeledPair> load_pairs(const DatasetManifest& manifest);

enum class SynthDifficulty { Blob, LowContrast, Cluttered };

SynthDifficulty synth_difficulty_from_name(const std::string& name);

// Procedurally generated image/mask pairs written under root (default
// layout). Blob: large high-contrast ellipse. LowContrast: small object a
// few byte-units brighter than a shaded background (per-channel offset <= 20
// by construction). Cluttered: blob plus distractor shapes kept out of the
// mask. Deterministic in (n, dims, difficulty, seed).
DatasetManifest synth_dataset(int n, int height, int width, SynthDifficulty difficulty,
                              std::uint64_t seed, const std::filesystem::path& root,
                              const std::string& split = "test");

// ---------------------------------------------------------------------------
// Attack suite
// ---------------------------------------------------------------------------

struct IdentityAttack {};
struct FgsmAttack {
  double epsilon = 8.0;
};
struct MultipixelAttackSpec {
  int d = 0;  // 0: use 3% of the image's pixels
  int pop_size = 40;
  int max_iters = 50;
};
struct PatchAttack {
  int side = 70;
  std::string patch_file;  // empty: train against the source model
  PatchTrainSpec train;
};

struct AttackSpec {
  std::string id;     // directory name, unique within a suite
  std::string label;  // report column header
  std::variant<IdentityAttack, FgsmAttack, MultipixelAttackSpec, PatchAttack, NoiseSpec> kind;

  bool needs_gradient_source() const;
  bool needs_query_source() const;
};

// The twelve standard columns: six FGSM budgets, multipixel, two patch sizes,
// and the three noises.
std::vector<AttackSpec> default_attack_suite();

struct AeImageRecord {
  std::string stem;
  std::string file;  // relative to the set directory
  double l0 = 0.0;
  double linf = 0.0;
  std::string error;  // empty when the attack succeeded
  std::optional<PatchPlacement> placement;  // patch attacks
};

struct AeSetManifest {
  std::string source_dataset;
  std::string attack_id;
  std::string attack_label;
  std::string params_json;   // serialized attack parameters
  std::string source_model;  // empty for source-free attacks
  std::uint64_t seed = 0;
  std::vector<AeImageRecord> images;
  double coverage_ratio_mean = 0.0;  // patch attacks only
};

// Canonical JSON for an attack's parameters, shared by the run config and
// the AE manifests.
std::string attack_params_json(const AttackSpec& attack);

// Materializes one perturbed copy of the dataset under
// out_dir/<attack-id>/{images/, manifest.json}. Distances are measured
// between the quantized saved AE and the original image. Multipixel edit
// lists go to a JSON-lines sidecar beside each AE; the patch and its
// placements are recorded in the set directory. Idempotent for a fixed seed.
AeSetManifest materialize_ae_set(const DatasetManifest& dataset, const AttackSpec& attack,
                                 const SodModel* query_source, const GradientOracle* grad_source,
                                 const std::string& source_model_name,
                                 const std::filesystem::path& out_dir, std::uint64_t seed,
                                 const FBetaConfig& cfg = {});

void write_ae_manifest(const AeSetManifest& manifest, const std::filesystem::path& path);

// Loads AE images from a materialized set, paired with the original masks.
std::vector<LabeledPair> load_ae_pairs(const DatasetManifest& dataset,
                                       const std::filesystem::path& set_dir);

}  // namespace sodbench
