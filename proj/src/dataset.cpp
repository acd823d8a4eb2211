#include "sodbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>

#include "sodbench/error.hpp"
#include "sodbench/fgsm.hpp"
#include "sodbench/image_io.hpp"

namespace sodbench {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Pattern {
  std::filesystem::path dir;  // relative to the dataset root
  std::string prefix;         // filename before {stem}
  std::string suffix;         // filename after {stem}
};

Pattern parse_pattern(const std::string& text) {
  const std::size_t at = text.find("{stem}");
  if (at == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "naming rule pattern lacks {stem}: " + text);
  }
  const std::filesystem::path as_path(text);
  Pattern p;
  p.dir = as_path.parent_path();
  const std::string file = as_path.filename().string();
  const std::size_t file_at = file.find("{stem}");
  if (file_at == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "{stem} must be part of the filename: " + text);
  }
  p.prefix = file.substr(0, file_at);
  p.suffix = file.substr(file_at + 6);
  return p;
}

std::pair<Pattern, Pattern> parse_rule(const std::string& rule) {
  const std::size_t bar = rule.find('|');
  if (bar == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "naming rule needs '<image>|<mask>': " + rule);
  }
  return {parse_pattern(rule.substr(0, bar)), parse_pattern(rule.substr(bar + 1))};
}

std::string substitute(const Pattern& p, const std::string& stem) {
  return (p.dir / (p.prefix + stem + p.suffix)).generic_string();
}

// ---------------------------------------------------------------------------
// Synthetic fixtures
// ---------------------------------------------------------------------------

struct Ellipse {
  double cx, cy, rx, ry;
  bool contains(int x, int y) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
};

std::string synth_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", index);
  return buf;
}

// Shading shared by every image of a low-contrast set: per-image background
// variation stays small, so "slightly brighter than the local background" is
// a learnable cue, exactly the regime the real shorebird data sits in.
struct Shading {
  double grad_x = 0.0;
  double grad_y = 0.0;
};

void render_pair(int height, int width, SynthDifficulty difficulty, RngStream& rng,
                 const Shading& fixed_shading, Image& img, BinaryMask& mask) {
  img = Image::zeros(height, width);
  mask = BinaryMask::zeros(height, width);
  const double min_dim = std::min(height, width);

  double base[3];
  double grad_x = 0.0, grad_y = 0.0;
  if (difficulty == SynthDifficulty::LowContrast) {
    for (double& c : base) c = rng.uniform(123.0, 131.0);
    grad_x = fixed_shading.grad_x;
    grad_y = fixed_shading.grad_y;
  } else {
    for (double& c : base) c = rng.uniform(90.0, 160.0);
    if (difficulty == SynthDifficulty::Cluttered) {
      grad_x = rng.uniform(-20.0, 20.0);
      grad_y = rng.uniform(-20.0, 20.0);
    }
  }

  Ellipse object{};
  double delta[3];
  if (difficulty == SynthDifficulty::LowContrast) {
    object.rx = rng.uniform(std::max(2.0, min_dim / 10.0), std::max(3.0, min_dim / 6.0));
    object.ry = rng.uniform(std::max(2.0, min_dim / 10.0), std::max(3.0, min_dim / 6.0));
    // Mostly slightly brighter than the local background, sometimes slightly
    // darker, the way a grayish bird sits on sand.
    const double sign = rng.uniform() < 0.8 ? 1.0 : -1.0;
    for (double& d : delta) d = sign * rng.uniform(12.0, 20.0);
  } else {
    object.rx = rng.uniform(min_dim / 6.0, min_dim / 3.0);
    object.ry = rng.uniform(min_dim / 6.0, min_dim / 3.0);
    for (double& d : delta) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      d = sign * rng.uniform(60.0, 120.0);
    }
  }
  object.cx = rng.uniform(object.rx + 1.0, width - object.rx - 1.0);
  object.cy = rng.uniform(object.ry + 1.0, height - object.ry - 1.0);

  struct Distractor {
    Ellipse shape;
    double color[3];
  };
  std::vector<Distractor> distractors;
  if (difficulty == SynthDifficulty::Cluttered) {
    const int count = 3 + static_cast<int>(rng.below(4));
    for (int k = 0; k < count; ++k) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        Distractor d;
        d.shape.rx = rng.uniform(min_dim / 20.0, min_dim / 8.0);
        d.shape.ry = rng.uniform(min_dim / 20.0, min_dim / 8.0);
        d.shape.cx = rng.uniform(d.shape.rx + 1.0, width - d.shape.rx - 1.0);
        d.shape.cy = rng.uniform(d.shape.ry + 1.0, height - d.shape.ry - 1.0);
        const double gap_x = std::abs(d.shape.cx - object.cx) - (d.shape.rx + object.rx);
        const double gap_y = std::abs(d.shape.cy - object.cy) - (d.shape.ry + object.ry);
        if (gap_x < 2.0 && gap_y < 2.0) continue;  // keep distractors off the object
        for (double& c : d.color) c = rng.uniform(30.0, 225.0);
        distractors.push_back(d);
        break;
      }
    }
  }

  const std::uint64_t texture = rng.next_u64();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double px[3];
      for (int c = 0; c < 3; ++c) {
        px[c] = base[c] + grad_x * (static_cast<double>(x) / width - 0.5) +
                grad_y * (static_cast<double>(y) / height - 0.5);
      }
      for (const auto& d : distractors) {
        if (d.shape.contains(x, y)) {
          for (int c = 0; c < 3; ++c) px[c] = d.color[c];
        }
      }
      if (object.contains(x, y)) {
        mask.at(y, x) = 1;
        // Object tracks the local background shade, offset by delta.
        for (int c = 0; c < 3; ++c) px[c] += delta[c];
      }
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      for (int c = 0; c < 3; ++c) {
        RngStream t(RngStream::derive(texture, p * 3 + c));
        img.at(y, x, c) = clamp_byte(px[c] + t.uniform(-2.0, 2.0));
      }
    }
  }
}

std::uint64_t attack_stream_key(std::uint64_t seed, const std::string& attack_id) {
  return RngStream::derive(seed, fnv1a64(attack_id));
}

Image quantized(const Image& img) {
  Image out = img;
  for (double& v : out.data) {
    v = static_cast<double>(std::clamp(std::llround(v), 0LL, 255LL));
  }
  return out;
}

}  // namespace

std::string attack_params_json(const AttackSpec& attack) {
  ordered_json j;
  if (std::holds_alternative<IdentityAttack>(attack.kind)) {
    j["kind"] = "identity";
  } else if (const auto* f = std::get_if<FgsmAttack>(&attack.kind)) {
    j["kind"] = "fgsm";
    j["epsilon"] = f->epsilon;
  } else if (const auto* mp = std::get_if<MultipixelAttackSpec>(&attack.kind)) {
    j["kind"] = "multipixel";
    j["d"] = mp->d;
    j["pop_size"] = mp->pop_size;
    j["max_iters"] = mp->max_iters;
  } else if (const auto* p = std::get_if<PatchAttack>(&attack.kind)) {
    j["kind"] = "patch";
    j["side"] = p->side;
    j["patch_file"] = p->patch_file;
    j["train_iterations"] = p->train.iterations;
    j["train_step_size"] = p->train.step_size;
    j["placements_per_step"] = p->train.placements_per_step;
  } else if (const auto* n = std::get_if<NoiseSpec>(&attack.kind)) {
    switch (n->kind) {
      case NoiseSpec::Kind::Gaussian:
        j["kind"] = "gaussian";
        j["sigma"] = n->sigma;
        break;
      case NoiseSpec::Kind::SaltPepper:
        j["kind"] = "salt_pepper";
        j["density"] = n->density;
        j["per_channel"] = !n->salt_pepper_luma;
        break;
      case NoiseSpec::Kind::Speckle:
        j["kind"] = "speckle";
        j["variance"] = n->variance;
        j["gaussian_m"] = n->speckle_gaussian;
        break;
    }
  }
  return j.dump();
}

bool AttackSpec::needs_gradient_source() const {
  if (std::holds_alternative<FgsmAttack>(kind)) return true;
  if (const auto* p = std::get_if<PatchAttack>(&kind)) return p->patch_file.empty();
  return false;
}

bool AttackSpec::needs_query_source() const {
  return std::holds_alternative<MultipixelAttackSpec>(kind);
}

SynthDifficulty synth_difficulty_from_name(const std::string& name) {
  if (name == "blob") return SynthDifficulty::Blob;
  if (name == "low-contrast") return SynthDifficulty::LowContrast;
  if (name == "cluttered") return SynthDifficulty::Cluttered;
  throw Error(ErrorCode::ConfigError, "unknown difficulty '" + name + "'");
}

DatasetManifest scan_dataset(const std::filesystem::path& root, const std::string& rule,
                             const std::string& split) {
  const auto [img_pat, mask_pat] = parse_rule(rule);
  DatasetManifest manifest;
  manifest.name = root.filename().string();
  manifest.split = split;

  const std::filesystem::path img_dir = root / img_pat.dir;
  if (!std::filesystem::exists(img_dir)) return manifest;  // empty manifest, caller warns

  std::vector<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(img_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string file = entry.path().filename().string();
    if (file.size() <= img_pat.prefix.size() + img_pat.suffix.size()) continue;
    if (file.rfind(img_pat.prefix, 0) != 0) continue;
    if (file.compare(file.size() - img_pat.suffix.size(), img_pat.suffix.size(),
                     img_pat.suffix) != 0) {
      continue;
    }
    stems.push_back(
        file.substr(img_pat.prefix.size(), file.size() - img_pat.prefix.size() - img_pat.suffix.size()));
  }
  std::sort(stems.begin(), stems.end());

  for (const std::string& stem : stems) {
    DatasetPair pair;
    pair.stem = stem;
    pair.image_path = root / substitute(img_pat, stem);
    pair.mask_path = root / substitute(mask_pat, stem);
    if (!std::filesystem::exists(pair.mask_path)) {
      manifest.file_errors.push_back(stem + ": no mask at " + pair.mask_path.string());
      continue;
    }
    try {
      const auto img_dims = probe_dims(pair.image_path);
      const auto mask_dims = probe_dims(pair.mask_path);
      if (img_dims != mask_dims) {
        manifest.file_errors.push_back(stem + ": image " + std::to_string(img_dims.first) + "x" +
                                       std::to_string(img_dims.second) + " vs mask " +
                                       std::to_string(mask_dims.first) + "x" +
                                       std::to_string(mask_dims.second));
        continue;
      }
    } catch (const Error& e) {
      manifest.file_errors.push_back(stem + ": " + e.what());
      continue;
    }
    manifest.pairs.push_back(std::move(pair));
  }
  return manifest;
}

std::vector<LabeledPair> load_pairs(const DatasetManifest& manifest) {
  std::vector<LabeledPair> pairs(manifest.pairs.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(manifest.pairs.size());
  std::string first_error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      pairs[i] = {load_image(manifest.pairs[i].image_path), load_mask(manifest.pairs[i].mask_path)};
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw Error(ErrorCode::CorruptData, first_error);
  return pairs;
}

DatasetManifest synth_dataset(int n, int height, int width, SynthDifficulty difficulty,
                              std::uint64_t seed, const std::filesystem::path& root,
                              const std::string& split) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "synth_dataset needs n >= 1");
  if (height < 16 || width < 16) {
    throw Error(ErrorCode::InvalidArgument, "synthetic images must be at least 16x16");
  }
  std::error_code ec;
  std::filesystem::create_directories(root / "images", ec);
  std::filesystem::create_directories(root / "GT", ec);
  if (!std::filesystem::exists(root / "images") || !std::filesystem::exists(root / "GT")) {
    throw Error(ErrorCode::UnwritablePath, root.string());
  }

  const RngStream base(seed);
  Shading shading;
  if (difficulty == SynthDifficulty::LowContrast) {
    RngStream shading_stream = base.split(fnv1a64("shading"));
    shading.grad_x = shading_stream.uniform(-24.0, 24.0);
    shading.grad_y = shading_stream.uniform(-24.0, 24.0);
  }
  DatasetManifest manifest;
  manifest.name = root.filename().string();
  manifest.split = split;
  for (int i = 0; i < n; ++i) {
    RngStream stream = base.split(static_cast<std::uint64_t>(i));
    Image img;
    BinaryMask mask;
    render_pair(height, width, difficulty, stream, shading, img, mask);
    DatasetPair pair;
    pair.stem = synth_stem(i);
    pair.image_path = root / "images" / (pair.stem + ".png");
    pair.mask_path = root / "GT" / (pair.stem + ".png");
    save_image(img, pair.image_path);
    save_mask(mask, pair.mask_path);
    manifest.pairs.push_back(std::move(pair));
  }
  return manifest;
}

std::vector<AttackSpec> default_attack_suite() {
  std::vector<AttackSpec> suite;
  for (const double eps : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    AttackSpec spec;
    spec.id = "fgsm_eps" + std::to_string(static_cast<int>(eps));
    spec.label = "eps=" + std::to_string(static_cast<int>(eps));
    spec.kind = FgsmAttack{eps};
    suite.push_back(std::move(spec));
  }
  suite.push_back({"multipixel", "Multipixel", MultipixelAttackSpec{}});
  suite.push_back({"patch", "Patch", PatchAttack{70, "", {}}});
  suite.push_back({"patch_s", "Patch(S)", PatchAttack{50, "", {}}});
  {
    NoiseSpec g;
    g.kind = NoiseSpec::Kind::Gaussian;
    g.sigma = 30.0;
    suite.push_back({"gaussian", "Gaussian", g});
    NoiseSpec sp;
    sp.kind = NoiseSpec::Kind::SaltPepper;
    sp.density = 0.05;
    suite.push_back({"salt_pepper", "S&P", sp});
    NoiseSpec sk;
    sk.kind = NoiseSpec::Kind::Speckle;
    sk.variance = 0.3;
    suite.push_back({"speckle", "Speckle", sk});
  }
  return suite;
}

namespace {

void write_edits_sidecar(const std::filesystem::path& path, const std::vector<PixelEdit>& edits) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
  for (const PixelEdit& e : edits) {
    ordered_json j;
    j["x"] = e.x;
    j["y"] = e.y;
    j["r"] = e.r;
    j["g"] = e.g;
    j["b"] = e.b;
    out << j.dump() << "\n";
  }
}

}  // namespace

AeSetManifest materialize_ae_set(const DatasetManifest& dataset, const AttackSpec& attack,
                                 const SodModel* query_source, const GradientOracle* grad_source,
                                 const std::string& source_model_name,
                                 const std::filesystem::path& out_dir, std::uint64_t seed,
                                 const FBetaConfig& cfg) {
  if (attack.needs_gradient_source() && grad_source == nullptr) {
    throw Error(ErrorCode::ConfigError,
                "attack '" + attack.id + "' needs a gradient-capable source model");
  }
  if (attack.needs_query_source() && query_source == nullptr) {
    throw Error(ErrorCode::ConfigError, "attack '" + attack.id + "' needs a query source model");
  }

  const std::filesystem::path set_dir = out_dir / attack.id;
  std::filesystem::create_directories(set_dir / "images");

  AeSetManifest manifest;
  manifest.source_dataset = dataset.name;
  manifest.attack_id = attack.id;
  manifest.attack_label = attack.label;
  manifest.params_json = attack_params_json(attack);
  manifest.seed = seed;
  manifest.source_model =
      (attack.needs_gradient_source() || attack.needs_query_source()) ? source_model_name : "";

  const std::vector<LabeledPair> pairs = load_pairs(dataset);
  const std::uint64_t stream_key = attack_stream_key(seed, attack.id);
  const RngStream attack_base(stream_key);

  // A patch is trained (or loaded) once and shared by every image.
  Patch shared_patch;
  if (const auto* patch_attack = std::get_if<PatchAttack>(&attack.kind)) {
    if (!patch_attack->patch_file.empty()) {
      const Image patch_img = load_image(patch_attack->patch_file);
      if (patch_img.height != patch_img.width) {
        throw Error(ErrorCode::ConfigError, "patch image must be square");
      }
      shared_patch.side = patch_img.height;
      shared_patch.data = patch_img.data;
    } else {
      PatchTrainSpec train = patch_attack->train;
      train.seed = attack_base.split(0x50).seed();
      shared_patch = train_patch(pairs, *grad_source, train, patch_attack->side).patch;
    }
    Image patch_img;
    patch_img.height = shared_patch.side;
    patch_img.width = shared_patch.side;
    patch_img.data = shared_patch.data;
    save_image(patch_img, set_dir / "patch.png");
  }

  manifest.images.resize(pairs.size());
  double coverage_sum = 0.0;
  int coverage_count = 0;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    AeImageRecord record;
    record.stem = dataset.pairs[i].stem;
    record.file = "images/" + record.stem + ".png";
    const auto& [img, mask] = pairs[i];
    RngStream stream = attack_base.split(static_cast<std::uint64_t>(i));
    try {
      Image ae;
      if (std::holds_alternative<IdentityAttack>(attack.kind)) {
        ae = img;
      } else if (const auto* f = std::get_if<FgsmAttack>(&attack.kind)) {
        ae = fgsm(img, mask, *grad_source, f->epsilon);
      } else if (const auto* mp = std::get_if<MultipixelAttackSpec>(&attack.kind)) {
        MultipixelSpec spec;
        spec.d = mp->d > 0 ? mp->d
                           : std::max(1, static_cast<int>(std::llround(0.03 * img.pixels())));
        spec.pop_size = mp->pop_size;
        spec.max_iters = mp->max_iters;
        spec.seed = stream.seed();
        const MultipixelResult result = multipixel_attack(img, mask, *query_source, spec, cfg);
        ae = result.image;
        write_edits_sidecar(set_dir / "images" / (record.stem + ".edits.jsonl"), result.edits);
      } else if (std::holds_alternative<PatchAttack>(attack.kind)) {
        const PatchPlacement placement =
            random_placement(img.height, img.width, shared_patch, stream);
        ae = apply_patch(img, shared_patch, placement);
        record.placement = placement;
      } else if (const auto* noise = std::get_if<NoiseSpec>(&attack.kind)) {
        ae = apply_noise(img, *noise, stream);
      }
      save_image(ae, set_dir / record.file);
      const Image stored = quantized(ae);
      record.l0 = lp_distance(stored, img, Norm::L0);
      record.linf = lp_distance(stored, img, Norm::LInf);
    } catch (const std::exception& e) {
      record.error = e.what();
    }
    manifest.images[i] = std::move(record);
  }
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    if (manifest.images[i].placement) {
      coverage_sum += coverage_ratio(pairs[i].first.height, pairs[i].first.width, shared_patch,
                                     *manifest.images[i].placement);
      ++coverage_count;
    }
  }
  if (coverage_count > 0) {
    manifest.coverage_ratio_mean = coverage_sum / coverage_count;
  }

  write_ae_manifest(manifest, set_dir / "manifest.json");
  return manifest;
}

void write_ae_manifest(const AeSetManifest& manifest, const std::filesystem::path& path) {
  ordered_json j;
  j["source_dataset"] = manifest.source_dataset;
  j["attack_id"] = manifest.attack_id;
  j["attack_label"] = manifest.attack_label;
  if (!manifest.params_json.empty()) {
    j["attack"] = ordered_json::parse(manifest.params_json);
  }
  j["source_model"] = manifest.source_model;
  j["seed"] = manifest.seed;
  if (manifest.coverage_ratio_mean > 0.0) {
    j["coverage_ratio_mean"] = manifest.coverage_ratio_mean;
  }
  j["images"] = ordered_json::array();
  for (const AeImageRecord& r : manifest.images) {
    ordered_json entry;
    entry["stem"] = r.stem;
    entry["file"] = r.file;
    if (r.error.empty()) {
      entry["l0"] = r.l0;
      entry["linf"] = r.linf;
    } else {
      entry["error"] = r.error;
    }
    if (r.placement) {
      entry["placement"] = {{"x", r.placement->x},
                            {"y", r.placement->y},
                            {"rotation", r.placement->rotation},
                            {"scale", r.placement->scale}};
    }
    j["images"].push_back(std::move(entry));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
  out << j.dump(2) << "\n";
}

std::vector<LabeledPair> load_ae_pairs(const DatasetManifest& dataset,
                                       const std::filesystem::path& set_dir) {
  std::vector<LabeledPair> pairs(dataset.pairs.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dataset.pairs.size());
  std::string first_error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      pairs[i] = {load_image(set_dir / "images" / (dataset.pairs[i].stem + ".png")),
                  load_mask(dataset.pairs[i].mask_path)};
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw Error(ErrorCode::MissingFile, first_error);
  return pairs;
}

}  // namespace sodbench
