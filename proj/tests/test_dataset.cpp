#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sodbench/dataset.hpp"
#include "sodbench/error.hpp"
#include "sodbench/image_io.hpp"
#include "sodbench/model.hpp"
#include "sodbench/rng.hpp"

using namespace sodbench;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sodbench_dataset_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("scan: empty directory yields an empty manifest") {
  const fs::path root = fresh_dir("empty");
  const DatasetManifest manifest = scan_dataset(root);
  CHECK(manifest.pairs.empty());
  CHECK(manifest.file_errors.empty());
}

TEST_CASE("scan: stems pair up in lexicographic order") {
  const fs::path root = fresh_dir("pairs");
  fs::create_directories(root / "images");
  fs::create_directories(root / "GT");
  for (const char* stem : {"b", "a", "c"}) {
    save_image(Image::constant(4, 4, 10, 10, 10), root / "images" / (std::string(stem) + ".png"));
    save_mask(BinaryMask::zeros(4, 4), root / "GT" / (std::string(stem) + ".png"));
  }
  const DatasetManifest manifest = scan_dataset(root);
  REQUIRE(manifest.pairs.size() == 3);
  CHECK(manifest.pairs[0].stem == "a");
  CHECK(manifest.pairs[1].stem == "b");
  CHECK(manifest.pairs[2].stem == "c");
}

TEST_CASE("scan: orphans and dimension mismatches are per-file errors") {
  const fs::path root = fresh_dir("partial");
  fs::create_directories(root / "images");
  fs::create_directories(root / "GT");
  save_image(Image::constant(4, 4, 1, 1, 1), root / "images" / "good.png");
  save_mask(BinaryMask::zeros(4, 4), root / "GT" / "good.png");
  save_image(Image::constant(4, 4, 1, 1, 1), root / "images" / "orphan.png");
  save_image(Image::constant(5, 4, 1, 1, 1), root / "images" / "skewed.png");
  save_mask(BinaryMask::zeros(4, 5), root / "GT" / "skewed.png");
  const DatasetManifest manifest = scan_dataset(root);
  REQUIRE(manifest.pairs.size() == 1);
  CHECK(manifest.pairs[0].stem == "good");
  CHECK(manifest.file_errors.size() == 2);
}

TEST_CASE("scan: custom naming rule") {
  const fs::path root = fresh_dir("rule");
  fs::create_directories(root / "input");
  fs::create_directories(root / "truth");
  save_image(Image::constant(4, 4, 9, 9, 9), root / "input" / "img_x.ppm");
  save_mask(BinaryMask::zeros(4, 4), root / "truth" / "x_mask.pgm");
  const DatasetManifest manifest =
      scan_dataset(root, "input/img_{stem}.ppm|truth/{stem}_mask.pgm");
  REQUIRE(manifest.pairs.size() == 1);
  CHECK(manifest.pairs[0].stem == "x");
}

TEST_CASE("synth: deterministic, self-consistent masks, valid pixels") {
  const fs::path root_a = fresh_dir("synth_a");
  const fs::path root_b = fresh_dir("synth_b");
  for (const auto difficulty :
       {SynthDifficulty::Blob, SynthDifficulty::LowContrast, SynthDifficulty::Cluttered}) {
    const DatasetManifest a = synth_dataset(3, 32, 32, difficulty, 7, root_a);
    const DatasetManifest b = synth_dataset(3, 32, 32, difficulty, 7, root_b);
    REQUIRE(a.pairs.size() == 3);
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      CHECK(slurp(a.pairs[i].image_path) == slurp(b.pairs[i].image_path));
      CHECK(slurp(a.pairs[i].mask_path) == slurp(b.pairs[i].mask_path));
      const Image img = load_image(a.pairs[i].image_path);
      const BinaryMask mask = load_mask(a.pairs[i].mask_path);
      CHECK(image_values_valid(img));
      CHECK(mask.positive_count() > 0);
      CHECK(mask.positive_count() < mask.pixels());
    }
  }
}

TEST_CASE("synth: blob case has one high-contrast object matching its mask") {
  const fs::path root = fresh_dir("synth_blob");
  const DatasetManifest manifest = synth_dataset(1, 32, 32, SynthDifficulty::Blob, 3, root);
  const Image img = load_image(manifest.pairs[0].image_path);
  const BinaryMask mask = load_mask(manifest.pairs[0].mask_path);
  // Object/background contrast: compare channel means inside and outside.
  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t p = 0; p < mask.pixels(); ++p) {
    const double gray = (img.data[p * 3] + img.data[p * 3 + 1] + img.data[p * 3 + 2]) / 3.0;
    if (mask.data[p]) {
      inside += gray;
      ++n_in;
    } else {
      outside += gray;
      ++n_out;
    }
  }
  CHECK(std::abs(inside / n_in - outside / n_out) > 30.0);
}

TEST_CASE("synth: low-contrast offsets stay within 20 byte-units") {
  const fs::path root = fresh_dir("synth_lc");
  const DatasetManifest manifest =
      synth_dataset(5, 48, 48, SynthDifficulty::LowContrast, 11, root);
  for (const auto& pair : manifest.pairs) {
    const Image img = load_image(pair.image_path);
    const BinaryMask mask = load_mask(pair.mask_path);
    REQUIRE(mask.positive_count() > 0);
    // The object tracks the local background plus a per-channel offset of
    // at most 20 byte-units in either direction.
    double inside = 0.0, outside = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t p = 0; p < mask.pixels(); ++p) {
      const double gray = (img.data[p * 3] + img.data[p * 3 + 1] + img.data[p * 3 + 2]) / 3.0;
      if (mask.data[p]) {
        inside += gray;
        ++n_in;
      } else {
        outside += gray;
        ++n_out;
      }
    }
    CHECK(std::abs(inside / n_in - outside / n_out) <= 20.0 + 8.0);  // texture + shading slack
  }
}

TEST_CASE("materialize: identity attack copies with zero distance") {
  const fs::path root = fresh_dir("mat_identity");
  const DatasetManifest dataset = synth_dataset(3, 24, 24, SynthDifficulty::Blob, 5, root / "data");
  AttackSpec attack{"original", "Original", IdentityAttack{}};
  const AeSetManifest set =
      materialize_ae_set(dataset, attack, nullptr, nullptr, "", root / "ae", 1);
  REQUIRE(set.images.size() == 3);
  for (const AeImageRecord& r : set.images) {
    CHECK(r.error.empty());
    CHECK(r.l0 == 0.0);
    CHECK(r.linf == 0.0);
  }
  CHECK(fs::exists(root / "ae" / "original" / "manifest.json"));
  CHECK(fs::exists(root / "ae" / "original" / "images" / "000.png"));
}

TEST_CASE("materialize: fgsm budget survives quantization") {
  const fs::path root = fresh_dir("mat_fgsm");
  const DatasetManifest dataset = synth_dataset(3, 16, 16, SynthDifficulty::Blob, 6, root / "data");
  RngStream rng(1);
  LinearToyModel source = LinearToyModel::random(16, 16, 0.02, rng);
  AttackSpec attack{"fgsm_eps16", "eps=16", FgsmAttack{16.0}};
  const AeSetManifest set =
      materialize_ae_set(dataset, attack, nullptr, &source, "linear", root / "ae", 2);
  for (const AeImageRecord& r : set.images) {
    REQUIRE(r.error.empty());
    CHECK(r.linf <= 16.0);
  }
  CHECK(set.source_model == "linear");
}

TEST_CASE("materialize: re-running with the same seed is byte-identical") {
  const fs::path root = fresh_dir("mat_idem");
  const DatasetManifest dataset = synth_dataset(2, 16, 16, SynthDifficulty::Blob, 9, root / "data");
  NoiseSpec noise;
  noise.kind = NoiseSpec::Kind::Gaussian;
  noise.sigma = 30.0;
  AttackSpec attack{"gaussian", "Gaussian", noise};
  (void)materialize_ae_set(dataset, attack, nullptr, nullptr, "", root / "ae", 3);
  const std::string first_img = slurp(root / "ae" / "gaussian" / "images" / "000.png");
  const std::string first_manifest = slurp(root / "ae" / "gaussian" / "manifest.json");
  (void)materialize_ae_set(dataset, attack, nullptr, nullptr, "", root / "ae", 3);
  CHECK(slurp(root / "ae" / "gaussian" / "images" / "000.png") == first_img);
  CHECK(slurp(root / "ae" / "gaussian" / "manifest.json") == first_manifest);
}

TEST_CASE("materialize: multipixel writes edit sidecars and respects L0") {
  const fs::path root = fresh_dir("mat_mp");
  const DatasetManifest dataset = synth_dataset(2, 16, 16, SynthDifficulty::Blob, 10, root / "data");
  RngStream rng(2);
  LinearToyModel source = LinearToyModel::random(16, 16, 0.02, rng);
  MultipixelAttackSpec mp;
  mp.d = 4;
  mp.pop_size = 6;
  mp.max_iters = 2;
  AttackSpec attack{"multipixel", "Multipixel", mp};
  const AeSetManifest set =
      materialize_ae_set(dataset, attack, &source, &source, "linear", root / "ae", 4);
  for (const AeImageRecord& r : set.images) {
    REQUIRE(r.error.empty());
    CHECK(r.l0 <= 4.0);
  }
  CHECK(fs::exists(root / "ae" / "multipixel" / "images" / "000.edits.jsonl"));
}

TEST_CASE("materialize: patch attack records placements and coverage") {
  const fs::path root = fresh_dir("mat_patch");
  const DatasetManifest dataset = synth_dataset(2, 32, 32, SynthDifficulty::Blob, 11, root / "data");
  RngStream rng(3);
  LinearToyModel source = LinearToyModel::random(32, 32, 0.02, rng);
  PatchAttack patch;
  patch.side = 8;
  patch.train.iterations = 2;
  patch.train.placements_per_step = 2;
  patch.train.eval_placements = 2;
  AttackSpec attack{"patch", "Patch", patch};
  const AeSetManifest set =
      materialize_ae_set(dataset, attack, nullptr, &source, "linear", root / "ae", 5);
  CHECK(set.coverage_ratio_mean > 0.0);
  for (const AeImageRecord& r : set.images) {
    REQUIRE(r.error.empty());
    REQUIRE(r.placement.has_value());
  }
  CHECK(fs::exists(root / "ae" / "patch" / "patch.png"));
}

TEST_CASE("default suite has the twelve standard attack columns") {
  const std::vector<AttackSpec> suite = default_attack_suite();
  REQUIRE(suite.size() == 12);
  std::vector<std::string> labels;
  for (const AttackSpec& a : suite) labels.push_back(a.label);
  const std::vector<std::string> expected = {"eps=2",      "eps=4", "eps=8",    "eps=16",
                                             "eps=32",     "eps=64", "Multipixel", "Patch",
                                             "Patch(S)",   "Gaussian", "S&P",      "Speckle"};
  CHECK(labels == expected);
}

TEST_CASE("load_ae_pairs reads back a materialized set") {
  const fs::path root = fresh_dir("load_ae");
  const DatasetManifest dataset = synth_dataset(2, 16, 16, SynthDifficulty::Blob, 12, root / "data");
  AttackSpec attack{"original", "Original", IdentityAttack{}};
  (void)materialize_ae_set(dataset, attack, nullptr, nullptr, "", root / "ae", 6);
  const std::vector<LabeledPair> pairs = load_ae_pairs(dataset, root / "ae" / "original");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].first.height == 16);
  CHECK(pairs[0].second.positive_count() > 0);
  CHECK_THROWS_AS((void)load_ae_pairs(dataset, root / "ae" / "missing"), Error);
}
