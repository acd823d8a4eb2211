#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sodbench/cli.hpp"
#include "sodbench/config.hpp"
#include "sodbench/dataset.hpp"
#include "sodbench/error.hpp"

using namespace sodbench;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sodbench_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
}

// Minimal config: tiny synthetic dataset, linear + heuristic + gp models,
// a two-column attack suite to keep the test quick.
fs::path write_config(const fs::path& dir, const std::string& extra_attacks = "") {
  const std::string attacks = extra_attacks.empty()
                                  ? R"([{"id":"gaussian","label":"Gaussian","kind":"gaussian","sigma":30},
                                        {"id":"fgsm_eps8","label":"eps=8","kind":"fgsm","epsilon":8}])"
                                  : extra_attacks;
  write_file(dir / "config.json", std::string(R"({
  "dataset": {"train": "data", "test": "data", "name": "tiny"},
  "models": [
    {"name": "linear", "kind": "linear", "file": "models/linear.bin"},
    {"name": "heuristic", "kind": "heuristic"},
    {"name": "gp", "kind": "gp", "file": "models/gp.txt"}
  ],
  "source_model": "linear",
  "attacks": )") + attacks + R"(,
  "gp": {"population": 8, "generations": 2},
  "linear_fit": {"steps": 40, "learning_rate": 0.0005, "smooth_window": 3},
  "continuity": {"deltas": [1], "samples": 4, "images": 1},
  "out": "out",
  "seed": 21
})");
  return dir / "config.json";
}

RunConfig config_at(const fs::path& dir, const std::string& extra_attacks = "") {
  const fs::path path = write_config(dir, extra_attacks);
  return load_run_config(path, {});
}

void make_dataset(const fs::path& dir) {
  (void)synth_dataset(4, 24, 24, SynthDifficulty::Blob, 17, dir / "data");
}

}  // namespace

TEST_CASE("config: missing file and malformed fields carry precise paths") {
  const fs::path dir = fresh_dir("config_errors");
  CHECK_THROWS_AS((void)load_run_config(dir / "nope.json", {}), Error);

  write_file(dir / "bad.json", R"({"models": [{"kind": "linear"}]})");
  CHECK_THROWS_WITH_AS((void)load_run_config(dir / "bad.json", {}),
                       doctest::Contains("config.models[0].name"), Error);

  write_file(dir / "dup.json",
             R"({"models": [{"name":"m","kind":"heuristic"},{"name":"m","kind":"heuristic"}]})");
  CHECK_THROWS_WITH_AS((void)load_run_config(dir / "dup.json", {}),
                       doctest::Contains("duplicate model"), Error);

  write_file(dir / "badatk.json", R"({"attacks": [{"id":"x","kind":"warp"}]})");
  CHECK_THROWS_WITH_AS((void)load_run_config(dir / "badatk.json", {}),
                       doctest::Contains("config.attacks[0].kind"), Error);
}

TEST_CASE("config: defaults, desk-scale preset and hashing") {
  const fs::path dir = fresh_dir("config_defaults");
  write_file(dir / "min.json", R"({"dataset": {"test": "data"}, "seed": 3})");
  const RunConfig base = load_run_config(dir / "min.json", {});
  CHECK(base.attacks.size() == 12);  // default suite
  CHECK(base.eval.beta_squared == 0.3);
  CHECK(base.eval.thresholds == 255);
  CHECK(base.seed == 3);

  ConfigOverrides desk;
  desk.desk_scale = true;
  const RunConfig scaled = load_run_config(dir / "min.json", desk);
  for (const AttackSpec& a : scaled.attacks) {
    if (const auto* mp = std::get_if<MultipixelAttackSpec>(&a.kind)) {
      CHECK(mp->pop_size <= 12);
      CHECK(mp->max_iters <= 12);
    }
    if (const auto* p = std::get_if<PatchAttack>(&a.kind)) {
      CHECK(p->side <= 20);
    }
  }
  CHECK(run_config_hash(base) != run_config_hash(scaled));
  CHECK(run_config_hash(base) == run_config_hash(load_run_config(dir / "min.json", {})));

  ConfigOverrides seed_override;
  seed_override.seed = 4;
  CHECK(run_config_hash(base) != run_config_hash(load_run_config(dir / "min.json", seed_override)));
}

TEST_CASE("pipeline: fit, train, attack, evaluate on a tiny blob set") {
  const fs::path dir = fresh_dir("pipeline");
  make_dataset(dir);
  const RunConfig config = config_at(dir);

  REQUIRE(cmd_fit_linear(config) == 0);
  REQUIRE(fs::exists(dir / "models" / "linear.bin"));

  REQUIRE(cmd_train_gp(config) == 0);
  REQUIRE(fs::exists(dir / "models" / "gp.txt"));
  const std::string trace = slurp(dir / "models" / "gp.trace.csv");
  CHECK(trace.find("generation,best_fitness") != std::string::npos);
  // Elitism: the best-fitness column never decreases.
  double last = -1.0;
  std::size_t pos = trace.find('\n', trace.find("generation"));
  while (pos != std::string::npos && pos + 1 < trace.size()) {
    const std::size_t comma = trace.find(',', pos);
    if (comma == std::string::npos) break;
    const double value = std::stod(trace.substr(comma + 1));
    CHECK(value >= last);
    last = value;
    pos = trace.find('\n', comma);
  }

  REQUIRE(cmd_attack(config) == 0);
  REQUIRE(fs::exists(dir / "out" / "ae" / "tiny" / "gaussian" / "manifest.json"));
  REQUIRE(fs::exists(dir / "out" / "ae" / "tiny" / "fgsm_eps8" / "images" / "000.png"));

  REQUIRE(cmd_evaluate(config) == 0);
  const std::string csv = slurp(dir / "out" / "reports" / "results.csv");
  CHECK(csv.find("model,measure,Original,Gaussian,eps=8,CrossAttackStd") != std::string::npos);
  CHECK(csv.find("linear,Avg.") != std::string::npos);
  CHECK(csv.find("gp,Sigma") != std::string::npos);
  CHECK(csv.find("# config_hash=") == 0);
  REQUIRE(fs::exists(dir / "out" / "reports" / "results.json"));
  REQUIRE(fs::exists(dir / "out" / "reports" / "continuity.csv"));
}

TEST_CASE("report cells equal independently computed dataset scores") {
  const fs::path dir = fresh_dir("report_equals");
  make_dataset(dir);
  const RunConfig config = config_at(dir);
  REQUIRE(cmd_fit_linear(config) == 0);
  REQUIRE(cmd_train_gp(config) == 0);
  REQUIRE(cmd_attack(config) == 0);
  REQUIRE(cmd_evaluate(config) == 0);

  // Recompute the linear model's Gaussian column outside the report path.
  const DatasetManifest manifest = scan_dataset(dir / "data");
  const LinearToyModel model = LinearToyModel::load(dir / "models" / "linear.bin");
  const std::vector<LabeledPair> pairs =
      load_ae_pairs(manifest, dir / "out" / "ae" / "tiny" / "gaussian");
  const ScoreStats direct = dataset_score(model, pairs, config.eval);

  const std::string csv = slurp(dir / "out" / "reports" / "results.csv");
  std::istringstream lines(csv);
  std::string line, avg_row;
  int gaussian_col = -1;
  while (std::getline(lines, line)) {
    if (line.rfind("model,measure", 0) == 0) {
      std::istringstream header(line);
      std::string cell;
      int index = 0;
      while (std::getline(header, cell, ',')) {
        if (cell == "Gaussian") gaussian_col = index;
        ++index;
      }
    }
    if (line.rfind("linear,Avg.", 0) == 0) avg_row = line;
  }
  REQUIRE(gaussian_col > 0);
  REQUIRE(!avg_row.empty());
  std::istringstream cells(avg_row);
  std::string cell;
  for (int i = 0; i <= gaussian_col; ++i) std::getline(cells, cell, ',');
  char expected[32];
  std::snprintf(expected, sizeof expected, "%.2f", direct.mean);
  CHECK(cell == expected);
}

TEST_CASE("pipeline: reports are byte-identical across reruns") {
  const fs::path dir = fresh_dir("rerun");
  make_dataset(dir);
  const RunConfig config = config_at(dir);
  REQUIRE(cmd_fit_linear(config) == 0);
  REQUIRE(cmd_train_gp(config) == 0);
  REQUIRE(cmd_attack(config) == 0);
  REQUIRE(cmd_evaluate(config) == 0);
  const std::string csv = slurp(dir / "out" / "reports" / "results.csv");
  const std::string json = slurp(dir / "out" / "reports" / "results.json");
  const std::string gp = slurp(dir / "models" / "gp.txt");
  REQUIRE(cmd_train_gp(config) == 0);
  REQUIRE(cmd_attack(config) == 0);
  REQUIRE(cmd_evaluate(config) == 0);
  CHECK(slurp(dir / "models" / "gp.txt") == gp);
  CHECK(slurp(dir / "out" / "reports" / "results.csv") == csv);
  CHECK(slurp(dir / "out" / "reports" / "results.json") == json);
}

TEST_CASE("evaluate: a missing AE set is a column-level error with nonzero exit") {
  const fs::path dir = fresh_dir("missing_column");
  make_dataset(dir);
  const RunConfig config = config_at(dir);
  REQUIRE(cmd_fit_linear(config) == 0);
  REQUIRE(cmd_train_gp(config) == 0);
  // Deliberately skip cmd_attack.
  CHECK(cmd_evaluate(config) == 1);
  REQUIRE(fs::exists(dir / "out" / "reports" / "errors.json"));
  const std::string errors = slurp(dir / "out" / "reports" / "errors.json");
  CHECK(errors.find("evaluate.column.gaussian") != std::string::npos);
}

TEST_CASE("attack: empty suite warns and exits cleanly") {
  const fs::path dir = fresh_dir("empty_suite");
  make_dataset(dir);
  const RunConfig config = config_at(dir, "[]");
  CHECK(cmd_attack(config) == 0);
}

TEST_CASE("probe-continuity writes a deterministic csv") {
  const fs::path dir = fresh_dir("probe");
  make_dataset(dir);
  const RunConfig config = config_at(dir);
  REQUIRE(cmd_fit_linear(config) == 0);
  REQUIRE(cmd_train_gp(config) == 0);
  REQUIRE(cmd_probe_continuity(config) == 0);
  const std::string first = slurp(dir / "out" / "reports" / "continuity.csv");
  CHECK(first.find("model,image,delta,norm,samples,epsilon_hat") != std::string::npos);
  REQUIRE(cmd_probe_continuity(config) == 0);
  CHECK(slurp(dir / "out" / "reports" / "continuity.csv") == first);
}

TEST_CASE("synth-data verb materializes a loadable dataset") {
  const fs::path dir = fresh_dir("synth_verb");
  REQUIRE(cmd_synth_data(3, 24, 24, "low-contrast", 5, dir / "data") == 0);
  const DatasetManifest manifest = scan_dataset(dir / "data");
  CHECK(manifest.pairs.size() == 3);
  CHECK_THROWS_AS((void)cmd_synth_data(1, 24, 24, "bogus", 5, dir / "d2"), Error);
}
