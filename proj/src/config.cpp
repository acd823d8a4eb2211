#include "sodbench/config.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "sodbench/error.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::ConfigError, path + ": " + message);
}

double get_number(const ordered_json& j, const std::string& path, const char* key,
                  double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) fail(path + "." + key, "expected a number");
  return j[key].get<double>();
}

std::string get_string(const ordered_json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) fail(path + "." + key, "expected a string");
  return j[key].get<std::string>();
}

AttackSpec parse_attack(const ordered_json& j, const std::string& path) {
  AttackSpec spec;
  spec.id = get_string(j, path, "id", "");
  if (spec.id.empty()) fail(path + ".id", "attack id is required");
  const std::string kind = get_string(j, path, "kind", "");
  spec.label = get_string(j, path, "label", spec.id);
  if (kind == "identity") {
    spec.kind = IdentityAttack{};
  } else if (kind == "fgsm") {
    FgsmAttack a;
    a.epsilon = get_number(j, path, "epsilon", 8.0);
    if (a.epsilon < 0) fail(path + ".epsilon", "epsilon must be >= 0");
    spec.kind = a;
  } else if (kind == "multipixel") {
    MultipixelAttackSpec a;
    a.d = static_cast<int>(get_number(j, path, "d", 0));
    a.pop_size = static_cast<int>(get_number(j, path, "pop_size", 40));
    a.max_iters = static_cast<int>(get_number(j, path, "max_iters", 50));
    spec.kind = a;
  } else if (kind == "patch") {
    PatchAttack a;
    a.side = static_cast<int>(get_number(j, path, "side", 70));
    a.patch_file = get_string(j, path, "patch_file", "");
    a.train.iterations = static_cast<int>(get_number(j, path, "train_iterations", 100));
    a.train.step_size = get_number(j, path, "train_step_size", 5e5);
    a.train.placements_per_step = static_cast<int>(get_number(j, path, "placements_per_step", 8));
    spec.kind = a;
  } else if (kind == "gaussian" || kind == "salt_pepper" || kind == "speckle") {
    NoiseSpec a;
    if (kind == "gaussian") {
      a.kind = NoiseSpec::Kind::Gaussian;
      a.sigma = get_number(j, path, "sigma", 30.0);
    } else if (kind == "salt_pepper") {
      a.kind = NoiseSpec::Kind::SaltPepper;
      a.density = get_number(j, path, "density", 0.05);
    } else {
      a.kind = NoiseSpec::Kind::Speckle;
      a.variance = get_number(j, path, "variance", 0.3);
    }
    spec.kind = a;
  } else {
    fail(path + ".kind", "unknown attack kind '" + kind + "'");
  }
  return spec;
}

void apply_desk_scale(RunConfig& config) {
  // Shrinks every search budget so the full suite finishes in minutes on one
  // core; the full-scale defaults stay available without the flag.
  for (AttackSpec& attack : config.attacks) {
    if (auto* mp = std::get_if<MultipixelAttackSpec>(&attack.kind)) {
      mp->pop_size = std::min(mp->pop_size, 12);
      mp->max_iters = std::min(mp->max_iters, 12);
    } else if (auto* patch = std::get_if<PatchAttack>(&attack.kind)) {
      if (patch->side == 70) patch->side = 20;
      if (patch->side == 50) patch->side = 14;
      patch->train.iterations = std::min(patch->train.iterations, 25);
      patch->train.placements_per_step = std::min(patch->train.placements_per_step, 6);
      patch->train.eval_placements = std::min(patch->train.eval_placements, 8);
    }
  }
  config.gp.population_size = std::min(config.gp.population_size, 40);
  config.gp.generations = std::min(config.gp.generations, 15);
  config.continuity.samples = std::min(config.continuity.samples, 8);
  config.continuity.images = std::min(config.continuity.images, 4);
}

ordered_json attack_to_json(const AttackSpec& spec) {
  ordered_json j;
  j["id"] = spec.id;
  j["label"] = spec.label;
  if (std::holds_alternative<IdentityAttack>(spec.kind)) {
    j["kind"] = "identity";
  } else if (const auto* f = std::get_if<FgsmAttack>(&spec.kind)) {
    j["kind"] = "fgsm";
    j["epsilon"] = f->epsilon;
  } else if (const auto* mp = std::get_if<MultipixelAttackSpec>(&spec.kind)) {
    j["kind"] = "multipixel";
    j["d"] = mp->d;
    j["pop_size"] = mp->pop_size;
    j["max_iters"] = mp->max_iters;
  } else if (const auto* p = std::get_if<PatchAttack>(&spec.kind)) {
    j["kind"] = "patch";
    j["side"] = p->side;
    j["patch_file"] = p->patch_file;
    j["train_iterations"] = p->train.iterations;
    j["train_step_size"] = p->train.step_size;
    j["placements_per_step"] = p->train.placements_per_step;
  } else if (const auto* n = std::get_if<NoiseSpec>(&spec.kind)) {
    switch (n->kind) {
      case NoiseSpec::Kind::Gaussian:
        j["kind"] = "gaussian";
        j["sigma"] = n->sigma;
        break;
      case NoiseSpec::Kind::SaltPepper:
        j["kind"] = "salt_pepper";
        j["density"] = n->density;
        break;
      case NoiseSpec::Kind::Speckle:
        j["kind"] = "speckle";
        j["variance"] = n->variance;
        break;
    }
  }
  return j;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }

  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  RunConfig config;
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    if (!d.is_object()) fail("config.dataset", "expected an object");
    const std::string train = get_string(d, "config.dataset", "train", "");
    const std::string test = get_string(d, "config.dataset", "test", "");
    if (!train.empty()) config.train_root = resolve(train);
    if (!test.empty()) config.test_root = resolve(test);
    config.naming_rule = get_string(d, "config.dataset", "rule", kDefaultNamingRule);
    config.dataset_name = get_string(d, "config.dataset", "name", "");
  }
  if (config.dataset_name.empty() && !config.test_root.empty()) {
    config.dataset_name = config.test_root.filename().string();
  }

  if (j.contains("models")) {
    if (!j["models"].is_array()) fail("config.models", "expected an array");
    int index = 0;
    for (const auto& m : j["models"]) {
      const std::string where = "config.models[" + std::to_string(index++) + "]";
      ModelRef ref;
      ref.name = get_string(m, where, "name", "");
      ref.kind = get_string(m, where, "kind", "");
      const std::string file = get_string(m, where, "file", "");
      if (!file.empty()) ref.file = resolve(file);
      if (ref.name.empty()) fail(where + ".name", "model name is required");
      if (ref.kind != "linear" && ref.kind != "heuristic" && ref.kind != "gp") {
        fail(where + ".kind", "expected linear, heuristic or gp");
      }
      if (ref.kind != "heuristic" && file.empty()) {
        fail(where + ".file", "model kind '" + ref.kind + "' needs a file");
      }
      config.models.push_back(std::move(ref));
    }
  }
  for (std::size_t a = 0; a < config.models.size(); ++a) {
    for (std::size_t b = a + 1; b < config.models.size(); ++b) {
      if (config.models[a].name == config.models[b].name) {
        fail("config.models", "duplicate model name '" + config.models[a].name + "'");
      }
    }
  }

  config.source_model = get_string(j, "config", "source_model", "");

  if (!j.contains("attacks") || (j["attacks"].is_string() && j["attacks"] == "default")) {
    config.attacks = default_attack_suite();
  } else if (j["attacks"].is_array()) {
    int index = 0;
    for (const auto& a : j["attacks"]) {
      config.attacks.push_back(parse_attack(a, "config.attacks[" + std::to_string(index++) + "]"));
    }
  } else {
    fail("config.attacks", "expected \"default\" or an array");
  }
  for (std::size_t a = 0; a < config.attacks.size(); ++a) {
    for (std::size_t b = a + 1; b < config.attacks.size(); ++b) {
      if (config.attacks[a].id == config.attacks[b].id) {
        fail("config.attacks", "duplicate attack id '" + config.attacks[a].id + "'");
      }
    }
  }

  if (j.contains("eval")) {
    config.eval.beta_squared = get_number(j["eval"], "config.eval", "beta_squared", 0.3);
    config.eval.thresholds =
        static_cast<int>(get_number(j["eval"], "config.eval", "thresholds", 255));
    const std::string std_kind = get_string(j["eval"], "config.eval", "std", "population");
    if (std_kind != "population" && std_kind != "sample") {
      fail("config.eval.std", "expected population or sample");
    }
    config.eval.sample_std = std_kind == "sample";
    if (config.eval.beta_squared <= 0) fail("config.eval.beta_squared", "must be > 0");
    if (config.eval.thresholds < 1) fail("config.eval.thresholds", "must be >= 1");
  }

  if (j.contains("continuity")) {
    const auto& c = j["continuity"];
    if (c.contains("deltas")) {
      if (!c["deltas"].is_array()) fail("config.continuity.deltas", "expected an array");
      config.continuity.deltas.clear();
      for (const auto& d : c["deltas"]) config.continuity.deltas.push_back(d.get<double>());
    }
    config.continuity.samples =
        static_cast<int>(get_number(c, "config.continuity", "samples", 32));
    config.continuity.norm = get_string(c, "config.continuity", "norm", "linf");
    config.continuity.images = static_cast<int>(get_number(c, "config.continuity", "images", 4));
    if (config.continuity.norm != "linf" && config.continuity.norm != "l2") {
      fail("config.continuity.norm", "expected linf or l2");
    }
  }

  if (j.contains("gp")) {
    const auto& g = j["gp"];
    config.gp.population_size = static_cast<int>(get_number(g, "config.gp", "population", 50));
    config.gp.generations = static_cast<int>(get_number(g, "config.gp", "generations", 30));
    config.gp.crossover_rate = get_number(g, "config.gp", "crossover_rate", 0.9);
    config.gp.mutation_rate = get_number(g, "config.gp", "mutation_rate", 0.2);
    config.gp.max_depth = static_cast<int>(get_number(g, "config.gp", "max_depth", 6));
    config.gp.elitism = static_cast<int>(get_number(g, "config.gp", "elitism", 1));
    config.gp.tournament_size = static_cast<int>(get_number(g, "config.gp", "tournament", 3));
  }

  if (j.contains("linear_fit")) {
    const auto& f = j["linear_fit"];
    config.linear_fit.steps = static_cast<int>(get_number(f, "config.linear_fit", "steps", 2000));
    config.linear_fit.learning_rate =
        get_number(f, "config.linear_fit", "learning_rate", 2e-2);
    config.linear_fit.smooth_window =
        static_cast<int>(get_number(f, "config.linear_fit", "smooth_window", 9));
  }

  const std::string out = get_string(j, "config", "out", "out");
  config.out = resolve(out);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      fail("config.seed", "expected an integer");
    }
    config.seed = j["seed"].get<std::uint64_t>();
  }

  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.out) config.out = *overrides.out;
  config.desk_scale = overrides.desk_scale;
  if (config.desk_scale) apply_desk_scale(config);
  return config;
}

std::string run_config_hash(const RunConfig& config) {
  ordered_json j;
  j["train"] = config.train_root.generic_string();
  j["test"] = config.test_root.generic_string();
  j["rule"] = config.naming_rule;
  j["dataset"] = config.dataset_name;
  j["models"] = ordered_json::array();
  for (const ModelRef& m : config.models) {
    j["models"].push_back({{"name", m.name}, {"kind", m.kind}, {"file", m.file.generic_string()}});
  }
  j["source_model"] = config.source_model;
  j["attacks"] = ordered_json::array();
  for (const AttackSpec& a : config.attacks) j["attacks"].push_back(attack_to_json(a));
  j["eval"] = {{"beta_squared", config.eval.beta_squared},
               {"thresholds", config.eval.thresholds},
               {"std", config.eval.sample_std ? "sample" : "population"}};
  j["continuity"] = {{"deltas", config.continuity.deltas},
                     {"samples", config.continuity.samples},
                     {"norm", config.continuity.norm},
                     {"images", config.continuity.images}};
  j["gp"] = {{"population", config.gp.population_size},
             {"generations", config.gp.generations},
             {"crossover_rate", config.gp.crossover_rate},
             {"mutation_rate", config.gp.mutation_rate},
             {"max_depth", config.gp.max_depth},
             {"elitism", config.gp.elitism},
             {"tournament", config.gp.tournament_size}};
  j["linear_fit"] = {{"steps", config.linear_fit.steps},
                     {"learning_rate", config.linear_fit.learning_rate},
                     {"smooth_window", config.linear_fit.smooth_window}};
  j["seed"] = config.seed;
  j["desk_scale"] = config.desk_scale;

  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace sodbench
