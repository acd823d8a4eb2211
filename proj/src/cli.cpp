#include "sodbench/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>

#include "sodbench/error.hpp"
#include "sodbench/image_io.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

namespace {

using ordered_json = nlohmann::ordered_json;

struct ErrorLog {
  std::vector<std::pair<std::string, std::string>> entries;  // (context, message)

  void add(const std::string& context, const std::string& message) {
    entries.push_back({context, message});
    std::cerr << "error: " << context << ": " << message << "\n";
  }
  bool empty() const { return entries.empty(); }
};

int finish(const RunConfig& config, const ErrorLog& errors) {
  if (errors.empty()) return 0;
  std::filesystem::create_directories(config.out / "reports");
  ordered_json j;
  j["config_hash"] = run_config_hash(config);
  j["errors"] = ordered_json::array();
  for (const auto& [context, message] : errors.entries) {
    j["errors"].push_back({{"context", context}, {"message", message}});
  }
  std::ofstream out(config.out / "reports" / "errors.json", std::ios::trunc);
  out << j.dump(2) << "\n";
  return 1;
}

DatasetManifest load_split(const RunConfig& config, bool train) {
  const std::filesystem::path& root = train ? config.train_root : config.test_root;
  if (root.empty()) {
    throw Error(ErrorCode::ConfigError,
                std::string("config.dataset.") + (train ? "train" : "test") + " is not set");
  }
  DatasetManifest manifest = scan_dataset(root, config.naming_rule, train ? "train" : "test");
  manifest.name = config.dataset_name.empty() ? manifest.name : config.dataset_name;
  for (const std::string& e : manifest.file_errors) {
    std::cerr << "warning: " << root.string() << ": " << e << "\n";
  }
  if (manifest.pairs.empty()) {
    std::cerr << "warning: dataset at " << root.string() << " has no usable pairs\n";
  }
  return manifest;
}

const ModelRef* find_model(const RunConfig& config, const std::string& kind) {
  for (const ModelRef& m : config.models) {
    if (m.kind == kind) return &m;
  }
  return nullptr;
}

const ModelRef* find_model_by_name(const RunConfig& config, const std::string& name) {
  for (const ModelRef& m : config.models) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

std::unique_ptr<SodModel> build_model(const ModelRef& ref) {
  if (ref.kind == "linear") {
    return std::make_unique<LinearToyModel>(LinearToyModel::load(ref.file));
  }
  if (ref.kind == "heuristic") {
    return std::make_unique<HeuristicModel>();
  }
  return std::make_unique<GpModel>(GpProgram::load(ref.file), ref.name);
}

// The linear model doubles as the gradient oracle; only it can source
// white-box attacks.
std::unique_ptr<LinearToyModel> build_gradient_source(const RunConfig& config) {
  if (config.source_model.empty()) return nullptr;
  const ModelRef* ref = find_model_by_name(config, config.source_model);
  if (ref == nullptr) {
    throw Error(ErrorCode::ConfigError,
                "config.source_model: no model named '" + config.source_model + "'");
  }
  if (ref->kind != "linear") return nullptr;
  return std::make_unique<LinearToyModel>(LinearToyModel::load(ref->file));
}

std::unique_ptr<SodModel> build_query_source(const RunConfig& config) {
  if (config.source_model.empty()) return nullptr;
  const ModelRef* ref = find_model_by_name(config, config.source_model);
  if (ref == nullptr) {
    throw Error(ErrorCode::ConfigError,
                "config.source_model: no model named '" + config.source_model + "'");
  }
  return build_model(*ref);
}

std::filesystem::path ae_root(const RunConfig& config, const std::string& dataset_name) {
  return config.out / "ae" / dataset_name;
}

void write_csv_cell(std::string& row, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  row += buf;
}

}  // namespace

int cmd_synth_data(int n, int height, int width, const std::string& difficulty,
                   std::uint64_t seed, const std::filesystem::path& out_root) {
  const DatasetManifest manifest =
      synth_dataset(n, height, width, synth_difficulty_from_name(difficulty), seed, out_root);
  std::cout << "wrote " << manifest.pairs.size() << " image/mask pairs under "
            << out_root.string() << "\n";
  return 0;
}

int cmd_fit_linear(const RunConfig& config) {
  ErrorLog errors;
  try {
    const ModelRef* ref = find_model(config, "linear");
    if (ref == nullptr) throw Error(ErrorCode::ConfigError, "config.models: no linear model");
    const DatasetManifest manifest = load_split(config, /*train=*/true);
    if (manifest.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "train split is empty");
    const std::vector<LabeledPair> pairs = load_pairs(manifest);
    for (const auto& [img, mask] : pairs) {
      if (img.height != pairs[0].first.height || img.width != pairs[0].first.width) {
        throw Error(ErrorCode::DimensionMismatch,
                    "the linear model needs a fixed image size across the train split");
      }
      (void)mask;
    }
    LinearToyModel model = LinearToyModel::zeros(pairs[0].first.height, pairs[0].first.width);
    model.fit(pairs, config.linear_fit);
    std::filesystem::create_directories(ref->file.parent_path());
    model.save(ref->file);
    std::cout << "fit linear model on " << pairs.size() << " images -> " << ref->file.string()
              << "\n";
  } catch (const std::exception& e) {
    errors.add("fit-linear", e.what());
  }
  return finish(config, errors);
}

int cmd_train_gp(const RunConfig& config) {
  ErrorLog errors;
  try {
    const ModelRef* ref = find_model(config, "gp");
    if (ref == nullptr) throw Error(ErrorCode::ConfigError, "config.models: no gp model");
    const DatasetManifest manifest = load_split(config, /*train=*/true);
    if (manifest.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "train split is empty");
    const std::vector<LabeledPair> pairs = load_pairs(manifest);

    EvolutionParams params = config.gp;
    params.seed = RngStream::derive(config.seed, fnv1a64("train-gp"));
    const GpTrainResult result = gp_train(pairs, params, config.eval);

    std::filesystem::create_directories(ref->file.parent_path());
    result.best.save(ref->file);

    std::filesystem::path trace_path = ref->file;
    trace_path.replace_extension(".trace.csv");
    std::ofstream trace(trace_path, std::ios::trunc);
    if (!trace) throw Error(ErrorCode::UnwritablePath, trace_path.string());
    trace << "# config_hash=" << run_config_hash(config) << "\n";
    trace << "generation,best_fitness\n";
    for (std::size_t g = 0; g < result.fitness_trace.size(); ++g) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", result.fitness_trace[g]);
      trace << g << "," << buf << "\n";
    }
    std::cout << "trained gp model (fitness " << result.best_fitness << ") -> "
              << ref->file.string() << "\n";
  } catch (const std::exception& e) {
    errors.add("train-gp", e.what());
  }
  return finish(config, errors);
}

int cmd_attack(const RunConfig& config) {
  ErrorLog errors;
  try {
    const DatasetManifest manifest = load_split(config, /*train=*/false);
    if (manifest.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "test split is empty");
    if (config.attacks.empty()) {
      std::cerr << "warning: empty attack suite, nothing to do\n";
      return finish(config, errors);
    }

    std::unique_ptr<LinearToyModel> grad_source;
    std::unique_ptr<SodModel> query_source;
    const bool needs_grad = std::any_of(config.attacks.begin(), config.attacks.end(),
                                        [](const AttackSpec& a) { return a.needs_gradient_source(); });
    const bool needs_query = std::any_of(config.attacks.begin(), config.attacks.end(),
                                         [](const AttackSpec& a) { return a.needs_query_source(); });
    if (needs_grad) {
      grad_source = build_gradient_source(config);
      if (!grad_source) {
        throw Error(ErrorCode::ConfigError,
                    "white-box attacks in the suite need source_model to be a linear model");
      }
    }
    if (needs_query) query_source = build_query_source(config);

    const std::filesystem::path root = ae_root(config, manifest.name);
    for (const AttackSpec& attack : config.attacks) {
      try {
        const AeSetManifest set = materialize_ae_set(
            manifest, attack, query_source.get(), grad_source.get(), config.source_model, root,
            config.seed, config.eval);
        int failed = 0;
        for (const AeImageRecord& r : set.images) {
          if (!r.error.empty()) {
            ++failed;
            errors.add("attack." + attack.id + "." + r.stem, r.error);
          }
        }
        std::cout << "materialized " << attack.id << " (" << set.images.size() - failed << "/"
                  << set.images.size() << " images)\n";
      } catch (const std::exception& e) {
        errors.add("attack." + attack.id, e.what());
      }
    }
  } catch (const std::exception& e) {
    errors.add("attack", e.what());
  }
  return finish(config, errors);
}

namespace {

struct ColumnResult {
  std::string label;
  ScoreStats stats;
  bool ok = false;
  std::string error;
};

}  // namespace

int cmd_evaluate(const RunConfig& config) {
  ErrorLog errors;
  try {
    const DatasetManifest manifest = load_split(config, /*train=*/false);
    if (manifest.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "test split is empty");
    if (config.models.empty()) throw Error(ErrorCode::ConfigError, "config.models is empty");

    const std::vector<LabeledPair> clean = load_pairs(manifest);
    const std::filesystem::path root = ae_root(config, manifest.name);

    // Column datasets: Original from the clean split, one per attack id.
    std::vector<std::pair<std::string, std::vector<LabeledPair>>> columns;
    std::vector<std::string> column_errors;
    columns.push_back({"Original", clean});
    column_errors.push_back("");
    for (const AttackSpec& attack : config.attacks) {
      std::string err;
      std::vector<LabeledPair> pairs;
      try {
        pairs = load_ae_pairs(manifest, root / attack.id);
      } catch (const std::exception& e) {
        err = e.what();
        errors.add("evaluate.column." + attack.id, "missing AE set: " + std::string(e.what()));
      }
      columns.push_back({attack.label, std::move(pairs)});
      column_errors.push_back(std::move(err));
    }

    std::filesystem::create_directories(config.out / "reports");
    const std::string hash = run_config_hash(config);

    ordered_json report;
    report["config_hash"] = hash;
    report["dataset"] = manifest.name;
    report["seed"] = config.seed;
    report["beta_squared"] = config.eval.beta_squared;
    report["thresholds"] = config.eval.thresholds;
    report["std_convention"] = config.eval.sample_std ? "sample" : "population";
    report["models"] = ordered_json::array();

    std::string csv = "# config_hash=" + hash + "\n";
    csv += "model,measure";
    for (const auto& [label, pairs] : columns) csv += "," + label;
    csv += ",CrossAttackStd\n";

    std::string continuity_csv = "# config_hash=" + hash + "\n";
    continuity_csv += "model,image,delta,norm,samples,epsilon_hat\n";

    for (const ModelRef& ref : config.models) {
      std::unique_ptr<SodModel> model;
      try {
        model = build_model(ref);
      } catch (const std::exception& e) {
        errors.add("evaluate.model." + ref.name, e.what());
        continue;
      }

      ordered_json model_json;
      model_json["name"] = ref.name;
      model_json["kind"] = ref.kind;
      model_json["columns"] = ordered_json::array();

      std::vector<double> column_means;
      std::string avg_row = ref.name + ",Avg.";
      std::string std_row = ref.name + ",Sigma";
      for (std::size_t c = 0; c < columns.size(); ++c) {
        if (!column_errors[c].empty()) {
          avg_row += ",";
          std_row += ",";
          model_json["columns"].push_back(
              {{"label", columns[c].first}, {"error", column_errors[c]}});
          continue;
        }
        ScoreStats stats;
        try {
          stats = dataset_score(*model, columns[c].second, config.eval);
        } catch (const std::exception& e) {
          errors.add("evaluate." + ref.name + "." + columns[c].first, e.what());
          avg_row += ",";
          std_row += ",";
          model_json["columns"].push_back({{"label", columns[c].first}, {"error", e.what()}});
          continue;
        }
        for (std::size_t i = 0; i < stats.per_image.size() && i < manifest.pairs.size(); ++i) {
          if (stats.per_image[i] < 0.0) {
            errors.add("evaluate." + ref.name + "." + columns[c].first,
                       manifest.pairs[i].stem + ": skipped (undefined recall)");
          }
        }
        column_means.push_back(stats.mean);
        avg_row += ",";
        write_csv_cell(avg_row, stats.mean);
        std_row += ",";
        write_csv_cell(std_row, stats.stddev);
        ordered_json col;
        col["label"] = columns[c].first;
        col["mean"] = stats.mean;
        col["stddev"] = stats.stddev;
        col["scored"] = stats.scored;
        col["skipped"] = stats.skipped;
        col["per_image"] = ordered_json::array();
        for (std::size_t i = 0; i < stats.per_image.size() && i < manifest.pairs.size(); ++i) {
          ordered_json entry;
          entry["stem"] = manifest.pairs[i].stem;
          if (stats.per_image[i] < 0.0) {
            entry["skipped"] = true;
          } else {
            entry["score"] = stats.per_image[i];
          }
          col["per_image"].push_back(std::move(entry));
        }
        model_json["columns"].push_back(std::move(col));
      }

      const double cross_std = population_std(column_means);
      avg_row += ",";
      write_csv_cell(avg_row, cross_std);
      std_row += ",";
      csv += avg_row + "\n" + std_row + "\n";
      model_json["cross_attack_std"] = cross_std;

      // Continuity appendix on the first few clean images.
      const BallNorm norm = config.continuity.norm == "l2" ? BallNorm::L2 : BallNorm::LInf;
      const int probe_count =
          std::min<int>(config.continuity.images, static_cast<int>(clean.size()));
      ordered_json probes = ordered_json::array();
      for (int i = 0; i < probe_count; ++i) {
        for (const double delta : config.continuity.deltas) {
          RngStream rng(RngStream::derive(
              config.seed, fnv1a64("continuity." + ref.name) + static_cast<std::uint64_t>(i)));
          const ContinuityEstimate est = continuity_probe(*model, clean[i].first, delta, norm,
                                                          config.continuity.samples, rng);
          char buf[64];
          std::snprintf(buf, sizeof buf, "%s,%s,%g,%s,%d,%.6f", ref.name.c_str(),
                        manifest.pairs[i].stem.c_str(), delta, config.continuity.norm.c_str(),
                        est.samples, est.epsilon_hat);
          continuity_csv += std::string(buf) + "\n";
          probes.push_back({{"stem", manifest.pairs[i].stem},
                            {"delta", delta},
                            {"epsilon_hat", est.epsilon_hat},
                            {"samples", est.samples}});
        }
      }
      model_json["continuity"] = std::move(probes);
      report["models"].push_back(std::move(model_json));
    }

    {
      std::ofstream out(config.out / "reports" / "results.csv", std::ios::trunc);
      if (!out) throw Error(ErrorCode::UnwritablePath, (config.out / "reports").string());
      out << csv;
    }
    {
      std::ofstream out(config.out / "reports" / "results.json", std::ios::trunc);
      out << report.dump(2) << "\n";
    }
    {
      std::ofstream out(config.out / "reports" / "continuity.csv", std::ios::trunc);
      out << continuity_csv;
    }
    std::cout << "wrote reports under " << (config.out / "reports").string() << "\n";
  } catch (const std::exception& e) {
    errors.add("evaluate", e.what());
  }
  return finish(config, errors);
}

int cmd_probe_continuity(const RunConfig& config) {
  ErrorLog errors;
  try {
    const DatasetManifest manifest = load_split(config, /*train=*/false);
    if (manifest.pairs.empty()) throw Error(ErrorCode::EmptyDataset, "test split is empty");
    const std::vector<LabeledPair> clean = load_pairs(manifest);

    std::filesystem::create_directories(config.out / "reports");
    std::string csv = "# config_hash=" + run_config_hash(config) + "\n";
    csv += "model,image,delta,norm,samples,epsilon_hat\n";
    const BallNorm norm = config.continuity.norm == "l2" ? BallNorm::L2 : BallNorm::LInf;
    const int probe_count =
        std::min<int>(config.continuity.images, static_cast<int>(clean.size()));

    for (const ModelRef& ref : config.models) {
      std::unique_ptr<SodModel> model;
      try {
        model = build_model(ref);
      } catch (const std::exception& e) {
        errors.add("probe-continuity." + ref.name, e.what());
        continue;
      }
      for (int i = 0; i < probe_count; ++i) {
        for (const double delta : config.continuity.deltas) {
          RngStream rng(RngStream::derive(
              config.seed, fnv1a64("continuity." + ref.name) + static_cast<std::uint64_t>(i)));
          const ContinuityEstimate est = continuity_probe(*model, clean[i].first, delta, norm,
                                                          config.continuity.samples, rng);
          char buf[64];
          std::snprintf(buf, sizeof buf, "%s,%s,%g,%s,%d,%.6f", ref.name.c_str(),
                        manifest.pairs[i].stem.c_str(), delta, config.continuity.norm.c_str(),
                        est.samples, est.epsilon_hat);
          csv += std::string(buf) + "\n";
        }
      }
    }
    std::ofstream out(config.out / "reports" / "continuity.csv", std::ios::trunc);
    if (!out) throw Error(ErrorCode::UnwritablePath, (config.out / "reports").string());
    out << csv;
    std::cout << "wrote " << (config.out / "reports" / "continuity.csv").string() << "\n";
  } catch (const std::exception& e) {
    errors.add("probe-continuity", e.what());
  }
  return finish(config, errors);
}

}  // namespace sodbench
