#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "sodbench/cli.hpp"
#include "sodbench/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"SOD robustness benchmark: perturbation suites, max-F-beta scoring, continuity probes"};
  app.require_subcommand(1);

  // synth-data is self-contained; every other verb reads a config file.
  auto* synth = app.add_subcommand("synth-data", "generate a synthetic image/mask dataset");
  int synth_n = 20, synth_h = 64, synth_w = 64;
  std::string synth_difficulty = "blob";
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--n", synth_n, "number of pairs");
  synth->add_option("--height", synth_h, "image height");
  synth->add_option("--width", synth_w, "image width");
  synth->add_option("--difficulty", synth_difficulty, "blob | low-contrast | cluttered");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "dataset root directory")->required();

  struct VerbSpec {
    const char* name;
    const char* help;
    int (*run)(const sodbench::RunConfig&);
  };
  const VerbSpec verbs[] = {
      {"fit-linear", "fit the differentiable linear model on the train split",
       sodbench::cmd_fit_linear},
      {"train-gp", "evolve the symbolic detector on the train split", sodbench::cmd_train_gp},
      {"attack", "materialize the adversarial-example suite for the test split",
       sodbench::cmd_attack},
      {"evaluate", "score every model on every suite column and write reports",
       sodbench::cmd_evaluate},
      {"probe-continuity", "estimate local output sensitivity per model",
       sodbench::cmd_probe_continuity},
  };

  struct VerbState {
    CLI::App* cmd = nullptr;
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    bool desk_scale = false;
    int (*run)(const sodbench::RunConfig&) = nullptr;
  };
  std::vector<VerbState> states(std::size(verbs));
  for (std::size_t i = 0; i < std::size(verbs); ++i) {
    VerbState& s = states[i];
    s.run = verbs[i].run;
    s.cmd = app.add_subcommand(verbs[i].name, verbs[i].help);
    s.cmd->add_option("--config", s.config_path, "run config (JSON)")->required();
    s.cmd->add_option("--seed", s.seed, "override the config seed")
        ->each([&s](const std::string&) { s.seed_set = true; });
    s.cmd->add_option("--out", s.out, "override the output directory");
    s.cmd->add_flag("--desk-scale", s.desk_scale,
                    "shrink every search budget for a minutes-scale run");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return sodbench::cmd_synth_data(synth_n, synth_h, synth_w, synth_difficulty, synth_seed,
                                      synth_out);
    }
    for (const VerbState& s : states) {
      if (!s.cmd->parsed()) continue;
      sodbench::ConfigOverrides overrides;
      if (s.seed_set) overrides.seed = s.seed;
      if (!s.out.empty()) overrides.out = s.out;
      overrides.desk_scale = s.desk_scale;
      const sodbench::RunConfig config = sodbench::load_run_config(s.config_path, overrides);
      return s.run(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
