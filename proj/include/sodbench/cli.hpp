#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sodbench/config.hpp"

namespace sodbench {

// CLI verbs, callable programmatically. Each returns a process exit code:
// 0 when the run produced zero per-image and per-column errors, 1 otherwise
// (an error report is then written under <out>/reports/errors.json).

int cmd_synth_data(int n, int height, int width, const std::string& difficulty,
                   std::uint64_t seed, const std::filesystem::path& out_root);

int cmd_fit_linear(const RunConfig& config);
int cmd_train_gp(const RunConfig& config);
int cmd_attack(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_probe_continuity(const RunConfig& config);

}  // namespace sodbench
