#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sodbench/image.hpp"
#include "sodbench/model.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

struct FBetaConfig {
  double beta_squared = 0.3;
  int thresholds = 255;  // m evenly spaced thresholds k/(m+1), k = 1..m
  bool sample_std = false;  // report sample instead of population std-dev
};

struct PrCurve {
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
};

// Precision/recall over m thresholds. The map is binarized with >= at each
// threshold; empty predictions use the p = 1 convention so the threshold
// sweep stays well defined for sparse maps. A mask without positive pixels
// has undefined recall and raises EmptyGroundTruth.
PrCurve pr_curve(const SaliencyMap& map, const BinaryMask& truth, int m);

// (1 + b2) p r / (b2 p + r), zero when both p and r vanish.
double fbeta(double precision, double recall, double beta_squared);

// Best F-beta over the threshold sweep.
double max_fbeta(const SaliencyMap& map, const BinaryMask& truth, const FBetaConfig& cfg = {});

using LabeledPair = std::pair<Image, BinaryMask>;

// Per-image max-F-beta aggregated over a dataset. Values are reported x100.
// stddev is the population standard deviation. Images with undefined recall
// are skipped and counted; their per_image entry is -1 so the vector stays
// aligned with the dataset order.
struct ScoreStats {
  double mean = 0.0;
  double stddev = 0.0;
  int scored = 0;
  int skipped = 0;
  std::vector<double> per_image;
};

ScoreStats dataset_score(const SodModel& model, const std::vector<LabeledPair>& dataset,
                         const FBetaConfig& cfg = {});

// One column per attack (the clean "Original" column included by the
// caller); cross_attack_std is the population std-dev of the column means.
struct RobustnessSummary {
  std::vector<std::string> columns;
  std::vector<ScoreStats> per_column;
  double cross_attack_std = 0.0;
};

RobustnessSummary robustness_summary(
    const SodModel& model,
    const std::vector<std::pair<std::string, std::vector<LabeledPair>>>& suite,
    const FBetaConfig& cfg = {});

double mean_of(const std::vector<double>& values);
double population_std(const std::vector<double>& values);
double sample_std(const std::vector<double>& values);

// Local continuity probe: draw `samples` inputs uniformly inside the
// delta-ball around img (clamped to the pixel domain) and record the largest
// RMS output distance seen. Sample i depends only on (rng seed, i), so the
// estimate is monotone in `samples` for a fixed seed.
struct ContinuityEstimate {
  double delta = 0.0;
  double epsilon_hat = 0.0;
  int samples = 0;
};

enum class BallNorm { LInf, L2 };

ContinuityEstimate continuity_probe(const SodModel& model, const Image& img, double delta,
                                    BallNorm norm, int samples, RngStream& rng);

}  // namespace sodbench
