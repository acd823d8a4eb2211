#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sodbench/eval.hpp"
#include "sodbench/image.hpp"
#include "sodbench/model.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

// Square RGB patch, values in [0, 255].
struct Patch {
  int side = 0;
  std::vector<double> data;  // row-major, interleaved

  static Patch constant(int side, double value);
  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * side + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * side + x) * 3 + c]; }
};

// Right-angle rotation followed by nearest-neighbor scaling, pasted with the
// top-left corner at (x, y). The transformed footprint must fit inside the
// image.
struct PatchPlacement {
  int x = 0;
  int y = 0;
  int rotation = 0;    // degrees, one of 0 / 90 / 180 / 270
  double scale = 1.0;  // footprint side = max(1, round(side * scale))
};

constexpr double kDefaultScaleBuckets[] = {0.5, 0.75, 1.0, 1.25, 1.5};

int scaled_side(int side, double scale);

// Replaces exactly the footprint pixels with transformed patch pixels; every
// other pixel is untouched.
Image apply_patch(const Image& img, const Patch& patch, const PatchPlacement& placement);

// Uniform over all valid (location, rotation, scale-bucket) triples.
PatchPlacement random_placement(int img_height, int img_width, const Patch& patch,
                                RngStream& rng,
                                const std::vector<double>& scale_buckets = {
                                    std::begin(kDefaultScaleBuckets),
                                    std::end(kDefaultScaleBuckets)});

// Footprint area divided by image area for a given placement.
double coverage_ratio(int img_height, int img_width, const Patch& patch,
                      const PatchPlacement& placement);

struct PatchTrainSpec {
  int iterations = 100;
  double step_size = 5e5;
  int placements_per_step = 8;
  int eval_placements = 16;  // fixed set used for the objective trace
  std::vector<int> rotations = {0, 90, 180, 270};
  std::uint64_t seed = 0;
};

struct PatchTrainResult {
  Patch patch;
  // Expected loss over the fixed evaluation placements, one entry per
  // iteration plus the final state.
  std::vector<double> objective_trace;
};

// Expectation-over-transformation training: gradient ascent on the patch
// pixels, maximizing the detector loss averaged over sampled
// (image, placement) pairs. Gradients flow through the footprint mapping of
// apply_patch; pixels clamp to [0, 255]. The initial patch is mid-gray.
PatchTrainResult train_patch(const std::vector<LabeledPair>& dataset,
                             const GradientOracle& oracle, const PatchTrainSpec& spec,
                             int side,
                             const std::vector<double>& scale_buckets = {
                                 std::begin(kDefaultScaleBuckets),
                                 std::end(kDefaultScaleBuckets)});

}  // namespace sodbench
