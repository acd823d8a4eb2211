#include "sodbench/patch.hpp"

#include <algorithm>
#include <cmath>

#include "sodbench/error.hpp"

namespace sodbench {

namespace {

// Patch coordinates sampled by footprint position (fy, fx): nearest-neighbor
// scaling into the rotated patch, then the clockwise rotation is undone.
struct FootprintMap {
  int out_side;
  int patch_side;
  int rotation;

  std::pair<int, int> source(int fy, int fx) const {
    const int ry = std::min(patch_side - 1, fy * patch_side / out_side);
    const int rx = std::min(patch_side - 1, fx * patch_side / out_side);
    switch (rotation) {
      case 90: return {patch_side - 1 - rx, ry};
      case 180: return {patch_side - 1 - ry, patch_side - 1 - rx};
      case 270: return {rx, patch_side - 1 - ry};
      default: return {ry, rx};
    }
  }
};

bool rotation_valid(int rotation) {
  return rotation == 0 || rotation == 90 || rotation == 180 || rotation == 270;
}

void check_placement(const Image& img, const Patch& patch, const PatchPlacement& placement) {
  if (patch.side < 1) throw Error(ErrorCode::InvalidArgument, "patch side must be >= 1");
  if (!rotation_valid(placement.rotation)) {
    throw Error(ErrorCode::InvalidArgument, "rotation must be one of 0/90/180/270");
  }
  if (placement.scale <= 0.0) throw Error(ErrorCode::InvalidArgument, "scale must be > 0");
  const int s = scaled_side(patch.side, placement.scale);
  if (placement.x < 0 || placement.y < 0 || placement.x + s > img.width ||
      placement.y + s > img.height) {
    throw Error(ErrorCode::OutOfBoundsPlacement, "patch footprint leaves the image");
  }
}

struct PlacementSample {
  int image_index;
  PatchPlacement placement;
};

PatchPlacement sample_placement(int img_h, int img_w, int patch_side,
                                const std::vector<double>& scale_buckets,
                                const std::vector<int>& rotations, RngStream& rng) {
  // Uniform over valid (location, rotation, bucket) triples: count the
  // locations per bucket, draw one index over the total, decode.
  std::uint64_t total = 0;
  std::vector<std::uint64_t> per_bucket(scale_buckets.size(), 0);
  for (std::size_t s = 0; s < scale_buckets.size(); ++s) {
    const int side = scaled_side(patch_side, scale_buckets[s]);
    if (side <= img_h && side <= img_w) {
      per_bucket[s] = static_cast<std::uint64_t>(img_h - side + 1) *
                      static_cast<std::uint64_t>(img_w - side + 1) * rotations.size();
    }
    total += per_bucket[s];
  }
  if (total == 0) {
    throw Error(ErrorCode::OutOfBoundsPlacement, "patch does not fit the image at any scale");
  }
  std::uint64_t idx = rng.below(total);
  for (std::size_t s = 0; s < scale_buckets.size(); ++s) {
    if (idx >= per_bucket[s]) {
      idx -= per_bucket[s];
      continue;
    }
    const int side = scaled_side(patch_side, scale_buckets[s]);
    const std::uint64_t locs_x = static_cast<std::uint64_t>(img_w - side + 1);
    const std::uint64_t rot = idx % rotations.size();
    const std::uint64_t loc = idx / rotations.size();
    PatchPlacement placement;
    placement.scale = scale_buckets[s];
    placement.rotation = rotations[rot];
    placement.x = static_cast<int>(loc % locs_x);
    placement.y = static_cast<int>(loc / locs_x);
    return placement;
  }
  throw Error(ErrorCode::InvalidArgument, "placement decode failed");  // unreachable
}

}  // namespace

Patch Patch::constant(int side, double value) {
  Patch p;
  p.side = side;
  p.data.assign(static_cast<std::size_t>(side) * side * 3, value);
  return p;
}

int scaled_side(int side, double scale) {
  return std::max(1, static_cast<int>(std::llround(side * scale)));
}

Image apply_patch(const Image& img, const Patch& patch, const PatchPlacement& placement) {
  check_placement(img, patch, placement);
  const int s = scaled_side(patch.side, placement.scale);
  const FootprintMap map{s, patch.side, placement.rotation};
  Image out = img;
  for (int fy = 0; fy < s; ++fy) {
    for (int fx = 0; fx < s; ++fx) {
      const auto [py, px] = map.source(fy, fx);
      for (int c = 0; c < 3; ++c) {
        out.at(placement.y + fy, placement.x + fx, c) = patch.at(py, px, c);
      }
    }
  }
  return out;
}

PatchPlacement random_placement(int img_height, int img_width, const Patch& patch,
                                RngStream& rng, const std::vector<double>& scale_buckets) {
  static const std::vector<int> kRotations = {0, 90, 180, 270};
  return sample_placement(img_height, img_width, patch.side, scale_buckets, kRotations, rng);
}

double coverage_ratio(int img_height, int img_width, const Patch& patch,
                      const PatchPlacement& placement) {
  const double s = scaled_side(patch.side, placement.scale);
  return s * s / (static_cast<double>(img_height) * img_width);
}

PatchTrainResult train_patch(const std::vector<LabeledPair>& dataset,
                             const GradientOracle& oracle, const PatchTrainSpec& spec,
                             int side, const std::vector<double>& scale_buckets) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "train_patch needs a dataset");
  if (side < 1) throw Error(ErrorCode::InvalidArgument, "patch side must be >= 1");
  if (spec.iterations < 0 || spec.step_size <= 0.0 || spec.placements_per_step < 1 ||
      spec.eval_placements < 1) {
    throw Error(ErrorCode::InvalidArgument, "bad patch training parameters");
  }
  if (spec.rotations.empty()) {
    throw Error(ErrorCode::InvalidArgument, "rotation set must not be empty");
  }
  for (int r : spec.rotations) {
    if (!rotation_valid(r)) throw Error(ErrorCode::InvalidArgument, "bad rotation in spec");
  }

  RngStream rng(spec.seed);
  auto draw_sample = [&](RngStream& stream) {
    PlacementSample s;
    s.image_index = static_cast<int>(stream.below(dataset.size()));
    const Image& img = dataset[s.image_index].first;
    s.placement =
        sample_placement(img.height, img.width, side, scale_buckets, spec.rotations, stream);
    return s;
  };

  // Fixed evaluation set for the objective trace.
  RngStream eval_rng = rng.split(0x45564C);
  std::vector<PlacementSample> eval_set(spec.eval_placements);
  for (auto& s : eval_set) s = draw_sample(eval_rng);

  Patch patch = Patch::constant(side, 127.5);

  auto expected_loss = [&]() {
    std::vector<double> losses(eval_set.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(eval_set.size()); ++i) {
      const auto& [img, mask] = dataset[eval_set[i].image_index];
      losses[i] = oracle.loss(apply_patch(img, patch, eval_set[i].placement), mask);
    }
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(losses.size());
  };

  PatchTrainResult result;
  const std::size_t patch_entries = patch.data.size();
  for (int iter = 0; iter < spec.iterations; ++iter) {
    result.objective_trace.push_back(expected_loss());

    std::vector<PlacementSample> samples(spec.placements_per_step);
    for (auto& s : samples) s = draw_sample(rng);

    std::vector<std::vector<double>> grads(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
      const auto& [img, mask] = dataset[samples[i].image_index];
      const PatchPlacement& placement = samples[i].placement;
      const Image patched = apply_patch(img, patch, placement);
      const std::vector<double> g_img = oracle.loss_gradient(patched, mask);
      std::vector<double> g_patch(patch_entries, 0.0);
      const int s = scaled_side(side, placement.scale);
      const FootprintMap map{s, side, placement.rotation};
      for (int fy = 0; fy < s; ++fy) {
        for (int fx = 0; fx < s; ++fx) {
          const auto [py, px] = map.source(fy, fx);
          const std::size_t src =
              (static_cast<std::size_t>(placement.y + fy) * img.width + placement.x + fx) * 3;
          const std::size_t dst = (static_cast<std::size_t>(py) * side + px) * 3;
          g_patch[dst] += g_img[src];
          g_patch[dst + 1] += g_img[src + 1];
          g_patch[dst + 2] += g_img[src + 2];
        }
      }
      grads[i] = std::move(g_patch);
    }

    // Serial accumulation in sample order, then ascend and clamp.
    const double scale = spec.step_size / static_cast<double>(samples.size());
    for (const auto& g : grads) {
      for (std::size_t e = 0; e < patch_entries; ++e) {
        patch.data[e] = patch.data[e] + scale * g[e];
      }
    }
    for (double& v : patch.data) v = clamp_byte(v);
  }
  result.objective_trace.push_back(expected_loss());

  result.patch = std::move(patch);
  return result;
}

}  // namespace sodbench
