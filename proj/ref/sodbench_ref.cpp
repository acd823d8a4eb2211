#include "sodbench_ref.hpp"

#include <algorithm>
#include <cmath>

#include "sodbench/error.hpp"
#include "sodbench/rng.hpp"

namespace sodbench::ref {

double lp_distance(const Image& a, const Image& b, Norm norm) {
  if (a.height != b.height || a.width != b.width) {
    throw Error(ErrorCode::DimensionMismatch, "ref lp_distance size mismatch");
  }
  if (norm == Norm::L0) {
    double count = 0.0;
    for (int y = 0; y < a.height; ++y) {
      for (int x = 0; x < a.width; ++x) {
        bool changed = false;
        for (int c = 0; c < 3; ++c) {
          if (a.at(y, x, c) != b.at(y, x, c)) changed = true;
        }
        if (changed) count += 1.0;
      }
    }
    return count;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = std::abs(a.data[i] - b.data[i]);
    if (norm == Norm::L1) acc += d;
    if (norm == Norm::L2) acc += d * d;
    if (norm == Norm::LInf) acc = std::max(acc, d);
  }
  return norm == Norm::L2 ? std::sqrt(acc) : acc;
}

PrCurve pr_curve(const SaliencyMap& map, const BinaryMask& truth, int m) {
  if (map.height != truth.height || map.width != truth.width) {
    throw Error(ErrorCode::DimensionMismatch, "ref pr_curve size mismatch");
  }
  std::size_t positives = 0;
  for (auto v : truth.data) positives += v;
  if (positives == 0) throw Error(ErrorCode::EmptyGroundTruth, "ref pr_curve empty truth");

  PrCurve curve;
  for (int k = 1; k <= m; ++k) {
    const double tau = static_cast<double>(k) / static_cast<double>(m + 1);
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t p = 0; p < map.data.size(); ++p) {
      const bool pred = map.data[p] >= tau;
      const bool pos = truth.data[p] != 0;
      if (pred && pos) ++tp;
      if (pred && !pos) ++fp;
      if (!pred && pos) ++fn;
    }
    curve.thresholds.push_back(tau);
    curve.precision.push_back(tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp));
    curve.recall.push_back(double(tp) / double(tp + fn));
  }
  return curve;
}

double max_fbeta(const SaliencyMap& map, const BinaryMask& truth, const FBetaConfig& cfg) {
  const PrCurve curve = ref::pr_curve(map, truth, cfg.thresholds);
  double best = 0.0;
  for (std::size_t k = 0; k < curve.precision.size(); ++k) {
    const double p = curve.precision[k], r = curve.recall[k];
    const double f = (p == 0.0 && r == 0.0)
                         ? 0.0
                         : (1.0 + cfg.beta_squared) * p * r / (cfg.beta_squared * p + r);
    best = std::max(best, f);
  }
  return best;
}

SaliencyMap linear_predict(const LinearToyModel& model, const Image& img) {
  SaliencyMap map = SaliencyMap::zeros(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double z = model.bias();
      for (int c = 0; c < 3; ++c) z += model.weight(y, x, c) * img.at(y, x, c);
      map.at(y, x) = 1.0 / (1.0 + std::exp(-z));
    }
  }
  return map;
}

std::vector<double> box_mean(const std::vector<double>& plane, int h, int w, int window) {
  const int r = window / 2;
  std::vector<double> out(plane.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int yy = y - r; yy <= y + r; ++yy) {
        for (int xx = x - r; xx <= x + r; ++xx) {
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          sum += plane[static_cast<std::size_t>(yy) * w + xx];
          ++count;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = sum / count;
    }
  }
  return out;
}

SaliencyMap heuristic_predict(const Image& img, int window) {
  double global[3] = {0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    for (int c = 0; c < 3; ++c) global[c] += img.data[p * 3 + c];
  }
  for (double& g : global) g /= static_cast<double>(img.pixels());

  std::vector<double> planes[3];
  for (int c = 0; c < 3; ++c) {
    std::vector<double> plane(img.pixels());
    for (std::size_t p = 0; p < img.pixels(); ++p) plane[p] = img.data[p * 3 + c];
    planes[c] = box_mean(plane, img.height, img.width, window);
  }
  SaliencyMap map = SaliencyMap::zeros(img.height, img.width);
  double lo = 1e300, hi = -1e300;
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = planes[c][p] - global[c];
      acc += d * d;
    }
    map.data[p] = std::sqrt(acc);
    lo = std::min(lo, map.data[p]);
    hi = std::max(hi, map.data[p]);
  }
  for (double& v : map.data) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return map;
}

Image gaussian_noise(const Image& img, double sigma, RngStream& rng) {
  const std::uint64_t base = rng.next_u64();
  if (sigma == 0.0) return img;
  Image out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    RngStream entry(RngStream::derive(base, i));
    out.data[i] = clamp_byte(out.data[i] + entry.normal(0.0, sigma));
  }
  return out;
}

Image salt_pepper_noise(const Image& img, double density, RngStream& rng) {
  const std::uint64_t base = rng.next_u64();
  if (density == 0.0) return img;
  Image out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    RngStream entry(RngStream::derive(base, i));
    const double pv = entry.uniform();
    if (pv < density) out.data[i] = pv < density / 2.0 ? 0.0 : 255.0;
  }
  return out;
}

Image speckle_noise(const Image& img, double variance, RngStream& rng) {
  const std::uint64_t base = rng.next_u64();
  if (variance == 0.0) return img;
  Image out = img;
  const double half_width = std::sqrt(3.0 * variance);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    RngStream entry(RngStream::derive(base, i));
    const double m = entry.uniform(-half_width, half_width);
    out.data[i] = clamp_byte(out.data[i] + m * out.data[i]);
  }
  return out;
}

}  // namespace sodbench::ref
