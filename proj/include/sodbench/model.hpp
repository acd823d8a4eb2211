#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sodbench/image.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

// A detector maps an image to a saliency map of the same size. predict must
// be deterministic for a fixed model state and is called concurrently from
// per-image loops, so implementations are const and self-contained.
class SodModel {
public:
  virtual ~SodModel() = default;
  virtual std::string name() const = 0;
  virtual SaliencyMap predict(const Image& img) const = 0;
};

// White-box access used by gradient attacks: the loss is the mean binary
// cross-entropy between the prediction and a target mask, and loss_gradient
// returns its derivative with respect to every input entry.
class GradientOracle {
public:
  virtual ~GradientOracle() = default;
  virtual double loss(const Image& img, const BinaryMask& target) const = 0;
  virtual std::vector<double> loss_gradient(const Image& img, const BinaryMask& target) const = 0;
};

struct LinearFitParams {
  int steps = 2000;
  double learning_rate = 2e-2;
  // Box side for spatial smoothing of the weight planes after each step;
  // 0 or 1 disables. Smoothing keeps the per-pixel weights spatially
  // coherent so the model behaves like a detector instead of a lookup table.
  int smooth_window = 9;
};

// Per-pixel logistic detector: s(y,x) = logistic(sum_c w(y,x,c) i(y,x,c) + b).
// Differentiable end to end, which makes it the in-tree target for white-box
// attacks.
class LinearToyModel : public SodModel, public GradientOracle {
public:
  LinearToyModel(int height, int width, std::vector<double> weights, double bias);

  static LinearToyModel zeros(int height, int width);
  static LinearToyModel random(int height, int width, double scale, RngStream& rng);
  static LinearToyModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::string name() const override { return "linear"; }
  SaliencyMap predict(const Image& img) const override;

  double loss(const Image& img, const BinaryMask& target) const override;
  std::vector<double> loss_gradient(const Image& img, const BinaryMask& target) const override;

  // Full-batch gradient descent on the mean BCE over the dataset.
  void fit(const std::vector<std::pair<Image, BinaryMask>>& data, const LinearFitParams& params);

  int height() const { return height_; }
  int width() const { return width_; }
  double bias() const { return bias_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(int y, int x, int c) const {
    return weights_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }

  // sup of the RMS output change over an L-inf input ball of radius delta:
  // (delta / 4) * sqrt(mean_p (sum_c |w_pc|)^2), from the logistic derivative
  // bound 1/4.
  double continuity_bound(double delta) const;

private:
  void check_dims(int h, int w, const char* what) const;

  int height_;
  int width_;
  std::vector<double> weights_;  // row-major, interleaved per channel
  double bias_;
};

// Non-learned center-surround baseline: per-pixel distance between the local
// k x k box mean and the global mean color, min-max normalized.
SaliencyMap heuristic_predict(const Image& img, int window = 9);

class HeuristicModel : public SodModel {
public:
  explicit HeuristicModel(int window = 9) : window_(window) {}
  std::string name() const override { return "heuristic"; }
  SaliencyMap predict(const Image& img) const override { return heuristic_predict(img, window_); }

private:
  int window_;
};

// Min-max normalize to [0, 1]; a constant plane maps to all zeros.
void minmax_normalize(std::vector<double>& plane);

double logistic(double z);

}  // namespace sodbench
