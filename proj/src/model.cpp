#include "sodbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sodbench/error.hpp"

namespace sodbench {

namespace {

constexpr char kWeightMagic[8] = {'S', 'B', 'L', 'I', 'N', '0', '1', '\0'};
constexpr double kBceEps = 1e-12;

// Box mean with clamp-to-edge windows via a summed-area table, one plane.
std::vector<double> box_mean_plane(const std::vector<double>& plane, int h, int w, int window) {
  const int r = window / 2;
  std::vector<double> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += plane[static_cast<std::size_t>(y) * w + x];
      sat[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] = row;
    }
  }
#pragma omp parallel for schedule(static)
  for (int x = 0; x <= w; ++x) {
    double col = 0.0;
    for (int y = 0; y <= h; ++y) {
      col += sat[static_cast<std::size_t>(y) * (w + 1) + x];
      sat[static_cast<std::size_t>(y) * (w + 1) + x] = col;
    }
  }
  std::vector<double> out(plane.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const double sum = sat[std::size_t(y1 + 1) * (w + 1) + (x1 + 1)] -
                         sat[std::size_t(y0) * (w + 1) + (x1 + 1)] -
                         sat[std::size_t(y1 + 1) * (w + 1) + x0] +
                         sat[std::size_t(y0) * (w + 1) + x0];
      out[static_cast<std::size_t>(y) * w + x] = sum / ((y1 - y0 + 1) * (x1 - x0 + 1));
    }
  }
  return out;
}

}  // namespace

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void minmax_normalize(std::vector<double>& plane) {
  if (plane.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(plane.begin(), plane.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) {
    std::fill(plane.begin(), plane.end(), 0.0);
    return;
  }
  const double inv = 1.0 / (hi - lo);
  for (double& v : plane) v = (v - lo) * inv;
}

LinearToyModel::LinearToyModel(int height, int width, std::vector<double> weights, double bias)
    : height_(height), width_(width), weights_(std::move(weights)), bias_(bias) {
  if (height_ <= 0 || width_ <= 0 ||
      weights_.size() != static_cast<std::size_t>(height_) * width_ * 3) {
    throw Error(ErrorCode::InvalidArgument, "linear model weight tensor does not match dims");
  }
}

LinearToyModel LinearToyModel::zeros(int height, int width) {
  return LinearToyModel(height, width,
                        std::vector<double>(static_cast<std::size_t>(height) * width * 3, 0.0),
                        0.0);
}

LinearToyModel LinearToyModel::random(int height, int width, double scale, RngStream& rng) {
  std::vector<double> w(static_cast<std::size_t>(height) * width * 3);
  for (double& v : w) v = rng.uniform(-scale, scale);
  return LinearToyModel(height, width, std::move(w), rng.uniform(-scale, scale));
}

void LinearToyModel::check_dims(int h, int w, const char* what) const {
  if (h != height_ || w != width_) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " does not match model size");
  }
}

SaliencyMap LinearToyModel::predict(const Image& img) const {
  check_dims(img.height, img.width, "image");
  SaliencyMap map = SaliencyMap::zeros(height_, width_);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(map.pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    const std::size_t o = static_cast<std::size_t>(p) * 3;
    const double z = weights_[o] * img.data[o] + weights_[o + 1] * img.data[o + 1] +
                     weights_[o + 2] * img.data[o + 2] + bias_;
    map.data[p] = logistic(z);
  }
  return map;
}

double LinearToyModel::loss(const Image& img, const BinaryMask& target) const {
  check_dims(target.height, target.width, "target");
  const SaliencyMap map = predict(img);
  double sum = 0.0;
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    const double s = std::clamp(map.data[p], kBceEps, 1.0 - kBceEps);
    sum += target.data[p] ? -std::log(s) : -std::log(1.0 - s);
  }
  return sum / static_cast<double>(map.pixels());
}

std::vector<double> LinearToyModel::loss_gradient(const Image& img, const BinaryMask& target) const {
  check_dims(img.height, img.width, "image");
  check_dims(target.height, target.width, "target");
  // d(mean BCE)/d z_p = (s_p - g_p) / N, and z_p is linear in the inputs.
  std::vector<double> grad(img.entries());
  const double inv_n = 1.0 / static_cast<double>(img.pixels());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(img.pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    const std::size_t o = static_cast<std::size_t>(p) * 3;
    const double z = weights_[o] * img.data[o] + weights_[o + 1] * img.data[o + 1] +
                     weights_[o + 2] * img.data[o + 2] + bias_;
    const double delta = (logistic(z) - target.data[p]) * inv_n;
    grad[o] = delta * weights_[o];
    grad[o + 1] = delta * weights_[o + 1];
    grad[o + 2] = delta * weights_[o + 2];
  }
  return grad;
}

void LinearToyModel::fit(const std::vector<std::pair<Image, BinaryMask>>& data,
                         const LinearFitParams& params) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "linear fit needs at least one image");
  for (const auto& [img, mask] : data) {
    check_dims(img.height, img.width, "training image");
    check_dims(mask.height, mask.width, "training mask");
  }
  // Full-batch Adam: the raw byte scale and the heavy negative-class
  // imbalance make plain gradient descent crawl, while the per-coordinate
  // step normalization converges in a few hundred steps.
  const std::size_t n_entries = weights_.size();
  const double inv_n = 1.0 / static_cast<double>(static_cast<std::size_t>(height_) * width_);
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  // Start the shared bias at the class-prior log-odds; with a zero weight
  // tensor that is the exact optimum of the bias alone.
  if (bias_ == 0.0) {
    double positives = 0.0, total = 0.0;
    for (const auto& [img, mask] : data) {
      (void)img;
      positives += static_cast<double>(mask.positive_count());
      total += static_cast<double>(mask.pixels());
    }
    const double prior = std::clamp(positives / total, 1e-6, 1.0 - 1e-6);
    bias_ = std::log(prior / (1.0 - prior));
  }
  std::vector<double> grad_w(n_entries);
  std::vector<double> m_w(n_entries, 0.0), v_w(n_entries, 0.0);
  double m_b = 0.0, v_b = 0.0;
  std::vector<double> deltas(static_cast<std::size_t>(height_) * width_);
  for (int step = 0; step < params.steps; ++step) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    double grad_b = 0.0;
    for (const auto& [img, mask] : data) {
      const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(img.pixels());
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t p = 0; p < n; ++p) {
        const std::size_t o = static_cast<std::size_t>(p) * 3;
        const double z = weights_[o] * img.data[o] + weights_[o + 1] * img.data[o + 1] +
                         weights_[o + 2] * img.data[o + 2] + bias_;
        const double delta = (logistic(z) - mask.data[p]) * inv_n;
        grad_w[o] += delta * img.data[o];
        grad_w[o + 1] += delta * img.data[o + 1];
        grad_w[o + 2] += delta * img.data[o + 2];
        deltas[static_cast<std::size_t>(p)] = delta;
      }
      // Serial bias reduction keeps the result independent of thread count.
      for (double d : deltas) grad_b += d;
    }
    const double inv_images = 1.0 / static_cast<double>(data.size());
    const double bc1 = 1.0 - std::pow(beta1, step + 1);
    const double bc2 = 1.0 - std::pow(beta2, step + 1);
    for (std::size_t i = 0; i < n_entries; ++i) {
      const double g = grad_w[i] * inv_images;
      m_w[i] = beta1 * m_w[i] + (1.0 - beta1) * g;
      v_w[i] = beta2 * v_w[i] + (1.0 - beta2) * g * g;
      weights_[i] -= params.learning_rate * (m_w[i] / bc1) / (std::sqrt(v_w[i] / bc2) + adam_eps);
    }
    {
      const double g = grad_b * inv_images;
      m_b = beta1 * m_b + (1.0 - beta1) * g;
      v_b = beta2 * v_b + (1.0 - beta2) * g * g;
      bias_ -= params.learning_rate * (m_b / bc1) / (std::sqrt(v_b / bc2) + adam_eps);
    }
    if (params.smooth_window > 1) {
      for (int c = 0; c < 3; ++c) {
        std::vector<double> plane(static_cast<std::size_t>(height_) * width_);
        for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = weights_[p * 3 + c];
        plane = box_mean_plane(plane, height_, width_, params.smooth_window);
        for (std::size_t p = 0; p < plane.size(); ++p) weights_[p * 3 + c] = plane[p];
      }
    }
  }
}

double LinearToyModel::continuity_bound(double delta) const {
  double acc = 0.0;
  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  for (std::size_t p = 0; p < n; ++p) {
    const double row = std::abs(weights_[p * 3]) + std::abs(weights_[p * 3 + 1]) +
                       std::abs(weights_[p * 3 + 2]);
    acc += row * row;
  }
  return 0.25 * delta * std::sqrt(acc / static_cast<double>(n));
}

void LinearToyModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
  out.write(kWeightMagic, 8);
  const std::int32_t h = height_, w = width_;
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&bias_), 8);
  out.write(reinterpret_cast<const char*>(weights_.data()),
            static_cast<std::streamsize>(weights_.size() * 8));
  if (!out) throw Error(ErrorCode::UnwritablePath, path.string());
}

LinearToyModel LinearToyModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kWeightMagic, 8) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + ": not a linear weight file");
  }
  std::int32_t h = 0, w = 0;
  double bias = 0.0;
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&bias), 8);
  if (!in || h <= 0 || w <= 0) throw Error(ErrorCode::CorruptData, path.string());
  std::vector<double> weights(static_cast<std::size_t>(h) * w * 3);
  in.read(reinterpret_cast<char*>(weights.data()),
          static_cast<std::streamsize>(weights.size() * 8));
  if (!in) throw Error(ErrorCode::CorruptData, path.string() + ": truncated weights");
  return LinearToyModel(h, w, std::move(weights), bias);
}

SaliencyMap heuristic_predict(const Image& img, int window) {
  if (window < 1) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  const int h = img.height, w = img.width;
  std::vector<double> planes[3];
  double global[3] = {0.0, 0.0, 0.0};
  for (int c = 0; c < 3; ++c) {
    planes[c].resize(img.pixels());
    for (std::size_t p = 0; p < img.pixels(); ++p) planes[c][p] = img.data[p * 3 + c];
    for (double v : planes[c]) global[c] += v;
    global[c] /= static_cast<double>(img.pixels());
    planes[c] = box_mean_plane(planes[c], h, w, window);
  }
  SaliencyMap map = SaliencyMap::zeros(h, w);
  for (std::size_t p = 0; p < map.pixels(); ++p) {
    const double dr = planes[0][p] - global[0];
    const double dg = planes[1][p] - global[1];
    const double db = planes[2][p] - global[2];
    map.data[p] = std::sqrt(dr * dr + dg * dg + db * db);
  }
  minmax_normalize(map.data);
  return map;
}

}  // namespace sodbench
