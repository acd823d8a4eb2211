#include "sodbench/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "sodbench/error.hpp"

namespace sodbench {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "missing file";
    case ErrorCode::UnsupportedFormat: return "unsupported format";
    case ErrorCode::CorruptData: return "corrupt data";
    case ErrorCode::UnwritablePath: return "unwritable path";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::EmptyDataset: return "empty dataset";
    case ErrorCode::EmptyGroundTruth: return "empty ground truth";
    case ErrorCode::MalformedProgram: return "malformed program";
    case ErrorCode::OutOfBoundsPlacement: return "out-of-bounds placement";
    case ErrorCode::ConfigError: return "config error";
  }
  return "error";
}

Image Image::zeros(int height, int width) {
  Image img;
  img.height = height;
  img.width = width;
  img.data.assign(static_cast<std::size_t>(height) * width * kChannels, 0.0);
  return img;
}

Image Image::constant(int height, int width, double r, double g, double b) {
  Image img = zeros(height, width);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    img.data[p * 3 + 0] = r;
    img.data[p * 3 + 1] = g;
    img.data[p * 3 + 2] = b;
  }
  return img;
}

SaliencyMap SaliencyMap::zeros(int height, int width) {
  SaliencyMap map;
  map.height = height;
  map.width = width;
  map.data.assign(static_cast<std::size_t>(height) * width, 0.0);
  return map;
}

BinaryMask BinaryMask::zeros(int height, int width) {
  BinaryMask mask;
  mask.height = height;
  mask.width = width;
  mask.data.assign(static_cast<std::size_t>(height) * width, 0);
  return mask;
}

std::size_t BinaryMask::positive_count() const {
  std::size_t n = 0;
  for (std::uint8_t v : data) n += v;
  return n;
}

double clamp_byte(double v) { return std::clamp(v, 0.0, 255.0); }

double lp_distance(const Image& a, const Image& b, Norm norm) {
  if (!a.same_dims(b)) {
    throw Error(ErrorCode::DimensionMismatch, "lp_distance inputs differ in size");
  }
  switch (norm) {
    case Norm::L0: {
      std::size_t count = 0;
      for (std::size_t p = 0; p < a.pixels(); ++p) {
        const std::size_t o = p * 3;
        if (a.data[o] != b.data[o] || a.data[o + 1] != b.data[o + 1] ||
            a.data[o + 2] != b.data[o + 2]) {
          ++count;
        }
      }
      return static_cast<double>(count);
    }
    case Norm::L1: {
      double sum = 0.0;
      for (std::size_t i = 0; i < a.entries(); ++i) sum += std::abs(a.data[i] - b.data[i]);
      return sum;
    }
    case Norm::L2: {
      double sum = 0.0;
      for (std::size_t i = 0; i < a.entries(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
      }
      return std::sqrt(sum);
    }
    case Norm::LInf: {
      double best = 0.0;
      for (std::size_t i = 0; i < a.entries(); ++i) {
        best = std::max(best, std::abs(a.data[i] - b.data[i]));
      }
      return best;
    }
  }
  return 0.0;
}

std::vector<double> gray_plane(const Image& img) {
  std::vector<double> gray(img.pixels());
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    gray[p] = (img.data[p * 3] + img.data[p * 3 + 1] + img.data[p * 3 + 2]) / 3.0;
  }
  return gray;
}

bool image_values_valid(const Image& img) {
  if (img.data.size() != img.pixels() * Image::kChannels) return false;
  for (double v : img.data) {
    if (!std::isfinite(v) || v < 0.0 || v > 255.0) return false;
  }
  return true;
}

bool map_values_valid(const SaliencyMap& map) {
  if (map.data.size() != static_cast<std::size_t>(map.height) * map.width) return false;
  for (double v : map.data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
  }
  return true;
}

}  // namespace sodbench
