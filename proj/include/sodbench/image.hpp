#pragma once

#include <cstdint>
#include <vector>

namespace sodbench {

// RGB raster with continuous channel values in [0, 255]. Pixels stay in byte
// scale internally; quantization to 8 bits happens only at file boundaries.
// Immutable by convention once built (attacks return fresh copies), so
// sharing across threads is safe.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // row-major, interleaved r,g,b

  static constexpr int kChannels = 3;

  static Image zeros(int height, int width);
  static Image constant(int height, int width, double r, double g, double b);

  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  std::size_t entries() const { return data.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  bool same_dims(const Image& o) const { return height == o.height && width == o.width; }
};

// Per-pixel prediction in [0, 1]; dimensions always match the source image.
struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static SaliencyMap zeros(int height, int width);

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixels() const { return data.size(); }
};

// Ground-truth mask, values exactly 0 or 1.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  static BinaryMask zeros(int height, int width);

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixels() const { return data.size(); }
  std::size_t positive_count() const;
};

enum class Norm { L0, L1, L2, LInf };

// Elementwise p-norm of (a - b). L0 counts modified *pixels* (a pixel counts
// once if any channel differs); LInf is the max absolute channel difference.
double lp_distance(const Image& a, const Image& b, Norm norm);

double clamp_byte(double v);  // clamp to [0, 255]

// Gray plane, gray = (r + g + b) / 3.
std::vector<double> gray_plane(const Image& img);

// True when every value is finite and inside [0, 255].
bool image_values_valid(const Image& img);
// True when every value is finite and inside [0, 1].
bool map_values_valid(const SaliencyMap& map);

}  // namespace sodbench
