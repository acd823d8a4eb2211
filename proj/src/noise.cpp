#include "sodbench/noise.hpp"

#include <cmath>
#include <cstddef>

#include "sodbench/error.hpp"

namespace sodbench {

Image gaussian_noise(const Image& img, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "gaussian sigma must be >= 0");
  const std::uint64_t base = rng.next_u64();
  if (sigma == 0.0) return img;
  Image out = img;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.entries());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    RngStream entry(RngStream::derive(base, static_cast<std::uint64_t>(i)));
    out.data[i] = clamp_byte(out.data[i] + entry.normal(0.0, sigma));
  }
  return out;
}

Image salt_pepper_noise(const Image& img, double density, RngStream& rng, bool luma) {
  if (density < 0.0 || density > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "salt & pepper density must be in [0, 1]");
  }
  const std::uint64_t base = rng.next_u64();
  if (density == 0.0) return img;
  Image out = img;
  if (luma) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.pixels());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
      RngStream entry(RngStream::derive(base, static_cast<std::uint64_t>(p)));
      const double pv = entry.uniform();
      if (pv < density) {
        const double v = pv < density / 2.0 ? 0.0 : 255.0;
        out.data[p * 3] = out.data[p * 3 + 1] = out.data[p * 3 + 2] = v;
      }
    }
  } else {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.entries());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      RngStream entry(RngStream::derive(base, static_cast<std::uint64_t>(i)));
      const double pv = entry.uniform();
      if (pv < density) out.data[i] = pv < density / 2.0 ? 0.0 : 255.0;
    }
  }
  return out;
}

Image speckle_noise(const Image& img, double variance, RngStream& rng, bool gaussian) {
  if (variance < 0.0) throw Error(ErrorCode::InvalidArgument, "speckle variance must be >= 0");
  const std::uint64_t base = rng.next_u64();
  if (variance == 0.0) return img;
  Image out = img;
  const double sigma = std::sqrt(variance);
  const double half_width = std::sqrt(3.0 * variance);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.entries());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    RngStream entry(RngStream::derive(base, static_cast<std::uint64_t>(i)));
    const double m = gaussian ? entry.normal(0.0, sigma) : entry.uniform(-half_width, half_width);
    out.data[i] = clamp_byte(out.data[i] + m * out.data[i]);
  }
  return out;
}

Image apply_noise(const Image& img, const NoiseSpec& spec, RngStream& rng) {
  switch (spec.kind) {
    case NoiseSpec::Kind::Gaussian: return gaussian_noise(img, spec.sigma, rng);
    case NoiseSpec::Kind::SaltPepper:
      return salt_pepper_noise(img, spec.density, rng, spec.salt_pepper_luma);
    case NoiseSpec::Kind::Speckle:
      return speckle_noise(img, spec.variance, rng, spec.speckle_gaussian);
  }
  return img;
}

}  // namespace sodbench
