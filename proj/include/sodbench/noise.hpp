#pragma once

#include <cstdint>

#include "sodbench/image.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

// Random perturbation generators. Each operation consumes exactly one 64-bit
// draw from the stream and derives every entry's randomness from
// (draw, entry index) with RngStream::derive, so the kernels parallelize over
// entries without changing results.

struct NoiseSpec {
  enum class Kind { Gaussian, SaltPepper, Speckle };
  Kind kind = Kind::Gaussian;
  double sigma = 30.0;      // gaussian: std-dev in byte units
  double density = 0.05;    // salt & pepper: fraction of entries hit
  double variance = 0.3;    // speckle: variance of the multiplicative factor
  bool salt_pepper_luma = false;  // same fate for all three channels
  bool speckle_gaussian = false;  // gaussian m instead of the default uniform m
};

// out = clamp(img + n), n i.i.d. Normal(0, sigma^2) per channel entry.
Image gaussian_noise(const Image& img, double sigma, RngStream& rng);

// Per channel entry: with prob density/2 -> 0, with prob density/2 -> 255,
// else unchanged. In luma mode the whole pixel shares one fate.
Image salt_pepper_noise(const Image& img, double density, RngStream& rng,
                        bool luma = false);

// out = clamp(img + m*img), m zero-mean with the given variance. The default
// draws m uniform over [-sqrt(3 var), sqrt(3 var)]; the gaussian switch draws
// m from Normal(0, var) instead (whose clamp truncation biases the observed
// variance low).
Image speckle_noise(const Image& img, double variance, RngStream& rng,
                    bool gaussian = false);

Image apply_noise(const Image& img, const NoiseSpec& spec, RngStream& rng);

}  // namespace sodbench
