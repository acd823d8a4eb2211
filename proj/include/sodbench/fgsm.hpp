#pragma once

#include <vector>

#include "sodbench/image.hpp"
#include "sodbench/model.hpp"

namespace sodbench {

// Single-step white-box attack: out = clamp(img + epsilon * sign(grad)),
// with sign(0) = 0 so zero-gradient entries stay untouched. Deterministic;
// every unclamped modified entry differs from the input by exactly epsilon.
Image fgsm(const Image& img, const BinaryMask& truth, const GradientOracle& oracle,
           double epsilon);

// One adversarial image per epsilon.
std::vector<Image> fgsm_sweep(const Image& img, const BinaryMask& truth,
                              const GradientOracle& oracle, const std::vector<double>& epsilons);

}  // namespace sodbench
