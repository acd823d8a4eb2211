#include "sodbench/fgsm.hpp"

#include "sodbench/error.hpp"

namespace sodbench {

Image fgsm(const Image& img, const BinaryMask& truth, const GradientOracle& oracle,
           double epsilon) {
  if (epsilon < 0.0) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  if (img.height != truth.height || img.width != truth.width) {
    throw Error(ErrorCode::DimensionMismatch, "image and truth differ in size");
  }
  const std::vector<double> grad = oracle.loss_gradient(img, truth);
  if (grad.size() != img.entries()) {
    throw Error(ErrorCode::DimensionMismatch, "oracle gradient shape does not match image");
  }
  Image out = img;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.entries());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double g = grad[i];
    if (g > 0.0) {
      out.data[i] = clamp_byte(out.data[i] + epsilon);
    } else if (g < 0.0) {
      out.data[i] = clamp_byte(out.data[i] - epsilon);
    }
  }
  return out;
}

std::vector<Image> fgsm_sweep(const Image& img, const BinaryMask& truth,
                              const GradientOracle& oracle,
                              const std::vector<double>& epsilons) {
  if (epsilons.empty()) throw Error(ErrorCode::InvalidArgument, "epsilon list is empty");
  std::vector<Image> out;
  out.reserve(epsilons.size());
  for (const double eps : epsilons) out.push_back(fgsm(img, truth, oracle, eps));
  return out;
}

}  // namespace sodbench
