#pragma once

// Serial reference implementations kept for testing. Straight loops, no
// OpenMP, no shared code with the optimized kernels: unit tests compare the
// two paths and the benchmark times them against each other. pr_curve here
// is the plain per-threshold confusion-matrix sweep, box_mean the O(HWk^2)
// window scan.

#include <vector>

#include "sodbench/eval.hpp"
#include "sodbench/image.hpp"
#include "sodbench/model.hpp"

namespace sodbench::ref {

double lp_distance(const Image& a, const Image& b, Norm norm);

PrCurve pr_curve(const SaliencyMap& map, const BinaryMask& truth, int m);
double max_fbeta(const SaliencyMap& map, const BinaryMask& truth, const FBetaConfig& cfg = {});

SaliencyMap linear_predict(const LinearToyModel& model, const Image& img);

std::vector<double> box_mean(const std::vector<double>& plane, int h, int w, int window);
SaliencyMap heuristic_predict(const Image& img, int window = 9);

Image gaussian_noise(const Image& img, double sigma, RngStream& rng);
Image salt_pepper_noise(const Image& img, double density, RngStream& rng);
Image speckle_noise(const Image& img, double variance, RngStream& rng);

}  // namespace sodbench::ref
