// Times the OpenMP kernels against the serial reference implementations and
// reports the largest divergence between the two paths. Run with
// OMP_NUM_THREADS to control the parallel side.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "sodbench/eval.hpp"
#include "sodbench/image.hpp"
#include "sodbench/model.hpp"
#include "sodbench/noise.hpp"
#include "sodbench/rng.hpp"
#include "sodbench_ref.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = Clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* kernel, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-18s %10.2f ms %10.2f ms %8.2fx %12.3g\n", kernel, serial_ms, parallel_ms,
              serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
  const int h = 512, w = 512;
  const int reps = 5;
  sodbench::RngStream rng(42);

  sodbench::Image img = sodbench::Image::zeros(h, w);
  for (double& v : img.data) v = rng.uniform(0.0, 255.0);

  sodbench::SaliencyMap map = sodbench::SaliencyMap::zeros(h, w);
  for (double& v : map.data) v = rng.uniform();
  sodbench::BinaryMask mask = sodbench::BinaryMask::zeros(h, w);
  for (auto& v : mask.data) v = rng.uniform() < 0.2 ? 1 : 0;

  sodbench::LinearToyModel model = sodbench::LinearToyModel::random(h, w, 0.02, rng);

  std::printf("%-18s %13s %13s %9s %12s\n", "kernel", "serial", "openmp", "speedup", "max|diff|");

  {
    sodbench::PrCurve serial_curve, parallel_curve;
    const double serial_ms =
        time_ms([&] { serial_curve = sodbench::ref::pr_curve(map, mask, 255); }, reps);
    const double parallel_ms =
        time_ms([&] { parallel_curve = sodbench::pr_curve(map, mask, 255); }, reps);
    double diff = 0.0;
    for (std::size_t k = 0; k < serial_curve.precision.size(); ++k) {
      diff = std::max(diff, std::abs(serial_curve.precision[k] - parallel_curve.precision[k]));
      diff = std::max(diff, std::abs(serial_curve.recall[k] - parallel_curve.recall[k]));
    }
    report("pr_curve", serial_ms, parallel_ms, diff);
  }

  {
    sodbench::SaliencyMap serial_map, parallel_map;
    const double serial_ms =
        time_ms([&] { serial_map = sodbench::ref::linear_predict(model, img); }, reps);
    const double parallel_ms = time_ms([&] { parallel_map = model.predict(img); }, reps);
    double diff = 0.0;
    for (std::size_t p = 0; p < serial_map.data.size(); ++p) {
      diff = std::max(diff, std::abs(serial_map.data[p] - parallel_map.data[p]));
    }
    report("linear_predict", serial_ms, parallel_ms, diff);
  }

  {
    sodbench::SaliencyMap serial_map, parallel_map;
    const double serial_ms =
        time_ms([&] { serial_map = sodbench::ref::heuristic_predict(img, 9); }, reps);
    const double parallel_ms =
        time_ms([&] { parallel_map = sodbench::heuristic_predict(img, 9); }, reps);
    double diff = 0.0;
    for (std::size_t p = 0; p < serial_map.data.size(); ++p) {
      diff = std::max(diff, std::abs(serial_map.data[p] - parallel_map.data[p]));
    }
    report("heuristic_predict", serial_ms, parallel_ms, diff);
  }

  {
    sodbench::Image serial_img, parallel_img;
    const double serial_ms = time_ms(
        [&] {
          sodbench::RngStream r(7);
          serial_img = sodbench::ref::gaussian_noise(img, 30.0, r);
        },
        reps);
    const double parallel_ms = time_ms(
        [&] {
          sodbench::RngStream r(7);
          parallel_img = sodbench::gaussian_noise(img, 30.0, r);
        },
        reps);
    double diff = 0.0;
    for (std::size_t e = 0; e < serial_img.data.size(); ++e) {
      diff = std::max(diff, std::abs(serial_img.data[e] - parallel_img.data[e]));
    }
    report("gaussian_noise", serial_ms, parallel_ms, diff);
  }

  return 0;
}
