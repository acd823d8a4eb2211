#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sodbench/error.hpp"
#include "sodbench/image.hpp"
#include "sodbench/model.hpp"
#include "sodbench/rng.hpp"
#include "sodbench_ref.hpp"

using namespace sodbench;

namespace {

Image random_image(int h, int w, RngStream& rng) {
  Image img = Image::zeros(h, w);
  for (double& v : img.data) v = rng.uniform(0.0, 255.0);
  return img;
}

BinaryMask random_mask(int h, int w, RngStream& rng) {
  BinaryMask mask = BinaryMask::zeros(h, w);
  for (auto& v : mask.data) v = rng.uniform() < 0.5 ? 1 : 0;
  return mask;
}

}  // namespace

TEST_CASE("linear: zero weights and bias give a uniform 0.5 map") {
  const LinearToyModel model = LinearToyModel::zeros(4, 4);
  RngStream rng(1);
  const SaliencyMap map = model.predict(random_image(4, 4, rng));
  for (double v : map.data) CHECK(v == 0.5);
}

TEST_CASE("linear: a large positive weight saturates its pixel") {
  std::vector<double> w(4 * 4 * 3, 0.0);
  w[(1 * 4 + 2) * 3 + 0] = 10.0;  // pixel (1,2), red channel
  const LinearToyModel model(4, 4, std::move(w), 0.0);
  const Image white = Image::constant(4, 4, 255.0, 255.0, 255.0);
  const SaliencyMap map = model.predict(white);
  CHECK(map.at(1, 2) > 0.99);
  CHECK(map.at(0, 0) == 0.5);
}

TEST_CASE("linear: prediction matches the scalar reference loop") {
  RngStream rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    LinearToyModel model = LinearToyModel::random(4, 4, 0.05, rng);
    const Image img = random_image(4, 4, rng);
    const SaliencyMap fast = model.predict(img);
    const SaliencyMap slow = ref::linear_predict(model, img);
    for (std::size_t p = 0; p < fast.pixels(); ++p) {
      CHECK(fast.data[p] == doctest::Approx(slow.data[p]).epsilon(1e-9));
    }
  }
}

TEST_CASE("linear: predictions are valid maps on arbitrary inputs (fuzz)") {
  RngStream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    LinearToyModel model = LinearToyModel::random(6, 5, rng.uniform(0.0, 0.5), rng);
    const SaliencyMap map = model.predict(random_image(6, 5, rng));
    CHECK(map_values_valid(map));
  }
}

TEST_CASE("linear gradient: matches central finite differences") {
  RngStream rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    LinearToyModel model = LinearToyModel::random(3, 3, 0.05, rng);
    Image img = random_image(3, 3, rng);
    for (double& v : img.data) v = std::clamp(v, 10.0, 245.0);  // keep fd stencil in range
    const BinaryMask mask = random_mask(3, 3, rng);
    const std::vector<double> grad = model.loss_gradient(img, mask);
    const double h = 1e-3;
    for (std::size_t e = 0; e < img.entries(); ++e) {
      Image up = img, down = img;
      up.data[e] += h;
      down.data[e] -= h;
      const double fd = (model.loss(up, mask) - model.loss(down, mask)) / (2.0 * h);
      if (std::abs(fd) > 1e-12) {
        CHECK(grad[e] == doctest::Approx(fd).epsilon(1e-4));
      } else {
        CHECK(std::abs(grad[e]) < 1e-9);
      }
    }
  }
}

TEST_CASE("linear gradient: zero-weight model has identically zero gradient") {
  const LinearToyModel model = LinearToyModel::zeros(5, 5);
  RngStream rng(5);
  const Image img = random_image(5, 5, rng);
  const BinaryMask mask = random_mask(5, 5, rng);
  for (const double g : model.loss_gradient(img, mask)) CHECK(g == 0.0);
}

TEST_CASE("linear gradient: vanishes when the prediction saturates onto the target") {
  // One heavily weighted pixel driven to the correct side: the delta factor
  // (s - g) underflows, so the gradient there is essentially zero.
  std::vector<double> w(2 * 2 * 3, 0.0);
  for (int c = 0; c < 3; ++c) w[c] = 1.0;  // pixel (0,0)
  const LinearToyModel model(2, 2, std::move(w), -10.0);
  Image img = Image::zeros(2, 2);
  for (int c = 0; c < 3; ++c) img.at(0, 0, c) = 255.0;  // z = 755
  BinaryMask mask = BinaryMask::zeros(2, 2);
  mask.at(0, 0) = 1;
  // Remaining pixels predict logistic(-10) ~ 4.5e-5 against target 0.
  const std::vector<double> grad = model.loss_gradient(img, mask);
  for (const double g : grad) CHECK(std::abs(g) < 1e-6);
}

TEST_CASE("linear: weight file round trip") {
  RngStream rng(6);
  LinearToyModel model = LinearToyModel::random(7, 3, 0.1, rng);
  const auto dir = std::filesystem::temp_directory_path() / "sodbench_models_tests";
  std::filesystem::create_directories(dir);
  model.save(dir / "weights.bin");
  const LinearToyModel back = LinearToyModel::load(dir / "weights.bin");
  CHECK(back.height() == 7);
  CHECK(back.width() == 3);
  CHECK(back.bias() == model.bias());
  CHECK(back.weights() == model.weights());
}

TEST_CASE("linear: fit separates a brightness-coded dataset") {
  RngStream rng(7);
  std::vector<LabeledPair> data;
  for (int i = 0; i < 6; ++i) {
    Image img = Image::constant(12, 12, 100.0, 100.0, 100.0);
    BinaryMask mask = BinaryMask::zeros(12, 12);
    for (int y = 4; y < 8; ++y) {
      for (int x = 4; x < 8; ++x) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = 140.0;
        mask.at(y, x) = 1;
      }
    }
    data.push_back({img, mask});
  }
  LinearToyModel model = LinearToyModel::zeros(12, 12);
  LinearFitParams params;
  params.steps = 300;
  params.learning_rate = 1e-2;
  params.smooth_window = 3;
  model.fit(data, params);
  const SaliencyMap map = model.predict(data[0].first);
  CHECK(map.at(6, 6) > map.at(0, 0));
}

TEST_CASE("heuristic: constant image maps to all zeros") {
  const Image img = Image::constant(10, 10, 77.0, 77.0, 77.0);
  const SaliencyMap map = heuristic_predict(img);
  for (double v : map.data) CHECK(v == 0.0);
}

TEST_CASE("heuristic: lone bright pixel attains the map maximum") {
  Image img = Image::zeros(15, 15);
  for (int c = 0; c < 3; ++c) img.at(7, 7, c) = 255.0;
  const SaliencyMap map = heuristic_predict(img, 3);
  // The box mean ties across the pixel's 3x3 neighborhood; the pixel itself
  // must sit at the normalized maximum and everything away from it below.
  CHECK(map.at(7, 7) == 1.0);
  CHECK(map.at(0, 0) < 0.5);
  CHECK(map.at(7, 11) < 0.5);
}

TEST_CASE("heuristic: matches the naive windowed reference") {
  RngStream rng(8);
  for (const int window : {3, 5, 9}) {
    const Image img = random_image(21, 17, rng);
    const SaliencyMap fast = heuristic_predict(img, window);
    const SaliencyMap slow = ref::heuristic_predict(img, window);
    for (std::size_t p = 0; p < fast.pixels(); ++p) {
      CHECK(std::abs(fast.data[p] - slow.data[p]) < 1e-6);
    }
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const LinearToyModel model = LinearToyModel::zeros(4, 4);
  RngStream rng(9);
  const Image img = random_image(4, 5, rng);
  CHECK_THROWS_AS((void)model.predict(img), Error);
  const BinaryMask mask = random_mask(5, 4, rng);
  CHECK_THROWS_AS((void)model.loss_gradient(random_image(4, 4, rng), mask), Error);
}
