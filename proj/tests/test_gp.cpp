#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sodbench/error.hpp"
#include "sodbench/gp.hpp"
#include "sodbench/image.hpp"
#include "sodbench/rng.hpp"

using namespace sodbench;

namespace {

Image random_image(int h, int w, RngStream& rng) {
  Image img = Image::zeros(h, w);
  for (double& v : img.data) v = rng.uniform(0.0, 255.0);
  return img;
}

// Dataset whose ground truth is the gray plane thresholded at its midpoint;
// the terminal "gray" alone solves it perfectly.
std::vector<LabeledPair> gray_threshold_dataset(int n, int h, int w, std::uint64_t seed) {
  std::vector<LabeledPair> data;
  RngStream rng(seed);
  for (int i = 0; i < n; ++i) {
    Image img = random_image(h, w, rng);
    BinaryMask mask = BinaryMask::zeros(h, w);
    bool any = false;
    for (std::size_t p = 0; p < img.pixels(); ++p) {
      const double gray = (img.data[p * 3] + img.data[p * 3 + 1] + img.data[p * 3 + 2]) / 3.0;
      mask.data[p] = gray >= 128.0 ? 1 : 0;
      any = any || mask.data[p];
    }
    if (!any) mask.data[0] = 1;
    data.push_back({std::move(img), std::move(mask)});
  }
  return data;
}

}  // namespace

TEST_CASE("serialization: canonical text round trips") {
  const GpProgram prog = GpProgram::parse("(sub gray (box3 (abs (div r smooth2))))");
  CHECK(prog.to_string() == "(sub gray (box3 (abs (div r smooth2))))");
  CHECK(prog.valid());
  CHECK(prog.depth() == 5);
  CHECK(prog.size() == 7);

  const GpProgram atom = GpProgram::parse("gray");
  CHECK(atom.to_string() == "gray");
  CHECK(atom.depth() == 1);
}

TEST_CASE("serialization: malformed programs are rejected") {
  for (const char* bad : {"", "(sub gray)", "(gray)", "sub", "(sub gray gray) extra",
                          "(frob gray gray)", "(sub gray (box3)"}) {
    CHECK_THROWS_AS((void)GpProgram::parse(bad), Error);
  }
}

TEST_CASE("file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "sodbench_gp_tests";
  std::filesystem::create_directories(dir);
  const GpProgram prog = GpProgram::parse("(norm (sobel smooth1))");
  prog.save(dir / "prog.txt");
  CHECK(GpProgram::load(dir / "prog.txt").to_string() == prog.to_string());
}

TEST_CASE("evaluate: gray terminal on a constant image hits the min-max guard") {
  const GpProgram prog = GpProgram::parse("gray");
  const Image white = Image::constant(6, 6, 255.0, 255.0, 255.0);
  const SaliencyMap map = gp_evaluate(prog, white);
  for (double v : map.data) CHECK(v == 0.0);
}

TEST_CASE("evaluate: center-surround program peaks at a lone bright pixel") {
  const GpProgram prog = GpProgram::parse("(abs (sub gray (box3 gray)))");
  Image img = Image::zeros(5, 5);
  for (int c = 0; c < 3; ++c) img.at(2, 2, c) = 255.0;
  const SaliencyMap map = gp_evaluate(prog, img);
  CHECK(map.at(2, 2) == 1.0);  // min-max normalized argmax
  CHECK(map.at(0, 0) < 0.2);
}

TEST_CASE("evaluate: hand-checked plane arithmetic on a 5x5 fixture") {
  // (sub gray (box3 gray)) at the corner: gray=0 everywhere except center
  // pixel 255 -> center box mean is 255/(9*255) of the scaled plane.
  Image img = Image::zeros(5, 5);
  for (int c = 0; c < 3; ++c) img.at(2, 2, c) = 255.0;
  const GpProgram prog = GpProgram::parse("(sub gray (box3 gray))");
  const SaliencyMap map = gp_evaluate(prog, img);
  // raw values: center 1 - 1/9, its 8 neighbours 0 - 1/9, elsewhere 0;
  // min-max over [-1/9, 8/9] puts the center at 1 and far corners at 1/9.
  CHECK(map.at(2, 2) == doctest::Approx(1.0));
  CHECK(map.at(0, 0) == doctest::Approx(1.0 / 9.0));
  CHECK(map.at(2, 1) == doctest::Approx(0.0));
}

TEST_CASE("evaluate: protected division defines x/0 as 1") {
  // (div r (sub gray gray)) divides by an all-zero plane.
  const GpProgram prog = GpProgram::parse("(div r (sub gray gray))");
  RngStream rng(1);
  const SaliencyMap map = gp_evaluate(prog, random_image(4, 4, rng));
  for (double v : map.data) {
    CHECK(std::isfinite(v));
    CHECK(v == 0.0);  // constant 1 plane min-max normalizes to zeros
  }
}

TEST_CASE("evaluate: random programs produce valid maps on random images (fuzz)") {
  RngStream rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    RngStream tree_rng(1000 + trial);
    const GpProgram prog = gp_random_program(5, trial % 2 == 0, tree_rng);
    REQUIRE(prog.valid());
    const SaliencyMap map = gp_evaluate(prog, random_image(8, 9, rng));
    CHECK(map_values_valid(map));
  }
}

TEST_CASE("train: degenerate run returns the single random individual") {
  const auto data = gray_threshold_dataset(2, 8, 8, 3);
  EvolutionParams params;
  params.population_size = 1;
  params.generations = 0;
  params.elitism = 1;
  params.seed = 11;
  const GpTrainResult result = gp_train(data, params);
  REQUIRE(result.fitness_trace.size() == 1);
  CHECK(result.best_fitness == result.fitness_trace[0]);
  // The reported fitness is the true dataset fitness of the returned tree.
  double sum = 0.0;
  for (const auto& [img, mask] : data) sum += max_fbeta(gp_evaluate(result.best, img), mask);
  CHECK(result.best_fitness == doctest::Approx(sum / data.size()).epsilon(1e-12));
}

TEST_CASE("train: elitism makes the best-fitness trace non-decreasing") {
  const auto data = gray_threshold_dataset(3, 8, 8, 4);
  for (const std::uint64_t seed : {1ULL, 7ULL, 42ULL}) {
    EvolutionParams params;
    params.population_size = 12;
    params.generations = 8;
    params.elitism = 2;
    params.seed = seed;
    const GpTrainResult result = gp_train(data, params);
    REQUIRE(result.fitness_trace.size() == 9);
    for (std::size_t g = 1; g < result.fitness_trace.size(); ++g) {
      CHECK(result.fitness_trace[g] >= result.fitness_trace[g - 1]);
    }
  }
}

TEST_CASE("train: equal seeds are bit-reproducible") {
  const auto data = gray_threshold_dataset(3, 8, 8, 5);
  EvolutionParams params;
  params.population_size = 10;
  params.generations = 5;
  params.seed = 99;
  const GpTrainResult a = gp_train(data, params);
  const GpTrainResult b = gp_train(data, params);
  CHECK(a.best.to_string() == b.best.to_string());
  CHECK(a.fitness_trace == b.fitness_trace);
}

TEST_CASE("train: solves the thresholded-gray dataset") {
  const auto data = gray_threshold_dataset(4, 16, 16, 6);
  EvolutionParams params;
  params.population_size = 50;
  params.generations = 30;
  params.seed = 7;
  const GpTrainResult result = gp_train(data, params);
  CHECK(result.best_fitness >= 0.95);
  // Frozen after the first verified run of this fixture.
  CHECK(result.best_fitness == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("train: parameter validation") {
  const auto data = gray_threshold_dataset(1, 8, 8, 8);
  EvolutionParams params;
  params.population_size = 4;
  params.elitism = 5;  // elitism > population
  CHECK_THROWS_AS((void)gp_train(data, params), Error);
  CHECK_THROWS_AS((void)gp_train({}, EvolutionParams{}), Error);
}
