#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sodbench/eval.hpp"
#include "sodbench/image.hpp"
#include "sodbench/model.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

// Single-tree genetic program over image planes.
//
// Terminals (all scaled to [0, 1]): the three channel planes, the gray
// plane, and the gray plane after one and two passes of a 3x3 binomial
// smoothing kernel. Functions: pixelwise add/sub/mul/protected-div/abs/sqr,
// spatial 3x3 box blur, Sobel gradient magnitude, 3x3 dilation and erosion,
// and min-max normalization. Every node's output is clamped to +-1e6 so
// arbitrary compositions stay finite; the root plane is min-max normalized
// into [0, 1]. Protected division returns 1.0 where |denominator| < 1e-12.
enum class GpOp : std::uint8_t {
  // terminals
  TermR, TermG, TermB, TermGray, TermSmooth1, TermSmooth2,
  // unary
  Abs, Sqr, Box3, Sobel, Dilate3, Erode3, Norm,
  // binary
  Add, Sub, Mul, Div,
};

int gp_arity(GpOp op);
const char* gp_name(GpOp op);

// A program is its preorder op sequence; children follow their parent
// immediately, so any subtree is a contiguous range.
struct GpProgram {
  std::vector<GpOp> ops;

  std::size_t size() const { return ops.size(); }
  int depth() const;
  bool valid() const;

  // Canonical prefix text, e.g. "(sub gray (box3 gray))".
  std::string to_string() const;
  static GpProgram parse(const std::string& text);

  void save(const std::filesystem::path& path) const;
  static GpProgram load(const std::filesystem::path& path);
};

// End of the subtree rooted at `pos` (one past the last node).
std::size_t gp_subtree_end(const std::vector<GpOp>& ops, std::size_t pos);

SaliencyMap gp_evaluate(const GpProgram& prog, const Image& img);

class GpModel : public SodModel {
public:
  explicit GpModel(GpProgram prog, std::string name = "gp")
      : prog_(std::move(prog)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  SaliencyMap predict(const Image& img) const override { return gp_evaluate(prog_, img); }
  const GpProgram& program() const { return prog_; }

private:
  GpProgram prog_;
  std::string name_;
};

struct EvolutionParams {
  int population_size = 50;
  int generations = 30;
  double crossover_rate = 0.9;
  double mutation_rate = 0.2;
  int max_depth = 6;
  int elitism = 1;
  int tournament_size = 3;
  std::uint64_t seed = 0;
};

struct GpTrainResult {
  GpProgram best;
  double best_fitness = 0.0;          // mean max-F-beta of `best` on the dataset
  std::vector<double> fitness_trace;  // best-of-population per generation, entry 0
                                      // is the initial random population
};

// Generational GP: ramped half-and-half init, tournament selection, subtree
// crossover plus point mutation, depth limit enforced by rejection, elites
// copied unchanged. Fitness is the mean max-F-beta over the dataset.
// Individuals are evaluated in parallel; breeding draws from a single
// sequential stream, so equal seeds reproduce bit-identical runs.
GpTrainResult gp_train(const std::vector<LabeledPair>& dataset, const EvolutionParams& params,
                       const FBetaConfig& cfg = {});

GpProgram gp_random_program(int max_depth, bool full, RngStream& rng);

}  // namespace sodbench
