#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sodbench/eval.hpp"
#include "sodbench/image.hpp"
#include "sodbench/model.hpp"
#include "sodbench/rng.hpp"

namespace sodbench {

// Differential evolution, DE/rand/1/bin. Candidates are real vectors; the
// objective is minimized. Trial vectors are generated sequentially from the
// stream and evaluated in parallel, then replacement is greedy (child wins
// ties), so runs reproduce bit-identically for a fixed seed at any thread
// count.
struct DeSpec {
  double weight = 0.5;     // F, differential weight
  double crossover = 0.9;  // CR, per-gene crossover probability
};

struct DeBounds {
  std::vector<double> lo;
  std::vector<double> hi;
};

using DeObjective = std::function<double(const std::vector<double>&)>;

// One synchronous generation: mutant = a + F (b - c) over distinct peers,
// binomial crossover with one guaranteed gene, coordinate clamping, greedy
// replacement when the child is no worse.
void de_step(std::vector<std::vector<double>>& population, std::vector<double>& fitnesses,
             const DeObjective& objective, const DeSpec& spec, const DeBounds& bounds,
             RngStream& rng);

struct PixelEdit {
  int x = 0;
  int y = 0;
  double r = 0.0, g = 0.0, b = 0.0;
};

struct MultipixelSpec {
  int d = 100;            // max modified pixels
  int pop_size = 40;
  int max_iters = 50;
  double de_weight = 0.5;
  double de_crossover = 0.9;
  std::uint64_t seed = 0;
  // Default objective is max-F-beta of the prediction against ground truth.
  // The alternative compares against the clean prediction binarized at 0.5,
  // i.e. minimizes agreement with what the model said before the attack.
  bool against_clean_prediction = false;
};

struct MultipixelResult {
  Image image;
  std::vector<PixelEdit> edits;
  double fitness = 0.0;        // objective of the returned image
  double clean_fitness = 0.0;  // objective of the unmodified image
};

// L0-budgeted black-box attack: DE over candidate vectors of d
// (x, y, r, g, b) edits, querying the victim through SodModel::predict only.
// The zero-edit incumbent is seeded into the initial population, so the
// result is never worse than no attack, and L0(out, in) <= d always.
MultipixelResult multipixel_attack(const Image& img, const BinaryMask& truth,
                                   const SodModel& model, const MultipixelSpec& spec,
                                   const FBetaConfig& cfg = {});

// Rounds a candidate vector into concrete edits (later edits win duplicate
// coordinates) and applies them.
std::vector<PixelEdit> decode_edits(const std::vector<double>& genes, int height, int width);
Image apply_edits(const Image& img, const std::vector<PixelEdit>& edits);

}  // namespace sodbench
