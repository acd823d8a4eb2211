#include "sodbench/multipixel.hpp"

#include <algorithm>
#include <cmath>

#include "sodbench/error.hpp"

namespace sodbench {

void de_step(std::vector<std::vector<double>>& population, std::vector<double>& fitnesses,
             const DeObjective& objective, const DeSpec& spec, const DeBounds& bounds,
             RngStream& rng) {
  const std::size_t pop = population.size();
  if (pop < 4) throw Error(ErrorCode::InvalidArgument, "DE needs a population of >= 4");
  if (fitnesses.size() != pop) {
    throw Error(ErrorCode::InvalidArgument, "fitness vector does not match population");
  }
  const std::size_t dim = population[0].size();

  // Trials are built serially so the stream consumption is a pure function
  // of (seed, generation), independent of evaluation threading.
  std::vector<std::vector<double>> trials(pop);
  for (std::size_t i = 0; i < pop; ++i) {
    std::size_t a, b, c;
    do { a = rng.below(pop); } while (a == i);
    do { b = rng.below(pop); } while (b == i || b == a);
    do { c = rng.below(pop); } while (c == i || c == a || c == b);
    const std::size_t forced = rng.below(dim);  // guaranteed crossover gene
    std::vector<double> trial = population[i];
    for (std::size_t j = 0; j < dim; ++j) {
      const double pick = rng.uniform();
      if (pick < spec.crossover || j == forced) {
        double v = population[a][j] + spec.weight * (population[b][j] - population[c][j]);
        v = std::clamp(v, bounds.lo[j], bounds.hi[j]);
        trial[j] = v;
      }
    }
    trials[i] = std::move(trial);
  }

  std::vector<double> trial_fitness(pop);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pop); ++i) {
    trial_fitness[i] = objective(trials[i]);
  }

  for (std::size_t i = 0; i < pop; ++i) {
    if (trial_fitness[i] <= fitnesses[i]) {
      population[i] = std::move(trials[i]);
      fitnesses[i] = trial_fitness[i];
    }
  }
}

std::vector<PixelEdit> decode_edits(const std::vector<double>& genes, int height, int width) {
  std::vector<PixelEdit> edits;
  edits.reserve(genes.size() / 5);
  for (std::size_t e = 0; e + 4 < genes.size(); e += 5) {
    PixelEdit edit;
    edit.x = std::clamp(static_cast<int>(std::llround(genes[e])), 0, width - 1);
    edit.y = std::clamp(static_cast<int>(std::llround(genes[e + 1])), 0, height - 1);
    edit.r = clamp_byte(genes[e + 2]);
    edit.g = clamp_byte(genes[e + 3]);
    edit.b = clamp_byte(genes[e + 4]);
    edits.push_back(edit);
  }
  return edits;
}

Image apply_edits(const Image& img, const std::vector<PixelEdit>& edits) {
  Image out = img;
  for (const PixelEdit& e : edits) {  // later edits win duplicates
    out.at(e.y, e.x, 0) = e.r;
    out.at(e.y, e.x, 1) = e.g;
    out.at(e.y, e.x, 2) = e.b;
  }
  return out;
}

MultipixelResult multipixel_attack(const Image& img, const BinaryMask& truth,
                                   const SodModel& model, const MultipixelSpec& spec,
                                   const FBetaConfig& cfg) {
  if (spec.d < 1) throw Error(ErrorCode::InvalidArgument, "edit budget d must be >= 1");
  if (static_cast<std::size_t>(spec.d) > img.pixels()) {
    throw Error(ErrorCode::InvalidArgument, "edit budget exceeds image size");
  }
  if (spec.pop_size < 4) throw Error(ErrorCode::InvalidArgument, "population must be >= 4");
  if (spec.max_iters < 0) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 0");

  // Reference mask for the objective: ground truth by default, otherwise the
  // clean prediction binarized at 0.5.
  BinaryMask reference = truth;
  if (spec.against_clean_prediction) {
    const SaliencyMap clean = model.predict(img);
    reference = BinaryMask::zeros(img.height, img.width);
    for (std::size_t p = 0; p < clean.pixels(); ++p) {
      reference.data[p] = clean.data[p] >= 0.5 ? 1 : 0;
    }
    if (reference.positive_count() == 0) reference = truth;  // degenerate clean prediction
  }

  const int dim = spec.d * 5;
  DeBounds bounds;
  bounds.lo.assign(dim, 0.0);
  bounds.hi.resize(dim);
  for (int e = 0; e < spec.d; ++e) {
    bounds.hi[e * 5 + 0] = static_cast<double>(img.width - 1);
    bounds.hi[e * 5 + 1] = static_cast<double>(img.height - 1);
    bounds.hi[e * 5 + 2] = 255.0;
    bounds.hi[e * 5 + 3] = 255.0;
    bounds.hi[e * 5 + 4] = 255.0;
  }

  const DeObjective objective = [&](const std::vector<double>& genes) {
    const Image candidate = apply_edits(img, decode_edits(genes, img.height, img.width));
    return max_fbeta(model.predict(candidate), reference, cfg);
  };

  RngStream rng(spec.seed);
  std::vector<std::vector<double>> population(spec.pop_size);
  // Member 0 is the zero-edit incumbent: each edit rewrites a pixel with its
  // original color.
  population[0].resize(dim);
  for (int e = 0; e < spec.d; ++e) {
    const std::size_t p = static_cast<std::size_t>(e) % img.pixels();
    const int x = static_cast<int>(p % img.width);
    const int y = static_cast<int>(p / img.width);
    population[0][e * 5 + 0] = x;
    population[0][e * 5 + 1] = y;
    population[0][e * 5 + 2] = img.at(y, x, 0);
    population[0][e * 5 + 3] = img.at(y, x, 1);
    population[0][e * 5 + 4] = img.at(y, x, 2);
  }
  for (int i = 1; i < spec.pop_size; ++i) {
    population[i].resize(dim);
    for (int j = 0; j < dim; ++j) {
      population[i][j] = rng.uniform(bounds.lo[j], bounds.hi[j]);
    }
  }

  std::vector<double> fitness(spec.pop_size);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(spec.pop_size); ++i) {
    fitness[i] = objective(population[i]);
  }
  const double clean_fitness = fitness[0];

  const DeSpec de{spec.de_weight, spec.de_crossover};
  for (int iter = 0; iter < spec.max_iters; ++iter) {
    de_step(population, fitness, objective, de, bounds, rng);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < population.size(); ++i) {
    if (fitness[i] < fitness[best]) best = i;
  }

  MultipixelResult result;
  result.edits = decode_edits(population[best], img.height, img.width);
  result.image = apply_edits(img, result.edits);
  result.fitness = fitness[best];
  result.clean_fitness = clean_fitness;
  return result;
}

}  // namespace sodbench
