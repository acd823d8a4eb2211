#include "sodbench/eval.hpp"

#include <algorithm>
#include <cmath>

#include "sodbench/error.hpp"

namespace sodbench {

PrCurve pr_curve(const SaliencyMap& map, const BinaryMask& truth, int m) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "threshold count must be >= 1");
  if (map.height != truth.height || map.width != truth.width) {
    throw Error(ErrorCode::DimensionMismatch, "map and truth differ in size");
  }
  const std::size_t positives = truth.positive_count();
  if (positives == 0) {
    throw Error(ErrorCode::EmptyGroundTruth, "mask has no positive pixel; recall undefined");
  }

  PrCurve curve;
  curve.thresholds.resize(m);
  for (int k = 1; k <= m; ++k) {
    curve.thresholds[k - 1] = static_cast<double>(k) / static_cast<double>(m + 1);
  }

  // Histogram over "number of thresholds at or below the pixel value": a
  // pixel with count c is predicted positive at threshold indices 1..c, so
  // suffix sums give tp/fp for every threshold in one pass. The counts use
  // the same tau values and the same >= comparison as a direct sweep, which
  // keeps the result bit-identical to the naive computation.
  std::vector<std::int64_t> pos_hist(m + 1, 0), neg_hist(m + 1, 0);
#pragma omp parallel
  {
    std::vector<std::int64_t> pos_local(m + 1, 0), neg_local(m + 1, 0);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(map.pixels()); ++p) {
      const double v = map.data[p];
      const std::size_t c = static_cast<std::size_t>(
          std::upper_bound(curve.thresholds.begin(), curve.thresholds.end(), v) -
          curve.thresholds.begin());
      (truth.data[p] ? pos_local : neg_local)[c] += 1;
    }
#pragma omp critical
    {
      for (int c = 0; c <= m; ++c) {
        pos_hist[c] += pos_local[c];
        neg_hist[c] += neg_local[c];
      }
    }
  }

  curve.precision.resize(m);
  curve.recall.resize(m);
  std::int64_t tp = 0, fp = 0;
  for (int k = m; k >= 1; --k) {
    tp += pos_hist[k];
    fp += neg_hist[k];
    curve.precision[k - 1] = (tp + fp) == 0 ? 1.0
                                            : static_cast<double>(tp) / static_cast<double>(tp + fp);
    curve.recall[k - 1] = static_cast<double>(tp) / static_cast<double>(positives);
  }
  return curve;
}

double fbeta(double precision, double recall, double beta_squared) {
  if (precision == 0.0 && recall == 0.0) return 0.0;
  return (1.0 + beta_squared) * precision * recall / (beta_squared * precision + recall);
}

double max_fbeta(const SaliencyMap& map, const BinaryMask& truth, const FBetaConfig& cfg) {
  const PrCurve curve = pr_curve(map, truth, cfg.thresholds);
  double best = 0.0;
  for (std::size_t k = 0; k < curve.precision.size(); ++k) {
    best = std::max(best, fbeta(curve.precision[k], curve.recall[k], cfg.beta_squared));
  }
  return best;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mu = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

ScoreStats dataset_score(const SodModel& model, const std::vector<LabeledPair>& dataset,
                         const FBetaConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "dataset_score needs images");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dataset.size());
  std::vector<double> scores(dataset.size(), -1.0);  // -1 marks a skipped image
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const SaliencyMap map = model.predict(dataset[i].first);
      scores[i] = 100.0 * max_fbeta(map, dataset[i].second, cfg);
    } catch (const Error&) {
      scores[i] = -1.0;
    }
  }
  ScoreStats stats;
  stats.per_image = scores;
  std::vector<double> valid;
  for (double s : scores) {
    if (s < 0.0) {
      ++stats.skipped;
    } else {
      valid.push_back(s);
    }
  }
  stats.scored = static_cast<int>(valid.size());
  stats.mean = mean_of(valid);
  stats.stddev = cfg.sample_std ? sample_std(valid) : population_std(valid);
  return stats;
}

RobustnessSummary robustness_summary(
    const SodModel& model,
    const std::vector<std::pair<std::string, std::vector<LabeledPair>>>& suite,
    const FBetaConfig& cfg) {
  if (suite.empty()) throw Error(ErrorCode::InvalidArgument, "attack suite is empty");
  RobustnessSummary summary;
  std::vector<double> means;
  for (const auto& [column, dataset] : suite) {
    summary.columns.push_back(column);
    summary.per_column.push_back(dataset_score(model, dataset, cfg));
    means.push_back(summary.per_column.back().mean);
  }
  summary.cross_attack_std = cfg.sample_std ? sample_std(means) : population_std(means);
  return summary;
}

ContinuityEstimate continuity_probe(const SodModel& model, const Image& img, double delta,
                                    BallNorm norm, int samples, RngStream& rng) {
  if (delta <= 0.0) throw Error(ErrorCode::InvalidArgument, "delta must be > 0");
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
  const SaliencyMap base = model.predict(img);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(base.pixels()));

  double eps_hat = 0.0;
  const std::ptrdiff_t n_samples = samples;
#pragma omp parallel for schedule(dynamic) reduction(max : eps_hat)
  for (std::ptrdiff_t i = 0; i < n_samples; ++i) {
    RngStream sub = rng.split(static_cast<std::uint64_t>(i));
    Image probe = img;
    if (norm == BallNorm::LInf) {
      for (double& v : probe.data) v = clamp_byte(v + sub.uniform(-delta, delta));
    } else {
      std::vector<double> dir(probe.entries());
      double norm2 = 0.0;
      for (double& d : dir) {
        d = sub.normal(0.0, 1.0);
        norm2 += d * d;
      }
      const double radius =
          delta * std::pow(sub.uniform(), 1.0 / static_cast<double>(probe.entries()));
      const double scale = norm2 > 0.0 ? radius / std::sqrt(norm2) : 0.0;
      for (std::size_t e = 0; e < probe.entries(); ++e) {
        probe.data[e] = clamp_byte(probe.data[e] + scale * dir[e]);
      }
    }
    const SaliencyMap out = model.predict(probe);
    double acc = 0.0;
    for (std::size_t p = 0; p < out.pixels(); ++p) {
      const double d = out.data[p] - base.data[p];
      acc += d * d;
    }
    eps_hat = std::max(eps_hat, std::sqrt(acc) * inv_sqrt_n);
  }
  return ContinuityEstimate{delta, eps_hat, samples};
}

}  // namespace sodbench
