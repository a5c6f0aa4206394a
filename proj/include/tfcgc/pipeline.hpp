#pragma once

#include "tfcgc/covariance.hpp"
#include "tfcgc/selection.hpp"
#include "tfcgc/spectral.hpp"
#include "tfcgc/tvarx.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tfcgc {

/// "Y->X|Z": influence of Y on X conditioned on Z.
struct Direction {
  std::string source;
  std::string target;
  std::string condition;

  static Direction parse(const std::string &text);
  std::string label() const;
  bool operator==(const Direction &) const = default;
};

/// The six directions among three channels, in a fixed order.
std::vector<Direction> all_directions(const std::vector<std::string> &channels);

/// Every knob of the fit-and-decompose pipeline.
struct PipelineConfig {
  Estimator estimator = Estimator::Urols;
  std::vector<int> orders{3, 4, 5, 6};
  int scale = 4;
  int derivative_order = 2;
  std::size_t support = 20;
  std::size_t lag = 2;
  std::optional<double> regularization; // mu; default scales with column energy
  double regularization_scale = 1e-2;
  double apress_v = 3.0;
  std::size_t max_terms = 0;
  double rank_tolerance = 1e-10;
  double forgetting = 0.94;
  double rls_initial_covariance = 1e3;
  double rho = 0.05;
  std::size_t covariance_window = 50;
  std::size_t frequencies = 101;
  std::size_t time_stride = 1;
  double condition_cap = 1e12;
  double alpha = 0.01;
  std::size_t permutations = 999; // 0 skips the significance test
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  SelectionConfig selection() const;
  void validate() const;
};

/// A VAR model over a subset of channels with its noise covariance track.
struct FittedModel {
  std::vector<std::size_t> channels; // TrialSet channel indices, model order
  VarTrajectory var;
  CovarianceTrack covariance;
  std::size_t start = 1;
  std::vector<std::vector<TermLabel>> selected; // per equation; empty for RLS
};

/// Fits one equation per channel, each regressed on all `channels`.
FittedModel fit_model(const TrialSet &data,
                      const std::vector<std::size_t> &channels,
                      const PipelineConfig &config);

/// Sample times start, start + stride, ..., N.
std::vector<std::size_t> map_times(std::size_t start, std::size_t samples,
                                   std::size_t stride);

/// GC map of source -> target | condition (TrialSet channel indices) from a
/// fitted trivariate model and the fitted (target, condition) model.
TFCGCMap conditional_map(const FittedModel &trivariate,
                         const FittedModel &bivariate, std::size_t target,
                         std::size_t source, std::size_t condition,
                         const std::vector<std::size_t> &times,
                         const std::vector<double> &freqs, double sampling_rate,
                         double condition_cap);

/// Unthresholded maps for each direction; models shared between
/// directions are fitted once.
std::vector<TFCGCMap> estimate_maps(const TrialSet &data,
                                    const std::vector<Direction> &directions,
                                    const PipelineConfig &config);

/// Per-direction thresholds: the (1 - alpha) quantile of the grid maximum
/// over surrogates in which the source channel's trials are re-paired by a
/// random derangement.
std::vector<double> significance_thresholds(const TrialSet &data,
                                            const std::vector<Direction> &directions,
                                            const PipelineConfig &config,
                                            std::size_t permutations,
                                            double alpha);

double significance_threshold(const TrialSet &data, const Direction &direction,
                              const PipelineConfig &config,
                              std::size_t permutations, double alpha);

/// Order statistic used as the threshold: the ceil((1 - alpha)(n + 1))-th
/// smallest surrogate maximum, capped at the largest.
double surrogate_quantile(std::vector<double> maxima, double alpha);

/// Full analysis: estimate maps and, when config.permutations > 0, apply
/// surrogate thresholds.
std::vector<TFCGCMap> analyze(const TrialSet &data,
                              const std::vector<Direction> &directions,
                              const PipelineConfig &config);

/// Trial set with the trials of one channel re-paired: trial b takes that
/// channel from trial order[b].
TrialSet repair_trials(const TrialSet &data, std::size_t channel,
                       const std::vector<std::size_t> &order);

/// Random permutation of 0..n-1 without fixed points.
std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed);

/// Deterministic per-task seed derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0);

} // namespace tfcgc
