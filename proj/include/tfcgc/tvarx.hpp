#pragma once

#include "tfcgc/basis.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace tfcgc {

/// Multi-trial, multichannel record. Each trial is samples x channels.
struct TrialSet {
  std::vector<std::string> channels;
  std::vector<Eigen::MatrixXd> trials;
  double sampling_rate = 1.0;

  std::size_t trial_count() const { return trials.size(); }
  std::size_t channel_count() const { return channels.size(); }
  std::size_t samples() const {
    return trials.empty() ? 0 : static_cast<std::size_t>(trials.front().rows());
  }

  /// Index of a named channel; throws InvalidArgument if absent.
  std::size_t channel_index(const std::string &name) const;

  /// Throws if trials disagree in shape or the sampling rate is not positive.
  void validate() const;

  /// Subset of channels, in the given order.
  TrialSet select(const std::vector<std::size_t> &channels) const;
};

/// One TVARX equation: the output channel regressed on lagged copies of the
/// source channels. The output must be one of the sources.
struct ModelSpec {
  std::size_t output = 0;
  std::vector<std::size_t> sources;
  std::vector<std::size_t> lags; // maximum lag per source, parallel to sources

  std::size_t max_lag() const;
  std::size_t lag_terms() const; // sum of lags
  void validate(std::size_t channel_count) const;

  /// Every channel in `channels` as a source with the same maximum lag.
  static ModelSpec uniform(std::size_t output,
                           const std::vector<std::size_t> &channels,
                           std::size_t lag);
};

/// Identifies one candidate column: lagged source channel times atom.
struct TermLabel {
  std::size_t source = 0; // channel index in the TrialSet
  std::size_t lag = 1;
  std::size_t atom = 0; // index into the BasisDictionary
};

/// Expanded regressors on the raw (unmodulated) rows, trials stacked.
/// Row r of trial b is sample t = start + r (1-based).
struct CandidateMatrix {
  Eigen::MatrixXd columns;
  Eigen::VectorXd output;
  std::vector<TermLabel> labels;
  std::size_t start = 1;
  std::size_t samples = 0;
  std::size_t rows_per_trial = 0;
  std::size_t trials = 0;
};

/// Derivative-augmented regression problem. Each trial contributes one block
/// of raw_rows rows followed by derivative_order modulated blocks of
/// modulated_rows rows each.
struct ULSProblem {
  Eigen::VectorXd target;
  Eigen::MatrixXd regressors;
  std::vector<TermLabel> labels;
  std::size_t start = 1;
  std::size_t samples = 0;
  std::size_t trials = 0;
  std::size_t raw_rows = 0;
  std::size_t modulated_rows = 0;
  int derivative_order = 0;

  std::size_t block_rows() const {
    return raw_rows + static_cast<std::size_t>(derivative_order) * modulated_rows;
  }
  std::size_t block_offset(std::size_t trial) const {
    return trial * block_rows();
  }
};

/// Columns u(t) = xi_atom(t/N) * s(t - lag) for every (source, lag, atom),
/// ordered source-major, then lag, then atom.
CandidateMatrix expand_regressors(const TrialSet &data, const ModelSpec &spec,
                                  const BasisDictionary &dict);

/// Appends the test-function modulated copies of the output and every
/// column, convolving within each trial only.
ULSProblem modulate(const CandidateMatrix &candidates,
                    const TestFunctionBank &bank);

/// Convolution of a single sequence with a sampled test function over its
/// finite support: out(p) = sum_q in(p + q) w(q), p = 0..len-n0-1.
Eigen::VectorXd modulate_sequence(const Eigen::Ref<const Eigen::VectorXd> &in,
                                  const std::vector<double> &weights);

} // namespace tfcgc
