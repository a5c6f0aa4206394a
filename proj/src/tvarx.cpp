#include "tfcgc/tvarx.hpp"

#include "tfcgc/error.hpp"

#include <algorithm>
#include <numeric>

namespace tfcgc {

std::size_t TrialSet::channel_index(const std::string &name) const {
  const auto it = std::find(channels.begin(), channels.end(), name);
  require(it != channels.end(), ErrorKind::InvalidArgument,
          "unknown channel '" + name + "'");
  return static_cast<std::size_t>(it - channels.begin());
}

void TrialSet::validate() const {
  require(sampling_rate > 0.0, ErrorKind::InvalidArgument,
          "sampling rate must be positive");
  require(!trials.empty(), ErrorKind::InsufficientData, "no trials");
  const auto n = trials.front().rows();
  for (const auto &trial : trials) {
    require(trial.rows() == n, ErrorKind::Shape,
            "trials differ in sample count");
    require(trial.cols() == static_cast<Eigen::Index>(channels.size()),
            ErrorKind::Shape, "trial channel count does not match header");
  }
}

TrialSet TrialSet::select(const std::vector<std::size_t> &picked) const {
  TrialSet out;
  out.sampling_rate = sampling_rate;
  for (std::size_t c : picked) {
    require(c < channels.size(), ErrorKind::InvalidArgument,
            "channel index out of range");
    out.channels.push_back(channels[c]);
  }
  out.trials.reserve(trials.size());
  for (const auto &trial : trials) {
    Eigen::MatrixXd sub(trial.rows(), static_cast<Eigen::Index>(picked.size()));
    for (std::size_t j = 0; j < picked.size(); ++j)
      sub.col(static_cast<Eigen::Index>(j)) =
          trial.col(static_cast<Eigen::Index>(picked[j]));
    out.trials.push_back(std::move(sub));
  }
  return out;
}

std::size_t ModelSpec::max_lag() const {
  return lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
}

std::size_t ModelSpec::lag_terms() const {
  return std::accumulate(lags.begin(), lags.end(), std::size_t{0});
}

void ModelSpec::validate(std::size_t channel_count) const {
  require(!sources.empty() && sources.size() == lags.size(),
          ErrorKind::InvalidArgument, "model needs one lag per source");
  require(std::find(sources.begin(), sources.end(), output) != sources.end(),
          ErrorKind::InvalidArgument,
          "output channel must be among the regressor sources");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    require(sources[i] < channel_count, ErrorKind::InvalidArgument,
            "source channel out of range");
    require(lags[i] >= 1, ErrorKind::InvalidArgument, "lags must be >= 1");
  }
}

ModelSpec ModelSpec::uniform(std::size_t output,
                             const std::vector<std::size_t> &channels,
                             std::size_t lag) {
  ModelSpec spec;
  spec.output = output;
  spec.sources = channels;
  spec.lags.assign(channels.size(), lag);
  return spec;
}

CandidateMatrix expand_regressors(const TrialSet &data, const ModelSpec &spec,
                                  const BasisDictionary &dict) {
  data.validate();
  spec.validate(data.channel_count());
  const std::size_t n = data.samples();
  const std::size_t max_lag = spec.max_lag();
  require(max_lag < n, ErrorKind::InsufficientData,
          "maximum lag " + std::to_string(max_lag) +
              " leaves no samples in a record of " + std::to_string(n));
  require(dict.size() > 0, ErrorKind::InvalidArgument, "empty dictionary");

  CandidateMatrix out;
  out.start = max_lag + 1;
  out.samples = n;
  out.rows_per_trial = n - max_lag;
  out.trials = data.trial_count();

  const std::size_t m_atoms = dict.size();
  const std::size_t columns = spec.lag_terms() * m_atoms;
  const auto rows = static_cast<Eigen::Index>(out.rows_per_trial * out.trials);
  out.columns.resize(rows, static_cast<Eigen::Index>(columns));
  out.output.resize(rows);
  out.labels.reserve(columns);
  for (std::size_t s = 0; s < spec.sources.size(); ++s)
    for (std::size_t lag = 1; lag <= spec.lags[s]; ++lag)
      for (std::size_t m = 0; m < m_atoms; ++m)
        out.labels.push_back({spec.sources[s], lag, m});

  const std::vector<double> atoms = dict.sample(n);
  const auto eff = static_cast<Eigen::Index>(out.rows_per_trial);
  for (std::size_t b = 0; b < out.trials; ++b) {
    const Eigen::MatrixXd &trial = data.trials[b];
    const Eigen::Index row0 = static_cast<Eigen::Index>(b) * eff;
    out.output.segment(row0, eff) =
        trial.col(static_cast<Eigen::Index>(spec.output))
            .segment(static_cast<Eigen::Index>(max_lag), eff);
    Eigen::Index col = 0;
    for (std::size_t s = 0; s < spec.sources.size(); ++s) {
      const auto src = static_cast<Eigen::Index>(spec.sources[s]);
      for (std::size_t lag = 1; lag <= spec.lags[s]; ++lag) {
        for (std::size_t m = 0; m < m_atoms; ++m, ++col) {
          for (Eigen::Index r = 0; r < eff; ++r) {
            // 1-based sample t = start + r; lagged sample t - lag.
            const std::size_t t = out.start + static_cast<std::size_t>(r);
            out.columns(row0 + r, col) =
                atoms[(t - 1) * m_atoms + m] *
                trial(static_cast<Eigen::Index>(t - 1 - lag), src);
          }
        }
      }
    }
  }
  return out;
}

Eigen::VectorXd modulate_sequence(const Eigen::Ref<const Eigen::VectorXd> &in,
                                  const std::vector<double> &weights) {
  const auto n0 = static_cast<Eigen::Index>(weights.size());
  require(n0 > 0 && n0 < in.size(), ErrorKind::InvalidArgument,
          "test-function support must be shorter than the sequence");
  const Eigen::Index len = in.size() - n0;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(len);
  for (Eigen::Index q = 0; q < n0; ++q)
    out += weights[static_cast<std::size_t>(q)] * in.segment(q, len);
  return out;
}

ULSProblem modulate(const CandidateMatrix &candidates,
                    const TestFunctionBank &bank) {
  ULSProblem out;
  out.labels = candidates.labels;
  out.start = candidates.start;
  out.samples = candidates.samples;
  out.trials = candidates.trials;
  out.raw_rows = candidates.rows_per_trial;
  out.derivative_order = bank.derivative_order;
  if (bank.derivative_order > 0) {
    require(bank.support < candidates.rows_per_trial,
            ErrorKind::InvalidArgument,
            "test-function support " + std::to_string(bank.support) +
                " must be shorter than the effective record length " +
                std::to_string(candidates.rows_per_trial));
    require(bank.derivatives.size() ==
                static_cast<std::size_t>(bank.derivative_order),
            ErrorKind::InvalidArgument, "malformed test-function bank");
    out.modulated_rows = candidates.rows_per_trial - bank.support;
  }

  const auto raw = static_cast<Eigen::Index>(out.raw_rows);
  const auto mod = static_cast<Eigen::Index>(out.modulated_rows);
  const auto block = static_cast<Eigen::Index>(out.block_rows());
  const auto cols = candidates.columns.cols();
  const auto n0 = static_cast<Eigen::Index>(bank.support);
  out.target.resize(block * static_cast<Eigen::Index>(out.trials));
  out.regressors.resize(out.target.size(), cols);

  for (std::size_t b = 0; b < out.trials; ++b) {
    const Eigen::Index in0 = static_cast<Eigen::Index>(b) * raw;
    const Eigen::Index out0 = static_cast<Eigen::Index>(b) * block;
    const auto src_rows = candidates.columns.middleRows(in0, raw);
    const auto src_out = candidates.output.segment(in0, raw);
    out.regressors.middleRows(out0, raw) = src_rows;
    out.target.segment(out0, raw) = src_out;
    for (int v = 0; v < bank.derivative_order; ++v) {
      const auto &w = bank.derivatives[static_cast<std::size_t>(v)];
      const Eigen::Index dst = out0 + raw + v * mod;
      auto reg = out.regressors.middleRows(dst, mod);
      auto tgt = out.target.segment(dst, mod);
      reg.setZero();
      tgt.setZero();
      for (Eigen::Index q = 0; q < n0; ++q) {
        const double wq = w[static_cast<std::size_t>(q)];
        reg.noalias() += wq * src_rows.middleRows(q, mod);
        tgt.noalias() += wq * src_out.segment(q, mod);
      }
    }
  }
  return out;
}

} // namespace tfcgc
