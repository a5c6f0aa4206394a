#pragma once

#include "tfcgc/error.hpp"
#include "tfcgc/io.hpp"
#include "tfcgc/pipeline.hpp"
#include "tfcgc/simkit.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tfcgc {

/// Exit statuses of the command-line tool.
enum ExitCode : int { kSuccess = 0, kUsage = 1, kNumeric = 2, kIo = 3 };

int exit_code(ErrorKind kind);

/// Every setting of one CLI run. Optional fields fall back to defaults that
/// depend on the subcommand or scenario; `resolve` fills them in.
struct RunConfig {
  std::string command;
  std::string output = ".";
  std::uint64_t seed = 0;
  std::size_t threads = 1; // execution only; never echoed

  // cgc
  std::string input;
  double sampling_rate = 200.0;
  std::vector<std::string> directions; // empty: all six

  // pipeline
  Estimator estimator = Estimator::Urols;
  std::vector<int> orders{3, 4, 5, 6};
  int scale = 4;
  int derivative_order = 2;
  std::size_t support = 20;
  std::size_t lag = 2;
  std::optional<double> mu;
  double mu_scale = 1e-2;
  double apress_v = 3.0;
  std::size_t max_terms = 0;
  double rank_tolerance = 1e-10;
  std::optional<double> forgetting;
  double rls_p0 = 1e3;
  double rho = 0.05;
  std::size_t covariance_window = 50;
  std::size_t frequencies = 101;
  std::size_t time_stride = 1;
  double condition_cap = 1e12;
  std::optional<double> alpha;
  std::optional<std::size_t> permutations;

  // simulate / bench
  std::string scenario = "sim2";
  std::optional<std::size_t> samples;
  std::optional<std::size_t> trials;
  std::optional<std::vector<double>> noise;
  double coupling = 0.5;
  std::size_t burn_in = 200;
  std::vector<Estimator> estimators{Estimator::Rls, Estimator::Ols,
                                    Estimator::Rols, Estimator::Urols};
  bool thresholded = true;

  // flow
  std::vector<std::string> maps; // "SOURCE->TARGET=path"
  double band_low = 8.0;
  double band_high = 14.0;
  double window = 0.25;

  /// Fills every optional field with its default for the command.
  void resolve();
  PipelineConfig pipeline() const;
  ScenarioConfig scenario_config() const;

  /// Resolved settings relevant to the command, as key = value lines.
  KeyValueFile echo() const;
  /// Applies keys from an echo file on top of the current values.
  void apply(const KeyValueFile &kv);
};

/// Runs the tool; returns the exit status.
int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err);

/// Band- and window-averaged net causal flow from pairwise maps.
struct FlowRow {
  std::string node;
  double window_start = 0.0;
  double window_end = 0.0;
  double cf = 0.0;
};

/// maps[i][j]: map of node i -> node j (ignored on the diagonal). Values of
/// non-significant cells count as zero.
std::vector<FlowRow> causal_flow(const std::vector<std::string> &nodes,
                                 const std::vector<std::vector<TFCGCMap>> &maps,
                                 double sampling_rate, double band_low,
                                 double band_high, double window);

} // namespace tfcgc
