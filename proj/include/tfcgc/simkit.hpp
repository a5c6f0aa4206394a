#pragma once

#include "tfcgc/covariance.hpp"
#include "tfcgc/pipeline.hpp"
#include "tfcgc/spectral.hpp"
#include "tfcgc/tvarx.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace tfcgc {

enum class Scenario { Sim1, Sim2 };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string &name);

struct ScenarioConfig {
  Scenario scenario = Scenario::Sim2;
  std::size_t samples = 1000;
  std::size_t trials = 20;
  double sampling_rate = 200.0;
  Eigen::Vector3d noise{0.01, 0.01, 0.01}; // variances of e_x, e_y, e_z
  double coupling = 0.5;                   // peak coupling strength
  std::size_t burn_in = 200;
  std::uint64_t seed = 0;

  /// 2000 samples, 1 trial, noise (0.01, 0.01, 0.001).
  static ScenarioConfig sim1();
  /// 1000 samples, 20 trials, noise 0.01 on every channel.
  static ScenarioConfig sim2();
  static ScenarioConfig defaults(Scenario s);

  void validate() const;
};

/// Coupling profiles on 1-based sample index t.
double sim1_oscillating(std::size_t t, double sampling_rate, double peak);
double sim1_ramp(std::size_t t, std::size_t samples, double peak);
double sim2_first_half(std::size_t t, std::size_t samples, double peak);
double sim2_second_half(std::size_t t, std::size_t samples, double peak);

/// The true model of a scenario over channels (x, y, z), lags 1 and 2.
VarTrajectory true_model(const ScenarioConfig &config);

struct Simulation {
  TrialSet data;             // channels x, y, z
  VarTrajectory truth;       // coefficients used at each recorded sample
  Eigen::Vector3d noise;     // true noise variances
};

/// Simulates trial b from seed derive_seed(config.seed, b); burn-in samples
/// use the coefficients of the first recorded sample.
Simulation simulate(const ScenarioConfig &config);
Simulation gen_sim1(ScenarioConfig config);
Simulation gen_sim2(ScenarioConfig config);

/// Settings of the frozen-time reduction to the bivariate submodel.
struct OracleOptions {
  std::size_t max_iterations = 100000; // Riccati recursion cap
  double tolerance = 1e-15;
  double snap = 1e-9; // oracle values at or below this are set to 0
  double condition_cap = 1e12;
  std::size_t threads = 1; // directions computed in parallel
};

/// Theoretical TF-CGC map of source -> target | condition (indices into the
/// VAR channels) from true coefficients and a constant noise covariance.
/// The trivariate spectrum is exact; the (target, condition) submodel is the
/// innovations form of the frozen-time process observed on those channels.
TFCGCMap theoretical_tfcgc(const VarTrajectory &truth,
                           const Eigen::MatrixXd &noise_covariance,
                           std::size_t target, std::size_t source,
                           std::size_t condition,
                           const std::vector<std::size_t> &times,
                           const std::vector<double> &freqs,
                           double sampling_rate, const OracleOptions &options = {});

/// Minimum-phase factor of a 2x2 spectral density sampled at k fs / n,
/// k = 0..n-1: S = H Sigma H^*, H(lag 0) = I.
struct SpectralFactor {
  std::vector<Eigen::Matrix2cd> transfer;
  Eigen::Matrix2d covariance;
  std::size_t iterations = 0;
};

/// 2x2 spectral density of channels (a, b) of the VAR frozen at sample t,
/// on the grid k fs / n for k = 0..n-1.
std::vector<Eigen::Matrix2cd> reduced_spectrum(const VarTrajectory &truth,
                                               std::size_t t,
                                               const Eigen::MatrixXd &noise,
                                               std::size_t a, std::size_t b,
                                               std::size_t n);

SpectralFactor wilson_factorize(const std::vector<Eigen::Matrix2cd> &spectrum,
                                std::size_t max_iterations = 500,
                                double tolerance = 1e-13);

/// Innovations (minimum-phase) model of channels (first, second) of a
/// frozen-time VAR at sample t, from the steady-state Kalman predictor:
/// s(t+1) = F s(t) + K eps(t), y(t) = H s(t) + eps(t), cov(eps) = covariance.
struct InnovationsModel {
  Eigen::MatrixXd state;  // F
  Eigen::MatrixXd output; // H
  Eigen::MatrixXd gain;   // K
  Eigen::Matrix2d covariance;
  Eigen::MatrixXd riccati; // steady-state predictor covariance
  std::size_t iterations = 0;

  /// I + H (e^{i 2 pi f / fs} I - F)^-1 K.
  Eigen::Matrix2cd transfer(double frequency, double sampling_rate) const;
};

InnovationsModel innovations_model(const VarTrajectory &truth, std::size_t t,
                                   const Eigen::MatrixXd &noise_covariance,
                                   std::size_t first, std::size_t second,
                                   const Eigen::MatrixXd *warm = nullptr,
                                   std::size_t max_iterations = 100000,
                                   double tolerance = 1e-15);

/// Normalized transfer field of the reduced (first, second) submodel of a
/// frozen-time VAR, one Riccati solve per distinct coefficient set.
SpectralField reduced_transfer(const VarTrajectory &truth,
                               const Eigen::MatrixXd &noise_covariance,
                               std::size_t first, std::size_t second,
                               const std::vector<std::size_t> &times,
                               const std::vector<double> &freqs,
                               double sampling_rate,
                               const OracleOptions &options = {});

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  double psnr = 0.0; // dB; +inf when rmse is 0
  double max = 0.0;  // oracle maximum
  std::size_t times = 0;
  std::size_t freqs = 0;
};

/// MAE, RMSE over all cells and PSNR = 20 log10(MAX / RMSE) with MAX the
/// oracle maximum.
MetricsReport score(const Eigen::MatrixXd &estimate, const Eigen::MatrixXd &oracle);

/// Scores the thresholded estimate (or the raw values) against the oracle.
MetricsReport score(const TFCGCMap &estimate, const TFCGCMap &oracle,
                    bool thresholded = true);

struct BenchRow {
  Direction direction;
  Estimator estimator;
  MetricsReport metrics;
  double threshold = 0.0;
};

struct BenchOptions {
  std::vector<Estimator> estimators{Estimator::Rls, Estimator::Ols,
                                    Estimator::Rols, Estimator::Urols};
  std::vector<Direction> directions; // empty: all six
  bool thresholded = true; // ignored when pipeline.permutations is 0
  OracleOptions oracle;
};

/// Pipeline settings the benchmark uses for a scenario: RLS forgetting 0.94
/// for sim1 and 0.90 for sim2; no surrogates on single-trial data.
PipelineConfig bench_pipeline(const ScenarioConfig &scenario, PipelineConfig base);

/// Simulates a scenario, fits every estimator with `pipeline` as given and
/// scores each direction against the theoretical map. Rows are
/// direction-major.
std::vector<BenchRow> run_bench(const ScenarioConfig &scenario,
                                const PipelineConfig &pipeline,
                                const BenchOptions &options = {});

/// Oracle maps for the given directions of a simulation.
std::vector<TFCGCMap> oracle_maps(const Simulation &sim,
                                  const std::vector<Direction> &directions,
                                  const std::vector<std::size_t> &times,
                                  const std::vector<double> &freqs,
                                  const OracleOptions &options = {});

} // namespace tfcgc
