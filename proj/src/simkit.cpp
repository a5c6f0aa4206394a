#include "tfcgc/simkit.hpp"

#include "tfcgc/error.hpp"
#include "tfcgc/parallel.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

namespace tfcgc {

std::string to_string(Scenario s) { return s == Scenario::Sim1 ? "sim1" : "sim2"; }

Scenario parse_scenario(const std::string &name) {
  if (name == "sim1")
    return Scenario::Sim1;
  if (name == "sim2")
    return Scenario::Sim2;
  fail(ErrorKind::InvalidArgument, "unknown scenario: " + name);
}

ScenarioConfig ScenarioConfig::sim1() {
  ScenarioConfig c;
  c.scenario = Scenario::Sim1;
  c.samples = 2000;
  c.trials = 1;
  c.noise = {0.01, 0.01, 0.001};
  return c;
}

ScenarioConfig ScenarioConfig::sim2() { return ScenarioConfig{}; }

ScenarioConfig ScenarioConfig::defaults(Scenario s) {
  return s == Scenario::Sim1 ? sim1() : sim2();
}

void ScenarioConfig::validate() const {
  require(samples >= 3, ErrorKind::InvalidArgument, "too few samples");
  require(trials >= 1, ErrorKind::InvalidArgument, "need at least one trial");
  require(sampling_rate > 0.0, ErrorKind::InvalidArgument,
          "sampling rate must be positive");
  require((noise.array() >= 0.0).all(), ErrorKind::InvalidArgument,
          "noise variances must be non-negative");
}

double sim1_oscillating(std::size_t t, double sampling_rate, double peak) {
  return 0.5 * peak *
         (1.0 + std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                         (2.0 * sampling_rate)));
}

double sim1_ramp(std::size_t t, std::size_t samples, double peak) {
  const double mid = 0.5 * static_cast<double>(samples);
  const double d = std::abs(static_cast<double>(t) - mid) / mid;
  return peak * std::max(0.0, 1.0 - d);
}

double sim2_first_half(std::size_t t, std::size_t samples, double peak) {
  return 2 * t <= samples ? peak : 0.0;
}

double sim2_second_half(std::size_t t, std::size_t samples, double peak) {
  return 2 * t > samples ? peak : 0.0;
}

VarTrajectory true_model(const ScenarioConfig &config) {
  config.validate();
  const std::size_t n = config.samples;
  VarTrajectory v(3, 2, n);
  for (std::size_t t = 1; t <= n; ++t) {
    if (config.scenario == Scenario::Sim1) {
      v(t, 1, 0, 0) = 0.59;
      v(t, 2, 0, 0) = -0.2;
      v(t, 1, 0, 1) = sim1_oscillating(t, config.sampling_rate, config.coupling);
      v(t, 1, 0, 2) = sim1_ramp(t, n, config.coupling);
      v(t, 1, 1, 1) = 1.58;
      v(t, 2, 1, 1) = -0.96;
      v(t, 1, 2, 2) = 0.60;
      v(t, 2, 2, 2) = -0.91;
    } else {
      for (std::size_t i = 0; i < 3; ++i) {
        v(t, 1, i, i) = 0.53;
        v(t, 2, i, i) = -0.8;
      }
      v(t, 1, 1, 0) = sim2_first_half(t, n, config.coupling);
      v(t, 1, 2, 1) = sim2_second_half(t, n, config.coupling);
    }
  }
  return v;
}

Simulation simulate(const ScenarioConfig &config) {
  Simulation sim;
  sim.truth = true_model(config);
  sim.noise = config.noise;
  sim.data.channels = {"x", "y", "z"};
  sim.data.sampling_rate = config.sampling_rate;

  const std::size_t n = config.samples;
  const std::size_t total = n + config.burn_in;
  const Eigen::Array3d sd = config.noise.array().sqrt();
  for (std::size_t b = 0; b < config.trials; ++b) {
    std::mt19937_64 rng(derive_seed(config.seed, b));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total), 3);
    for (std::size_t s = 0; s < total; ++s) {
      const std::size_t t = s < config.burn_in ? 1 : s - config.burn_in + 1;
      const auto row = static_cast<Eigen::Index>(s);
      for (Eigen::Index i = 0; i < 3; ++i) {
        double v = sd(i) * gauss(rng);
        for (std::size_t l = 1; l <= 2 && l <= s; ++l)
          for (Eigen::Index j = 0; j < 3; ++j)
            v += sim.truth(t, l, static_cast<std::size_t>(i),
                           static_cast<std::size_t>(j)) *
                 x(row - static_cast<Eigen::Index>(l), j);
        x(row, i) = v;
      }
    }
    sim.data.trials.push_back(x.bottomRows(static_cast<Eigen::Index>(n)));
  }
  return sim;
}

Simulation gen_sim1(ScenarioConfig config) {
  config.scenario = Scenario::Sim1;
  return simulate(config);
}

Simulation gen_sim2(ScenarioConfig config) {
  config.scenario = Scenario::Sim2;
  return simulate(config);
}

namespace {

using Vec = std::vector<std::complex<double>>;

// Elementwise DFT of a sequence of 2x2 matrices.
void transform(Eigen::FFT<double> &fft, const std::vector<Eigen::Matrix2cd> &in,
               std::vector<Eigen::Matrix2cd> &out, bool inverse) {
  const std::size_t n = in.size();
  out.resize(n);
  Vec a(n), b(n);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      for (std::size_t k = 0; k < n; ++k)
        a[k] = in[k](r, c);
      if (inverse)
        fft.inv(b, a);
      else
        fft.fwd(b, a);
      for (std::size_t k = 0; k < n; ++k)
        out[k](r, c) = b[k];
    }
}

} // namespace

SpectralFactor wilson_factorize(const std::vector<Eigen::Matrix2cd> &spectrum,
                                std::size_t max_iterations, double tolerance) {
  const std::size_t n = spectrum.size();
  require(n >= 4 && n % 2 == 0, ErrorKind::InvalidArgument,
          "spectral factorization needs an even grid of at least 4 points");
  Eigen::FFT<double> fft;

  // Start from the Cholesky factor of the lag-0 autocovariance.
  Eigen::Matrix2d gamma0 = Eigen::Matrix2d::Zero();
  for (const auto &s : spectrum)
    gamma0 += s.real();
  gamma0 /= static_cast<double>(n);
  const Eigen::LLT<Eigen::Matrix2d> llt(gamma0);
  require(llt.info() == Eigen::Success, ErrorKind::Numeric,
          "spectral density is not positive definite");
  std::vector<Eigen::Matrix2cd> psi(
      n, llt.matrixL().toDenseMatrix().cast<std::complex<double>>());

  std::vector<Eigen::Matrix2cd> g(n), lags, plus;
  SpectralFactor out;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Matrix2cd inv = psi[k].inverse();
      g[k] = inv * spectrum[k] * inv.adjoint() + Eigen::Matrix2cd::Identity();
    }
    transform(fft, g, lags, true);
    // Causal part: positive lags, plus the upper triangle of lag 0 with its
    // diagonal halved.
    Eigen::Matrix2cd zero = lags[0];
    zero(0, 0) *= 0.5;
    zero(1, 1) *= 0.5;
    zero(1, 0) = 0.0;
    lags[0] = zero;
    for (std::size_t m = n / 2; m < n; ++m)
      lags[m].setZero();
    transform(fft, lags, plus, false);

    double change = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Matrix2cd next = psi[k] * plus[k];
      change = std::max(change, (next - psi[k]).cwiseAbs().maxCoeff());
      scale = std::max(scale, next.cwiseAbs().maxCoeff());
      psi[k] = next;
    }
    out.iterations = it;
    if (change <= tolerance * scale)
      break;
  }

  Eigen::Matrix2cd psi0 = Eigen::Matrix2cd::Zero();
  for (const auto &p : psi)
    psi0 += p;
  psi0 /= static_cast<double>(n);
  out.covariance = (psi0 * psi0.adjoint()).real();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  const Eigen::Matrix2cd inv0 = psi0.inverse();
  out.transfer.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    out.transfer[k] = psi[k] * inv0;
  return out;
}

std::vector<Eigen::Matrix2cd> reduced_spectrum(const VarTrajectory &truth,
                                           std::size_t t,
                                           const Eigen::MatrixXd &noise,
                                           std::size_t a, std::size_t b,
                                           std::size_t n) {
  const auto d = static_cast<Eigen::Index>(truth.dim());
  std::vector<Eigen::MatrixXd> lag(truth.order());
  for (std::size_t l = 1; l <= truth.order(); ++l)
    lag[l - 1] = truth.lag_matrix(t, l);
  const CMatrix sigma = noise.cast<Complex>();
  std::vector<Eigen::Matrix2cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    CMatrix coef = CMatrix::Identity(d, d);
    for (std::size_t l = 1; l <= truth.order(); ++l)
      coef -= std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(l * k) /
                                  static_cast<double>(n)) *
              lag[l - 1].cast<Complex>();
    const CMatrix h = coef.inverse();
    const CMatrix s = h * sigma * h.adjoint();
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    out[k] << s(ia, ia), s(ia, ib), s(ib, ia), s(ib, ib);
  }
  return out;
}

namespace {

std::vector<double> coefficient_key(const VarTrajectory &truth, std::size_t t) {
  std::vector<double> key;
  for (std::size_t l = 1; l <= truth.order(); ++l)
    for (std::size_t i = 0; i < truth.dim(); ++i)
      for (std::size_t j = 0; j < truth.dim(); ++j)
        key.push_back(truth(t, l, i, j));
  return key;
}

} // namespace

namespace {

// Swaps the two channels of every cell: J G J with J the exchange matrix.
SpectralField swapped(const SpectralField &g) {
  SpectralField out(2, g.times(), g.freqs());
  for (std::size_t ti = 0; ti < g.times().size(); ++ti)
    for (std::size_t fi = 0; fi < g.freqs().size(); ++fi) {
      const auto src = g.at(ti, fi);
      auto dst = out.at(ti, fi);
      dst << src(1, 1), src(1, 0), src(0, 1), src(0, 0);
    }
  return out;
}

TFCGCMap oracle_from_transfer(const VarTrajectory &truth,
                              const Eigen::MatrixXd &noise_covariance,
                              std::size_t target, std::size_t source,
                              std::size_t condition, const SpectralField &g,
                              double sampling_rate, const OracleOptions &options) {
  const std::vector<std::size_t> perm{target, source, condition};
  CovarianceTrack track;
  track.dim = 3;
  track.start = 1;
  track.values.push_back(noise_covariance);
  const NormalizedModel tri = normalize_trivariate(
      truth.permuted(perm), permuted(track, perm), g.times());
  const TransferField k = transfer(
      spectral_matrix(tri, g.freqs(), sampling_rate), options.condition_cap);
  const TransferField r = combine(g, k.field, options.condition_cap);
  CellMask flags(r.flagged.size(), 0);
  for (std::size_t c = 0; c < flags.size(); ++c)
    flags[c] = (k.flagged[c] || r.flagged[c]) ? 1 : 0;
  TFCGCMap map = tfcgc(r.field, tri.variances, flags);
  for (Eigen::Index i = 0; i < map.values.rows(); ++i)
    for (Eigen::Index j = 0; j < map.values.cols(); ++j)
      if (map.values(i, j) <= options.snap)
        map.values(i, j) = 0.0;
  map.apply_threshold(0.0);
  return map;
}

void check_direction(const VarTrajectory &truth,
                     const Eigen::MatrixXd &noise_covariance, std::size_t target,
                     std::size_t source, std::size_t condition) {
  require(truth.dim() == 3, ErrorKind::Shape, "oracle needs a 3-channel model");
  require(noise_covariance.rows() == 3 && noise_covariance.cols() == 3,
          ErrorKind::Shape, "noise covariance must be 3x3");
  require(target < 3 && source < 3 && condition < 3 && target != source &&
              target != condition && source != condition,
          ErrorKind::InvalidArgument, "oracle direction needs distinct channels");
}

} // namespace

InnovationsModel innovations_model(const VarTrajectory &truth, std::size_t t,
                                   const Eigen::MatrixXd &noise_covariance,
                                   std::size_t first, std::size_t second,
                                   const Eigen::MatrixXd *warm,
                                   std::size_t max_iterations, double tolerance) {
  const auto d = static_cast<Eigen::Index>(truth.dim());
  const auto p = static_cast<Eigen::Index>(truth.order());
  require(first != second && first < truth.dim() && second < truth.dim(),
          ErrorKind::InvalidArgument, "reduced model needs two distinct channels");
  require(noise_covariance.rows() == d && noise_covariance.cols() == d,
          ErrorKind::Shape, "noise covariance does not match the model");
  const Eigen::Index ns = d * p;

  // Companion form on the state [x(t-1); ...; x(t-p)].
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(ns, ns);
  for (Eigen::Index l = 0; l < p; ++l)
    f.block(0, l * d, d, d) = truth.lag_matrix(t, static_cast<std::size_t>(l + 1));
  if (p > 1)
    f.block(d, 0, ns - d, ns - d).setIdentity();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(ns, d);
  e.topRows(d).setIdentity();
  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(2, d);
  sel(0, static_cast<Eigen::Index>(first)) = 1.0;
  sel(1, static_cast<Eigen::Index>(second)) = 1.0;

  // y(t) = H s(t) + D e(t), s(t+1) = F s(t) + E e(t).
  InnovationsModel m;
  m.state = f;
  m.output = sel * f.topRows(d);
  const Eigen::MatrixXd dmat = sel;
  const Eigen::MatrixXd q = e * noise_covariance * e.transpose();
  const Eigen::MatrixXd r = dmat * noise_covariance * dmat.transpose();
  const Eigen::MatrixXd cross = e * noise_covariance * dmat.transpose();

  Eigen::MatrixXd pm = warm && warm->rows() == ns ? *warm : q;
  Eigen::MatrixXd gain(ns, 2);
  Eigen::Matrix2d omega;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    omega = m.output * pm * m.output.transpose() + r;
    const Eigen::MatrixXd fph = f * pm * m.output.transpose() + cross;
    gain = fph * omega.inverse();
    Eigen::MatrixXd next = f * pm * f.transpose() + q - gain * fph.transpose();
    next = 0.5 * (next + next.transpose()).eval();
    const double change = (next - pm).cwiseAbs().maxCoeff();
    const double scale = std::max(next.cwiseAbs().maxCoeff(),
                                  std::numeric_limits<double>::min());
    pm = std::move(next);
    m.iterations = it;
    if (change <= tolerance * scale)
      break;
  }
  m.covariance = m.output * pm * m.output.transpose() + r;
  const Eigen::MatrixXd fph = f * pm * m.output.transpose() + cross;
  m.gain = fph * m.covariance.inverse();
  m.riccati = std::move(pm);
  return m;
}

Eigen::Matrix2cd InnovationsModel::transfer(double frequency,
                                            double sampling_rate) const {
  const auto ns = state.rows();
  const Complex z = std::polar(1.0, 2.0 * std::numbers::pi * frequency / sampling_rate);
  const CMatrix resolvent = z * CMatrix::Identity(ns, ns) - state.cast<Complex>();
  const CMatrix x = resolvent.partialPivLu().solve(gain.cast<Complex>());
  return Eigen::Matrix2cd::Identity() + output.cast<Complex>() * x;
}

SpectralField reduced_transfer(const VarTrajectory &truth,
                               const Eigen::MatrixXd &noise_covariance,
                               std::size_t first, std::size_t second,
                               const std::vector<std::size_t> &times,
                               const std::vector<double> &freqs,
                               double sampling_rate, const OracleOptions &options) {
  require(sampling_rate > 0.0, ErrorKind::InvalidArgument,
          "sampling rate must be positive");
  const std::size_t nf = freqs.size();
  SpectralField g(2, times, freqs);
  std::map<std::vector<double>, std::size_t> seen; // coefficients -> time slot
  Eigen::MatrixXd previous;
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const auto key = coefficient_key(truth, times[ti]);
    if (const auto it = seen.find(key); it != seen.end()) {
      for (std::size_t fi = 0; fi < nf; ++fi)
        g.at(ti, fi) = g.at(it->second, fi);
      continue;
    }
    seen.emplace(key, ti);
    const InnovationsModel m = innovations_model(
        truth, times[ti], noise_covariance, first, second,
        previous.size() ? &previous : nullptr, options.max_iterations,
        options.tolerance);
    // Remove the instantaneous correlation exactly as the estimate does.
    const Eigen::Matrix2d p = normalizer(m.covariance, times[ti]);
    const Eigen::Matrix2cd pinv = p.inverse().cast<Complex>();
    for (std::size_t fi = 0; fi < nf; ++fi)
      g.at(ti, fi) = m.transfer(freqs[fi], sampling_rate) * pinv;
    previous = m.riccati;
  }
  return g;
}

TFCGCMap theoretical_tfcgc(const VarTrajectory &truth,
                           const Eigen::MatrixXd &noise_covariance,
                           std::size_t target, std::size_t source,
                           std::size_t condition,
                           const std::vector<std::size_t> &times,
                           const std::vector<double> &freqs,
                           double sampling_rate, const OracleOptions &options) {
  check_direction(truth, noise_covariance, target, source, condition);
  const SpectralField g = reduced_transfer(truth, noise_covariance, target,
                                           condition, times, freqs,
                                           sampling_rate, options);
  return oracle_from_transfer(truth, noise_covariance, target, source,
                              condition, g, sampling_rate, options);
}

std::vector<TFCGCMap> oracle_maps(const Simulation &sim,
                                  const std::vector<Direction> &directions,
                                  const std::vector<std::size_t> &times,
                                  const std::vector<double> &freqs,
                                  const OracleOptions &options) {
  const Eigen::MatrixXd cov = sim.noise.asDiagonal();
  const double fs = sim.data.sampling_rate;
  struct Task {
    std::size_t target, source, condition;
  };
  std::vector<Task> tasks;
  std::vector<std::pair<std::size_t, std::size_t>> pairs; // unordered, low first
  for (const auto &d : directions) {
    Task t{sim.data.channel_index(d.target), sim.data.channel_index(d.source),
           sim.data.channel_index(d.condition)};
    check_direction(sim.truth, cov, t.target, t.source, t.condition);
    tasks.push_back(t);
    const std::pair<std::size_t, std::size_t> p = std::minmax(t.target, t.condition);
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end())
      pairs.push_back(p);
  }
  // Each reduced pair is factorized once and reused in either channel order.
  std::vector<SpectralField> fields(pairs.size());
  parallel_for(pairs.size(), options.threads, [&](std::size_t i) {
    fields[i] = reduced_transfer(sim.truth, cov, pairs[i].first,
                                 pairs[i].second, times, freqs, fs, options);
  });
  std::vector<TFCGCMap> out(tasks.size());
  parallel_for(tasks.size(), options.threads, [&](std::size_t i) {
    const auto &t = tasks[i];
    const std::pair<std::size_t, std::size_t> p = std::minmax(t.target, t.condition);
    const std::size_t slot = static_cast<std::size_t>(
        std::find(pairs.begin(), pairs.end(), p) - pairs.begin());
    const SpectralField &g = fields[slot];
    out[i] = oracle_from_transfer(sim.truth, cov, t.target, t.source,
                                  t.condition,
                                  t.target < t.condition ? g : swapped(g), fs,
                                  options);
  });
  return out;
}

MetricsReport score(const Eigen::MatrixXd &estimate, const Eigen::MatrixXd &oracle) {
  require(estimate.rows() == oracle.rows() && estimate.cols() == oracle.cols(),
          ErrorKind::Shape, "estimate and oracle grids differ");
  require(estimate.size() > 0, ErrorKind::Shape, "empty grid");
  MetricsReport m;
  m.times = static_cast<std::size_t>(oracle.rows());
  m.freqs = static_cast<std::size_t>(oracle.cols());
  const Eigen::ArrayXXd diff = (estimate - oracle).array();
  const double cells = static_cast<double>(oracle.size());
  m.mae = diff.abs().sum() / cells;
  m.rmse = std::sqrt(diff.square().sum() / cells);
  m.max = oracle.maxCoeff();
  if (m.rmse == 0.0)
    m.psnr = std::numeric_limits<double>::infinity();
  else if (m.max <= 0.0)
    m.psnr = -std::numeric_limits<double>::infinity();
  else
    m.psnr = 20.0 * std::log10(m.max / m.rmse);
  return m;
}

MetricsReport score(const TFCGCMap &estimate, const TFCGCMap &oracle,
                    bool thresholded) {
  require(estimate.times == oracle.times && estimate.freqs == oracle.freqs,
          ErrorKind::Shape, "estimate and oracle grids differ");
  return score(thresholded ? estimate.thresholded() : estimate.values,
               oracle.values);
}

PipelineConfig bench_pipeline(const ScenarioConfig &scenario, PipelineConfig base) {
  base.forgetting = scenario.scenario == Scenario::Sim1 ? 0.94 : 0.90;
  if (scenario.trials < 2)
    base.permutations = 0;
  return base;
}

std::vector<BenchRow> run_bench(const ScenarioConfig &scenario,
                                const PipelineConfig &pipeline,
                                const BenchOptions &options) {
  const Simulation sim = simulate(scenario);
  const auto directions = options.directions.empty()
                              ? all_directions(sim.data.channels)
                              : options.directions;
  const auto times = map_times(pipeline.lag + 1, sim.data.samples(),
                               pipeline.time_stride);
  const auto freqs = frequency_grid(pipeline.frequencies, sim.data.sampling_rate);
  OracleOptions oracle_options = options.oracle;
  oracle_options.threads = pipeline.threads;
  const auto oracle = oracle_maps(sim, directions, times, freqs, oracle_options);

  std::vector<std::vector<BenchRow>> by_estimator;
  for (Estimator e : options.estimators) {
    PipelineConfig cfg = pipeline;
    cfg.estimator = e;
    const auto maps = analyze(sim.data, directions, cfg);
    const bool thresholded = options.thresholded && cfg.permutations > 0;
    std::vector<BenchRow> rows;
    for (std::size_t i = 0; i < directions.size(); ++i)
      rows.push_back({directions[i], e, score(maps[i], oracle[i], thresholded),
                      maps[i].threshold});
    by_estimator.push_back(std::move(rows));
  }
  std::vector<BenchRow> out;
  for (std::size_t i = 0; i < directions.size(); ++i)
    for (const auto &rows : by_estimator)
      out.push_back(rows[i]);
  return out;
}

} // namespace tfcgc
