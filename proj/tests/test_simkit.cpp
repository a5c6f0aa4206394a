#include "oracles.hpp"

#include "tfcgc/error.hpp"
#include "tfcgc/simkit.hpp"

#include <doctest.h>

#include <unsupported/Eigen/FFT>

#include <numbers>

using namespace tfcgc;

namespace {

oracle::Var stationary_model() {
  oracle::Var v;
  Eigen::Matrix3d a1, a2, s;
  a1 << 0.5, 0.3, 0.0, 0.0, 0.6, 0.2, 0.25, 0.0, 0.4;
  a2 << -0.3, 0.0, 0.2, 0.0, -0.4, 0.0, 0.0, 0.0, -0.3;
  s << 1.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.0;
  v.lags = {a1, a2};
  v.sigma = 0.01 * s;
  return v;
}

} // namespace

TEST_SUITE("simkit") {

TEST_CASE("scenario defaults") {
  const auto s1 = ScenarioConfig::sim1();
  CHECK(s1.samples == 2000);
  CHECK(s1.trials == 1);
  CHECK(s1.noise(2) == 0.001);
  CHECK(s1.sampling_rate == 200.0);
  const auto s2 = ScenarioConfig::sim2();
  CHECK(s2.samples == 1000);
  CHECK(s2.trials == 20);
  CHECK(s2.noise == Eigen::Vector3d::Constant(0.01));
  CHECK(parse_scenario("sim1") == Scenario::Sim1);
  CHECK_THROWS_AS(parse_scenario("sim3"), Error);
}

TEST_CASE("coupling profiles") {
  CHECK(sim1_oscillating(0, 200, 0.5) == doctest::Approx(0.25));
  CHECK(sim1_oscillating(100, 200, 0.5) == doctest::Approx(0.5));
  CHECK(sim1_oscillating(300, 200, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sim1_ramp(1000, 2000, 0.5) == 0.5);
  CHECK(sim1_ramp(500, 2000, 0.5) == 0.25);
  CHECK(sim1_ramp(2000, 2000, 0.5) == 0.0);
  CHECK(sim2_first_half(500, 1000, 0.5) == 0.5);
  CHECK(sim2_first_half(501, 1000, 0.5) == 0.0);
  CHECK(sim2_second_half(501, 1000, 0.5) == 0.5);
}

TEST_CASE("true model coefficients") {
  const auto v = true_model(ScenarioConfig::sim1());
  CHECK(v(10, 1, 0, 0) == 0.59);
  CHECK(v(10, 2, 0, 0) == -0.2);
  CHECK(v(10, 1, 1, 1) == 1.58);
  CHECK(v(10, 2, 2, 2) == -0.91);
  CHECK(v(1000, 1, 0, 2) == 0.5);
  CHECK(v(10, 1, 1, 0) == 0.0);
  const auto w = true_model(ScenarioConfig::sim2());
  CHECK(w(100, 1, 1, 0) == 0.5);
  CHECK(w(900, 1, 1, 0) == 0.0);
  CHECK(w(900, 1, 2, 1) == 0.5);
}

TEST_CASE("silent noise gives silent signals") {
  auto c = ScenarioConfig::sim1();
  c.noise.setZero();
  const auto sim = simulate(c);
  CHECK(sim.data.trials[0].isZero(0.0));
}

TEST_CASE("generators are deterministic in the seed") {
  auto c = ScenarioConfig::sim2();
  c.samples = 200;
  c.trials = 3;
  c.seed = 7;
  const auto a = simulate(c), b = simulate(c);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(a.data.trials[i] == b.data.trials[i]);
  c.seed = 8;
  CHECK(simulate(c).data.trials[0] != a.data.trials[0]);
  CHECK(gen_sim1(c).data.samples() == 200);
}

TEST_CASE("y oscillates near the pole frequency of its AR(2)") {
  auto c = ScenarioConfig::sim1();
  c.samples = 1 << 15;
  const Eigen::VectorXd y = simulate(c).data.trials[0].col(1);
  Eigen::FFT<double> fft;
  const int seg = 1024;
  std::vector<double> power(seg / 2 + 1, 0.0);
  for (int s = 0; s + seg <= y.size(); s += seg) {
    std::vector<double> chunk(y.data() + s, y.data() + s + seg);
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, chunk);
    for (int k = 0; k <= seg / 2; ++k)
      power[static_cast<std::size_t>(k)] += std::norm(spec[static_cast<std::size_t>(k)]);
  }
  const auto peak = std::max_element(power.begin(), power.end()) - power.begin();
  const double f_peak = 200.0 * static_cast<double>(peak) / seg;
  const double f_pole = 200.0 * std::acos(1.58 / (2 * std::sqrt(0.96))) / (2 * std::numbers::pi);
  CHECK(std::abs(f_peak - f_pole) < 1.0);
}

TEST_CASE("first-half z is uncorrelated with x") {
  auto c = ScenarioConfig::sim2();
  c.trials = 40;
  const auto sim = simulate(c);
  for (int lag = 0; lag <= 5; ++lag) {
    Eigen::VectorXd xs(40 * 400), zs(40 * 400);
    for (int b = 0; b < 40; ++b)
      for (int t = 0; t < 400; ++t) {
        xs(b * 400 + t) = sim.data.trials[static_cast<std::size_t>(b)](50 + t, 0);
        zs(b * 400 + t) = sim.data.trials[static_cast<std::size_t>(b)](50 + t + lag, 2);
      }
    CHECK(std::abs(oracle::pearson(xs, zs)) < 0.05);
  }
}

TEST_CASE("Riccati innovations model agrees with Wilson factorization") {
  const auto truth = true_model(ScenarioConfig::sim1());
  const Eigen::MatrixXd noise = Eigen::Vector3d(0.01, 0.01, 0.001).asDiagonal();
  for (auto [a, b] : {std::pair<std::size_t, std::size_t>{0, 2}, {0, 1}, {1, 2}}) {
    const std::size_t n = 4096;
    const auto spectrum = reduced_spectrum(truth, 700, noise, a, b, n);
    const auto wilson = wilson_factorize(spectrum, 2000, 1e-14);
    const auto model = innovations_model(truth, 700, noise, a, b);
    CHECK((wilson.covariance - model.covariance).norm() < 1e-8 * model.covariance.norm());
    for (std::size_t k = 0; k < n / 2; k += 97) {
      const double f = 200.0 * static_cast<double>(k) / n;
      CHECK((wilson.transfer[k] - model.transfer(f, 200.0)).norm() < 1e-6);
    }
    // The factor reproduces the spectrum.
    const Eigen::Matrix2cd h = model.transfer(37.0 * 200 / n, 200.0);
    const Eigen::Matrix2cd s = h * model.covariance.cast<Complex>() * h.adjoint();
    CHECK((s - spectrum[37]).norm() < 1e-9 * spectrum[37].norm());
  }
}

TEST_CASE("oracle is zero without coupling") {
  auto c = ScenarioConfig::sim2();
  c.samples = 100;
  c.coupling = 0.0;
  const auto sim = simulate(c);
  const auto maps = oracle_maps(sim, all_directions(sim.data.channels),
                                map_times(3, 100, 9), frequency_grid(11, 200.0));
  for (const auto &m : maps)
    CHECK(m.values.isZero(0.0));
}

TEST_CASE("sim2 oracle support") {
  auto c = ScenarioConfig::sim2();
  c.trials = 1;
  const auto sim = simulate(c);
  const auto times = map_times(3, 1000, 7);
  const auto dirs = all_directions(sim.data.channels);
  const auto maps = oracle_maps(sim, dirs, times, frequency_grid(51, 200.0));
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const auto label = dirs[i].label();
    const auto &m = maps[i];
    if (label == "x->y|z" || label == "y->z|x") {
      const bool first = label == "x->y|z";
      for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const bool active = first ? 2 * times[ti] <= 1000 : 2 * times[ti] > 1000;
        const double row_max = m.values.row(static_cast<Eigen::Index>(ti)).maxCoeff();
        if (active)
          CHECK(row_max > 0.1);
        else
          CHECK(row_max == 0.0);
      }
    } else {
      CHECK(m.values.isZero(0.0));
    }
  }
}

TEST_CASE("oracle is thread independent") {
  auto c = ScenarioConfig::sim1();
  c.samples = 300;
  const auto sim = simulate(c);
  const auto dirs = all_directions(sim.data.channels);
  const auto times = map_times(3, 300, 13);
  const auto freqs = frequency_grid(21, 200.0);
  OracleOptions o;
  const auto a = oracle_maps(sim, dirs, times, freqs, o);
  o.threads = 4;
  const auto b = oracle_maps(sim, dirs, times, freqs, o);
  for (std::size_t i = 0; i < dirs.size(); ++i)
    CHECK(a[i].values == b[i].values);
}

TEST_CASE("stationary oracle equals classical conditional Geweke GC") {
  const auto model = stationary_model();
  const auto truth = VarTrajectory::constant(model.lags, 400);
  const auto times = map_times(3, 400, 50);
  const auto freqs = frequency_grid(101, 200.0);
  for (std::size_t tgt = 0; tgt < 3; ++tgt)
    for (std::size_t src = 0; src < 3; ++src) {
      if (src == tgt)
        continue;
      const std::size_t cond = 3 - tgt - src;
      const auto map = theoretical_tfcgc(truth, model.sigma, tgt, src, cond, times, freqs, 200.0);
      const auto ref = oracle::geweke_conditional(model, static_cast<int>(tgt),
                                                  static_cast<int>(src),
                                                  static_cast<int>(cond), freqs, 200.0);
      for (std::size_t fi = 0; fi < freqs.size(); ++fi) {
        const auto col = map.values.col(static_cast<Eigen::Index>(fi));
        CHECK(col.maxCoeff() - col.minCoeff() < 1e-6);
        CHECK(std::abs(col(0) - ref[fi]) < 1e-6);
      }
    }
}

TEST_CASE("scores") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  const auto same = score(a, a);
  CHECK(same.mae == 0.0);
  CHECK(same.rmse == 0.0);
  CHECK(std::isinf(same.psnr));
  CHECK(same.psnr > 0);
  b << 1, 2, 3, 6;
  const auto m = score(b, a);
  CHECK(m.mae == doctest::Approx(0.5));
  CHECK(m.rmse == doctest::Approx(1.0));
  CHECK(m.max == 4.0);
  CHECK(m.psnr == doctest::Approx(20 * std::log10(4.0)));
  const auto zero = score(b, Eigen::MatrixXd::Zero(2, 2));
  CHECK(std::isinf(zero.psnr));
  CHECK(zero.psnr < 0);
  CHECK_THROWS_AS(score(Eigen::MatrixXd::Zero(2, 3), a), Error);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd e(7, 5);
    for (Eigen::Index i = 0; i < e.size(); ++i)
      e.data()[i] = normal(rng);
    const auto s = score(e, Eigen::MatrixXd::Zero(7, 5));
    CHECK(s.mae <= s.rmse);
  }
}

TEST_CASE("benchmark layout") {
  auto c = ScenarioConfig::sim2();
  c.samples = 200;
  c.trials = 3;
  PipelineConfig p = bench_pipeline(c, PipelineConfig{});
  CHECK(p.forgetting == 0.90);
  p.orders = {3};
  p.scale = 2;
  p.frequencies = 11;
  p.time_stride = 10;
  p.permutations = 0;
  const auto rows = run_bench(c, p);
  REQUIRE(rows.size() == 24);
  CHECK(rows[0].direction.label() == "y->x|z");
  CHECK(rows[0].estimator == Estimator::Rls);
  CHECK(rows[3].estimator == Estimator::Urols);
  CHECK(rows[4].direction.label() == "z->x|y");
  for (const auto &r : rows)
    CHECK(r.metrics.mae <= r.metrics.rmse);
  auto c1 = ScenarioConfig::sim1();
  CHECK(bench_pipeline(c1, PipelineConfig{}).permutations == 0);
  CHECK(bench_pipeline(c1, PipelineConfig{}).forgetting == 0.94);
}

} // TEST_SUITE
