#include "tfcgc/basis.hpp"
#include "tfcgc/cli.hpp"
#include "tfcgc/error.hpp"
#include "tfcgc/pipeline.hpp"
#include "tfcgc/simkit.hpp"
#include "tfcgc/spectral.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace tfcgc;

namespace {

using Cube = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (trials, samples, channels) array <-> TrialSet.
TrialSet to_trials(const Cube &data, std::vector<std::string> channels, double fs) {
  if (data.ndim() != 3)
    throw Error(ErrorKind::Shape, "data must have shape (trials, samples, channels)");
  const auto r = data.unchecked<3>();
  if (channels.empty())
    for (py::ssize_t c = 0; c < r.shape(2); ++c)
      channels.push_back("c" + std::to_string(c));
  TrialSet out;
  out.channels = std::move(channels);
  out.sampling_rate = fs;
  for (py::ssize_t b = 0; b < r.shape(0); ++b) {
    Eigen::MatrixXd m(r.shape(1), r.shape(2));
    for (py::ssize_t t = 0; t < r.shape(1); ++t)
      for (py::ssize_t c = 0; c < r.shape(2); ++c)
        m(t, c) = r(b, t, c);
    out.trials.push_back(std::move(m));
  }
  out.validate();
  return out;
}

Cube to_array(const TrialSet &d) {
  const auto n = static_cast<py::ssize_t>(d.samples());
  const auto k = static_cast<py::ssize_t>(d.channel_count());
  Cube out({static_cast<py::ssize_t>(d.trial_count()), n, k});
  auto w = out.mutable_unchecked<3>();
  for (std::size_t b = 0; b < d.trial_count(); ++b)
    for (py::ssize_t t = 0; t < n; ++t)
      for (py::ssize_t c = 0; c < k; ++c)
        w(static_cast<py::ssize_t>(b), t, c) = d.trials[b](t, c);
  return out;
}

py::array_t<bool> mask(const CellMask &m, std::size_t rows, std::size_t cols) {
  py::array_t<bool> out({rows, cols});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      w(i, j) = m[i * cols + j] != 0;
  return out;
}

py::dict map_dict(const TFCGCMap &m, const std::string &label) {
  py::dict d;
  d["direction"] = label;
  d["times"] = m.times;
  d["freqs"] = m.freqs;
  d["values"] = m.values;
  d["threshold"] = m.threshold;
  d["significant"] = mask(m.significant, m.times.size(), m.freqs.size());
  d["flagged"] = mask(m.flagged, m.times.size(), m.freqs.size());
  d["min_unclamped"] = m.min_unclamped;
  return d;
}

ScenarioConfig scenario(const std::string &name, std::optional<std::size_t> samples,
                        std::optional<std::size_t> trials, std::uint64_t seed,
                        double coupling, std::optional<std::vector<double>> noise) {
  auto c = ScenarioConfig::defaults(parse_scenario(name));
  if (samples)
    c.samples = *samples;
  if (trials)
    c.trials = *trials;
  if (noise) {
    if (noise->size() == 1)
      c.noise.setConstant((*noise)[0]);
    else if (noise->size() == 3)
      c.noise = Eigen::Vector3d((*noise)[0], (*noise)[1], (*noise)[2]);
    else
      throw Error(ErrorKind::InvalidArgument, "noise takes one or three variances");
  }
  c.seed = seed;
  c.coupling = coupling;
  c.validate();
  return c;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Time-frequency conditional Granger causality";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const Error &e) {
      if (e.kind() == ErrorKind::Io)
        PyErr_SetString(PyExc_OSError, e.what());
      else if (e.kind() == ErrorKind::Numeric)
        PyErr_SetString(PyExc_ArithmeticError, e.what());
      else
        PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("bspline", &eval_bspline, py::arg("order"), py::arg("u"));
  m.def("bspline_derivative", &eval_bspline_derivative, py::arg("order"),
        py::arg("derivative"), py::arg("u"));
  m.def(
      "test_bank",
      [](int derivative_order, std::size_t support) {
        return build_test_bank(derivative_order, support).derivatives;
      },
      py::arg("derivative_order") = 2, py::arg("support") = 20);

  m.def(
      "simulate",
      [](const std::string &name, std::optional<std::size_t> samples,
         std::optional<std::size_t> trials, std::uint64_t seed, double coupling,
         std::optional<std::vector<double>> noise) {
        const auto sim = simulate(scenario(name, samples, trials, seed, coupling, noise));
        py::dict d;
        d["channels"] = sim.data.channels;
        d["fs"] = sim.data.sampling_rate;
        d["data"] = to_array(sim.data);
        return d;
      },
      py::arg("scenario") = "sim2", py::arg("samples") = py::none(),
      py::arg("trials") = py::none(), py::arg("seed") = 0, py::arg("coupling") = 0.5,
      py::arg("noise") = py::none());

  m.def(
      "analyze",
      [](const Cube &data, std::vector<std::string> channels,
         std::vector<std::string> directions, double fs, const std::string &estimator,
         std::vector<int> orders, int scale, std::size_t frequencies,
         std::size_t time_stride, double forgetting, std::size_t permutations,
         double alpha, std::uint64_t seed, std::size_t threads) {
        const auto trials = to_trials(data, std::move(channels), fs);
        PipelineConfig c;
        c.estimator = parse_estimator(estimator);
        c.orders = std::move(orders);
        c.scale = scale;
        c.frequencies = frequencies;
        c.time_stride = time_stride;
        c.forgetting = forgetting;
        c.permutations = permutations;
        c.alpha = alpha;
        c.seed = seed;
        c.threads = threads;
        c.validate();
        std::vector<Direction> dirs;
        for (const auto &d : directions)
          dirs.push_back(Direction::parse(d));
        if (dirs.empty())
          dirs = all_directions(trials.channels);
        std::vector<TFCGCMap> maps;
        {
          py::gil_scoped_release release;
          maps = analyze(trials, dirs, c);
        }
        py::list out;
        for (std::size_t i = 0; i < maps.size(); ++i)
          out.append(map_dict(maps[i], dirs[i].label()));
        return out;
      },
      py::arg("data"), py::arg("channels") = std::vector<std::string>{},
      py::arg("directions") = std::vector<std::string>{}, py::arg("fs") = 200.0,
      py::arg("estimator") = "urols", py::arg("orders") = std::vector<int>{3, 4, 5, 6},
      py::arg("scale") = 4, py::arg("frequencies") = 101, py::arg("time_stride") = 1,
      py::arg("forgetting") = 0.94, py::arg("permutations") = 0, py::arg("alpha") = 0.01,
      py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "oracle",
      [](const std::string &name, const std::string &direction,
         std::optional<std::size_t> samples, double coupling,
         std::optional<std::vector<double>> noise, std::size_t frequencies,
         std::size_t start, std::size_t time_stride) {
        const auto cfg = scenario(name, samples, 1, 0, coupling, noise);
        const auto sim = simulate(cfg);
        const auto dir = Direction::parse(direction);
        const auto times = map_times(start, cfg.samples, time_stride);
        const auto freqs = frequency_grid(frequencies, cfg.sampling_rate);
        return map_dict(oracle_maps(sim, {dir}, times, freqs)[0], dir.label());
      },
      py::arg("scenario"), py::arg("direction"), py::arg("samples") = py::none(),
      py::arg("coupling") = 0.5, py::arg("noise") = py::none(), py::arg("frequencies") = 101,
      py::arg("start") = 3, py::arg("time_stride") = 1);

  m.def(
      "score",
      [](const Eigen::MatrixXd &estimate, const Eigen::MatrixXd &oracle) {
        const auto r = score(estimate, oracle);
        py::dict d;
        d["mae"] = r.mae;
        d["rmse"] = r.rmse;
        d["psnr"] = r.psnr;
        d["max"] = r.max;
        return d;
      },
      py::arg("estimate"), py::arg("oracle"));

  m.def("net_causal_flow", &net_causal_flow, py::arg("gc"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "tfcgc");
        std::vector<const char *> argv;
        for (const auto &a : args)
          argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
