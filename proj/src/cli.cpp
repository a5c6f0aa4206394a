#include "tfcgc/cli.hpp"

#include "tfcgc/error.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace tfcgc {

int exit_code(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::Numeric:
    return kNumeric;
  case ErrorKind::Io:
    return kIo;
  default:
    return kUsage;
  }
}

namespace {

// Shortest of %.15g / %.17g that reads back exactly.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) == v)
    return buf;
  return format_number(v);
}

template <class T> std::string join(const std::vector<T> &items, char sep,
                                    const std::function<std::string(const T &)> &f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i)
      out += sep;
    out += f(items[i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string &text, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(text);
  while (std::getline(ss, cell, sep)) {
    const auto b = cell.find_first_not_of(" \t");
    if (b == std::string::npos)
      continue;
    const auto e = cell.find_last_not_of(" \t");
    out.push_back(cell.substr(b, e - b + 1));
  }
  return out;
}

std::size_t to_size(const std::string &text, const std::string &key) {
  const double v = parse_number(text, key);
  require(v >= 0.0 && v == std::floor(v) && v < 1.8e19,
          ErrorKind::InvalidArgument, key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

int to_int(const std::string &text, const std::string &key) {
  const double v = parse_number(text, key);
  require(v == std::floor(v) && std::abs(v) < 2e9, ErrorKind::InvalidArgument,
          key + " must be an integer");
  return static_cast<int>(v);
}

bool to_bool(const std::string &text, const std::string &key) {
  if (text == "true" || text == "1")
    return true;
  if (text == "false" || text == "0")
    return false;
  fail(ErrorKind::InvalidArgument, key + " must be true or false");
}

std::vector<int> to_orders(const std::string &text) {
  std::vector<int> out;
  for (const auto &s : split_list(text, ','))
    out.push_back(to_int(s, "orders"));
  require(!out.empty(), ErrorKind::InvalidArgument, "orders list is empty");
  return out;
}

std::vector<double> to_noise(const std::string &text) {
  std::vector<double> out;
  for (const auto &s : split_list(text, ','))
    out.push_back(parse_number(s, "noise"));
  require(out.size() == 1 || out.size() == 3, ErrorKind::InvalidArgument,
          "noise takes one variance or three (x,y,z)");
  if (out.size() == 1)
    out.assign(3, out.front());
  return out;
}

std::vector<Estimator> to_estimators(const std::string &text) {
  std::vector<Estimator> out;
  for (const auto &s : split_list(text, ','))
    out.push_back(parse_estimator(s));
  require(!out.empty(), ErrorKind::InvalidArgument, "estimator list is empty");
  return out;
}

std::pair<double, double> to_band(const std::string &text) {
  const auto parts = split_list(text, ',');
  require(parts.size() == 2, ErrorKind::InvalidArgument, "band takes LOW,HIGH");
  return {parse_number(parts[0], "band"), parse_number(parts[1], "band")};
}

std::string file_label(const Direction &d) {
  return d.source + "_to_" + d.target + "_given_" + d.condition;
}

} // namespace

void RunConfig::resolve() {
  const ScenarioConfig base = ScenarioConfig::defaults(parse_scenario(scenario));
  if (!samples)
    samples = base.samples;
  if (!trials)
    trials = base.trials;
  if (!noise)
    noise = std::vector<double>{base.noise(0), base.noise(1), base.noise(2)};
  if (!forgetting)
    forgetting = command == "bench" && scenario == "sim2" ? 0.90 : 0.94;
  // The benchmark runs many fits, so its surrogate budget is the smallest
  // that supports alpha = 0.05.
  if (!alpha)
    alpha = command == "bench" ? 0.05 : 0.01;
  if (!permutations)
    permutations = command == "bench" ? 19 : 999;
  if (command == "bench" && *trials < 2)
    permutations = 0;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.estimator = estimator;
  p.orders = orders;
  p.scale = scale;
  p.derivative_order = derivative_order;
  p.support = support;
  p.lag = lag;
  p.regularization = mu;
  p.regularization_scale = mu_scale;
  p.apress_v = apress_v;
  p.max_terms = max_terms;
  p.rank_tolerance = rank_tolerance;
  p.forgetting = forgetting.value_or(0.94);
  p.rls_initial_covariance = rls_p0;
  p.rho = rho;
  p.covariance_window = covariance_window;
  p.frequencies = frequencies;
  p.time_stride = time_stride;
  p.condition_cap = condition_cap;
  p.alpha = alpha.value_or(0.01);
  p.permutations = permutations.value_or(999);
  p.seed = seed;
  p.threads = threads;
  return p;
}

ScenarioConfig RunConfig::scenario_config() const {
  ScenarioConfig s = ScenarioConfig::defaults(parse_scenario(scenario));
  if (samples)
    s.samples = *samples;
  if (trials)
    s.trials = *trials;
  if (noise)
    s.noise = Eigen::Vector3d((*noise)[0], (*noise)[1], (*noise)[2]);
  s.coupling = coupling;
  s.burn_in = burn_in;
  s.seed = seed;
  s.validate();
  return s;
}

namespace {

// Key, which commands echo it, how to print it and how to read it back.
struct Field {
  const char *key;
  std::set<std::string> commands;
  std::function<std::string(const RunConfig &)> get;
  std::function<void(RunConfig &, const std::string &)> set;
};

const std::set<std::string> kAll{"simulate", "cgc", "bench", "flow"};
const std::set<std::string> kFit{"cgc", "bench"};
const std::set<std::string> kSim{"simulate", "bench"};

const std::vector<Field> &fields() {
  static const std::vector<Field> table = {
      {"command", kAll, [](const RunConfig &c) { return c.command; },
       [](RunConfig &c, const std::string &v) { c.command = v; }},
      {"output", kAll, [](const RunConfig &c) { return c.output; },
       [](RunConfig &c, const std::string &v) { c.output = v; }},
      {"seed", {"simulate", "cgc", "bench"},
       [](const RunConfig &c) { return std::to_string(c.seed); },
       [](RunConfig &c, const std::string &v) {
         const double s = parse_number(v, "seed");
         require(s >= 0 && s == std::floor(s), ErrorKind::InvalidArgument,
                 "seed must be a non-negative integer");
         c.seed = std::stoull(v);
       }},
      {"input", {"cgc"}, [](const RunConfig &c) { return c.input; },
       [](RunConfig &c, const std::string &v) { c.input = v; }},
      {"fs", {"cgc", "flow"}, [](const RunConfig &c) { return fmt(c.sampling_rate); },
       [](RunConfig &c, const std::string &v) { c.sampling_rate = parse_number(v, "fs"); }},
      {"directions", {"cgc"},
       [](const RunConfig &c) {
         return join<std::string>(c.directions, ',', [](const std::string &s) { return s; });
       },
       [](RunConfig &c, const std::string &v) { c.directions = split_list(v, ','); }},
      {"estimator", {"cgc"},
       [](const RunConfig &c) { return to_string(c.estimator); },
       [](RunConfig &c, const std::string &v) { c.estimator = parse_estimator(v); }},
      {"estimators", {"bench"},
       [](const RunConfig &c) {
         return join<Estimator>(c.estimators, ',', [](const Estimator &e) { return to_string(e); });
       },
       [](RunConfig &c, const std::string &v) { c.estimators = to_estimators(v); }},
      {"orders", kFit,
       [](const RunConfig &c) {
         return join<int>(c.orders, ',', [](const int &r) { return std::to_string(r); });
       },
       [](RunConfig &c, const std::string &v) { c.orders = to_orders(v); }},
      {"scale", kFit, [](const RunConfig &c) { return std::to_string(c.scale); },
       [](RunConfig &c, const std::string &v) { c.scale = to_int(v, "scale"); }},
      {"derivative_order", kFit,
       [](const RunConfig &c) { return std::to_string(c.derivative_order); },
       [](RunConfig &c, const std::string &v) {
         c.derivative_order = to_int(v, "derivative_order");
       }},
      {"support", kFit, [](const RunConfig &c) { return std::to_string(c.support); },
       [](RunConfig &c, const std::string &v) { c.support = to_size(v, "support"); }},
      {"lag", kFit, [](const RunConfig &c) { return std::to_string(c.lag); },
       [](RunConfig &c, const std::string &v) { c.lag = to_size(v, "lag"); }},
      {"mu", kFit, [](const RunConfig &c) { return c.mu ? fmt(*c.mu) : std::string("auto"); },
       [](RunConfig &c, const std::string &v) {
         if (v == "auto")
           c.mu.reset();
         else
           c.mu = parse_number(v, "mu");
       }},
      {"mu_scale", kFit, [](const RunConfig &c) { return fmt(c.mu_scale); },
       [](RunConfig &c, const std::string &v) { c.mu_scale = parse_number(v, "mu_scale"); }},
      {"apress_v", kFit, [](const RunConfig &c) { return fmt(c.apress_v); },
       [](RunConfig &c, const std::string &v) { c.apress_v = parse_number(v, "apress_v"); }},
      {"max_terms", kFit, [](const RunConfig &c) { return std::to_string(c.max_terms); },
       [](RunConfig &c, const std::string &v) { c.max_terms = to_size(v, "max_terms"); }},
      {"rank_tolerance", kFit, [](const RunConfig &c) { return fmt(c.rank_tolerance); },
       [](RunConfig &c, const std::string &v) {
         c.rank_tolerance = parse_number(v, "rank_tolerance");
       }},
      {"forgetting", kFit,
       [](const RunConfig &c) { return fmt(c.forgetting.value_or(0.94)); },
       [](RunConfig &c, const std::string &v) { c.forgetting = parse_number(v, "forgetting"); }},
      {"rls_p0", kFit, [](const RunConfig &c) { return fmt(c.rls_p0); },
       [](RunConfig &c, const std::string &v) { c.rls_p0 = parse_number(v, "rls_p0"); }},
      {"rho", kFit, [](const RunConfig &c) { return fmt(c.rho); },
       [](RunConfig &c, const std::string &v) { c.rho = parse_number(v, "rho"); }},
      {"covariance_window", kFit,
       [](const RunConfig &c) { return std::to_string(c.covariance_window); },
       [](RunConfig &c, const std::string &v) {
         c.covariance_window = to_size(v, "covariance_window");
       }},
      {"frequencies", kFit, [](const RunConfig &c) { return std::to_string(c.frequencies); },
       [](RunConfig &c, const std::string &v) { c.frequencies = to_size(v, "frequencies"); }},
      {"time_stride", kFit, [](const RunConfig &c) { return std::to_string(c.time_stride); },
       [](RunConfig &c, const std::string &v) { c.time_stride = to_size(v, "time_stride"); }},
      {"condition_cap", kFit, [](const RunConfig &c) { return fmt(c.condition_cap); },
       [](RunConfig &c, const std::string &v) {
         c.condition_cap = parse_number(v, "condition_cap");
       }},
      {"alpha", kFit, [](const RunConfig &c) { return fmt(c.alpha.value_or(0.01)); },
       [](RunConfig &c, const std::string &v) { c.alpha = parse_number(v, "alpha"); }},
      {"permutations", kFit,
       [](const RunConfig &c) { return std::to_string(c.permutations.value_or(999)); },
       [](RunConfig &c, const std::string &v) { c.permutations = to_size(v, "permutations"); }},
      {"thresholded", {"bench"},
       [](const RunConfig &c) { return std::string(c.thresholded ? "true" : "false"); },
       [](RunConfig &c, const std::string &v) { c.thresholded = to_bool(v, "thresholded"); }},
      {"scenario", kSim, [](const RunConfig &c) { return c.scenario; },
       [](RunConfig &c, const std::string &v) {
         parse_scenario(v);
         c.scenario = v;
       }},
      {"samples", kSim,
       [](const RunConfig &c) { return std::to_string(c.samples.value_or(0)); },
       [](RunConfig &c, const std::string &v) { c.samples = to_size(v, "samples"); }},
      {"trials", kSim,
       [](const RunConfig &c) { return std::to_string(c.trials.value_or(0)); },
       [](RunConfig &c, const std::string &v) { c.trials = to_size(v, "trials"); }},
      {"noise", kSim,
       [](const RunConfig &c) {
         return c.noise ? join<double>(*c.noise, ',', [](const double &x) { return fmt(x); })
                        : std::string();
       },
       [](RunConfig &c, const std::string &v) { c.noise = to_noise(v); }},
      {"coupling", kSim, [](const RunConfig &c) { return fmt(c.coupling); },
       [](RunConfig &c, const std::string &v) { c.coupling = parse_number(v, "coupling"); }},
      {"burn_in", kSim, [](const RunConfig &c) { return std::to_string(c.burn_in); },
       [](RunConfig &c, const std::string &v) { c.burn_in = to_size(v, "burn_in"); }},
      {"maps", {"flow"},
       [](const RunConfig &c) {
         return join<std::string>(c.maps, ';', [](const std::string &s) { return s; });
       },
       [](RunConfig &c, const std::string &v) { c.maps = split_list(v, ';'); }},
      {"band", {"flow"},
       [](const RunConfig &c) { return fmt(c.band_low) + "," + fmt(c.band_high); },
       [](RunConfig &c, const std::string &v) {
         std::tie(c.band_low, c.band_high) = to_band(v);
       }},
      {"window", {"flow"}, [](const RunConfig &c) { return fmt(c.window); },
       [](RunConfig &c, const std::string &v) { c.window = parse_number(v, "window"); }},
  };
  return table;
}

} // namespace

KeyValueFile RunConfig::echo() const {
  KeyValueFile kv;
  for (const auto &f : fields())
    if (f.commands.count(command))
      kv.set(f.key, f.get(*this));
  return kv;
}

void RunConfig::apply(const KeyValueFile &kv) {
  for (const auto &[key, value] : kv.entries()) {
    const auto it = std::find_if(fields().begin(), fields().end(),
                                 [&](const Field &f) { return key == f.key; });
    require(it != fields().end(), ErrorKind::InvalidArgument,
            "unknown config key " + key);
    if (key == "command") {
      require(value == command, ErrorKind::InvalidArgument,
              "config file is for '" + value + "', not '" + command + "'");
      continue;
    }
    it->set(*this, value);
  }
}

std::vector<FlowRow> causal_flow(const std::vector<std::string> &nodes,
                                 const std::vector<std::vector<TFCGCMap>> &maps,
                                 double sampling_rate, double band_low,
                                 double band_high, double window) {
  const std::size_t n = nodes.size();
  require(n >= 2, ErrorKind::InvalidArgument, "causal flow needs two or more nodes");
  require(maps.size() == n, ErrorKind::Shape, "map matrix does not match the nodes");
  require(sampling_rate > 0.0 && window > 0.0 && band_low <= band_high,
          ErrorKind::InvalidArgument, "invalid sampling rate, window or band");
  const TFCGCMap *first = nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    require(maps[i].size() == n, ErrorKind::Shape, "map matrix is not square");
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        continue;
      if (!first)
        first = &maps[i][j];
      require(maps[i][j].times == first->times && maps[i][j].freqs == first->freqs,
              ErrorKind::Shape, "maps are on different grids");
    }
  }
  std::vector<std::size_t> band;
  for (std::size_t f = 0; f < first->freqs.size(); ++f)
    if (first->freqs[f] >= band_low && first->freqs[f] <= band_high)
      band.push_back(f);
  require(!band.empty(), ErrorKind::InvalidArgument,
          "no grid frequency inside the band");

  // Window k covers times t / fs in [k w, (k + 1) w).
  std::map<long long, std::vector<std::size_t>> windows;
  for (std::size_t ti = 0; ti < first->times.size(); ++ti) {
    const double sec = static_cast<double>(first->times[ti]) / sampling_rate;
    windows[static_cast<long long>(std::floor(sec / window + 1e-9))].push_back(ti);
  }

  const std::size_t nf = first->freqs.size();
  std::vector<FlowRow> rows;
  for (const auto &[k, slots] : windows) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j)
          continue;
        const TFCGCMap &m = maps[i][j];
        double sum = 0.0;
        for (std::size_t ti : slots)
          for (std::size_t f : band)
            if (m.significant[ti * nf + f])
              sum += m.values(static_cast<Eigen::Index>(ti), static_cast<Eigen::Index>(f));
        g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            sum / static_cast<double>(slots.size() * band.size());
      }
    const Eigen::VectorXd cf = net_causal_flow(g);
    for (std::size_t i = 0; i < n; ++i)
      rows.push_back({nodes[i], static_cast<double>(k) * window,
                      static_cast<double>(k + 1) * window,
                      cf(static_cast<Eigen::Index>(i))});
  }
  return rows;
}

namespace {

std::string path_in(const RunConfig &cfg, const std::string &name) {
  return (std::filesystem::path(cfg.output) / name).string();
}

void check_output_dir(const RunConfig &cfg) {
  require(std::filesystem::is_directory(cfg.output), ErrorKind::Io,
          "output directory does not exist: " + cfg.output);
}

void write_echo(const RunConfig &cfg) { cfg.echo().save(path_in(cfg, "config.txt")); }

int cmd_simulate(const RunConfig &cfg, std::ostream &out) {
  check_output_dir(cfg);
  const Simulation sim = simulate(cfg.scenario_config());
  write_trials_csv(path_in(cfg, "data.csv"), sim.data);
  write_truth_csv(path_in(cfg, "truth.csv"), sim.truth, sim.data.channels);
  write_echo(cfg);
  out << "simulated " << cfg.scenario << ": " << sim.data.trial_count()
      << " trial(s) x " << sim.data.samples() << " samples at "
      << fmt(sim.data.sampling_rate) << " Hz\n";
  return kSuccess;
}

int cmd_cgc(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
  check_output_dir(cfg);
  require(!cfg.input.empty(), ErrorKind::InvalidArgument, "--input is required");
  const TrialSet data = read_trials_csv(cfg.input, cfg.sampling_rate);
  require(data.channel_count() >= 3, ErrorKind::InvalidArgument,
          "conditional GC needs at least three channels");
  std::vector<Direction> dirs;
  for (const auto &d : cfg.directions)
    dirs.push_back(Direction::parse(d));
  if (dirs.empty()) {
    require(data.channel_count() == 3, ErrorKind::InvalidArgument,
            "name --direction explicitly when the input has more than three channels");
    dirs = all_directions(data.channels);
  }
  const auto maps = analyze(data, dirs, cfg.pipeline());

  auto summary = open_output(path_in(cfg, "summary.csv"));
  summary << "direction,threshold,flagged,significant,max,min_unclamped,map\n";
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const std::string file = "map_" + file_label(dirs[i]) + ".csv";
    write_map_csv(path_in(cfg, file), maps[i]);
    summary << dirs[i].label() << ',' << format_number(maps[i].threshold) << ','
            << maps[i].flagged_count() << ',' << maps[i].significant_count() << ','
            << format_number(maps[i].max_value()) << ','
            << format_number(maps[i].min_unclamped) << ',' << file << '\n';
    out << dirs[i].label() << ": threshold " << fmt(maps[i].threshold) << ", "
        << maps[i].significant_count() << " significant, "
        << maps[i].flagged_count() << " flagged cells\n";
    if (maps[i].min_unclamped < -1e-6)
      err << "warning: " << dirs[i].label() << " had GC values down to "
          << fmt(maps[i].min_unclamped) << " before clamping (model misfit)\n";
  }
  require(summary.good(), ErrorKind::Io, "failed writing summary.csv");
  write_echo(cfg);
  return kSuccess;
}

int cmd_bench(const RunConfig &cfg, std::ostream &out) {
  check_output_dir(cfg);
  const ScenarioConfig scen = cfg.scenario_config();
  BenchOptions options;
  options.estimators = cfg.estimators;
  options.thresholded = cfg.thresholded;
  const auto rows = run_bench(scen, cfg.pipeline(), options);

  auto csv = open_output(path_in(cfg, "metrics.csv"));
  csv << "scenario,direction,estimator,mae,rmse,psnr,max,threshold\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-6s %12s %12s %10s\n", "direction",
                "method", "MAE", "RMSE", "PSNR");
  out << line;
  for (const auto &r : rows) {
    csv << cfg.scenario << ',' << r.direction.label() << ','
        << to_string(r.estimator) << ',' << format_number(r.metrics.mae) << ','
        << format_number(r.metrics.rmse) << ',' << format_number(r.metrics.psnr)
        << ',' << format_number(r.metrics.max) << ','
        << format_number(r.threshold) << '\n';
    std::snprintf(line, sizeof line, "%-10s %-6s %12.4f %12.4f %10.4f\n",
                  r.direction.label().c_str(), to_string(r.estimator).c_str(),
                  r.metrics.mae, r.metrics.rmse, r.metrics.psnr);
    out << line;
  }
  require(csv.good(), ErrorKind::Io, "failed writing metrics.csv");
  write_echo(cfg);
  return kSuccess;
}

int cmd_flow(const RunConfig &cfg, std::ostream &out) {
  check_output_dir(cfg);
  std::map<std::pair<std::string, std::string>, std::string> files;
  std::set<std::string> names;
  for (const auto &spec : cfg.maps) {
    const auto eq = spec.find('=');
    const auto arrow = spec.find("->");
    require(eq != std::string::npos && arrow != std::string::npos && arrow < eq,
            ErrorKind::InvalidArgument, "--map takes SOURCE->TARGET=path: " + spec);
    const std::string src = split_list(spec.substr(0, arrow), ',').at(0);
    const std::string tgt = split_list(spec.substr(arrow + 2, eq - arrow - 2), ',').at(0);
    require(src != tgt, ErrorKind::InvalidArgument, "self-loop map: " + spec);
    files[{src, tgt}] = spec.substr(eq + 1);
    names.insert(src);
    names.insert(tgt);
  }
  const std::vector<std::string> nodes(names.begin(), names.end());
  std::string missing;
  for (const auto &a : nodes)
    for (const auto &b : nodes)
      if (a != b && !files.count({a, b}))
        missing += (missing.empty() ? "" : ", ") + a + "->" + b;
  require(missing.empty(), ErrorKind::InvalidArgument, "missing maps: " + missing);

  std::vector<std::vector<TFCGCMap>> maps(nodes.size(),
                                          std::vector<TFCGCMap>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (i != j)
        maps[i][j] = read_map_csv(files.at({nodes[i], nodes[j]}));
  const auto rows = causal_flow(nodes, maps, cfg.sampling_rate, cfg.band_low,
                                cfg.band_high, cfg.window);

  auto csv = open_output(path_in(cfg, "flow.csv"));
  csv << "node,window_start,window_end,cf\n";
  for (const auto &r : rows)
    csv << r.node << ',' << format_number(r.window_start) << ','
        << format_number(r.window_end) << ',' << format_number(r.cf) << '\n';
  require(csv.good(), ErrorKind::Io, "failed writing flow.csv");
  write_echo(cfg);
  out << "wrote causal flow for " << nodes.size() << " nodes in "
      << rows.size() / nodes.size() << " windows\n";
  return kSuccess;
}

// Raw option text; converted once parsing has succeeded.
struct RawOptions {
  std::map<std::string, std::string> values;
  std::vector<std::string> directions;
  std::vector<std::string> maps;
};

void add_text(CLI::App *app, RawOptions &raw, const std::string &flag,
              const std::string &key, const std::string &help) {
  app->add_option_function<std::string>(
      flag, [&raw, key](const std::string &v) { raw.values[key] = v; }, help);
}

void add_pipeline_options(CLI::App *app, RawOptions &raw) {
  add_text(app, raw, "--orders", "orders", "B-spline orders, comma separated (3,4,5,6)");
  add_text(app, raw, "--scale", "scale", "wavelet scale j (4)");
  add_text(app, raw, "--derivative-order", "derivative_order", "test-function derivative order d (2)");
  add_text(app, raw, "--support", "support", "test-function support n0 in samples (20)");
  add_text(app, raw, "--lag", "lag", "maximum lag of every source (2)");
  add_text(app, raw, "--mu", "mu", "regularization mu, or 'auto' (auto)");
  add_text(app, raw, "--mu-scale", "mu_scale", "auto mu as a fraction of mean column energy (0.01)");
  add_text(app, raw, "--apress-v", "apress_v", "APRESS penalty parameter v (3)");
  add_text(app, raw, "--max-terms", "max_terms", "cap on selected terms, 0 for none (0)");
  add_text(app, raw, "--rank-tolerance", "rank_tolerance", "degenerate-candidate tolerance (1e-10)");
  add_text(app, raw, "--forgetting", "forgetting", "RLS forgetting factor (0.94; bench sim2 0.90)");
  add_text(app, raw, "--rls-p0", "rls_p0", "RLS initial covariance scale (1000)");
  add_text(app, raw, "--rho", "rho", "noise covariance smoothing rate (0.05)");
  add_text(app, raw, "--covariance-window", "covariance_window", "samples seeding the covariance track (50)");
  add_text(app, raw, "--frequencies", "frequencies", "frequency grid points on [0, fs/2] (101)");
  add_text(app, raw, "--time-stride", "time_stride", "map time step in samples (1)");
  add_text(app, raw, "--condition-cap", "condition_cap", "condition number above which cells are flagged (1e12)");
  add_text(app, raw, "--alpha", "alpha", "significance level (0.01; bench 0.05)");
  add_text(app, raw, "--permutations", "permutations", "surrogates, 0 skips the test (999; bench 19)");
}

void add_scenario_options(CLI::App *app, RawOptions &raw) {
  add_text(app, raw, "--scenario", "scenario", "sim1 or sim2 (sim2)");
  add_text(app, raw, "--samples", "samples", "samples per trial (sim1 2000, sim2 1000)");
  add_text(app, raw, "--trials", "trials", "number of trials (sim1 1, sim2 20)");
  add_text(app, raw, "--noise", "noise", "noise variance, one value or x,y,z");
  add_text(app, raw, "--coupling", "coupling", "peak coupling strength (0.5)");
  add_text(app, raw, "--burn-in", "burn_in", "discarded warm-up samples (200)");
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err) {
  CLI::App app{"Time-frequency conditional Granger causality"};
  app.require_subcommand(1);
  RawOptions raw;
  std::string config_path;
  std::size_t threads = 1;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", config_path, "key = value file from a previous run");
    add_text(sub, raw, "--out", "output", "existing output directory (.)");
    sub->add_option("--threads", threads, "worker threads (1)")->check(CLI::PositiveNumber);
  };
  auto *sim = app.add_subcommand("simulate", "write a benchmark data set and its true coefficients");
  common(sim);
  add_text(sim, raw, "--seed", "seed", "master seed (0)");
  add_scenario_options(sim, raw);

  auto *cgc = app.add_subcommand("cgc", "TF-CGC maps of a CSV data set");
  common(cgc);
  add_text(cgc, raw, "--seed", "seed", "master seed (0)");
  add_text(cgc, raw, "--input", "input", "CSV with header trial,t,<channels>");
  add_text(cgc, raw, "--fs", "fs", "sampling rate in Hz (200)");
  cgc->add_option("--direction", raw.directions,
                  "SOURCE->TARGET|CONDITION, repeatable (all six for 3 channels)");
  add_text(cgc, raw, "--estimator", "estimator", "rls, ols, rols or urols (urols)");
  add_pipeline_options(cgc, raw);

  auto *bench = app.add_subcommand("bench", "score estimators against the theoretical maps");
  common(bench);
  add_text(bench, raw, "--seed", "seed", "master seed (0)");
  add_text(bench, raw, "--estimators", "estimators", "comma separated (rls,ols,rols,urols)");
  add_text(bench, raw, "--thresholded", "thresholded", "score thresholded maps (true)");
  add_scenario_options(bench, raw);
  add_pipeline_options(bench, raw);

  auto *flow = app.add_subcommand("flow", "net causal flow from pairwise maps");
  common(flow);
  flow->add_option("--map", raw.maps, "SOURCE->TARGET=map.csv, one per ordered pair")
      ->required();
  add_text(flow, raw, "--band", "band", "LOW,HIGH in Hz (8,14)");
  add_text(flow, raw, "--window", "window", "window length in seconds (0.25)");
  add_text(flow, raw, "--fs", "fs", "sampling rate in Hz (200)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp &e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError &e) {
    for (auto *sub : app.get_subcommands())
      if (sub->parsed()) {
        err << e.what() << "\n" << sub->help();
        return kUsage;
      }
    err << e.what() << "\n" << app.help();
    return kUsage;
  }

  RunConfig cfg;
  cfg.command = app.get_subcommands().front()->get_name();
  try {
    if (!config_path.empty())
      cfg.apply(KeyValueFile::load(config_path));
    KeyValueFile cli;
    for (const auto &[k, v] : raw.values)
      cli.set(k, v);
    cfg.apply(cli);
    if (!raw.directions.empty())
      cfg.directions = raw.directions;
    if (!raw.maps.empty())
      cfg.maps = raw.maps;
    cfg.threads = threads;
    cfg.resolve();
    cfg.pipeline().validate();

    if (cfg.command == "simulate")
      return cmd_simulate(cfg, out);
    if (cfg.command == "cgc")
      return cmd_cgc(cfg, out, err);
    if (cfg.command == "bench")
      return cmd_bench(cfg, out);
    return cmd_flow(cfg, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
}

} // namespace tfcgc
