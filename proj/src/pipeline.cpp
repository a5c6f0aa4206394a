#include "tfcgc/pipeline.hpp"

#include "tfcgc/error.hpp"
#include "tfcgc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace tfcgc {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Positions of `wanted` channels inside a model's channel list.
std::vector<std::size_t> positions(const std::vector<std::size_t> &model,
                                   const std::vector<std::size_t> &wanted) {
  std::vector<std::size_t> out;
  out.reserve(wanted.size());
  for (std::size_t c : wanted) {
    const auto it = std::find(model.begin(), model.end(), c);
    require(it != model.end(), ErrorKind::InvalidArgument,
            "channel missing from the fitted model");
    out.push_back(static_cast<std::size_t>(it - model.begin()));
  }
  return out;
}

struct Resolved {
  std::size_t target, source, condition;
};

Resolved resolve(const TrialSet &data, const Direction &d) {
  Resolved r{data.channel_index(d.target), data.channel_index(d.source),
             data.channel_index(d.condition)};
  require(r.target != r.source && r.target != r.condition &&
              r.source != r.condition,
          ErrorKind::InvalidArgument,
          "direction " + d.label() + " must name three distinct channels");
  return r;
}

} // namespace

Direction Direction::parse(const std::string &text) {
  const auto arrow = text.find("->");
  const auto bar = text.find('|');
  require(arrow != std::string::npos && bar != std::string::npos && arrow < bar,
          ErrorKind::InvalidArgument,
          "direction must look like SOURCE->TARGET|CONDITION: " + text);
  Direction d{trim(text.substr(0, arrow)),
              trim(text.substr(arrow + 2, bar - arrow - 2)),
              trim(text.substr(bar + 1))};
  require(!d.source.empty() && !d.target.empty() && !d.condition.empty(),
          ErrorKind::InvalidArgument, "empty channel name in direction " + text);
  return d;
}

std::string Direction::label() const {
  return source + "->" + target + "|" + condition;
}

std::vector<Direction> all_directions(const std::vector<std::string> &channels) {
  require(channels.size() == 3, ErrorKind::InvalidArgument,
          "conditional directions need exactly three channels");
  std::vector<Direction> out;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t s = 0; s < 3; ++s) {
      if (s == t)
        continue;
      const std::size_t c = 3 - s - t;
      out.push_back({channels[s], channels[t], channels[c]});
    }
  return out;
}

SelectionConfig PipelineConfig::selection() const {
  SelectionConfig s;
  s.variant = estimator;
  s.regularization = regularization;
  s.regularization_scale = regularization_scale;
  s.apress_v = apress_v;
  s.max_terms = max_terms;
  s.rank_tolerance = rank_tolerance;
  return s;
}

void PipelineConfig::validate() const {
  require(!orders.empty(), ErrorKind::InvalidArgument, "no B-spline orders");
  for (int r : orders)
    require(r >= 1, ErrorKind::InvalidArgument, "B-spline order must be >= 1");
  require(scale >= 0, ErrorKind::InvalidArgument, "scale must be >= 0");
  require(derivative_order >= 1, ErrorKind::InvalidArgument,
          "derivative order must be >= 1");
  require(support >= static_cast<std::size_t>(derivative_order) + 2,
          ErrorKind::InvalidArgument, "test-function support too small");
  require(lag >= 1, ErrorKind::InvalidArgument, "lag must be >= 1");
  require(forgetting > 0.0 && forgetting < 1.0, ErrorKind::InvalidArgument,
          "forgetting factor must lie in (0, 1)");
  require(rls_initial_covariance > 0.0, ErrorKind::InvalidArgument,
          "RLS initial covariance must be positive");
  require(rho > 0.0 && rho < 1.0, ErrorKind::InvalidArgument,
          "covariance rate must lie in (0, 1)");
  require(covariance_window >= 2, ErrorKind::InvalidArgument,
          "covariance window must be >= 2");
  require(frequencies >= 2, ErrorKind::InvalidArgument,
          "need at least two frequencies");
  require(time_stride >= 1, ErrorKind::InvalidArgument, "time stride must be >= 1");
  require(condition_cap > 1.0, ErrorKind::InvalidArgument,
          "condition cap must exceed 1");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument,
          "alpha must lie in (0, 1)");
  require(threads >= 1, ErrorKind::InvalidArgument, "threads must be >= 1");
  if (estimator != Estimator::Rls)
    selection().validate();
}

FittedModel fit_model(const TrialSet &data,
                      const std::vector<std::size_t> &channels,
                      const PipelineConfig &config) {
  data.validate();
  require(!channels.empty(), ErrorKind::InvalidArgument, "no model channels");
  const std::size_t n = data.samples();
  require(n > config.lag + config.covariance_window, ErrorKind::InsufficientData,
          "record too short for the model lag and covariance window");

  std::vector<CoefficientTrajectories> equations(channels.size());
  std::vector<std::vector<TermLabel>> labels;
  if (config.estimator == Estimator::Rls) {
    parallel_for(channels.size(), config.threads, [&](std::size_t i) {
      const auto spec = ModelSpec::uniform(channels[i], channels, config.lag);
      equations[i] =
          rls_fit(data, spec, config.forgetting, config.rls_initial_covariance);
    });
  } else {
    const BasisDictionary dict(config.orders, config.scale);
    const TestFunctionBank bank =
        config.estimator == Estimator::Urols
            ? build_test_bank(config.derivative_order, config.support)
            : TestFunctionBank{};
    const SelectionConfig sel = config.selection();
    labels.resize(channels.size());
    parallel_for(channels.size(), config.threads, [&](std::size_t i) {
      const auto spec = ModelSpec::uniform(channels[i], channels, config.lag);
      const ULSProblem problem =
          modulate(expand_regressors(data, spec, dict), bank);
      const SelectedModel model = forward_select(problem, sel);
      equations[i] = recover_coefficients(model, dict, spec, n);
      labels[i] = model.labels;
    });
  }

  FittedModel out;
  out.channels = channels;
  out.start = config.lag + 1;
  out.selected = std::move(labels);
  out.var = assemble_var(equations, channels);
  const auto residuals =
      var_residuals(out.var, data.select(channels).trials, out.start);
  out.covariance = covariance_track(residuals, out.start, config.rho,
                                    config.covariance_window);
  return out;
}

std::vector<std::size_t> map_times(std::size_t start, std::size_t samples,
                                   std::size_t stride) {
  require(stride >= 1, ErrorKind::InvalidArgument, "time stride must be >= 1");
  require(start >= 1 && start <= samples, ErrorKind::InvalidArgument,
          "map start outside the record");
  std::vector<std::size_t> t;
  for (std::size_t s = start; s <= samples; s += stride)
    t.push_back(s);
  return t;
}

TFCGCMap conditional_map(const FittedModel &trivariate,
                         const FittedModel &bivariate, std::size_t target,
                         std::size_t source, std::size_t condition,
                         const std::vector<std::size_t> &times,
                         const std::vector<double> &freqs, double sampling_rate,
                         double condition_cap) {
  require(trivariate.channels.size() == 3 && bivariate.channels.size() == 2,
          ErrorKind::Shape, "conditional map needs a 3- and a 2-channel model");
  const auto tri_perm =
      positions(trivariate.channels, {target, source, condition});
  const auto bi_perm = positions(bivariate.channels, {target, condition});

  const NormalizedModel tri = normalize_trivariate(
      trivariate.var.permuted(tri_perm), permuted(trivariate.covariance, tri_perm),
      times);
  const NormalizedModel bi = normalize_bivariate(
      bivariate.var.permuted(bi_perm), permuted(bivariate.covariance, bi_perm),
      times);

  const TransferField k =
      transfer(spectral_matrix(tri, freqs, sampling_rate), condition_cap);
  const TransferField g =
      transfer(spectral_matrix(bi, freqs, sampling_rate), condition_cap);
  const TransferField r = combine(g.field, k.field, condition_cap);

  CellMask flags(r.flagged.size(), 0);
  for (std::size_t c = 0; c < flags.size(); ++c)
    flags[c] = (k.flagged[c] || g.flagged[c] || r.flagged[c]) ? 1 : 0;
  return tfcgc(r.field, tri.variances, flags);
}

namespace {

struct ModelCache {
  std::map<std::vector<std::size_t>, FittedModel> models;

  void fit(const TrialSet &data, const std::vector<std::vector<std::size_t>> &keys,
           const PipelineConfig &config) {
    std::vector<std::vector<std::size_t>> todo;
    for (const auto &k : keys)
      if (!models.count(k) &&
          std::find(todo.begin(), todo.end(), k) == todo.end())
        todo.push_back(k);
    // Parallelize over models; each model fits its equations serially.
    PipelineConfig serial = config;
    serial.threads = 1;
    std::vector<FittedModel> fitted(todo.size());
    parallel_for(todo.size(), config.threads, [&](std::size_t i) {
      fitted[i] = fit_model(data, todo[i], serial);
    });
    for (std::size_t i = 0; i < todo.size(); ++i)
      models.emplace(todo[i], std::move(fitted[i]));
  }

  const FittedModel &at(const std::vector<std::size_t> &key) const {
    return models.at(key);
  }
};

std::vector<std::size_t> triple_key(const Resolved &r) {
  return sorted_unique({r.target, r.source, r.condition});
}

std::vector<std::size_t> pair_key(const Resolved &r) {
  return sorted_unique({r.target, r.condition});
}

} // namespace

std::vector<TFCGCMap> estimate_maps(const TrialSet &data,
                                    const std::vector<Direction> &directions,
                                    const PipelineConfig &config) {
  config.validate();
  data.validate();
  std::vector<Resolved> resolved;
  std::vector<std::vector<std::size_t>> keys;
  for (const auto &d : directions) {
    resolved.push_back(resolve(data, d));
    keys.push_back(triple_key(resolved.back()));
    keys.push_back(pair_key(resolved.back()));
  }
  ModelCache cache;
  cache.fit(data, keys, config);

  const auto times = map_times(config.lag + 1, data.samples(), config.time_stride);
  const auto freqs = frequency_grid(config.frequencies, data.sampling_rate);
  std::vector<TFCGCMap> maps(directions.size());
  parallel_for(directions.size(), config.threads, [&](std::size_t i) {
    const auto &r = resolved[i];
    maps[i] = conditional_map(cache.at(triple_key(r)), cache.at(pair_key(r)),
                              r.target, r.source, r.condition, times, freqs,
                              data.sampling_rate, config.condition_cap);
  });
  return maps;
}

double surrogate_quantile(std::vector<double> maxima, double alpha) {
  require(!maxima.empty(), ErrorKind::InvalidArgument,
          "surrogate quantile needs at least one surrogate");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument,
          "alpha must lie in (0, 1)");
  std::sort(maxima.begin(), maxima.end());
  const double n = static_cast<double>(maxima.size());
  // Guard against 0.99 * 100 landing a hair above 99.
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * (n + 1.0) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, maxima.size());
  return maxima[k - 1];
}

std::vector<double> significance_thresholds(const TrialSet &data,
                                            const std::vector<Direction> &directions,
                                            const PipelineConfig &config,
                                            std::size_t permutations,
                                            double alpha) {
  config.validate();
  data.validate();
  require(permutations >= 1, ErrorKind::InvalidArgument,
          "significance test needs at least one surrogate");
  require(data.trial_count() >= 2, ErrorKind::InsufficientData,
          "surrogates need at least two trials to re-pair");

  std::vector<Resolved> resolved;
  std::vector<std::vector<std::size_t>> pair_keys;
  for (const auto &d : directions) {
    resolved.push_back(resolve(data, d));
    pair_keys.push_back(pair_key(resolved.back()));
  }
  // The source channel never enters the (target, condition) model, so the
  // observed bivariate fits serve every surrogate.
  ModelCache cache;
  cache.fit(data, pair_keys, config);

  // Directions sharing a triple and a source share one surrogate fit.
  struct Group {
    std::vector<std::size_t> triple;
    std::size_t source;
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < resolved.size(); ++i) {
    const auto key = triple_key(resolved[i]);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group &g) {
      return g.triple == key && g.source == resolved[i].source;
    });
    if (it == groups.end()) {
      groups.push_back({key, resolved[i].source, {}});
      it = groups.end() - 1;
    }
    it->members.push_back(i);
  }

  const auto times = map_times(config.lag + 1, data.samples(), config.time_stride);
  const auto freqs = frequency_grid(config.frequencies, data.sampling_rate);
  PipelineConfig serial = config;
  serial.threads = 1;

  std::vector<std::vector<double>> maxima(
      directions.size(), std::vector<double>(permutations, 0.0));
  parallel_for(groups.size() * permutations, config.threads, [&](std::size_t task) {
    const Group &g = groups[task / permutations];
    const std::size_t s = task % permutations;
    const auto order = random_derangement(data.trial_count(),
                                          derive_seed(config.seed, g.source, s));
    const TrialSet surrogate = repair_trials(data, g.source, order);
    const FittedModel tri = fit_model(surrogate, g.triple, serial);
    for (std::size_t i : g.members) {
      const auto &r = resolved[i];
      const TFCGCMap m =
          conditional_map(tri, cache.at(pair_key(r)), r.target, r.source,
                          r.condition, times, freqs, data.sampling_rate,
                          config.condition_cap);
      maxima[i][s] = m.max_value();
    }
  });

  std::vector<double> out;
  out.reserve(directions.size());
  for (auto &m : maxima)
    out.push_back(surrogate_quantile(std::move(m), alpha));
  return out;
}

double significance_threshold(const TrialSet &data, const Direction &direction,
                              const PipelineConfig &config,
                              std::size_t permutations, double alpha) {
  return significance_thresholds(data, {direction}, config, permutations, alpha)
      .front();
}

std::vector<TFCGCMap> analyze(const TrialSet &data,
                              const std::vector<Direction> &directions,
                              const PipelineConfig &config) {
  auto maps = estimate_maps(data, directions, config);
  if (config.permutations > 0) {
    const auto thresholds = significance_thresholds(
        data, directions, config, config.permutations, config.alpha);
    for (std::size_t i = 0; i < maps.size(); ++i)
      maps[i].apply_threshold(thresholds[i]);
  }
  return maps;
}

TrialSet repair_trials(const TrialSet &data, std::size_t channel,
                       const std::vector<std::size_t> &order) {
  require(channel < data.channel_count(), ErrorKind::InvalidArgument,
          "channel index out of range");
  require(order.size() == data.trial_count(), ErrorKind::Shape,
          "re-pairing order must cover every trial");
  TrialSet out = data;
  const auto c = static_cast<Eigen::Index>(channel);
  for (std::size_t b = 0; b < order.size(); ++b) {
    require(order[b] < data.trial_count(), ErrorKind::InvalidArgument,
            "re-pairing index out of range");
    out.trials[b].col(c) = data.trials[order[b]].col(c);
  }
  return out;
}

std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed) {
  require(n >= 2, ErrorKind::InsufficientData,
          "a derangement needs at least two elements");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> p(n);
  for (;;) {
    for (std::size_t i = 0; i < n; ++i)
      p[i] = i;
    std::shuffle(p.begin(), p.end(), rng);
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i)
      fixed = p[i] == i;
    if (!fixed)
      return p;
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t z = splitmix64(master);
  z = splitmix64(z ^ a);
  return splitmix64(z ^ (b + 0x632be59bd9b4e019ULL));
}

} // namespace tfcgc
