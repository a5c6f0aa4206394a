#include "tfcgc/selection.hpp"

#include "tfcgc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tfcgc {

std::string to_string(Estimator e) {
  switch (e) {
  case Estimator::Rls:
    return "rls";
  case Estimator::Ols:
    return "ols";
  case Estimator::Rols:
    return "rols";
  case Estimator::Urols:
    return "urols";
  }
  return "?";
}

Estimator parse_estimator(const std::string &name) {
  if (name == "rls")
    return Estimator::Rls;
  if (name == "ols")
    return Estimator::Ols;
  if (name == "rols")
    return Estimator::Rols;
  if (name == "urols")
    return Estimator::Urols;
  fail(ErrorKind::InvalidArgument, "unknown estimator '" + name +
                                       "' (expected rls, ols, rols or urols)");
}

void SelectionConfig::validate() const {
  require(!regularization || *regularization >= 0.0,
          ErrorKind::InvalidArgument, "regularization mu must be >= 0");
  require(regularization_scale >= 0.0, ErrorKind::InvalidArgument,
          "regularization scale must be >= 0");
  require(apress_v >= 1.0, ErrorKind::InvalidArgument,
          "APRESS parameter v must be >= 1");
  require(rank_tolerance >= 0.0, ErrorKind::InvalidArgument,
          "rank tolerance must be >= 0");
  require(variant != Estimator::Rls, ErrorKind::InvalidArgument,
          "forward selection does not apply to the RLS estimator");
}

double rerr0(const Eigen::Ref<const Eigen::VectorXd> &x,
             const Eigen::Ref<const Eigen::VectorXd> &gamma, double mu) {
  require(x.size() == gamma.size(), ErrorKind::Shape,
          "rerr0 vectors differ in length");
  require(mu >= 0.0, ErrorKind::InvalidArgument, "mu must be >= 0");
  const double xx = x.squaredNorm();
  require(xx > 0.0, ErrorKind::Numeric,
          "error reduction ratio undefined for a zero output vector");
  const double xg = x.dot(gamma);
  const double gg = gamma.squaredNorm() + mu;
  if (gg == 0.0)
    return 0.0;
  return xg * xg / (xx * gg);
}

double apress(double residual_ss, std::size_t g, double v, std::size_t n) {
  require(n > 0, ErrorKind::InvalidArgument, "APRESS needs N > 0");
  const double ratio = static_cast<double>(g) * v / static_cast<double>(n);
  require(ratio < 1.0, ErrorKind::Numeric,
          "APRESS penalty diverges: g * v >= N");
  const double penalty = 1.0 / ((1.0 - ratio) * (1.0 - ratio));
  return penalty * residual_ss / static_cast<double>(n);
}

RowSegments rows_for(const ULSProblem &problem, Estimator variant) {
  RowSegments segments;
  const bool augmented =
      variant == Estimator::Urols && problem.derivative_order > 0;
  if (augmented) {
    segments.emplace_back(0, static_cast<std::size_t>(problem.target.size()));
    return segments;
  }
  for (std::size_t b = 0; b < problem.trials; ++b)
    segments.emplace_back(problem.block_offset(b), problem.raw_rows);
  return segments;
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd &m, const RowSegments &segs,
                            std::size_t total) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(total), m.cols());
  Eigen::Index row = 0;
  for (const auto &[offset, count] : segs) {
    out.middleRows(row, static_cast<Eigen::Index>(count)) =
        m.middleRows(static_cast<Eigen::Index>(offset),
                     static_cast<Eigen::Index>(count));
    row += static_cast<Eigen::Index>(count);
  }
  return out;
}

} // namespace

SelectedModel forward_select(const ULSProblem &problem,
                             const SelectionConfig &config) {
  config.validate();
  const auto cols = problem.regressors.cols();
  require(cols > 0 && problem.target.size() > 0, ErrorKind::InvalidArgument,
          "empty regression problem");
  require(problem.regressors.rows() == problem.target.size(), ErrorKind::Shape,
          "regressor rows do not match target length");

  SelectedModel model;
  model.rows = rows_for(problem, config.variant);
  for (const auto &seg : model.rows)
    model.used_rows += seg.second;
  const std::size_t n = model.used_rows;

  // All selection quantities are inner products, so work from the Gram
  // matrix of the used rows.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cols, cols);
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(cols);
  double xx = 0.0;
  for (const auto &[offset, count] : model.rows) {
    const auto block = problem.regressors.middleRows(
        static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(count));
    const auto target = problem.target.segment(
        static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(count));
    gram.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    cross.noalias() += block.transpose() * target;
    xx += target.squaredNorm();
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  require(xx > 0.0, ErrorKind::Numeric,
          "target vector is zero; error reduction ratio undefined");

  double mu = 0.0;
  if (config.variant != Estimator::Ols) {
    mu = config.regularization
             ? *config.regularization
             : config.regularization_scale * gram.diagonal().mean();
  }
  model.regularization = mu;

  std::size_t cap = static_cast<std::size_t>(cols);
  if (config.max_terms > 0)
    cap = std::min(cap, config.max_terms);

  Eigen::VectorXd hh = gram.diagonal(); // <h_q, h_q> of the residual part
  Eigen::VectorXd xh = cross;           // <X, h_q>
  std::vector<char> active(static_cast<std::size_t>(cols), 1);
  for (Eigen::Index q = 0; q < cols; ++q)
    if (!(gram(q, q) > 0.0))
      active[static_cast<std::size_t>(q)] = 0;

  std::vector<Eigen::VectorXd> proj; // a(s, .) = <h_s, gamma_.>
  std::vector<double> norms;         // d_s = <h_s, h_s>
  std::vector<double> along;         // c_s = <X, h_s>

  double rss = xx;
  model.residual.push_back(rss);
  model.apress.push_back(apress(rss, 0, config.apress_v, n));

  while (model.size() < cap) {
    const std::size_t g = model.size() + 1;
    if (static_cast<double>(g) * config.apress_v >= static_cast<double>(n))
      break;

    Eigen::Index best = -1;
    double best_score = -1.0;
    for (Eigen::Index q = 0; q < cols; ++q) {
      auto &flag = active[static_cast<std::size_t>(q)];
      if (!flag)
        continue;
      if (hh(q) <= config.rank_tolerance * gram(q, q)) {
        flag = 0; // orthogonalized norms only shrink, so this is permanent
        continue;
      }
      const double score = xh(q) * xh(q) / (xx * (hh(q) + mu));
      if (score > best_score) {
        best_score = score;
        best = q;
      }
    }
    if (best < 0) {
      require(!model.indices.empty(), ErrorKind::Numeric,
              "every candidate term is degenerate; empty model");
      break;
    }

    const double d = hh(best);
    const double c = xh(best);
    const double next_rss = std::max(rss - c * c / d, 0.0);
    const double next_apress = apress(next_rss, g, config.apress_v, n);
    model.apress.push_back(next_apress);
    if (next_apress > model.apress[model.apress.size() - 2])
      break;

    Eigen::VectorXd a = gram.row(best).transpose();
    for (std::size_t s = 0; s < proj.size(); ++s)
      a -= (proj[s](best) / norms[s]) * proj[s];
    hh -= a.cwiseAbs2() / d;
    xh -= a * (c / d);

    proj.push_back(std::move(a));
    norms.push_back(d);
    along.push_back(c);
    active[static_cast<std::size_t>(best)] = 0;
    model.indices.push_back(static_cast<std::size_t>(best));
    model.labels.push_back(problem.labels[static_cast<std::size_t>(best)]);
    model.rerr.push_back(best_score);
    rss = next_rss;
    model.residual.push_back(rss);
  }

  const auto eta = static_cast<Eigen::Index>(model.size());
  model.upper = Eigen::MatrixXd::Identity(eta, eta);
  model.orthogonal_coefficients.resize(eta);
  for (Eigen::Index z = 0; z < eta; ++z) {
    const auto col = static_cast<Eigen::Index>(model.indices[z]);
    for (Eigen::Index s = 0; s < z; ++s)
      model.upper(s, z) = proj[s](col) / norms[s];
    model.orthogonal_coefficients(z) = along[z] / norms[z];
  }

  // Orthogonal basis on the used rows: h_z = gamma_{L_z} - sum_s R(s,z) h_s.
  const Eigen::MatrixXd used = gather_rows(problem.regressors, model.rows, n);
  model.orthogonal.resize(static_cast<Eigen::Index>(n), eta);
  for (Eigen::Index z = 0; z < eta; ++z) {
    model.orthogonal.col(z) =
        used.col(static_cast<Eigen::Index>(model.indices[z]));
    for (Eigen::Index s = 0; s < z; ++s)
      model.orthogonal.col(z) -= model.upper(s, z) * model.orthogonal.col(s);
  }

  model.parameters = solve_params(model);
  return model;
}

Eigen::VectorXd solve_params(const SelectedModel &model) {
  const auto eta = model.orthogonal_coefficients.size();
  if (eta == 0)
    return Eigen::VectorXd();
  require(model.upper.rows() == eta && model.upper.cols() == eta,
          ErrorKind::Shape, "triangular factor does not match coefficients");
  return model.upper.triangularView<Eigen::UnitUpper>().solve(
      model.orthogonal_coefficients);
}

Eigen::Index CoefficientTrajectories::column(std::size_t source,
                                             std::size_t lag) const {
  Eigen::Index col = 0;
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    if (spec.sources[s] == source) {
      require(lag >= 1 && lag <= spec.lags[s], ErrorKind::InvalidArgument,
              "lag outside the model");
      return col + static_cast<Eigen::Index>(lag - 1);
    }
    col += static_cast<Eigen::Index>(spec.lags[s]);
  }
  fail(ErrorKind::InvalidArgument, "source channel not in the model");
}

double CoefficientTrajectories::at(std::size_t source, std::size_t lag,
                                   std::size_t t) const {
  for (std::size_t s = 0; s < spec.sources.size(); ++s)
    if (spec.sources[s] == source && lag >= 1 && lag <= spec.lags[s])
      return values(static_cast<Eigen::Index>(t - 1), column(source, lag));
  return 0.0;
}

CoefficientTrajectories recover_coefficients(const SelectedModel &model,
                                             const BasisDictionary &dict,
                                             const ModelSpec &spec,
                                             std::size_t samples) {
  CoefficientTrajectories out;
  out.spec = spec;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples),
                                     static_cast<Eigen::Index>(spec.lag_terms()));
  require(model.parameters.size() ==
              static_cast<Eigen::Index>(model.labels.size()),
          ErrorKind::Shape, "model parameters not solved");
  for (std::size_t i = 0; i < model.labels.size(); ++i) {
    const TermLabel &label = model.labels[i];
    const Eigen::Index col = out.column(label.source, label.lag);
    const WaveletAtom &atom = dict[label.atom];
    const double beta = model.parameters(static_cast<Eigen::Index>(i));
    for (std::size_t t = 1; t <= samples; ++t)
      out.values(static_cast<Eigen::Index>(t - 1), col) +=
          beta * eval_atom(atom, t, samples);
  }
  return out;
}

CoefficientTrajectories rls_fit(const TrialSet &data, const ModelSpec &spec,
                                double forgetting, double initial_covariance) {
  require(forgetting > 0.0 && forgetting < 1.0, ErrorKind::InvalidArgument,
          "RLS forgetting factor must lie in (0, 1)");
  require(initial_covariance > 0.0, ErrorKind::InvalidArgument,
          "RLS initial covariance must be positive");
  data.validate();
  spec.validate(data.channel_count());
  const std::size_t n = data.samples();
  const std::size_t start = spec.max_lag() + 1;
  require(start <= n, ErrorKind::InsufficientData,
          "record too short for the model lags");

  const auto p = static_cast<Eigen::Index>(spec.lag_terms());
  CoefficientTrajectories out;
  out.spec = spec;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);

  Eigen::VectorXd phi(p);
  for (const Eigen::MatrixXd &trial : data.trials) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd cov = initial_covariance * Eigen::MatrixXd::Identity(p, p);
    for (std::size_t t = start; t <= n; ++t) {
      Eigen::Index k = 0;
      for (std::size_t s = 0; s < spec.sources.size(); ++s)
        for (std::size_t lag = 1; lag <= spec.lags[s]; ++lag)
          phi(k++) = trial(static_cast<Eigen::Index>(t - 1 - lag),
                           static_cast<Eigen::Index>(spec.sources[s]));
      const double y = trial(static_cast<Eigen::Index>(t - 1),
                             static_cast<Eigen::Index>(spec.output));
      const Eigen::VectorXd pphi = cov * phi;
      const double denom = forgetting + phi.dot(pphi);
      const Eigen::VectorXd gain = pphi / denom;
      theta += gain * (y - phi.dot(theta));
      cov = (cov - gain * pphi.transpose()) / forgetting;
      cov = 0.5 * (cov + cov.transpose()).eval();
      out.values.row(static_cast<Eigen::Index>(t - 1)) += theta.transpose();
    }
  }
  out.values /= static_cast<double>(data.trial_count());
  return out;
}

Eigen::VectorXd predict(const CoefficientTrajectories &coeffs,
                        const Eigen::MatrixXd &trial, std::size_t start) {
  const ModelSpec &spec = coeffs.spec;
  const std::size_t n = static_cast<std::size_t>(trial.rows());
  require(start > spec.max_lag() && start <= n, ErrorKind::InvalidArgument,
          "prediction start must exceed the maximum lag");
  require(coeffs.samples() == n, ErrorKind::Shape,
          "trajectory length does not match the trial");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n - start + 1));
  Eigen::Index col = 0;
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    const auto src = static_cast<Eigen::Index>(spec.sources[s]);
    for (std::size_t lag = 1; lag <= spec.lags[s]; ++lag, ++col)
      for (std::size_t t = start; t <= n; ++t)
        out(static_cast<Eigen::Index>(t - start)) +=
            coeffs.values(static_cast<Eigen::Index>(t - 1), col) *
            trial(static_cast<Eigen::Index>(t - 1 - lag), src);
  }
  return out;
}

} // namespace tfcgc
