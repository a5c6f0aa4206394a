#include "tfcgc/covariance.hpp"

#include "tfcgc/error.hpp"

#include <algorithm>
#include <string>

namespace tfcgc {

std::vector<double> residual_covariance(std::span<const double> u1,
                                        std::span<const double> u2,
                                        double rho, double initial) {
  require(rho > 0.0 && rho < 1.0, ErrorKind::InvalidArgument,
          "covariance smoothing rate must lie in (0, 1)");
  require(u1.size() == u2.size(), ErrorKind::Shape,
          "residual sequences differ in length");
  std::vector<double> out;
  out.reserve(u1.size() + 1);
  out.push_back(initial);
  for (std::size_t t = 0; t < u1.size(); ++t)
    out.push_back((1.0 - rho) * out.back() + rho * u1[t] * u2[t]);
  return out;
}

const Eigen::MatrixXd &CovarianceTrack::at(std::size_t t) const {
  require(!values.empty(), ErrorKind::InvalidArgument, "empty covariance track");
  if (t <= start)
    return values.front();
  return values[std::min(t - start, values.size() - 1)];
}

CovarianceTrack covariance_track(const std::vector<Eigen::MatrixXd> &residuals,
                                 std::size_t start, double rho,
                                 std::size_t window) {
  require(rho > 0.0 && rho < 1.0, ErrorKind::InvalidArgument,
          "covariance smoothing rate must lie in (0, 1)");
  require(!residuals.empty(), ErrorKind::InsufficientData, "no residuals");
  const Eigen::Index len = residuals.front().rows();
  const Eigen::Index dim = residuals.front().cols();
  require(len >= 2 && dim >= 1, ErrorKind::InsufficientData,
          "residual record too short");
  for (const auto &r : residuals)
    require(r.rows() == len && r.cols() == dim, ErrorKind::Shape,
            "residual matrices differ in shape");

  CovarianceTrack track;
  track.dim = static_cast<std::size_t>(dim);
  track.start = start;
  track.rate = rho;

  const Eigen::Index w = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(window), 2, len);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto &r : residuals)
    mean += r.topRows(w).colwise().sum().transpose();
  const double count = static_cast<double>(w * static_cast<Eigen::Index>(residuals.size()));
  mean /= count;
  Eigen::MatrixXd init = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto &r : residuals) {
    const Eigen::MatrixXd centered = r.topRows(w).rowwise() - mean.transpose();
    init.noalias() += centered.transpose() * centered;
  }
  init /= (count - 1.0);

  const double trials = static_cast<double>(residuals.size());
  track.values.reserve(static_cast<std::size_t>(len));
  track.values.push_back(init);
  Eigen::MatrixXd outer(dim, dim);
  for (Eigen::Index t = 0; t + 1 < len; ++t) {
    outer.setZero();
    for (const auto &r : residuals)
      outer.noalias() += r.row(t).transpose() * r.row(t);
    track.values.push_back((1.0 - rho) * track.values.back() +
                           (rho / trials) * outer);
  }
  return track;
}

VarTrajectory::VarTrajectory(std::size_t dim, std::size_t order,
                             std::size_t samples)
    : dim_(dim), order_(order), samples_(samples),
      data_(dim * dim * order * samples, 0.0) {}

std::size_t VarTrajectory::index(std::size_t t, std::size_t lag,
                                 std::size_t row, std::size_t col) const {
  return (((t - 1) * order_ + (lag - 1)) * dim_ + row) * dim_ + col;
}

double &VarTrajectory::operator()(std::size_t t, std::size_t lag,
                                  std::size_t row, std::size_t col) {
  return data_[index(t, lag, row, col)];
}

double VarTrajectory::operator()(std::size_t t, std::size_t lag,
                                 std::size_t row, std::size_t col) const {
  return data_[index(t, lag, row, col)];
}

Eigen::MatrixXd VarTrajectory::lag_matrix(std::size_t t, std::size_t lag) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (*this)(t, lag, i, j);
  return m;
}

VarTrajectory VarTrajectory::permuted(const std::vector<std::size_t> &perm) const {
  require(perm.size() == dim_, ErrorKind::Shape, "permutation size mismatch");
  VarTrajectory out(dim_, order_, samples_);
  for (std::size_t t = 1; t <= samples_; ++t)
    for (std::size_t l = 1; l <= order_; ++l)
      for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < dim_; ++j)
          out(t, l, i, j) = (*this)(t, l, perm[i], perm[j]);
  return out;
}

VarTrajectory VarTrajectory::constant(const std::vector<Eigen::MatrixXd> &lags,
                                      std::size_t samples) {
  require(!lags.empty(), ErrorKind::InvalidArgument, "no lag matrices");
  const auto dim = static_cast<std::size_t>(lags.front().rows());
  VarTrajectory out(dim, lags.size(), samples);
  for (std::size_t t = 1; t <= samples; ++t)
    for (std::size_t l = 1; l <= lags.size(); ++l)
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
          out(t, l, i, j) = lags[l - 1](static_cast<Eigen::Index>(i),
                                        static_cast<Eigen::Index>(j));
  return out;
}

VarTrajectory assemble_var(const std::vector<CoefficientTrajectories> &equations,
                           const std::vector<std::size_t> &channels) {
  require(equations.size() == channels.size() && !channels.empty(),
          ErrorKind::Shape, "one equation per channel required");
  std::size_t order = 0;
  const std::size_t samples = equations.front().samples();
  for (const auto &eq : equations) {
    order = std::max(order, eq.spec.max_lag());
    require(eq.samples() == samples, ErrorKind::Shape,
            "equations differ in sample count");
  }
  VarTrajectory var(channels.size(), order, samples);
  for (std::size_t i = 0; i < equations.size(); ++i) {
    const auto &eq = equations[i];
    require(eq.spec.output == channels[i], ErrorKind::InvalidArgument,
            "equation order does not match the channel list");
    for (std::size_t s = 0; s < eq.spec.sources.size(); ++s) {
      const auto it = std::find(channels.begin(), channels.end(), eq.spec.sources[s]);
      require(it != channels.end(), ErrorKind::InvalidArgument,
              "equation source outside the model channels");
      const auto j = static_cast<std::size_t>(it - channels.begin());
      for (std::size_t lag = 1; lag <= eq.spec.lags[s]; ++lag) {
        const Eigen::Index col = eq.column(eq.spec.sources[s], lag);
        for (std::size_t t = 1; t <= samples; ++t)
          var(t, lag, i, j) = eq.values(static_cast<Eigen::Index>(t - 1), col);
      }
    }
  }
  return var;
}

std::vector<Eigen::MatrixXd> var_residuals(const VarTrajectory &var,
                                           const std::vector<Eigen::MatrixXd> &trials,
                                           std::size_t start) {
  require(start > var.order(), ErrorKind::InvalidArgument,
          "residual start must exceed the model order");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(trials.size());
  const auto dim = static_cast<Eigen::Index>(var.dim());
  for (const auto &trial : trials) {
    const auto n = static_cast<std::size_t>(trial.rows());
    require(n == var.samples() && trial.cols() == dim, ErrorKind::Shape,
            "trial shape does not match the model");
    Eigen::MatrixXd res(static_cast<Eigen::Index>(n - start + 1), dim);
    for (std::size_t t = start; t <= n; ++t) {
      for (Eigen::Index i = 0; i < dim; ++i) {
        double e = trial(static_cast<Eigen::Index>(t - 1), i);
        for (std::size_t l = 1; l <= var.order(); ++l)
          for (Eigen::Index j = 0; j < dim; ++j)
            e -= var(t, l, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                 trial(static_cast<Eigen::Index>(t - 1 - l), j);
        res(static_cast<Eigen::Index>(t - start), i) = e;
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

CovarianceTrack permuted(const CovarianceTrack &track,
                         const std::vector<std::size_t> &perm) {
  require(perm.size() == track.dim, ErrorKind::Shape, "permutation size mismatch");
  CovarianceTrack out = track;
  const auto d = static_cast<Eigen::Index>(track.dim);
  for (std::size_t k = 0; k < track.values.size(); ++k)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        out.values[k](i, j) = track.values[k](static_cast<Eigen::Index>(perm[i]),
                                              static_cast<Eigen::Index>(perm[j]));
  return out;
}

Eigen::MatrixXd normalizer(const Eigen::MatrixXd &cov, std::size_t t) {
  const std::string where = " at t=" + std::to_string(t);
  if (cov.rows() == 2 && cov.cols() == 2) {
    const double s1 = cov(0, 0);
    require(s1 > 0.0, ErrorKind::Numeric, "singular noise variance" + where);
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(2, 2);
    p(1, 0) = -cov(1, 0) / s1;
    return p;
  }
  require(cov.rows() == 3 && cov.cols() == 3, ErrorKind::Shape,
          "normalization supports 2 or 3 channels");
  const double sxx = cov(0, 0);
  require(sxx > 0.0, ErrorKind::Numeric, "singular noise variance" + where);
  Eigen::MatrixXd q1 = Eigen::MatrixXd::Identity(3, 3);
  q1(1, 0) = -cov(1, 0) / sxx;
  q1(2, 0) = -cov(2, 0) / sxx;
  const double schur_y = cov(1, 1) - cov(1, 0) * cov(0, 1) / sxx;
  require(schur_y > 0.0, ErrorKind::Numeric, "singular Schur pivot" + where);
  Eigen::MatrixXd q2 = Eigen::MatrixXd::Identity(3, 3);
  q2(2, 1) = -(cov(2, 1) - cov(2, 0) * cov(0, 1) / sxx) / schur_y;
  return q2 * q1;
}

namespace {

NormalizedModel normalize(const VarTrajectory &var, const CovarianceTrack &track,
                          const std::vector<std::size_t> &times,
                          std::size_t dim) {
  require(var.dim() == dim && track.dim == dim, ErrorKind::Shape,
          "model and covariance dimensions differ");
  NormalizedModel out;
  out.dim = dim;
  out.order = var.order();
  out.times = times;
  out.poly.reserve(times.size() * (out.order + 1));
  out.variances.resize(static_cast<Eigen::Index>(times.size()),
                       static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t t = times[i];
    require(t >= 1 && t <= var.samples(), ErrorKind::InvalidArgument,
            "normalization time outside the model");
    const Eigen::MatrixXd &cov = track.at(t);
    const Eigen::MatrixXd q = normalizer(cov, t);
    const Eigen::MatrixXd reduced = q * cov * q.transpose();
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = reduced(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      require(v > 0.0, ErrorKind::Numeric,
              "non-positive normalized variance at t=" + std::to_string(t));
      out.variances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
    out.poly.push_back(q);
    for (std::size_t l = 1; l <= out.order; ++l)
      out.poly.push_back(-q * var.lag_matrix(t, l));
  }
  return out;
}

} // namespace

NormalizedModel normalize_bivariate(const VarTrajectory &var,
                                    const CovarianceTrack &track,
                                    const std::vector<std::size_t> &times) {
  return normalize(var, track, times, 2);
}

NormalizedModel normalize_trivariate(const VarTrajectory &var,
                                     const CovarianceTrack &track,
                                     const std::vector<std::size_t> &times) {
  return normalize(var, track, times, 3);
}

} // namespace tfcgc
