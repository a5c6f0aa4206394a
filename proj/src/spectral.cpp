#include "tfcgc/spectral.hpp"

#include "tfcgc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tfcgc {

SpectralField::SpectralField(std::size_t dim, std::vector<std::size_t> times,
                             std::vector<double> freqs)
    : dim_(dim), times_(std::move(times)), freqs_(std::move(freqs)),
      data_(dim * dim * times_.size() * freqs_.size()) {
  require(dim == 2 || dim == 3, ErrorKind::InvalidArgument,
          "spectral fields support 2 or 3 channels");
}

Eigen::Map<CMatrix> SpectralField::at(std::size_t ti, std::size_t fi) {
  const auto d = static_cast<Eigen::Index>(dim_);
  return Eigen::Map<CMatrix>(data_.data() + cell(ti, fi) * dim_ * dim_, d, d);
}

Eigen::Map<const CMatrix> SpectralField::at(std::size_t ti,
                                            std::size_t fi) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  return Eigen::Map<const CMatrix>(data_.data() + cell(ti, fi) * dim_ * dim_,
                                   d, d);
}

std::vector<double> frequency_grid(std::size_t count, double sampling_rate) {
  require(count >= 2, ErrorKind::InvalidArgument,
          "frequency grid needs at least two points");
  require(sampling_rate > 0.0, ErrorKind::InvalidArgument,
          "sampling rate must be positive");
  std::vector<double> f(count);
  for (std::size_t i = 0; i < count; ++i)
    f[i] = 0.5 * sampling_rate * static_cast<double>(i) /
           static_cast<double>(count - 1);
  return f;
}

SpectralField spectral_matrix(const NormalizedModel &model,
                              const std::vector<double> &freqs,
                              double sampling_rate) {
  require(sampling_rate > 0.0, ErrorKind::InvalidArgument,
          "sampling rate must be positive");
  for (double f : freqs)
    require(f >= 0.0 && f <= 0.5 * sampling_rate + 1e-12,
            ErrorKind::InvalidArgument, "frequency outside [0, fs/2]");
  SpectralField out(model.dim, model.times, freqs);

  // phase[fi][l] = exp(-i 2 pi l f / fs)
  std::vector<Complex> phase(freqs.size() * (model.order + 1));
  for (std::size_t fi = 0; fi < freqs.size(); ++fi)
    for (std::size_t l = 0; l <= model.order; ++l)
      phase[fi * (model.order + 1) + l] = std::polar(
          1.0, -2.0 * std::numbers::pi * static_cast<double>(l) * freqs[fi] /
                   sampling_rate);

  for (std::size_t ti = 0; ti < model.times.size(); ++ti) {
    for (std::size_t fi = 0; fi < freqs.size(); ++fi) {
      auto cell = out.at(ti, fi);
      cell.setZero();
      for (std::size_t l = 0; l <= model.order; ++l)
        cell += phase[fi * (model.order + 1) + l] *
                model.term(ti, l).cast<Complex>();
    }
  }
  return out;
}

namespace {

template <int D>
bool invert_cell(const Eigen::Map<const CMatrix> &in, Eigen::Map<CMatrix> out,
                 double cap) {
  using Fixed = Eigen::Matrix<Complex, D, D>;
  const Fixed a = in;
  const Fixed inv = a.inverse();
  const double cond = a.cwiseAbs().colwise().sum().maxCoeff() *
                      inv.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(cond) || cond > cap) {
    out.setZero();
    return false;
  }
  out = inv;
  return true;
}

} // namespace

TransferField transfer(const SpectralField &coefficients, double condition_cap) {
  TransferField out{SpectralField(coefficients.dim(), coefficients.times(),
                                  coefficients.freqs()),
                    CellMask(coefficients.cells(), 0)};
  for (std::size_t ti = 0; ti < coefficients.times().size(); ++ti) {
    for (std::size_t fi = 0; fi < coefficients.freqs().size(); ++fi) {
      const bool ok =
          coefficients.dim() == 2
              ? invert_cell<2>(coefficients.at(ti, fi), out.field.at(ti, fi),
                               condition_cap)
              : invert_cell<3>(coefficients.at(ti, fi), out.field.at(ti, fi),
                               condition_cap);
      if (!ok)
        out.flagged[coefficients.cell(ti, fi)] = 1;
    }
  }
  return out;
}

TransferField combine(const SpectralField &g, const SpectralField &k,
                      double condition_cap) {
  require(g.dim() == 2 && k.dim() == 3, ErrorKind::Shape,
          "combine expects a 2x2 and a 3x3 field");
  require(g.times() == k.times() && g.freqs() == k.freqs(), ErrorKind::Shape,
          "combine fields are on different grids");
  TransferField out{SpectralField(3, k.times(), k.freqs()),
                    CellMask(k.cells(), 0)};
  using M3 = Eigen::Matrix3cd;
  for (std::size_t ti = 0; ti < k.times().size(); ++ti) {
    for (std::size_t fi = 0; fi < k.freqs().size(); ++fi) {
      const auto gc = g.at(ti, fi);
      M3 emb = M3::Identity();
      emb(0, 0) = gc(0, 0);
      emb(0, 2) = gc(0, 1);
      emb(2, 0) = gc(1, 0);
      emb(2, 2) = gc(1, 1);
      const M3 inv = emb.inverse();
      const double cond = emb.cwiseAbs().colwise().sum().maxCoeff() *
                          inv.cwiseAbs().colwise().sum().maxCoeff();
      auto dst = out.field.at(ti, fi);
      if (!std::isfinite(cond) || cond > condition_cap) {
        dst.setZero();
        out.flagged[k.cell(ti, fi)] = 1;
        continue;
      }
      const M3 kc = k.at(ti, fi);
      dst = emb.partialPivLu().solve(kc);
    }
  }
  return out;
}

std::size_t TFCGCMap::flagged_count() const {
  return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), 1));
}

std::size_t TFCGCMap::significant_count() const {
  return static_cast<std::size_t>(
      std::count(significant.begin(), significant.end(), 1));
}

void TFCGCMap::apply_threshold(double t) {
  threshold = t;
  const auto nf = static_cast<Eigen::Index>(freqs.size());
  significant.assign(flagged.size(), 0);
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < nf; ++j) {
      const auto c = static_cast<std::size_t>(i * nf + j);
      significant[c] = (!flagged[c] && values(i, j) > threshold) ? 1 : 0;
    }
}

Eigen::MatrixXd TFCGCMap::thresholded() const {
  Eigen::MatrixXd out = values;
  const auto nf = static_cast<Eigen::Index>(freqs.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < nf; ++j)
      if (!significant[static_cast<std::size_t>(i * nf + j)])
        out(i, j) = 0.0;
  return out;
}

double TFCGCMap::max_value() const {
  double best = 0.0;
  const auto nf = static_cast<Eigen::Index>(freqs.size());
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < nf; ++j)
      if (!flagged[static_cast<std::size_t>(i * nf + j)])
        best = std::max(best, values(i, j));
  return best;
}

TFCGCMap tfcgc(const SpectralField &combined, const Eigen::MatrixXd &variances,
               const CellMask &flagged) {
  require(combined.dim() == 3, ErrorKind::Shape,
          "conditional GC needs the combined 3x3 field");
  const std::size_t nt = combined.times().size();
  const std::size_t nf = combined.freqs().size();
  require(variances.rows() == static_cast<Eigen::Index>(nt) &&
              variances.cols() == 3,
          ErrorKind::Shape, "variance track does not match the field times");
  require(flagged.empty() || flagged.size() == combined.cells(),
          ErrorKind::Shape, "flag mask does not match the field");

  TFCGCMap map;
  map.times = combined.times();
  map.freqs = combined.freqs();
  map.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nt),
                                     static_cast<Eigen::Index>(nf));
  map.flagged = flagged.empty() ? CellMask(combined.cells(), 0) : flagged;
  map.min_unclamped = 0.0;

  for (std::size_t ti = 0; ti < nt; ++ti) {
    const auto ti_ = static_cast<Eigen::Index>(ti);
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const std::size_t c = combined.cell(ti, fi);
      if (map.flagged[c])
        continue;
      const auto r = combined.at(ti, fi);
      const double intrinsic = std::norm(r(0, 0)) * variances(ti_, 0);
      const double total = intrinsic + std::norm(r(0, 1)) * variances(ti_, 1) +
                           std::norm(r(0, 2)) * variances(ti_, 2);
      require(intrinsic > 0.0 && std::isfinite(total), ErrorKind::Numeric,
              "invalid spectrum: non-positive intrinsic power at t=" +
                  std::to_string(combined.times()[ti]));
      const double gc = std::log(total / intrinsic);
      map.min_unclamped = std::min(map.min_unclamped, gc);
      map.values(ti_, static_cast<Eigen::Index>(fi)) = std::max(gc, 0.0);
    }
  }
  map.apply_threshold(0.0);
  return map;
}

Eigen::VectorXd net_causal_flow(const Eigen::MatrixXd &gc) {
  require(gc.rows() == gc.cols(), ErrorKind::Shape,
          "causal flow needs a square GC matrix");
  Eigen::VectorXd cf = Eigen::VectorXd::Zero(gc.rows());
  for (Eigen::Index i = 0; i < gc.rows(); ++i)
    for (Eigen::Index j = 0; j < gc.cols(); ++j)
      if (i != j)
        cf(i) += gc(i, j) - gc(j, i);
  return cf;
}

} // namespace tfcgc
