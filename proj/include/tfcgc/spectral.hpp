#pragma once

#include "tfcgc/covariance.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace tfcgc {

using Complex = std::complex<double>;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

/// Complex dim x dim matrix per (time, frequency) cell, dim in {2, 3}.
class SpectralField {
public:
  SpectralField() = default;
  SpectralField(std::size_t dim, std::vector<std::size_t> times,
                std::vector<double> freqs);

  std::size_t dim() const { return dim_; }
  const std::vector<std::size_t> &times() const { return times_; }
  const std::vector<double> &freqs() const { return freqs_; }
  std::size_t cells() const { return times_.size() * freqs_.size(); }
  std::size_t cell(std::size_t ti, std::size_t fi) const {
    return ti * freqs_.size() + fi;
  }

  Eigen::Map<CMatrix> at(std::size_t ti, std::size_t fi);
  Eigen::Map<const CMatrix> at(std::size_t ti, std::size_t fi) const;

private:
  std::size_t dim_ = 0;
  std::vector<std::size_t> times_;
  std::vector<double> freqs_;
  std::vector<Complex> data_;
};

/// Per-cell flags for points excluded from the GC map.
using CellMask = std::vector<std::uint8_t>;

/// `count` uniform points on [0, fs/2].
std::vector<double> frequency_grid(std::size_t count, double sampling_rate);

/// Frequency response of a normalized lag polynomial:
/// M(t, f) = sum_l M_l(t) exp(-i 2 pi l f / fs).
SpectralField spectral_matrix(const NormalizedModel &model,
                              const std::vector<double> &freqs,
                              double sampling_rate);

struct TransferField {
  SpectralField field; // cellwise inverse
  CellMask flagged;    // 1 where the 1-norm condition number exceeds the cap
};

TransferField transfer(const SpectralField &coefficients,
                       double condition_cap = 1e12);

/// Solves embed(G) R = K per cell, where embed(G) places the 2x2 transfer
/// of the (target, condition) model into rows/columns {0, 2} of the 3x3
/// identity. K is ordered (target, source, condition).
TransferField combine(const SpectralField &g, const SpectralField &k,
                      double condition_cap = 1e12);

/// Conditional GC values on a time x frequency grid.
struct TFCGCMap {
  std::vector<std::size_t> times;
  std::vector<double> freqs;
  Eigen::MatrixXd values; // times x freqs, >= 0
  double threshold = 0.0;
  CellMask significant; // row-major times x freqs
  CellMask flagged;
  double min_unclamped = 0.0; // smallest value before clamping

  std::size_t flagged_count() const;
  std::size_t significant_count() const;
  /// Sets the threshold and recomputes the mask (value > threshold).
  void apply_threshold(double t);
  /// Values with non-significant and flagged cells set to zero.
  Eigen::MatrixXd thresholded() const;
  /// Largest value over unflagged cells.
  double max_value() const;
};

/// GC = ln(S / intrinsic), S = sum_k |R_xk|^2 var_k, intrinsic = |R_xx|^2
/// var_x, with `variances` the normalized trivariate noise variances per
/// time (times x 3). Cells in `flagged` are reported as 0 and flagged.
TFCGCMap tfcgc(const SpectralField &combined, const Eigen::MatrixXd &variances,
               const CellMask &flagged = {});

/// CF_i = sum_j (G_{i->j} - G_{j->i}) for a square band-integrated GC
/// matrix with G(i, j) the influence of node i on node j.
Eigen::VectorXd net_causal_flow(const Eigen::MatrixXd &gc);

} // namespace tfcgc
