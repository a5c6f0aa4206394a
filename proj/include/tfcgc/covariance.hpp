#pragma once

#include "tfcgc/selection.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace tfcgc {

/// One step of the exponentially weighted (co)variance recursion
/// s(t+1) = (1 - rho) s(t) + rho u1(t) u2(t), run over the whole sequence.
/// For inputs of length T returns s(1..T+1) with s(1) = initial.
std::vector<double> residual_covariance(std::span<const double> u1,
                                        std::span<const double> u2,
                                        double rho, double initial);

/// Time-varying noise covariance of a k-channel model, one matrix per
/// sample from `start` to N. Times before `start` read the first matrix.
struct CovarianceTrack {
  std::size_t dim = 0;
  std::size_t start = 1;
  double rate = 0.05;
  std::vector<Eigen::MatrixXd> values;

  const Eigen::MatrixXd &at(std::size_t t) const;
  std::size_t end() const { return start + values.size() - 1; }
};

/// Covariance track from per-trial residual matrices (rows = samples
/// start..N, columns = channels). The recursion is driven by the
/// trial-averaged outer product and seeded with the pooled sample covariance
/// of the first `window` samples.
CovarianceTrack covariance_track(const std::vector<Eigen::MatrixXd> &residuals,
                                 std::size_t start, double rho,
                                 std::size_t window = 50);

/// Coefficient matrices of x(t) = sum_l C_l(t) x(t - l) + e(t), stored per
/// sample t = 1..N and lag l = 1..order.
class VarTrajectory {
public:
  VarTrajectory() = default;
  VarTrajectory(std::size_t dim, std::size_t order, std::size_t samples);

  std::size_t dim() const { return dim_; }
  std::size_t order() const { return order_; }
  std::size_t samples() const { return samples_; }

  double &operator()(std::size_t t, std::size_t lag, std::size_t row,
                     std::size_t col);
  double operator()(std::size_t t, std::size_t lag, std::size_t row,
                    std::size_t col) const;
  Eigen::MatrixXd lag_matrix(std::size_t t, std::size_t lag) const;

  /// Same model with channels reordered: new channel i is old perm[i].
  VarTrajectory permuted(const std::vector<std::size_t> &perm) const;

  /// Constant-in-time model from lag matrices C_1..C_p.
  static VarTrajectory constant(const std::vector<Eigen::MatrixXd> &lags,
                                std::size_t samples);

private:
  std::size_t index(std::size_t t, std::size_t lag, std::size_t row,
                    std::size_t col) const;

  std::size_t dim_ = 0;
  std::size_t order_ = 0;
  std::size_t samples_ = 0;
  std::vector<double> data_;
};

/// Stack per-equation trajectories into a VAR trajectory. Equation i has
/// output channels[i]; sources outside `channels` are rejected.
VarTrajectory assemble_var(const std::vector<CoefficientTrajectories> &equations,
                           const std::vector<std::size_t> &channels);

/// Per-trial residual matrices of a VAR trajectory, rows t = start..N.
std::vector<Eigen::MatrixXd> var_residuals(const VarTrajectory &var,
                                           const std::vector<Eigen::MatrixXd> &trials,
                                           std::size_t start);

CovarianceTrack permuted(const CovarianceTrack &track,
                         const std::vector<std::size_t> &perm);

/// Lag polynomial after removing instantaneous noise correlation:
/// M_0(t) = Q(t), M_l(t) = -Q(t) C_l(t), with diagonal noise variances.
struct NormalizedModel {
  std::size_t dim = 0;
  std::size_t order = 0;
  std::vector<std::size_t> times;   // 1-based sample indices
  std::vector<Eigen::MatrixXd> poly; // [i * (order + 1) + l]
  Eigen::MatrixXd variances;         // times x dim

  const Eigen::MatrixXd &term(std::size_t i, std::size_t lag) const {
    return poly[i * (order + 1) + lag];
  }
};

/// Two-channel normalization with P(t) = [[1, 0], [-D/S1, 1]].
NormalizedModel normalize_bivariate(const VarTrajectory &var,
                                    const CovarianceTrack &track,
                                    const std::vector<std::size_t> &times);

/// Three-channel normalization with Q(t) = Q2(t) Q1(t); the noise variances
/// become the successive Schur complements of the covariance.
NormalizedModel normalize_trivariate(const VarTrajectory &var,
                                     const CovarianceTrack &track,
                                     const std::vector<std::size_t> &times);

/// The normalizing matrix for one covariance (2x2 or 3x3).
Eigen::MatrixXd normalizer(const Eigen::MatrixXd &cov, std::size_t t = 0);

} // namespace tfcgc
