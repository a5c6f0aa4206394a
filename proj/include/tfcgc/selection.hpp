#pragma once

#include "tfcgc/basis.hpp"
#include "tfcgc/tvarx.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tfcgc {

/// Estimators compared by the benchmark. The three basis-expansion variants
/// differ only in regularization and in which rows of the problem they see.
enum class Estimator { Rls, Ols, Rols, Urols };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string &name);

struct SelectionConfig {
  Estimator variant = Estimator::Urols;
  /// Explicit mu. When empty, mu = regularization_scale * mean squared
  /// column norm of the rows the variant uses (ignored for OLS, mu = 0).
  std::optional<double> regularization;
  double regularization_scale = 1e-2;
  double apress_v = 3.0;
  std::size_t max_terms = 0; // 0: no cap beyond the candidate count
  /// Candidates whose orthogonalized squared norm falls below this fraction
  /// of their original squared norm are treated as degenerate.
  double rank_tolerance = 1e-10;

  void validate() const;
};

/// Zero-order regularized error reduction ratio.
double rerr0(const Eigen::Ref<const Eigen::VectorXd> &x,
             const Eigen::Ref<const Eigen::VectorXd> &gamma, double mu);

/// Adjustable prediction error sum of squares, p(g) * rss / N with
/// p(g) = 1 / (1 - g v / N)^2.
double apress(double residual_ss, std::size_t g, double v, std::size_t n);

/// Row ranges [offset, offset + count) of a problem that a variant fits on.
using RowSegments = std::vector<std::pair<std::size_t, std::size_t>>;
RowSegments rows_for(const ULSProblem &problem, Estimator variant);

struct SelectedModel {
  std::vector<std::size_t> indices; // selected columns, in selection order
  std::vector<TermLabel> labels;    // labels of the selected columns
  Eigen::MatrixXd orthogonal;       // O: used rows x eta, orthogonal columns
  Eigen::MatrixXd upper;            // R: eta x eta, unit upper triangular
  Eigen::VectorXd orthogonal_coefficients; // U = (O^T O)^-1 O^T X
  Eigen::VectorXd parameters;              // Pi, with R Pi = U
  std::vector<double> rerr;       // score of each selected term
  std::vector<double> residual;   // ||r_g||^2 for g = 0..eta
  std::vector<double> apress;     // APRESS(g) over the computed prefix
  RowSegments rows;
  std::size_t used_rows = 0;
  double regularization = 0.0;

  std::size_t size() const { return indices.size(); }
};

/// Greedy forward regression: at each step pick the candidate whose
/// component orthogonal to the already selected terms maximizes RERR0
/// against the target; stop at the first local minimum of APRESS.
SelectedModel forward_select(const ULSProblem &problem,
                             const SelectionConfig &config);

/// Back-substitution of R Pi = U.
Eigen::VectorXd solve_params(const SelectedModel &model);

/// Time-varying lag coefficients c_{source,lag}(t) for t = 1..N.
struct CoefficientTrajectories {
  ModelSpec spec;
  Eigen::MatrixXd values; // N x lag_terms; column order source-major, lag

  std::size_t samples() const { return static_cast<std::size_t>(values.rows()); }
  /// Column of (source channel, lag); throws if the pair is not in the spec.
  Eigen::Index column(std::size_t source, std::size_t lag) const;
  /// c_{source,lag}(t) for 1-based t, or 0 if the pair is not modelled.
  double at(std::size_t source, std::size_t lag, std::size_t t) const;
};

CoefficientTrajectories recover_coefficients(const SelectedModel &model,
                                             const BasisDictionary &dict,
                                             const ModelSpec &spec,
                                             std::size_t samples);

/// Exponentially weighted recursive least squares per trial with
/// coefficients initialized to zero and P0 = initial_covariance * I;
/// trajectories are averaged across trials. Samples before the first
/// regression row keep the initial (zero) coefficients.
CoefficientTrajectories rls_fit(const TrialSet &data, const ModelSpec &spec,
                                double forgetting,
                                double initial_covariance = 1e3);

/// One-step predictions sum_{s,lag} c_{s,lag}(t) x_s(t - lag) for
/// t = start..N of one trial.
Eigen::VectorXd predict(const CoefficientTrajectories &coeffs,
                        const Eigen::MatrixXd &trial, std::size_t start);

} // namespace tfcgc
