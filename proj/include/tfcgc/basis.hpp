#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tfcgc {

/// Cardinal B-spline of order r (degree r-1) with knots 0, 1, ..., r.
/// Zero outside [0, r); evaluated by the Cox-de Boor recursion.
double eval_bspline(int order, double u);

/// v-th derivative of the cardinal B-spline of order r, from the lower-order
/// difference identity B_r' = B_{r-1}(u) - B_{r-1}(u-1) applied v times.
/// Returns 0 when v >= r.
double eval_bspline_derivative(int order, int derivative, double u);

/// One dilated and shifted B-spline wavelet 2^{j/2} B_r(2^j u - k).
struct WaveletAtom {
  int order = 1;
  int scale = 0;
  int shift = 0;

  bool operator==(const WaveletAtom &) const = default;

  /// Value at normalized time u in [0, 1].
  double operator()(double u) const;

  /// Support [lo, hi] in normalized time.
  double support_begin() const;
  double support_end() const;
};

/// Atom evaluated at sample index t of an N-sample record (u = t / N).
double eval_atom(const WaveletAtom &atom, std::size_t t, std::size_t n);

/// Union of B-spline wavelet families over several orders at one scale.
/// Atoms are ordered by order, then by shift.
class BasisDictionary {
public:
  BasisDictionary() = default;
  BasisDictionary(std::vector<int> orders, int scale);

  const std::vector<WaveletAtom> &atoms() const { return atoms_; }
  const std::vector<int> &orders() const { return orders_; }
  int scale() const { return scale_; }
  std::size_t size() const { return atoms_.size(); }
  const WaveletAtom &operator[](std::size_t m) const { return atoms_[m]; }

  /// N x M table of atom values at t = 1..N (row t-1).
  std::vector<double> sample(std::size_t n) const;

private:
  std::vector<int> orders_;
  int scale_ = 0;
  std::vector<WaveletAtom> atoms_;
};

BasisDictionary build_dictionary(std::span<const int> orders, int scale);

/// Sampled, normalized derivatives of the order-(d+1) B-spline test
/// function. Entry v-1 of `derivatives` holds the v-th derivative averaged
/// over each of the n0 uniform cells spanning [0, d+1], scaled to unit
/// Euclidean norm. A bank with derivative_order == 0 carries no
/// derivatives and turns modulation into a no-op.
struct TestFunctionBank {
  int derivative_order = 0;
  std::size_t support = 0;
  std::vector<double> window;                   // omega at cell midpoints
  std::vector<std::vector<double>> derivatives; // normalized, one per order
};

TestFunctionBank build_test_bank(int derivative_order, std::size_t support);

} // namespace tfcgc
