#include "tfcgc/basis.hpp"

#include "tfcgc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace tfcgc {

namespace {

constexpr int kMaxOrder = 32;

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i)
    c = c * (n - k + i) / i;
  return c;
}

} // namespace

double eval_bspline(int order, double u) {
  require(order >= 1, ErrorKind::InvalidArgument,
          "B-spline order must be >= 1, got " + std::to_string(order));
  require(order <= kMaxOrder, ErrorKind::InvalidArgument,
          "B-spline order too large: " + std::to_string(order));
  if (!(u >= 0.0) || u >= static_cast<double>(order))
    return 0.0;

  // values[i] holds B_k(u - i) for the current order k; only shifts
  // i = 0..order-k can be nonzero.
  std::array<double, kMaxOrder + 1> values{};
  for (int i = 0; i < order; ++i)
    values[i] = (u >= i && u < i + 1) ? 1.0 : 0.0;
  for (int k = 2; k <= order; ++k) {
    for (int i = 0; i <= order - k; ++i) {
      const double s = u - i;
      values[i] = (s * values[i] + (k - s) * values[i + 1]) / (k - 1);
    }
  }
  return values[0];
}

double eval_bspline_derivative(int order, int derivative, double u) {
  require(order >= 1, ErrorKind::InvalidArgument,
          "B-spline order must be >= 1, got " + std::to_string(order));
  require(derivative >= 0, ErrorKind::InvalidArgument,
          "derivative order must be >= 0");
  if (derivative == 0)
    return eval_bspline(order, u);
  if (derivative >= order)
    return 0.0;
  double sum = 0.0;
  for (int i = 0; i <= derivative; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    sum += sign * binomial(derivative, i) *
           eval_bspline(order - derivative, u - i);
  }
  return sum;
}

double WaveletAtom::operator()(double u) const {
  const double dilation = std::ldexp(1.0, scale);
  return std::sqrt(dilation) * eval_bspline(order, dilation * u - shift);
}

double WaveletAtom::support_begin() const {
  return std::ldexp(static_cast<double>(shift), -scale);
}

double WaveletAtom::support_end() const {
  return std::ldexp(static_cast<double>(shift + order), -scale);
}

double eval_atom(const WaveletAtom &atom, std::size_t t, std::size_t n) {
  require(n > 0 && t >= 1 && t <= n, ErrorKind::InvalidArgument,
          "sample index out of range");
  return atom(static_cast<double>(t) / static_cast<double>(n));
}

BasisDictionary::BasisDictionary(std::vector<int> orders, int scale)
    : orders_(std::move(orders)), scale_(scale) {
  require(!orders_.empty(), ErrorKind::InvalidArgument,
          "dictionary needs at least one order");
  require(scale_ >= 0 && scale_ < 20, ErrorKind::InvalidArgument,
          "dictionary scale out of range");
  std::sort(orders_.begin(), orders_.end());
  orders_.erase(std::unique(orders_.begin(), orders_.end()), orders_.end());
  const int cells = 1 << scale_;
  for (int r : orders_) {
    require(r >= 1 && r <= kMaxOrder, ErrorKind::InvalidArgument,
            "invalid B-spline order " + std::to_string(r));
    // Gamma_r = { k : -r <= k <= 2^j - 1 }
    for (int k = -r; k <= cells - 1; ++k)
      atoms_.push_back({r, scale_, k});
  }
}

std::vector<double> BasisDictionary::sample(std::size_t n) const {
  std::vector<double> table(n * atoms_.size());
  for (std::size_t t = 1; t <= n; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(n);
    for (std::size_t m = 0; m < atoms_.size(); ++m)
      table[(t - 1) * atoms_.size() + m] = atoms_[m](u);
  }
  return table;
}

BasisDictionary build_dictionary(std::span<const int> orders, int scale) {
  return BasisDictionary(std::vector<int>(orders.begin(), orders.end()),
                         scale);
}

TestFunctionBank build_test_bank(int derivative_order, std::size_t support) {
  require(derivative_order >= 1, ErrorKind::InvalidArgument,
          "test-function derivative order must be >= 1");
  require(support >= static_cast<std::size_t>(derivative_order) + 2,
          ErrorKind::InvalidArgument,
          "test-function support of " + std::to_string(support) +
              " samples cannot resolve derivative order " +
              std::to_string(derivative_order));

  const int order = derivative_order + 1;
  const double width = static_cast<double>(order) / support;

  TestFunctionBank bank;
  bank.derivative_order = derivative_order;
  bank.support = support;
  bank.window.resize(support);
  for (std::size_t q = 0; q < support; ++q)
    bank.window[q] = eval_bspline(order, (q + 0.5) * width);

  // Cell averages of the v-th derivative: the (v-1)-th derivative differenced
  // across each cell. The (v-1)-th derivative vanishes at both ends of the
  // support, so every sequence sums to zero.
  for (int v = 1; v <= derivative_order; ++v) {
    std::vector<double> seq(support);
    for (std::size_t q = 0; q < support; ++q) {
      const double lo = q * width;
      const double hi = (q + 1) * width;
      seq[q] = (eval_bspline_derivative(order, v - 1, hi) -
                eval_bspline_derivative(order, v - 1, lo)) /
               width;
    }
    const double norm =
        std::sqrt(std::inner_product(seq.begin(), seq.end(), seq.begin(), 0.0));
    require(norm > 0.0, ErrorKind::InvalidArgument,
            "test-function derivative vanishes on the sampled support");
    for (double &s : seq)
      s /= norm;
    bank.derivatives.push_back(std::move(seq));
  }
  return bank;
}

} // namespace tfcgc
