#include "semiiv/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semiiv/error.hpp"

namespace semiiv {

namespace {

// Linear-interpolation sample quantile of a sorted sample.
double quantile(const std::vector<double>& sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BSplineBasis::BSplineBasis(std::span<const double> sample, int size) : size_(size), degree_(std::min(3, size - 1)) {
  if (size < 3) throw InputError("spline basis size must be at least 3, got " + std::to_string(size));
  if (sample.empty()) throw InputError("spline basis needs a non-empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  if (!std::isfinite(sorted.front()) || !std::isfinite(sorted.back())) {
    throw InputError("spline basis sample has non-finite values");
  }
  if (sorted.front() == sorted.back()) throw InputError("spline basis predictor is constant");

  const int interior = size - degree_ - 1;
  knots_.assign(static_cast<std::size_t>(degree_ + 1), sorted.front());
  for (int j = 1; j <= interior; ++j) {
    knots_.push_back(quantile(sorted, static_cast<double>(j) / static_cast<double>(interior + 1)));
  }
  knots_.insert(knots_.end(), static_cast<std::size_t>(degree_ + 1), sorted.back());
}

void BSplineBasis::evaluate(double x, std::span<double> out) const {
  if (!(x >= lower() && x <= upper())) {
    std::ostringstream msg;
    msg << "spline evaluation at " << x << " outside the fitted range [" << lower() << ", " << upper() << "]";
    throw InputError(msg.str());
  }
  std::fill(out.begin(), out.end(), 0.0);

  // Knot span i with knots[i] <= x < knots[i+1]; the right end belongs to the last span.
  const int p = degree_;
  int span = size_ - 1;
  if (x < knots_[static_cast<std::size_t>(size_)]) {
    span = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
    span = std::clamp(span, p, size_ - 1);
  }

  // Cox-de Boor triangle for the p + 1 non-zero functions.
  double left[4], right[4], values[4];
  values[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots_[static_cast<std::size_t>(span + 1 - j)];
    right[j] = knots_[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? values[r] / denom : 0.0;
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
  for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(span - p + j)] = values[j];
}

std::vector<double> BSplineBasis::evaluate(double x) const {
  std::vector<double> out(static_cast<std::size_t>(size_));
  evaluate(x, out);
  return out;
}

}  // namespace semiiv
