#pragma once

#include <span>
#include <vector>

namespace semiiv {

/// B-spline basis on the range of a sample, interior knots at equispaced
/// sample quantiles.
///
/// `size` basis functions of degree min(3, size - 1), so a basis of 3
/// functions is quadratic with no interior knot, 4 is cubic with none, and
/// every further function adds one interior knot. The functions sum to one on
/// [lower, upper].
class BSplineBasis {
 public:
  BSplineBasis(std::span<const double> sample, int size);

  [[nodiscard]] int size() const { return size_; }
  [[nodiscard]] int degree() const { return degree_; }
  [[nodiscard]] double lower() const { return knots_.front(); }
  [[nodiscard]] double upper() const { return knots_.back(); }
  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }

  // All `size()` basis values at x. Throws InputError outside [lower, upper].
  void evaluate(double x, std::span<double> out) const;
  [[nodiscard]] std::vector<double> evaluate(double x) const;

 private:
  int size_;
  int degree_;
  std::vector<double> knots_;  // full knot vector, boundary knots repeated degree + 1 times
};

}  // namespace semiiv
