#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semiiv {

enum class Kernel { Tricube, Uniform };

std::string_view to_string(Kernel kernel);
Kernel parse_kernel(std::string_view name);

/// Settings for local polynomial regression.
///
/// Each local fit uses the k = ceil(span * n) nearest training points. The
/// bandwidth at a query is the distance to the k-th nearest point; every point
/// within that distance is in the window and is weighted by kernel(d / h). With
/// the tricube kernel the points at exactly distance h get weight zero.
struct SmootherConfig {
  int degree = 2;
  double span = 0.75;
  Kernel kernel = Kernel::Tricube;

  // Number of local polynomial terms for a fit in `dims` predictors.
  [[nodiscard]] std::size_t basis_size(int dims) const;
  [[nodiscard]] std::size_t neighbors(std::size_t n) const;
  // Throws InputError when the config is invalid or too small for n points.
  void validate(std::size_t n, int dims) const;
};

// Relative tolerance below which a local basis column is treated as lying in
// the span of the columns before it; that column and all later ones are dropped.
inline constexpr double kLocalRankTolerance = 1e-10;

/// One row of a linear smoother: the prediction is sum(weights[j] * y[index[j]]).
struct SmootherRow {
  std::vector<std::uint32_t> index;
  std::vector<double> weight;
};

namespace detail {

// Neighbour search and local solve for one predictor. Query points are given
// in original units.
class UnivariateDesign {
 public:
  UnivariateDesign(std::span<const double> x, const SmootherConfig& cfg);

  [[nodiscard]] std::size_t size() const { return sorted_x_.size(); }
  [[nodiscard]] const SmootherConfig& config() const { return cfg_; }
  // Fills `row` with the hat weights of the local fit at q.
  void row_at(double q, SmootherRow& row) const;

 private:
  SmootherConfig cfg_;
  std::size_t k_;
  std::vector<double> sorted_x_;
  std::vector<std::uint32_t> order_;
};

// Neighbour search and local solve for two predictors, standardized to unit
// sample standard deviation before distances are taken.
class SurfaceDesign {
 public:
  SurfaceDesign(std::span<const double> x1, std::span<const double> x2, const SmootherConfig& cfg);

  [[nodiscard]] std::size_t size() const { return u_.size(); }
  [[nodiscard]] const SmootherConfig& config() const { return cfg_; }
  void row_at(double q1, double q2, SmootherRow& row) const;

 private:
  SmootherConfig cfg_;
  std::size_t k_;
  double mean1_, sd1_, mean2_, sd2_;
  std::vector<double> u_, v_;
};

// Weighted local polynomial solve. `coords` holds `dims` local coordinates per
// window point (already divided by the bandwidth), `kernel_weight` the kernel
// weights. Writes the hat weights of the prediction at the local origin into
// `hat`; returns false when even the constant term has no support.
[[nodiscard]] bool local_hat_weights(std::span<const double> coords, int dims, int degree,
                                     std::span<const double> kernel_weight, std::span<double> hat);

double kernel_value(Kernel kernel, double u);

}  // namespace detail

/// Local polynomial fit in one predictor.
class UnivariateFit {
 public:
  UnivariateFit(std::span<const double> x, std::span<const double> y, const SmootherConfig& cfg);

  [[nodiscard]] std::span<const double> x() const { return x_; }
  [[nodiscard]] std::span<const double> y() const { return y_; }
  [[nodiscard]] std::span<const double> fitted() const { return fitted_; }
  [[nodiscard]] std::span<const double> residuals() const { return residuals_; }
  [[nodiscard]] double effective_df() const { return effective_df_; }
  [[nodiscard]] const SmootherConfig& config() const { return design_.config(); }
  [[nodiscard]] std::size_t size() const { return x_.size(); }

  [[nodiscard]] double predict(double q) const;
  [[nodiscard]] std::vector<double> predict(std::span<const double> q) const;

 private:
  std::vector<double> x_, y_, fitted_, residuals_;
  double effective_df_ = 0.0;
  detail::UnivariateDesign design_;
};

/// Local polynomial fit in two predictors.
class SurfaceFit {
 public:
  SurfaceFit(std::span<const double> x1, std::span<const double> x2, std::span<const double> y,
             const SmootherConfig& cfg);

  [[nodiscard]] std::span<const double> x1() const { return x1_; }
  [[nodiscard]] std::span<const double> x2() const { return x2_; }
  [[nodiscard]] std::span<const double> y() const { return y_; }
  [[nodiscard]] std::span<const double> fitted() const { return fitted_; }
  [[nodiscard]] std::span<const double> residuals() const { return residuals_; }
  [[nodiscard]] double effective_df() const { return effective_df_; }
  [[nodiscard]] const SmootherConfig& config() const { return design_.config(); }
  [[nodiscard]] std::size_t size() const { return y_.size(); }

  [[nodiscard]] double predict(double q1, double q2) const;

 private:
  std::vector<double> x1_, x2_, y_, fitted_, residuals_;
  double effective_df_ = 0.0;
  detail::SurfaceDesign design_;
};

UnivariateFit fit_univariate(std::span<const double> x, std::span<const double> y, const SmootherConfig& cfg);
SurfaceFit fit_surface(std::span<const double> x1, std::span<const double> x2, std::span<const double> y,
                       const SmootherConfig& cfg);

inline double effective_df(const UnivariateFit& fit) { return fit.effective_df(); }
inline double effective_df(const SurfaceFit& fit) { return fit.effective_df(); }

/// The smoother at the training points as an explicit sparse linear map.
///
/// Built once per predictor set; applying it to a new response costs one
/// sparse matrix-vector product. Backfitting and the residual bootstrap smooth
/// many responses against fixed predictors and use this.
class SmootherOperator {
 public:
  static SmootherOperator univariate(std::span<const double> x, const SmootherConfig& cfg);
  static SmootherOperator surface(std::span<const double> x1, std::span<const double> x2, const SmootherConfig& cfg);

  [[nodiscard]] std::size_t size() const { return row_start_.empty() ? 0 : row_start_.size() - 1; }
  [[nodiscard]] std::size_t nonzeros() const { return weight_.size(); }
  [[nodiscard]] std::vector<double> apply(std::span<const double> y) const;
  void apply(std::span<const double> y, std::span<double> out) const;
  [[nodiscard]] double trace() const { return trace_; }

 private:
  template <typename RowFn>
  static SmootherOperator build(std::size_t n, RowFn&& row_fn);

  std::vector<std::size_t> row_start_;
  std::vector<std::uint32_t> index_;
  std::vector<double> weight_;
  double trace_ = 0.0;
};

// Serial implementations kept as the reference for the OpenMP kernels above:
// brute-force neighbour search by full sort, one query at a time. Used by the
// tests and the benchmark only.
namespace reference {

struct SmoothResult {
  std::vector<double> fitted;
  std::vector<double> leverage;  // diagonal of the smoother matrix
};

SmoothResult smooth_univariate_serial(std::span<const double> x, std::span<const double> y, const SmootherConfig& cfg);
SmoothResult smooth_surface_serial(std::span<const double> x1, std::span<const double> x2, std::span<const double> y,
                                   const SmootherConfig& cfg);

}  // namespace reference

}  // namespace semiiv
