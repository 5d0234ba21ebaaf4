#include "semiiv/smoothers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

#include <omp.h>

#include "semiiv/error.hpp"

namespace semiiv {

std::string_view to_string(Kernel kernel) {
  switch (kernel) {
    case Kernel::Tricube:
      return "tricube";
    case Kernel::Uniform:
      return "uniform";
  }
  return "unknown";
}

Kernel parse_kernel(std::string_view name) {
  if (name == "tricube") return Kernel::Tricube;
  if (name == "uniform") return Kernel::Uniform;
  throw InputError("unknown kernel '" + std::string(name) + "' (expected tricube or uniform)");
}

std::size_t SmootherConfig::basis_size(int dims) const {
  const auto d = static_cast<std::size_t>(std::max(degree, 0));
  return dims == 1 ? d + 1 : (d + 1) * (d + 2) / 2;
}

std::size_t SmootherConfig::neighbors(std::size_t n) const {
  const double raw = std::ceil(span * static_cast<double>(n) - 1e-9);
  const auto k = static_cast<std::size_t>(std::max(raw, 1.0));
  return std::min(k, n);
}

void SmootherConfig::validate(std::size_t n, int dims) const {
  if (degree < 0 || degree > 2) throw InputError("smoother degree must be 0, 1 or 2, got " + std::to_string(degree));
  if (!(span > 0.0 && span <= 1.0)) {
    std::ostringstream msg;
    msg << "smoother span must lie in (0, 1], got " << span;
    throw InputError(msg.str());
  }
  const std::size_t p = basis_size(dims);
  if (n < p) {
    throw InputError("need at least " + std::to_string(p) + " points for a degree-" + std::to_string(degree) +
                     " local fit, got " + std::to_string(n));
  }
  if (neighbors(n) < p) {
    std::ostringstream msg;
    msg << "span " << span << " gives " << neighbors(n) << " points per window, fewer than the " << p
        << " local basis terms";
    throw InputError(msg.str());
  }
}

namespace detail {

double kernel_value(Kernel kernel, double u) {
  if (u >= 1.0) return kernel == Kernel::Uniform && u == 1.0 ? 1.0 : 0.0;
  if (kernel == Kernel::Uniform) return 1.0;
  const double a = 1.0 - u * u * u;
  return a * a * a;
}

namespace {

// Value of local basis column c at one point.
inline double basis_value(int dims, int c, const double* p) {
  if (dims == 1) {
    double v = 1.0;
    for (int i = 0; i < c; ++i) v *= p[0];
    return v;
  }
  // 1, u, v, u^2, uv, v^2
  switch (c) {
    case 0:
      return 1.0;
    case 1:
      return p[0];
    case 2:
      return p[1];
    case 3:
      return p[0] * p[0];
    case 4:
      return p[0] * p[1];
    default:
      return p[1] * p[1];
  }
}

void check_inputs(std::span<const double> x, std::string_view name) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw InputError(std::string(name) + " has a non-finite value at row " + std::to_string(i));
    }
  }
}

void mean_sd(std::span<const double> x, double& mean, double& sd) {
  const double n = static_cast<double>(x.size());
  mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace

bool local_hat_weights(std::span<const double> coords, int dims, int degree, std::span<const double> kernel_weight,
                       std::span<double> hat) {
  const std::size_t m = kernel_weight.size();
  const int p = dims == 1 ? degree + 1 : (degree + 1) * (degree + 2) / 2;

  thread_local std::vector<double> sw, q, v;
  sw.resize(m);
  q.resize(m * static_cast<std::size_t>(p));
  v.resize(m);
  for (std::size_t j = 0; j < m; ++j) sw[j] = std::sqrt(kernel_weight[j]);

  // Thin QR of diag(sqrt(w)) * B by Gram-Schmidt with one reorthogonalization
  // pass; columns are processed in order and the first numerically dependent
  // column ends the basis.
  double r[6][6] = {};
  int kept = 0;
  for (int c = 0; c < p; ++c) {
    double norm0 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      v[j] = sw[j] * basis_value(dims, c, &coords[j * static_cast<std::size_t>(dims)]);
      norm0 += v[j] * v[j];
    }
    norm0 = std::sqrt(norm0);
    if (norm0 == 0.0) break;
    for (int pass = 0; pass < 2; ++pass) {
      for (int k = 0; k < kept; ++k) {
        const double* qk = &q[static_cast<std::size_t>(k) * m];
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) dot += qk[j] * v[j];
        r[k][c] += dot;
        for (std::size_t j = 0; j < m; ++j) v[j] -= dot * qk[j];
      }
    }
    double norm = 0.0;
    for (std::size_t j = 0; j < m; ++j) norm += v[j] * v[j];
    norm = std::sqrt(norm);
    if (norm <= kLocalRankTolerance * norm0) break;
    r[c][c] = norm;
    double* qc = &q[static_cast<std::size_t>(c) * m];
    for (std::size_t j = 0; j < m; ++j) qc[j] = v[j] / norm;
    ++kept;
  }
  if (kept == 0) return false;

  // Prediction at the origin is e0' R^-1 Q' sqrt(W) y, so the hat weights are
  // sqrt(W) Q a with R' a = e0.
  double a[6] = {};
  a[0] = 1.0 / r[0][0];
  for (int i = 1; i < kept; ++i) {
    double s = 0.0;
    for (int k = 0; k < i; ++k) s += r[k][i] * a[k];
    a[i] = -s / r[i][i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (int i = 0; i < kept; ++i) s += q[static_cast<std::size_t>(i) * m + j] * a[i];
    hat[j] = sw[j] * s;
  }
  return true;
}

UnivariateDesign::UnivariateDesign(std::span<const double> x, const SmootherConfig& cfg) : cfg_(cfg) {
  check_inputs(x, "predictor");
  cfg_.validate(x.size(), 1);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) {
    throw SingularFitError("degenerate window at x = " + std::to_string(*lo) +
                           ": all predictor values are equal (constant predictor)");
  }
  if (x.size() > std::numeric_limits<std::uint32_t>::max()) throw InputError("too many rows");
  k_ = cfg_.neighbors(x.size());
  order_.resize(x.size());
  std::iota(order_.begin(), order_.end(), 0u);
  std::stable_sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) { return x[a] < x[b]; });
  sorted_x_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sorted_x_[i] = x[order_[i]];
}

void UnivariateDesign::row_at(double q, SmootherRow& row) const {
  const std::size_t n = sorted_x_.size();
  std::size_t hi = static_cast<std::size_t>(std::lower_bound(sorted_x_.begin(), sorted_x_.end(), q) - sorted_x_.begin());
  std::size_t lo = hi;
  // Grow [lo, hi) to the k nearest points.
  while (hi - lo < k_) {
    if (lo == 0) {
      ++hi;
    } else if (hi == n) {
      --lo;
    } else if (q - sorted_x_[lo - 1] <= sorted_x_[hi] - q) {
      --lo;
    } else {
      ++hi;
    }
  }
  const double h = std::max(q - sorted_x_[lo], sorted_x_[hi - 1] - q);
  if (!(h > 0.0)) {
    std::ostringstream msg;
    msg << "degenerate neighborhood at x = " << q << ": all " << k_ << " nearest points share that x value";
    throw SingularFitError(msg.str());
  }
  while (lo > 0 && q - sorted_x_[lo - 1] <= h) --lo;
  while (hi < n && sorted_x_[hi] - q <= h) ++hi;

  const std::size_t m = hi - lo;
  thread_local std::vector<double> coords, kw;
  coords.resize(m);
  kw.resize(m);
  row.index.resize(m);
  row.weight.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = sorted_x_[lo + j] - q;
    coords[j] = d / h;
    kw[j] = kernel_value(cfg_.kernel, std::abs(d) / h);
    row.index[j] = order_[lo + j];
  }
  if (!local_hat_weights(coords, 1, cfg_.degree, kw, row.weight)) {
    std::ostringstream msg;
    msg << "local fit at x = " << q << " (window [" << sorted_x_[lo] << ", " << sorted_x_[hi - 1]
        << "]): all kernel weights are zero, constant term unsupported";
    throw SingularFitError(msg.str());
  }
}

SurfaceDesign::SurfaceDesign(std::span<const double> x1, std::span<const double> x2, const SmootherConfig& cfg)
    : cfg_(cfg) {
  if (x1.size() != x2.size()) throw InputError("surface predictors have different lengths");
  check_inputs(x1, "first predictor");
  check_inputs(x2, "second predictor");
  cfg_.validate(x1.size(), 2);
  if (x1.size() > std::numeric_limits<std::uint32_t>::max()) throw InputError("too many rows");
  mean_sd(x1, mean1_, sd1_);
  mean_sd(x2, mean2_, sd2_);
  if (!(sd1_ > 0.0)) throw InputError("first surface predictor is constant");
  if (!(sd2_ > 0.0)) throw InputError("second surface predictor is constant");
  const std::size_t n = x1.size();
  double cov = 0.0;
  u_.resize(n);
  v_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    u_[i] = (x1[i] - mean1_) / sd1_;
    v_[i] = (x2[i] - mean2_) / sd2_;
    cov += u_[i] * v_[i];
  }
  const double corr = cov / static_cast<double>(n - 1);
  if (std::abs(corr) > 1.0 - 1e-10) {
    throw InputError("surface predictors are collinear (|correlation| = 1); the surface is not identifiable");
  }
  k_ = cfg_.neighbors(n);
}

void SurfaceDesign::row_at(double q1, double q2, SmootherRow& row) const {
  const std::size_t n = u_.size();
  const double qu = (q1 - mean1_) / sd1_;
  const double qv = (q2 - mean2_) / sd2_;

  thread_local std::vector<double> d2, scratch, coords, kw;
  d2.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double du = u_[j] - qu;
    const double dv = v_[j] - qv;
    d2[j] = du * du + dv * dv;
  }
  scratch.assign(d2.begin(), d2.end());
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k_ - 1), scratch.end());
  const double h2 = scratch[k_ - 1];
  if (!(h2 > 0.0)) {
    std::ostringstream msg;
    msg << "degenerate neighborhood at (" << q1 << ", " << q2 << "): all " << k_ << " nearest points coincide";
    throw SingularFitError(msg.str());
  }
  const double h = std::sqrt(h2);

  row.index.clear();
  coords.clear();
  kw.clear();
  for (std::size_t j = 0; j < n; ++j) {
    if (d2[j] <= h2) {
      row.index.push_back(static_cast<std::uint32_t>(j));
      coords.push_back((u_[j] - qu) / h);
      coords.push_back((v_[j] - qv) / h);
      kw.push_back(kernel_value(cfg_.kernel, std::sqrt(d2[j]) / h));
    }
  }
  row.weight.resize(row.index.size());
  if (!local_hat_weights(coords, 2, cfg_.degree, kw, row.weight)) {
    std::ostringstream msg;
    msg << "local fit at (" << q1 << ", " << q2 << ") with " << row.index.size()
        << " window points: all kernel weights are zero, constant term unsupported";
    throw SingularFitError(msg.str());
  }
}

}  // namespace detail

namespace {

void check_response(std::span<const double> y, std::size_t n) {
  if (y.size() != n) {
    throw InputError("response has " + std::to_string(y.size()) + " rows, predictors have " + std::to_string(n));
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw InputError("response has a non-finite value at row " + std::to_string(i));
  }
}

// Runs body(i, row) for every i in [0, n) in parallel and rethrows the first
// exception raised by any iteration.
template <typename Body>
void parallel_rows(std::size_t n, Body&& body) {
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::mutex failure_mutex;
#pragma omp parallel
  {
    SmootherRow row;
#pragma omp for schedule(dynamic, 32)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      try {
        body(static_cast<std::size_t>(i), row);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

double self_weight(const SmootherRow& row, std::size_t i) {
  for (std::size_t j = 0; j < row.index.size(); ++j) {
    if (row.index[j] == i) return row.weight[j];
  }
  return 0.0;
}

double dot(const SmootherRow& row, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t j = 0; j < row.index.size(); ++j) s += row.weight[j] * y[row.index[j]];
  return s;
}

}  // namespace

UnivariateFit::UnivariateFit(std::span<const double> x, std::span<const double> y, const SmootherConfig& cfg)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()), design_(x, cfg) {
  check_response(y, x.size());
  const std::size_t n = x_.size();
  fitted_.resize(n);
  residuals_.resize(n);
  std::vector<double> leverage(n);
  parallel_rows(n, [&](std::size_t i, SmootherRow& row) {
    design_.row_at(x_[i], row);
    fitted_[i] = dot(row, y_);
    leverage[i] = self_weight(row, i);
  });
  for (std::size_t i = 0; i < n; ++i) residuals_[i] = y_[i] - fitted_[i];
  effective_df_ = std::accumulate(leverage.begin(), leverage.end(), 0.0);
}

double UnivariateFit::predict(double q) const {
  if (!std::isfinite(q)) throw InputError("prediction point is not finite");
  SmootherRow row;
  design_.row_at(q, row);
  return dot(row, y_);
}

std::vector<double> UnivariateFit::predict(std::span<const double> q) const {
  std::vector<double> out(q.size());
  parallel_rows(q.size(), [&](std::size_t i, SmootherRow& row) {
    if (!std::isfinite(q[i])) throw InputError("prediction point is not finite");
    design_.row_at(q[i], row);
    out[i] = dot(row, y_);
  });
  return out;
}

SurfaceFit::SurfaceFit(std::span<const double> x1, std::span<const double> x2, std::span<const double> y,
                       const SmootherConfig& cfg)
    : x1_(x1.begin(), x1.end()), x2_(x2.begin(), x2.end()), y_(y.begin(), y.end()), design_(x1, x2, cfg) {
  check_response(y, x1.size());
  const std::size_t n = y_.size();
  fitted_.resize(n);
  residuals_.resize(n);
  std::vector<double> leverage(n);
  parallel_rows(n, [&](std::size_t i, SmootherRow& row) {
    design_.row_at(x1_[i], x2_[i], row);
    fitted_[i] = dot(row, y_);
    leverage[i] = self_weight(row, i);
  });
  for (std::size_t i = 0; i < n; ++i) residuals_[i] = y_[i] - fitted_[i];
  effective_df_ = std::accumulate(leverage.begin(), leverage.end(), 0.0);
}

double SurfaceFit::predict(double q1, double q2) const {
  if (!std::isfinite(q1) || !std::isfinite(q2)) throw InputError("prediction point is not finite");
  SmootherRow row;
  design_.row_at(q1, q2, row);
  return dot(row, y_);
}

UnivariateFit fit_univariate(std::span<const double> x, std::span<const double> y, const SmootherConfig& cfg) {
  if (x.size() != y.size()) {
    throw InputError("x has " + std::to_string(x.size()) + " rows, y has " + std::to_string(y.size()));
  }
  return UnivariateFit(x, y, cfg);
}

SurfaceFit fit_surface(std::span<const double> x1, std::span<const double> x2, std::span<const double> y,
                       const SmootherConfig& cfg) {
  if (x1.size() != x2.size() || x1.size() != y.size()) throw InputError("surface inputs have different lengths");
  return SurfaceFit(x1, x2, y, cfg);
}

template <typename RowFn>
SmootherOperator SmootherOperator::build(std::size_t n, RowFn&& row_fn) {
  std::vector<SmootherRow> rows(n);
  parallel_rows(n, [&](std::size_t i, SmootherRow&) { row_fn(i, rows[i]); });
  SmootherOperator op;
  std::size_t total = 0;
  for (const auto& r : rows) total += r.index.size();
  op.row_start_.reserve(n + 1);
  op.index_.reserve(total);
  op.weight_.reserve(total);
  op.row_start_.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    op.trace_ += self_weight(rows[i], i);
    op.index_.insert(op.index_.end(), rows[i].index.begin(), rows[i].index.end());
    op.weight_.insert(op.weight_.end(), rows[i].weight.begin(), rows[i].weight.end());
    op.row_start_.push_back(op.index_.size());
    SmootherRow().index.swap(rows[i].index);
    SmootherRow().weight.swap(rows[i].weight);
  }
  return op;
}

SmootherOperator SmootherOperator::univariate(std::span<const double> x, const SmootherConfig& cfg) {
  detail::UnivariateDesign design(x, cfg);
  return build(x.size(), [&](std::size_t i, SmootherRow& row) { design.row_at(x[i], row); });
}

SmootherOperator SmootherOperator::surface(std::span<const double> x1, std::span<const double> x2,
                                           const SmootherConfig& cfg) {
  detail::SurfaceDesign design(x1, x2, cfg);
  return build(x1.size(), [&](std::size_t i, SmootherRow& row) { design.row_at(x1[i], x2[i], row); });
}

void SmootherOperator::apply(std::span<const double> y, std::span<double> out) const {
  const std::size_t n = size();
  if (y.size() != n || out.size() != n) throw InputError("operator size does not match response length");
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double s = 0.0;
    for (std::size_t j = row_start_[i]; j < row_start_[i + 1]; ++j) s += weight_[j] * y[index_[j]];
    out[i] = s;
  }
}

std::vector<double> SmootherOperator::apply(std::span<const double> y) const {
  std::vector<double> out(size());
  apply(y, out);
  return out;
}

}  // namespace semiiv
