#include <algorithm>
#include <cmath>
#include <numeric>

#include "semiiv/error.hpp"
#include "semiiv/smoothers.hpp"

namespace semiiv::reference {

namespace {

// Full-sort neighbourhood: every point within the k-th smallest distance.
template <typename DistanceFn, typename CoordFn>
double one_query(std::size_t n, std::size_t self, const SmootherConfig& cfg, int dims, std::span<const double> y,
                 DistanceFn&& distance, CoordFn&& local_coords, double& leverage) {
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) d[j] = distance(j);
  std::vector<double> sorted = d;
  std::sort(sorted.begin(), sorted.end());
  const double h = sorted[cfg.neighbors(n) - 1];
  if (!(h > 0.0)) throw SingularFitError("degenerate neighborhood in reference smoother");

  std::vector<std::size_t> window;
  std::vector<double> coords, kw;
  for (std::size_t j = 0; j < n; ++j) {
    if (d[j] <= h) {
      window.push_back(j);
      local_coords(j, h, coords);
      kw.push_back(detail::kernel_value(cfg.kernel, d[j] / h));
    }
  }
  std::vector<double> hat(window.size());
  if (!detail::local_hat_weights(coords, dims, cfg.degree, kw, hat)) {
    throw SingularFitError("constant term unsupported in reference smoother");
  }
  double fit = 0.0;
  leverage = 0.0;
  for (std::size_t j = 0; j < window.size(); ++j) {
    fit += hat[j] * y[window[j]];
    if (window[j] == self) leverage = hat[j];
  }
  return fit;
}

}  // namespace

SmoothResult smooth_univariate_serial(std::span<const double> x, std::span<const double> y, const SmootherConfig& cfg) {
  if (x.size() != y.size()) throw InputError("length mismatch");
  cfg.validate(x.size(), 1);
  const std::size_t n = x.size();
  SmoothResult out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.fitted[i] = one_query(
        n, i, cfg, 1, y, [&](std::size_t j) { return std::abs(x[j] - x[i]); },
        [&](std::size_t j, double h, std::vector<double>& c) { c.push_back((x[j] - x[i]) / h); }, out.leverage[i]);
  }
  return out;
}

SmoothResult smooth_surface_serial(std::span<const double> x1, std::span<const double> x2, std::span<const double> y,
                                   const SmootherConfig& cfg) {
  if (x1.size() != y.size() || x2.size() != y.size()) throw InputError("length mismatch");
  cfg.validate(y.size(), 2);
  const std::size_t n = y.size();
  auto standardize = [n](std::span<const double> x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = (x[i] - mean) / sd;
    return s;
  };
  const auto u = standardize(x1);
  const auto v = standardize(x2);
  SmoothResult out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.fitted[i] = one_query(
        n, i, cfg, 2, y,
        [&](std::size_t j) { return std::sqrt((u[j] - u[i]) * (u[j] - u[i]) + (v[j] - v[i]) * (v[j] - v[i])); },
        [&](std::size_t j, double h, std::vector<double>& c) {
          c.push_back((u[j] - u[i]) / h);
          c.push_back((v[j] - v[i]) / h);
        },
        out.leverage[i]);
  }
  return out;
}

}  // namespace semiiv::reference
