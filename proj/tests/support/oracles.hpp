#pragma once

// Dense reference computations used by the tests. These deliberately share no
// code with the library: full sorts instead of windows, Householder QR instead
// of Gram-Schmidt, textbook recursive B-splines, explicit smoother matrices.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "semiiv/smoothers.hpp"

namespace oracle {

inline double kernel(semiiv::Kernel k, double u) {
  if (u > 1.0) return 0.0;
  if (k == semiiv::Kernel::Uniform) return 1.0;
  const double t = 1.0 - u * u * u;
  return t * t * t;
}

inline std::size_t neighbours(double span, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(span * static_cast<double>(n) - 1e-9));
}

// Monomials of total degree <= deg in `dims` variables, graded order:
// 1 | u | u^2  or  1 | u v | u^2 uv v^2.
inline std::vector<double> monomials(const std::vector<double>& p, int deg) {
  std::vector<double> out{1.0};
  if (p.size() == 1) {
    for (int d = 1; d <= deg; ++d) out.push_back(std::pow(p[0], d));
  } else {
    for (int d = 1; d <= deg; ++d) {
      for (int a = d; a >= 0; --a) out.push_back(std::pow(p[0], a) * std::pow(p[1], d - a));
    }
  }
  return out;
}

// Weighted least-squares local polynomial prediction at `q` from points
// `pts` (each a 1- or 2-vector, already on the distance scale).
inline double local_fit(const std::vector<std::vector<double>>& pts, std::span<const double> y,
                        const std::vector<double>& q, const semiiv::SmootherConfig& cfg) {
  const std::size_t n = pts.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) s += (pts[i][a] - q[a]) * (pts[i][a] - q[a]);
    dist[i] = std::sqrt(s);
  }
  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const double h = sorted[neighbours(cfg.span, n) - 1];
  if (!(h > 0.0)) throw std::runtime_error("oracle: zero bandwidth");

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] <= h && kernel(cfg.kernel, dist[i] / h) > 0.0) rows.push_back(i);
  }
  const std::size_t p = monomials(q, cfg.degree).size();
  Eigen::MatrixXd A(rows.size(), p);
  Eigen::VectorXd b(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    std::vector<double> local(q.size());
    for (std::size_t a = 0; a < q.size(); ++a) local[a] = (pts[i][a] - q[a]) / h;
    const double w = std::sqrt(kernel(cfg.kernel, dist[i] / h));
    const auto m = monomials(local, cfg.degree);
    for (std::size_t c = 0; c < p; ++c) A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w * m[c];
    b(static_cast<Eigen::Index>(r)) = w * y[i];
  }
  const Eigen::VectorXd beta = A.householderQr().solve(b);
  return beta(0);
}

inline std::vector<std::vector<double>> points(std::span<const double> x) {
  std::vector<std::vector<double>> out;
  for (double v : x) out.push_back({v});
  return out;
}

inline void standardise(std::span<const double> x, double& mean, double& sd) {
  mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline std::vector<std::vector<double>> points(std::span<const double> x1, std::span<const double> x2) {
  double m1, s1, m2, s2;
  standardise(x1, m1, s1);
  standardise(x2, m2, s2);
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < x1.size(); ++i) out.push_back({(x1[i] - m1) / s1, (x2[i] - m2) / s2});
  return out;
}

inline double univariate(std::span<const double> x, std::span<const double> y, double q,
                         const semiiv::SmootherConfig& cfg) {
  return local_fit(points(x), y, {q}, cfg);
}

inline double surface(std::span<const double> x1, std::span<const double> x2, std::span<const double> y, double q1,
                      double q2, const semiiv::SmootherConfig& cfg) {
  double m1, s1, m2, s2;
  standardise(x1, m1, s1);
  standardise(x2, m2, s2);
  return local_fit(points(x1, x2), y, {(q1 - m1) / s1, (q2 - m2) / s2}, cfg);
}

// Explicit n x n smoother matrix: column j is the fit to the unit response e_j.
inline Eigen::MatrixXd smoother_matrix(const std::vector<std::vector<double>>& pts,
                                       const semiiv::SmootherConfig& cfg) {
  const std::size_t n = pts.size();
  Eigen::MatrixXd L(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e.assign(n, 0.0);
    e[j] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = local_fit(pts, e, pts[i], cfg);
    }
  }
  return L;
}

// Textbook Cox-de Boor recursion, with the last function closed at the right end.
inline double bspline(const std::vector<double>& t, int i, int k, double x) {
  if (k == 0) {
    if (t[i] <= x && x < t[i + 1]) return 1.0;
    // right end of the domain belongs to the last non-degenerate interval
    if (x == t.back() && t[i] < t[i + 1] && t[i + 1] == t.back()) return 1.0;
    return 0.0;
  }
  double out = 0.0;
  if (t[i + k] > t[i]) out += (x - t[i]) / (t[i + k] - t[i]) * bspline(t, i, k - 1, x);
  if (t[i + k + 1] > t[i + 1]) out += (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * bspline(t, i + 1, k - 1, x);
  return out;
}

// Clamped knots with interior knots at type-7 quantiles j / (size - degree).
inline std::vector<double> knots(std::span<const double> sample, int size) {
  const int deg = std::min(3, size - 1);
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  std::vector<double> t(static_cast<std::size_t>(deg + 1), s.front());
  const int interior = size - deg - 1;
  for (int j = 1; j <= interior; ++j) {
    const double h = (static_cast<double>(s.size()) - 1.0) * j / (interior + 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    t.push_back(s[lo] + (h - std::floor(h)) * (s[hi] - s[lo]));
  }
  t.insert(t.end(), static_cast<std::size_t>(deg + 1), s.back());
  return t;
}

// Least-squares additive fit on the raw design [all B_u, all B_v but the last]:
// the B_u block sums to one and so carries the intercept.
inline std::vector<double> additive_fit(std::span<const double> u, std::span<const double> v,
                                        std::span<const double> y, int size) {
  const int deg = std::min(3, size - 1);
  const auto tu = knots(u, size);
  const auto tv = knots(v, size);
  const std::size_t n = y.size();
  Eigen::MatrixXd A(n, 2 * size - 1);
  Eigen::VectorXd b(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto R = static_cast<Eigen::Index>(r);
    for (int c = 0; c < size; ++c) A(R, c) = bspline(tu, c, deg, u[r]);
    for (int c = 0; c + 1 < size; ++c) A(R, size + c) = bspline(tv, c, deg, v[r]);
    b(R) = y[r];
  }
  const Eigen::VectorXd beta = A.colPivHouseholderQr().solve(b);
  const Eigen::VectorXd f = A * beta;
  return {f.data(), f.data() + f.size()};
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

inline double max_rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace oracle
