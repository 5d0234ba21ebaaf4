#include "semiiv/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>

#include "semiiv/error.hpp"
#include "semiiv/rng.hpp"

namespace semiiv {

namespace {

double population_variance(std::span<const double> y) {
  if (y.empty()) return 0.0;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(y.size());
}

double rss_floor(std::size_t n, double response_variance) {
  return 1e-12 * response_variance * static_cast<double>(n);
}

}  // namespace

FitScore make_fit_score(std::size_t n, double rss, double df, double response_variance) {
  if (n < 3) throw InputError("BIC needs at least 3 observations, got " + std::to_string(n));
  if (!(df >= 0.0)) throw InputError("effective degrees of freedom must be non-negative");
  if (!(rss >= 0.0)) throw InputError("residual sum of squares must be non-negative");
  if (rss <= rss_floor(n, response_variance)) {
    std::ostringstream msg;
    msg << "residual sum of squares " << rss << " is at the interpolation floor; BIC is unbounded";
    throw InterpolationError(msg.str());
  }
  const double nn = static_cast<double>(n);
  return {n, rss, df, nn * std::log(rss / nn) + df * std::log(nn)};
}

double residual_sum(std::span<const double> residuals) {
  double s = 0.0;
  for (double r : residuals) s += r * r;
  return s;
}

double residual_sum(const UnivariateFit& fit) { return residual_sum(fit.residuals()); }
double residual_sum(const SurfaceFit& fit) { return residual_sum(fit.residuals()); }
double residual_sum(const AdditiveFit& fit) { return residual_sum(fit.residuals); }

FitScore bic_score(std::span<const double> response, std::span<const double> residuals, double df) {
  if (response.size() != residuals.size()) throw InputError("response and residuals differ in length");
  return make_fit_score(response.size(), residual_sum(residuals), df, population_variance(response));
}

FitScore bic_score(const UnivariateFit& fit) { return bic_score(fit.y(), fit.residuals(), fit.effective_df()); }
FitScore bic_score(const SurfaceFit& fit) { return bic_score(fit.y(), fit.residuals(), fit.effective_df()); }
FitScore bic_score(const AdditiveFit& fit) { return bic_score(fit.response, fit.residuals, fit.effective_df); }

ModelScore model_score(std::span<const double> response, std::span<const double> residuals, double df) {
  ModelScore score;
  score.n = response.size();
  score.rss = residual_sum(residuals);
  score.df = df;
  try {
    score.bic = bic_score(response, residuals, df).bic;
  } catch (const InterpolationError&) {
    score.bic.reset();
  }
  return score;
}

bool better_score(const ModelScore& a, const ModelScore& b) {
  if (a.exact() && b.exact()) return a.df < b.df;
  if (a.exact()) return true;
  if (b.exact()) return false;
  return *a.bic < *b.bic;
}

double tail_p_value(double observed, std::span<const double> replicates, Tail tail) {
  if (replicates.empty()) throw InputError("p-value needs at least one replicate");
  const double tie = 1e-9 * std::max(std::abs(observed), 1e-300);
  std::size_t count = 0;
  for (double r : replicates) {
    if (tail == Tail::Upper ? r >= observed - tie : r <= observed + tie) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(replicates.size());
}

BootstrapResult bootstrap_measurability(std::span<const double> alt_predictor, std::span<const double> null_predictor,
                                        std::span<const double> e_x, std::span<const double> y,
                                        const SmootherConfig& cfg, const BootstrapOptions& opts) {
  if (opts.replicates < 100) {
    throw InputError("bootstrap needs at least 100 replicates, got " + std::to_string(opts.replicates));
  }
  const std::size_t n = y.size();
  if (alt_predictor.size() != n || null_predictor.size() != n || e_x.size() != n) {
    throw InputError("bootstrap inputs have different lengths");
  }
  const auto alt = SmootherOperator::surface(alt_predictor, e_x, cfg);
  const auto null = SmootherOperator::surface(null_predictor, e_x, cfg);

  auto statistic = [&](std::span<const double> response, std::vector<double>& buf) {
    alt.apply(response, buf);
    double r_alt = 0.0;
    for (std::size_t i = 0; i < n; ++i) r_alt += (response[i] - buf[i]) * (response[i] - buf[i]);
    null.apply(response, buf);
    double r_null = 0.0;
    for (std::size_t i = 0; i < n; ++i) r_null += (response[i] - buf[i]) * (response[i] - buf[i]);
    return r_null - r_alt;
  };

  BootstrapResult result;
  result.tail = Tail::Upper;
  std::vector<double> buf(n);
  result.observed = statistic(y, buf);
  const std::vector<double> null_fitted = null.apply(y);
  std::vector<double> null_residual(n);
  for (std::size_t i = 0; i < n; ++i) null_residual[i] = y[i] - null_fitted[i];

  result.replicates.assign(opts.replicates, 0.0);
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel
  {
    std::vector<std::size_t> perm(n);
    std::vector<double> y_star(n), scratch(n);
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(opts.replicates); ++b) {
      try {
        const auto rep = static_cast<std::size_t>(b);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        if (opts.permutation) {
          opts.permutation(rep, perm);
        } else {
          RandomStream stream(opts.seed, streams::kBootstrapBase + rep);
          stream.shuffle(std::span<std::size_t>(perm));
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (perm[i] >= n) throw InputError("bootstrap permutation index out of range");
          y_star[i] = null_fitted[i] + null_residual[perm[i]];
        }
        result.replicates[rep] = statistic(y_star, scratch);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  result.replicate_count = result.replicates.size();
  result.p_value = tail_p_value(result.observed, result.replicates, Tail::Upper);
  return result;
}

BootstrapResult bootstrap_measurability(std::span<const double> z, std::span<const double> x,
                                        std::span<const double> y, const SmootherConfig& cfg,
                                        const BootstrapOptions& opts) {
  if (z.size() != x.size() || z.size() != y.size()) throw InputError("bootstrap inputs have different lengths");
  const auto first_stage = fit_univariate(z, x, cfg);
  const auto x_hat = first_stage.fitted();
  const auto e_x = first_stage.residuals();
  return bootstrap_measurability(z, x_hat, e_x, y, cfg, opts);
}

}  // namespace semiiv
