#include "semiiv/additive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "semiiv/error.hpp"

namespace semiiv {

std::string_view to_string(AdditiveEngine engine) {
  return engine == AdditiveEngine::Backfitting ? "backfit" : "direct-ls";
}

AdditiveEngine parse_engine(std::string_view name) {
  if (name == "backfit" || name == "backfitting") return AdditiveEngine::Backfitting;
  if (name == "direct-ls" || name == "direct") return AdditiveEngine::DirectLeastSquares;
  throw InputError("unknown additive engine '" + std::string(name) + "' (expected backfit or direct-ls)");
}

ComponentCurve ComponentCurve::interpolated(std::span<const double> x, std::span<const double> values) {
  if (x.size() != values.size() || x.empty()) throw InputError("component curve needs matching non-empty inputs");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  ComponentCurve curve;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < order.size() && x[order[j]] == x[order[i]]) sum += values[order[j++]];
    curve.knots_x_.push_back(x[order[i]]);
    curve.knots_y_.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  curve.lower_ = curve.knots_x_.front();
  curve.upper_ = curve.knots_x_.back();
  return curve;
}

ComponentCurve ComponentCurve::spline(BSplineBasis basis, std::vector<double> coefficients, double offset) {
  if (coefficients.size() != static_cast<std::size_t>(basis.size())) {
    throw InputError("spline component needs one coefficient per basis function");
  }
  ComponentCurve curve;
  curve.lower_ = basis.lower();
  curve.upper_ = basis.upper();
  curve.basis_.emplace(std::move(basis));
  curve.coefficients_ = std::move(coefficients);
  curve.offset_ = offset;
  return curve;
}

double ComponentCurve::operator()(double x) const {
  if (!(x >= lower_ && x <= upper_)) {
    std::ostringstream msg;
    msg << "component evaluated at " << x << ", outside its fitted range [" << lower_ << ", " << upper_ << "]";
    throw InputError(msg.str());
  }
  if (basis_) {
    const auto b = basis_->evaluate(x);
    double s = 0.0;
    for (std::size_t c = 0; c < b.size(); ++c) s += coefficients_[c] * b[c];
    return s - offset_;
  }
  auto it = std::lower_bound(knots_x_.begin(), knots_x_.end(), x);
  const auto i = static_cast<std::size_t>(it - knots_x_.begin());
  if (knots_x_[i] == x) return knots_y_[i];
  const double t = (x - knots_x_[i - 1]) / (knots_x_[i] - knots_x_[i - 1]);
  return knots_y_[i - 1] + t * (knots_y_[i] - knots_y_[i - 1]);
}

namespace {

void check_additive_inputs(std::span<const std::span<const double>> predictors, std::span<const double> y) {
  if (predictors.empty()) throw InputError("additive fit needs at least one predictor");
  for (std::size_t j = 0; j < predictors.size(); ++j) {
    if (predictors[j].size() != y.size()) {
      throw InputError("predictor " + std::to_string(j) + " has " + std::to_string(predictors[j].size()) +
                       " rows, response has " + std::to_string(y.size()));
    }
    const auto [lo, hi] = std::minmax_element(predictors[j].begin(), predictors[j].end());
    if (*lo == *hi) throw InputError("predictor " + std::to_string(j) + " is constant");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw InputError("response has a non-finite value at row " + std::to_string(i));
  }
}

void center(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

// Above this many stored weights the backfitter recomputes local fits every
// sweep instead of caching the smoother matrix.
constexpr std::size_t kOperatorCacheLimit = 40'000'000;

class ComponentSmoother {
 public:
  ComponentSmoother(std::span<const double> x, const SmootherConfig& cfg) : x_(x), design_(x, cfg) {
    const std::size_t n = x.size();
    if (n * cfg.neighbors(n) <= kOperatorCacheLimit) {
      op_ = SmootherOperator::univariate(x, cfg);
      trace_ = op_->trace();
    } else {
      // Validates every local fit once, so the streamed sweeps below cannot throw.
      const std::vector<double> zeros(n, 0.0);
      trace_ = UnivariateFit(x, zeros, cfg).effective_df();
    }
  }

  void apply(std::span<const double> r, std::span<double> out) {
    if (op_) {
      op_->apply(r, out);
      return;
    }
    const std::size_t n = x_.size();
#pragma omp parallel
    {
      SmootherRow row;
#pragma omp for schedule(dynamic, 32)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        design_.row_at(x_[i], row);
        double s = 0.0;
        for (std::size_t j = 0; j < row.index.size(); ++j) s += row.weight[j] * r[row.index[j]];
        out[i] = s;
      }
    }
  }

  [[nodiscard]] double trace() const { return trace_; }

 private:
  std::span<const double> x_;
  detail::UnivariateDesign design_;
  std::optional<SmootherOperator> op_;
  double trace_ = 0.0;
};

}  // namespace

AdditiveFit backfit(std::span<const std::span<const double>> predictors, std::span<const double> y,
                    const BackfitOptions& opts) {
  check_additive_inputs(predictors, y);
  if (!(opts.tol > 0.0)) throw InputError("backfitting tolerance must be positive");
  if (opts.max_iter < 1) throw InputError("backfitting max_iter must be at least 1");
  const std::size_t n = y.size();
  const std::size_t p = predictors.size();

  std::vector<ComponentSmoother> smoothers;
  smoothers.reserve(p);
  for (const auto& x : predictors) smoothers.emplace_back(x, opts.smoother);

  AdditiveFit fit;
  fit.method = AdditiveEngine::Backfitting;
  fit.intercept = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  fit.component_values.assign(p, std::vector<double>(n, 0.0));
  std::vector<double> partial(n), updated(n), total(n, 0.0);

  ConvergenceRecord record;
  record.converged = false;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      auto& f = fit.component_values[j];
      for (std::size_t i = 0; i < n; ++i) partial[i] = y[i] - fit.intercept - (total[i] - f[i]);
      smoothers[j].apply(partial, updated);
      center(updated);
      for (std::size_t i = 0; i < n; ++i) {
        max_change = std::max(max_change, std::abs(updated[i] - f[i]));
        total[i] += updated[i] - f[i];
        f[i] = updated[i];
      }
    }
    record.iterations = iter;
    record.final_change = max_change;
    if (max_change < opts.tol) {
      record.converged = true;
      break;
    }
  }
  fit.convergence = record;

  fit.response.assign(y.begin(), y.end());
  fit.fitted.resize(n);
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = fit.intercept;
    for (std::size_t j = 0; j < p; ++j) s += fit.component_values[j][i];
    fit.fitted[i] = s;
    fit.residuals[i] = y[i] - s;
  }
  fit.effective_df = 1.0;
  for (const auto& s : smoothers) fit.effective_df += s.trace();
  for (std::size_t j = 0; j < p; ++j) {
    fit.components.push_back(ComponentCurve::interpolated(predictors[j], fit.component_values[j]));
  }
  fit.rank = {p, p};
  return fit;
}

AdditiveFit backfit(std::span<const double> u, std::span<const double> v, std::span<const double> y,
                    const BackfitOptions& opts) {
  const std::span<const double> predictors[] = {u, v};
  return backfit(predictors, y, opts);
}

AdditiveFit direct_ls_additive(std::span<const std::span<const double>> predictors, std::span<const double> y,
                               int basis_size) {
  check_additive_inputs(predictors, y);
  if (basis_size < 3) throw InputError("basis_size must be at least 3, got " + std::to_string(basis_size));
  const std::size_t n = y.size();
  const std::size_t p = predictors.size();
  const auto block = static_cast<std::size_t>(basis_size - 1);

  std::vector<BSplineBasis> bases;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + p * block));
  design.col(0).setOnes();
  std::vector<std::vector<double>> column_means(p);
  std::vector<double> values(static_cast<std::size_t>(basis_size));
  for (std::size_t j = 0; j < p; ++j) {
    bases.emplace_back(predictors[j], basis_size);
    const auto offset = static_cast<Eigen::Index>(1 + j * block);
    for (std::size_t i = 0; i < n; ++i) {
      bases[j].evaluate(predictors[j][i], values);
      for (std::size_t c = 0; c < block; ++c) design(static_cast<Eigen::Index>(i), offset + static_cast<Eigen::Index>(c)) = values[c];
    }
    column_means[j].resize(block);
    for (std::size_t c = 0; c < block; ++c) {
      auto col = design.col(offset + static_cast<Eigen::Index>(c));
      const double mean = col.mean();
      column_means[j][c] = mean;
      col.array() -= mean;
    }
  }

  const Eigen::Map<const Eigen::VectorXd> response(y.data(), static_cast<Eigen::Index>(n));
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(design);
  const Eigen::VectorXd beta = cod.solve(response);
  const Eigen::VectorXd fitted = design * beta;

  AdditiveFit fit;
  fit.method = AdditiveEngine::DirectLeastSquares;
  fit.intercept = beta(0);
  fit.response.assign(y.begin(), y.end());
  fit.fitted.assign(fitted.data(), fitted.data() + n);
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = y[i] - fit.fitted[i];
  fit.rank = {static_cast<std::size_t>(design.cols()), static_cast<std::size_t>(cod.rank())};
  fit.effective_df = static_cast<double>(cod.rank());
  fit.convergence = {1, 0.0, true};

  for (std::size_t j = 0; j < p; ++j) {
    const auto offset = static_cast<Eigen::Index>(1 + j * block);
    const Eigen::VectorXd values_j = design.middleCols(offset, static_cast<Eigen::Index>(block)) *
                                     beta.segment(offset, static_cast<Eigen::Index>(block));
    fit.component_values.emplace_back(values_j.data(), values_j.data() + n);
    std::vector<double> coef(static_cast<std::size_t>(basis_size), 0.0);
    double shift = 0.0;
    for (std::size_t c = 0; c < block; ++c) {
      coef[c] = beta(offset + static_cast<Eigen::Index>(c));
      shift += coef[c] * column_means[j][c];
    }
    fit.components.push_back(ComponentCurve::spline(bases[j], std::move(coef), shift));
  }
  return fit;
}

AdditiveFit direct_ls_additive(std::span<const double> u, std::span<const double> v, std::span<const double> y,
                               int basis_size) {
  const std::span<const double> predictors[] = {u, v};
  return direct_ls_additive(predictors, y, basis_size);
}

AdditiveFit fit_additive(std::span<const std::span<const double>> predictors, std::span<const double> y,
                         const AdditiveConfig& cfg) {
  return cfg.engine == AdditiveEngine::Backfitting ? backfit(predictors, y, cfg.backfit)
                                                   : direct_ls_additive(predictors, y, cfg.basis_size);
}

}  // namespace semiiv
