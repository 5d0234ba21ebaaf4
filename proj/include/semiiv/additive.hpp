#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "semiiv/bspline.hpp"
#include "semiiv/smoothers.hpp"

namespace semiiv {

enum class AdditiveEngine { Backfitting, DirectLeastSquares };

std::string_view to_string(AdditiveEngine engine);
AdditiveEngine parse_engine(std::string_view name);  // "backfit" or "direct-ls"

inline constexpr int kDefaultBasisSize = 5;

/// One additive component, a univariate function defined on the training range
/// of its predictor. Evaluating outside that range throws InputError.
class ComponentCurve {
 public:
  // Piecewise-linear through (x, value); duplicate x values are averaged.
  static ComponentCurve interpolated(std::span<const double> x, std::span<const double> values);
  // sum_c coef[c] * B_c(x) - offset.
  static ComponentCurve spline(BSplineBasis basis, std::vector<double> coefficients, double offset);

  double operator()(double x) const;
  [[nodiscard]] double lower() const { return lower_; }
  [[nodiscard]] double upper() const { return upper_; }

 private:
  ComponentCurve() = default;

  double lower_ = 0.0, upper_ = 0.0;
  std::vector<double> knots_x_, knots_y_;
  std::optional<BSplineBasis> basis_;
  std::vector<double> coefficients_;
  double offset_ = 0.0;
};

struct ConvergenceRecord {
  int iterations = 0;
  double final_change = 0.0;
  bool converged = true;
};

struct RankDiagnostic {
  std::size_t columns = 0;
  std::size_t rank = 0;
  [[nodiscard]] bool deficient() const { return rank < columns; }
};

/// intercept + sum of mean-zero components.
struct AdditiveFit {
  AdditiveEngine method = AdditiveEngine::DirectLeastSquares;
  double intercept = 0.0;
  std::vector<ComponentCurve> components;
  std::vector<std::vector<double>> component_values;  // per component, at the training points
  std::vector<double> response;
  std::vector<double> fitted;
  std::vector<double> residuals;
  double effective_df = 0.0;
  ConvergenceRecord convergence;  // always converged for direct least squares
  RankDiagnostic rank;            // columns == rank for backfitting

  [[nodiscard]] std::size_t size() const { return fitted.size(); }
};

struct BackfitOptions {
  SmootherConfig smoother;
  double tol = 1e-6;
  int max_iter = 100;
};

/// Gauss-Seidel backfitting with a local polynomial smoother per predictor.
///
/// Sweeps until the largest elementwise change of any component in a sweep is
/// below tol, or max_iter sweeps. Running out of sweeps is recorded in
/// `convergence`, not thrown. effective_df = sum of smoother traces + 1.
AdditiveFit backfit(std::span<const std::span<const double>> predictors, std::span<const double> y,
                    const BackfitOptions& opts = {});
AdditiveFit backfit(std::span<const double> u, std::span<const double> v, std::span<const double> y,
                    const BackfitOptions& opts = {});

/// Additive fit by one joint least-squares solve.
///
/// Each predictor is expanded in a BSplineBasis of `basis_size` functions; the
/// last function of each block is dropped (the blocks sum to the intercept
/// column) and the rest are mean-centred. The solve is a complete orthogonal
/// decomposition, so a rank-deficient design yields the minimum-norm solution
/// and is reported in `rank`. effective_df is the numerical rank, which equals
/// 1 + p * (basis_size - 1) for p predictors when the design has full rank.
AdditiveFit direct_ls_additive(std::span<const std::span<const double>> predictors, std::span<const double> y,
                               int basis_size = kDefaultBasisSize);
AdditiveFit direct_ls_additive(std::span<const double> u, std::span<const double> v, std::span<const double> y,
                               int basis_size = kDefaultBasisSize);

struct AdditiveConfig {
  AdditiveEngine engine = AdditiveEngine::DirectLeastSquares;
  BackfitOptions backfit;
  int basis_size = kDefaultBasisSize;
};

AdditiveFit fit_additive(std::span<const std::span<const double>> predictors, std::span<const double> y,
                         const AdditiveConfig& cfg);

}  // namespace semiiv
