#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "semiiv/additive.hpp"
#include "semiiv/smoothers.hpp"

namespace semiiv {

/// Gaussian-profile BIC: n * ln(rss / n) + df * ln(n).
struct FitScore {
  std::size_t n = 0;
  double rss = 0.0;
  double df = 0.0;
  double bic = 0.0;
};

// Builds a FitScore. Throws InputError for n < 3 or df < 0, and
// InterpolationError when rss <= 1e-12 * var(y) * n (the BIC is unbounded).
FitScore make_fit_score(std::size_t n, double rss, double df, double response_variance);

// "Sum of the residuals" in the measurability test is the residual sum of
// squares: a plain sum of least-squares residuals is near zero for any fit.
double residual_sum(std::span<const double> residuals);
double residual_sum(const UnivariateFit& fit);
double residual_sum(const SurfaceFit& fit);
double residual_sum(const AdditiveFit& fit);

FitScore bic_score(const UnivariateFit& fit);
FitScore bic_score(const SurfaceFit& fit);
FitScore bic_score(const AdditiveFit& fit);
FitScore bic_score(std::span<const double> response, std::span<const double> residuals, double df);

/// A model comparison entry that stays usable when a fit is exact. Exact fits
/// carry no finite BIC; they compare as -infinity, and two exact fits compare
/// by their complexity penalty df * ln(n).
struct ModelScore {
  std::size_t n = 0;
  double rss = 0.0;
  double df = 0.0;
  std::optional<double> bic;  // empty for an exact fit

  [[nodiscard]] bool exact() const { return !bic.has_value(); }
};

ModelScore model_score(std::span<const double> response, std::span<const double> residuals, double df);
// True when `a` scores strictly better (lower BIC) than `b`.
bool better_score(const ModelScore& a, const ModelScore& b);

enum class Tail { Upper, Lower };

struct BootstrapResult {
  double observed = 0.0;
  std::vector<double> replicates;
  double p_value = 1.0;
  std::size_t replicate_count = 0;
  Tail tail = Tail::Upper;
};

// Fraction of replicates at least as extreme as `observed` in the given tail.
// Replicates within 1e-9 relative of the observed value count as ties, which
// are included in the tail.
double tail_p_value(double observed, std::span<const double> replicates, Tail tail);

/// Writes a permutation of [0, n) for bootstrap replicate `replicate`.
using PermutationSource = std::function<void(std::size_t replicate, std::span<std::size_t> permutation)>;

struct BootstrapOptions {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  // Empty: uniform random permutations from the replicate's own random stream.
  PermutationSource permutation;
};

/// Residual-permutation bootstrap of the measurability statistic R_N - R_A.
///
/// R_A is the residual sum of squares of the surface fit of y on (z, e_x), R_N
/// that of y on (E[x|z], e_x). Each replicate adds a permutation of the null
/// fit's residuals to its fitted values and recomputes R_N - R_A with the same
/// predictors. The p-value is upper-tail: large R_N - R_A favours the
/// alternative. Replicates are evaluated in parallel and stored by index.
BootstrapResult bootstrap_measurability(std::span<const double> z, std::span<const double> x,
                                        std::span<const double> y, const SmootherConfig& cfg,
                                        const BootstrapOptions& opts);

// Same, with the first-stage quantities already computed.
BootstrapResult bootstrap_measurability(std::span<const double> alt_predictor, std::span<const double> null_predictor,
                                        std::span<const double> e_x, std::span<const double> y,
                                        const SmootherConfig& cfg, const BootstrapOptions& opts);

}  // namespace semiiv
