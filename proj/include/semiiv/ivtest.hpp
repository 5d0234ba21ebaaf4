#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semiiv/additive.hpp"
#include "semiiv/dataset.hpp"
#include "semiiv/scoring.hpp"
#include "semiiv/smoothers.hpp"

namespace semiiv {

/// Column bindings: instrument(s) Z, treatment X and outcome Y.
struct StructuralRoles {
  std::vector<std::string> instruments;
  std::string treatment;
  std::string outcome;

  // Throws InputError unless names are distinct, present in `data`, and there
  // are exactly `instrument_count` instruments.
  void validate(const Dataset& data, std::size_t instrument_count) const;
};

// How f1(Z1) and f2(Z2) are estimated when two instruments are combined.
enum class CombineMode {
  Joint,     // components of one additive regression of X on (Z1, Z2)
  Marginal,  // separate smooths E[X|Z1] and E[X|Z2], each mean-centred
};

std::string_view to_string(CombineMode mode);
CombineMode parse_combine_mode(std::string_view name);

struct TestConfig {
  SmootherConfig smoother;
  AdditiveConfig additive;
  CombineMode combine = CombineMode::Joint;
  double alpha = 0.05;  // level for bootstrap decisions
  // Below this |BIC_a - BIC_l| the linear double-instrument decision is flagged as weak.
  double weak_evidence_margin = 2.0;
};

/// First stage: x_hat = E[X|Z] by local polynomial smoothing, e_x = X - x_hat
/// (shifted by a constant so that it has mean zero).
struct ControlFunction {
  std::vector<double> x_hat;
  std::vector<double> e_x;
  double first_stage_df = 0.0;
};

ControlFunction control_function_residual(std::span<const double> z, std::span<const double> x,
                                          const SmootherConfig& cfg);
ControlFunction control_function_residual(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg);

/// s(X) and h(e_x) from the additive regression of Y on (X, e_x). Both curves
/// are mean-centred over the sample and defined on the observed ranges only.
struct CausalEffectEstimate {
  ComponentCurve s;
  ComponentCurve h;
  double intercept = 0.0;
  std::vector<double> e_x;
  AdditiveFit fit;
};

CausalEffectEstimate estimate_causal_effect(std::span<const double> z, std::span<const double> x,
                                            std::span<const double> y, const TestConfig& cfg);
CausalEffectEstimate estimate_causal_effect(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg);

/// Surface fit of Y on (X, Z) against additive fit of Y on (X, e_x); accept
/// when the additive model has the better BIC.
struct AdditivityResult {
  ModelScore surface;
  ModelScore additive;
  bool accepted = false;
  AdditiveEngine engine = AdditiveEngine::DirectLeastSquares;
  ConvergenceRecord convergence;
};

AdditivityResult additivity_test(std::span<const double> z, std::span<const double> x, std::span<const double> y,
                                 const ControlFunction& first_stage, const TestConfig& cfg);
AdditivityResult additivity_test(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg);

/// Residual sums of squares R_A (Y on Z, e_x) and R_N (Y on E[X|Z], e_x).
/// Without bootstrap, reject when R_A < R_N; with bootstrap, reject when the
/// upper-tail p-value of R_N - R_A is below alpha.
struct MeasurabilityResult {
  double r_alt = 0.0;
  double r_null = 0.0;
  bool accepted = false;
  std::optional<BootstrapResult> bootstrap;
};

// Lower-level form: any two predictor columns compared against the same e_x.
MeasurabilityResult compare_residual_sums(std::span<const double> alt_predictor,
                                          std::span<const double> null_predictor, std::span<const double> e_x,
                                          std::span<const double> y, const TestConfig& cfg,
                                          const std::optional<BootstrapOptions>& bootstrap);
MeasurabilityResult measurability_test(std::span<const double> z, std::span<const double> y,
                                       const ControlFunction& first_stage, const TestConfig& cfg,
                                       const std::optional<BootstrapOptions>& bootstrap);
MeasurabilityResult measurability_test(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg,
                                       const std::optional<BootstrapOptions>& bootstrap = std::nullopt);

struct SemiInstrumentReport {
  AdditivityResult additivity;
  MeasurabilityResult measurability;
  bool accepted = false;  // both stages accepted

  [[nodiscard]] std::vector<std::string> failed_stages() const;
};

SemiInstrumentReport semi_instrument_test(std::span<const double> z, std::span<const double> x,
                                          std::span<const double> y, const TestConfig& cfg,
                                          const std::optional<BootstrapOptions>& bootstrap = std::nullopt);
SemiInstrumentReport semi_instrument_test(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg,
                                          const std::optional<BootstrapOptions>& bootstrap = std::nullopt);

struct ComponentSummary {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Z = f1(Z1) + f2(Z2), with the estimates of f1 and f2 summarised.
struct CombinedInstrument {
  std::vector<double> values;
  ComponentSummary f1;
  ComponentSummary f2;
  CombineMode mode = CombineMode::Joint;
};

CombinedInstrument combine_instruments(std::span<const double> z1, std::span<const double> z2,
                                       std::span<const double> x, const TestConfig& cfg);
CombinedInstrument combine_instruments(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg);

/// Semi-instrument test on the combined instrument. Acceptance means Z1 and Z2
/// have the same linear coefficient; a rejection does not say which one differs.
struct DoubleSemiInstrumentReport {
  CombinedInstrument combined;
  SemiInstrumentReport semi;
};

DoubleSemiInstrumentReport double_instrument_test(const Dataset& data, const StructuralRoles& roles,
                                                  const TestConfig& cfg,
                                                  const std::optional<BootstrapOptions>& bootstrap = std::nullopt);

/// Linear double-instrument test, for a treatment effect linear in X.
///
/// BIC_l scores the straight-line regression of Y on Z = E[X|Z1, Z2] (df 2),
/// BIC_a the additive regression of Y on (Z1, Z2). Accept (same linear
/// coefficients) iff BIC_l < BIC_a; ties reject.
struct DoubleInstrumentReport {
  CombinedInstrument combined;
  double slope = 0.0;
  double intercept = 0.0;
  ModelScore linear;
  ModelScore additive;
  std::optional<double> statistic;  // BIC_a - BIC_l; empty when either fit is exact
  bool accepted = false;
  bool weak_evidence = false;
  ConvergenceRecord convergence;  // of the additive fit of Y
};

DoubleInstrumentReport linear_double_instrument_test(std::span<const double> z1, std::span<const double> z2,
                                                     std::span<const double> x, std::span<const double> y,
                                                     const TestConfig& cfg);
DoubleInstrumentReport linear_double_instrument_test(const Dataset& data, const StructuralRoles& roles,
                                                     const TestConfig& cfg);

}  // namespace semiiv
