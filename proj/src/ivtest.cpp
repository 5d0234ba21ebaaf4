#include "semiiv/ivtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "semiiv/error.hpp"

namespace semiiv {

std::string_view to_string(CombineMode mode) { return mode == CombineMode::Joint ? "joint" : "marginal"; }

CombineMode parse_combine_mode(std::string_view name) {
  if (name == "joint") return CombineMode::Joint;
  if (name == "marginal") return CombineMode::Marginal;
  throw InputError("unknown combine mode '" + std::string(name) + "' (expected joint or marginal)");
}

void StructuralRoles::validate(const Dataset& data, std::size_t instrument_count) const {
  if (instruments.size() != instrument_count) {
    throw InputError("expected " + std::to_string(instrument_count) + " instrument column(s), got " +
                     std::to_string(instruments.size()));
  }
  std::set<std::string> seen;
  auto check = [&](const std::string& name, const char* role) {
    if (name.empty()) throw InputError(std::string(role) + " column is not bound");
    if (!data.has_column(name)) throw InputError("missing column '" + name + "' (bound as " + role + ")");
    if (!seen.insert(name).second) throw InputError("column '" + name + "' is bound to more than one role");
  };
  for (const auto& z : instruments) check(z, "instrument");
  check(treatment, "treatment");
  check(outcome, "outcome");
}

namespace {

constexpr std::size_t kMinControlFunctionRows = 30;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ComponentSummary summarize(std::span<const double> v) {
  ComponentSummary s;
  s.mean = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

void check_lengths(std::size_t n, std::initializer_list<std::span<const double>> cols) {
  for (const auto& c : cols) {
    if (c.size() != n) throw InputError("input columns have different lengths");
  }
}

}  // namespace

ControlFunction control_function_residual(std::span<const double> z, std::span<const double> x,
                                          const SmootherConfig& cfg) {
  check_lengths(z.size(), {x});
  if (z.size() < kMinControlFunctionRows) {
    throw InputError("control function needs at least " + std::to_string(kMinControlFunctionRows) + " rows, got " +
                     std::to_string(z.size()));
  }
  const auto fit = fit_univariate(z, x, cfg);
  ControlFunction cf;
  cf.x_hat.assign(fit.fitted().begin(), fit.fitted().end());
  cf.e_x.assign(fit.residuals().begin(), fit.residuals().end());
  // Local fits leave residuals with a small non-zero mean; move it into x_hat
  // so e_x is centred. Every later fit is invariant to this shift.
  const double shift = mean_of(cf.e_x);
  for (std::size_t i = 0; i < cf.e_x.size(); ++i) {
    cf.e_x[i] -= shift;
    cf.x_hat[i] += shift;
  }
  cf.first_stage_df = fit.effective_df();
  return cf;
}

ControlFunction control_function_residual(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg) {
  roles.validate(data, 1);
  return control_function_residual(data.column(roles.instruments[0]), data.column(roles.treatment), cfg.smoother);
}

CausalEffectEstimate estimate_causal_effect(std::span<const double> z, std::span<const double> x,
                                            std::span<const double> y, const TestConfig& cfg) {
  check_lengths(z.size(), {x, y});
  auto cf = control_function_residual(z, x, cfg.smoother);
  const std::span<const double> predictors[] = {x, cf.e_x};
  auto fit = fit_additive(predictors, y, cfg.additive);
  CausalEffectEstimate est{fit.components[0], fit.components[1], fit.intercept, std::move(cf.e_x), std::move(fit)};
  return est;
}

CausalEffectEstimate estimate_causal_effect(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg) {
  roles.validate(data, 1);
  return estimate_causal_effect(data.column(roles.instruments[0]), data.column(roles.treatment),
                                data.column(roles.outcome), cfg);
}

AdditivityResult additivity_test(std::span<const double> z, std::span<const double> x, std::span<const double> y,
                                 const ControlFunction& first_stage, const TestConfig& cfg) {
  check_lengths(z.size(), {x, y, first_stage.e_x});
  const auto surface = fit_surface(x, z, y, cfg.smoother);
  const std::span<const double> predictors[] = {x, first_stage.e_x};
  const auto additive = fit_additive(predictors, y, cfg.additive);

  AdditivityResult result;
  result.surface = model_score(y, surface.residuals(), surface.effective_df());
  result.additive = model_score(y, additive.residuals, additive.effective_df);
  result.accepted = better_score(result.additive, result.surface);
  result.engine = additive.method;
  result.convergence = additive.convergence;
  return result;
}

AdditivityResult additivity_test(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg) {
  roles.validate(data, 1);
  const auto z = data.column(roles.instruments[0]);
  const auto x = data.column(roles.treatment);
  return additivity_test(z, x, data.column(roles.outcome), control_function_residual(z, x, cfg.smoother), cfg);
}

MeasurabilityResult compare_residual_sums(std::span<const double> alt_predictor,
                                          std::span<const double> null_predictor, std::span<const double> e_x,
                                          std::span<const double> y, const TestConfig& cfg,
                                          const std::optional<BootstrapOptions>& bootstrap) {
  check_lengths(y.size(), {alt_predictor, null_predictor, e_x});
  MeasurabilityResult result;
  result.r_alt = residual_sum(fit_surface(alt_predictor, e_x, y, cfg.smoother));
  result.r_null = residual_sum(fit_surface(null_predictor, e_x, y, cfg.smoother));
  if (bootstrap) {
    result.bootstrap = bootstrap_measurability(alt_predictor, null_predictor, e_x, y, cfg.smoother, *bootstrap);
    result.accepted = !(result.bootstrap->p_value < cfg.alpha);
  } else {
    result.accepted = !(result.r_alt < result.r_null);
  }
  return result;
}

MeasurabilityResult measurability_test(std::span<const double> z, std::span<const double> y,
                                       const ControlFunction& first_stage, const TestConfig& cfg,
                                       const std::optional<BootstrapOptions>& bootstrap) {
  return compare_residual_sums(z, first_stage.x_hat, first_stage.e_x, y, cfg, bootstrap);
}

MeasurabilityResult measurability_test(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg,
                                       const std::optional<BootstrapOptions>& bootstrap) {
  roles.validate(data, 1);
  const auto z = data.column(roles.instruments[0]);
  const auto cf = control_function_residual(z, data.column(roles.treatment), cfg.smoother);
  return measurability_test(z, data.column(roles.outcome), cf, cfg, bootstrap);
}

std::vector<std::string> SemiInstrumentReport::failed_stages() const {
  std::vector<std::string> failed;
  if (!additivity.accepted) failed.emplace_back("additivity");
  if (!measurability.accepted) failed.emplace_back("measurability");
  return failed;
}

SemiInstrumentReport semi_instrument_test(std::span<const double> z, std::span<const double> x,
                                          std::span<const double> y, const TestConfig& cfg,
                                          const std::optional<BootstrapOptions>& bootstrap) {
  check_lengths(z.size(), {x, y});
  const auto cf = control_function_residual(z, x, cfg.smoother);
  SemiInstrumentReport report;
  report.additivity = additivity_test(z, x, y, cf, cfg);
  report.measurability = measurability_test(z, y, cf, cfg, bootstrap);
  report.accepted = report.additivity.accepted && report.measurability.accepted;
  return report;
}

SemiInstrumentReport semi_instrument_test(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg,
                                          const std::optional<BootstrapOptions>& bootstrap) {
  roles.validate(data, 1);
  return semi_instrument_test(data.column(roles.instruments[0]), data.column(roles.treatment),
                              data.column(roles.outcome), cfg, bootstrap);
}

CombinedInstrument combine_instruments(std::span<const double> z1, std::span<const double> z2,
                                       std::span<const double> x, const TestConfig& cfg) {
  check_lengths(x.size(), {z1, z2});
  if (std::equal(z1.begin(), z1.end(), z2.begin())) {
    throw InputError("the two instruments are the same column; they cannot be independent");
  }
  CombinedInstrument combined;
  combined.mode = cfg.combine;
  std::vector<double> f1, f2;
  if (cfg.combine == CombineMode::Joint) {
    const std::span<const double> predictors[] = {z1, z2};
    auto fit = fit_additive(predictors, x, cfg.additive);
    f1 = std::move(fit.component_values[0]);
    f2 = std::move(fit.component_values[1]);
  } else {
    auto marginal = [&](std::span<const double> z) {
      const auto fit = fit_univariate(z, x, cfg.smoother);
      std::vector<double> f(fit.fitted().begin(), fit.fitted().end());
      const double m = mean_of(f);
      for (double& v : f) v -= m;
      return f;
    };
    f1 = marginal(z1);
    f2 = marginal(z2);
  }
  combined.values.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) combined.values[i] = f1[i] + f2[i];
  combined.f1 = summarize(f1);
  combined.f2 = summarize(f2);
  return combined;
}

CombinedInstrument combine_instruments(const Dataset& data, const StructuralRoles& roles, const TestConfig& cfg) {
  roles.validate(data, 2);
  return combine_instruments(data.column(roles.instruments[0]), data.column(roles.instruments[1]),
                             data.column(roles.treatment), cfg);
}

DoubleSemiInstrumentReport double_instrument_test(const Dataset& data, const StructuralRoles& roles,
                                                  const TestConfig& cfg,
                                                  const std::optional<BootstrapOptions>& bootstrap) {
  DoubleSemiInstrumentReport report;
  report.combined = combine_instruments(data, roles, cfg);
  report.semi = semi_instrument_test(report.combined.values, data.column(roles.treatment), data.column(roles.outcome),
                                     cfg, bootstrap);
  return report;
}

DoubleInstrumentReport linear_double_instrument_test(std::span<const double> z1, std::span<const double> z2,
                                                     std::span<const double> x, std::span<const double> y,
                                                     const TestConfig& cfg) {
  check_lengths(x.size(), {z1, z2, y});
  DoubleInstrumentReport report;
  report.combined = combine_instruments(z1, z2, x, cfg);
  const auto& zc = report.combined.values;
  const std::size_t n = y.size();

  const double zbar = mean_of(zc);
  const double ybar = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (zc[i] - zbar) * (zc[i] - zbar);
    sxy += (zc[i] - zbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw InputError("combined instrument is constant; the instruments do not predict X");
  report.slope = sxy / sxx;
  report.intercept = ybar - report.slope * zbar;
  std::vector<double> linear_residuals(n);
  for (std::size_t i = 0; i < n; ++i) linear_residuals[i] = y[i] - report.intercept - report.slope * zc[i];
  report.linear = model_score(y, linear_residuals, 2.0);

  const std::span<const double> predictors[] = {z1, z2};
  const auto additive = fit_additive(predictors, y, cfg.additive);
  report.additive = model_score(y, additive.residuals, additive.effective_df);
  report.convergence = additive.convergence;

  if (!report.linear.exact() && !report.additive.exact()) {
    report.statistic = *report.additive.bic - *report.linear.bic;
    report.weak_evidence = std::abs(*report.statistic) < cfg.weak_evidence_margin;
  }
  report.accepted = better_score(report.linear, report.additive);
  return report;
}

DoubleInstrumentReport linear_double_instrument_test(const Dataset& data, const StructuralRoles& roles,
                                                     const TestConfig& cfg) {
  roles.validate(data, 2);
  return linear_double_instrument_test(data.column(roles.instruments[0]), data.column(roles.instruments[1]),
                                       data.column(roles.treatment), data.column(roles.outcome), cfg);
}

}  // namespace semiiv
