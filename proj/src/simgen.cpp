#include "semiiv/simgen.hpp"

#include <cmath>
#include <set>

#include "semiiv/error.hpp"

namespace semiiv {

bool Distribution::valid() const {
  if (!std::isfinite(a) || !std::isfinite(b)) return false;
  return kind == Kind::Uniform ? a < b : b >= 0.0;
}

double Distribution::draw(RandomStream& stream) const {
  return kind == Kind::Uniform ? stream.uniform(a, b) : stream.normal(a, b);
}

Dataset GeneratedSample::with_truth() const {
  Dataset out;
  for (const auto& name : observed.names()) {
    auto col = observed.column(name);
    out.add_column(name, {col.begin(), col.end()});
  }
  for (const auto& name : truth.names()) {
    auto col = truth.column(name);
    out.add_column("truth." + name, {col.begin(), col.end()});
  }
  return out;
}

namespace {

double checked(double value, const std::string& what, std::size_t row) {
  if (!std::isfinite(value)) {
    throw SpecError(what + " is not finite at row " + std::to_string(row) + " (function not evaluable on the support)");
  }
  return value;
}

}  // namespace

GeneratedSample gen_custom(const StructuralSpec& spec) {
  if (spec.n < 1) throw SpecError("sample size must be at least 1");
  if (spec.instruments.empty()) throw SpecError("at least one instrument is required");
  if (!spec.confounder.valid()) throw SpecError("invalid confounder distribution");
  if (!(spec.noise_x_sd >= 0.0) || !(spec.noise_y_sd >= 0.0)) throw SpecError("noise standard deviations must be >= 0");
  std::set<std::string> names{spec.treatment_name, spec.outcome_name};
  for (const auto& inst : spec.instruments) {
    if (!inst.distribution.valid()) throw SpecError("invalid distribution for instrument '" + inst.name + "'");
    if (!inst.f) throw SpecError("instrument '" + inst.name + "' has no effect on the treatment");
    if (!names.insert(inst.name).second || inst.name.empty()) {
      throw SpecError("instrument name '" + inst.name + "' is empty or clashes with another column");
    }
  }
  if (spec.treatment_name.empty() || spec.outcome_name.empty() || spec.treatment_name == spec.outcome_name) {
    throw SpecError("treatment and outcome need distinct non-empty names");
  }

  const std::size_t n = spec.n;
  const std::size_t k = spec.instruments.size();
  std::vector<std::vector<double>> z(k, std::vector<double>(n));
  for (std::size_t j = 0; j < k; ++j) {
    RandomStream stream(spec.seed, streams::kInstrumentBase + j);
    for (auto& v : z[j]) v = spec.instruments[j].distribution.draw(stream);
  }
  std::vector<double> t(n), noise_x(n), noise_y(n);
  {
    RandomStream stream(spec.seed, streams::kConfounder);
    for (auto& v : t) v = spec.confounder.draw(stream);
  }
  {
    RandomStream stream(spec.seed, streams::kNoiseX);
    for (auto& v : noise_x) v = stream.normal(0.0, spec.noise_x_sd);
  }
  {
    RandomStream stream(spec.seed, streams::kNoiseY);
    for (auto& v : noise_y) v = stream.normal(0.0, spec.noise_y_sd);
  }

  std::vector<double> e_x(n), e_y(n), x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    e_x[i] = checked(spec.eps_x ? spec.eps_x(t[i], noise_x[i]) : t[i] + noise_x[i], "eps_x", i);
    e_y[i] = checked(spec.eps_y ? spec.eps_y(t[i], noise_y[i], e_x[i]) : t[i] * t[i] + noise_y[i], "eps_y", i);
    double xi = e_x[i];
    for (std::size_t j = 0; j < k; ++j) xi += checked(spec.instruments[j].f(z[j][i]), "f(" + spec.instruments[j].name + ")", i);
    x[i] = checked(xi, spec.treatment_name, i);
    double yi = checked(spec.s ? spec.s(x[i]) : x[i], "s(X)", i);
    for (std::size_t j = 0; j < k; ++j) {
      if (spec.instruments[j].g) yi += checked(spec.instruments[j].g(z[j][i]), "g(" + spec.instruments[j].name + ")", i);
    }
    y[i] = checked(yi + e_y[i], spec.outcome_name, i);
  }

  GeneratedSample sample;
  for (std::size_t j = 0; j < k; ++j) sample.observed.add_column(spec.instruments[j].name, std::move(z[j]));
  sample.observed.add_column(spec.treatment_name, std::move(x));
  sample.observed.add_column(spec.outcome_name, std::move(y));
  sample.truth.add_column("T", std::move(t));
  sample.truth.add_column("eps_x", std::move(e_x));
  sample.truth.add_column("eps_y", std::move(e_y));
  return sample;
}

StructuralSpec single_instrument_spec(double c, std::size_t n, std::uint64_t seed) {
  StructuralSpec spec;
  InstrumentSpec z{"Z", Distribution::uniform(0.0, 5.0), [](double v) { return v * v; }, nullptr};
  if (c != 0.0) z.g = [c](double v) { return c * v * v * v; };
  spec.instruments = {z};
  spec.s = [](double v) { return v * v; };
  spec.n = n;
  spec.seed = seed;
  return spec;
}

StructuralSpec double_instrument_spec(double c, std::size_t n, std::uint64_t seed) {
  StructuralSpec spec;
  InstrumentSpec z1{"Z1", Distribution::uniform(0.0, 4.0), [](double v) { return v * v; }, nullptr};
  InstrumentSpec z2{"Z2", Distribution::uniform(0.0, 4.0), [](double v) { return v * v; }, nullptr};
  if (c != 0.0) z2.g = [c](double v) { return c * v * v; };
  spec.instruments = {z1, z2};
  spec.s = [](double v) { return v; };
  spec.n = n;
  spec.seed = seed;
  return spec;
}

GeneratedSample gen_single_instrument(double c, std::size_t n, std::uint64_t seed) {
  return gen_custom(single_instrument_spec(c, n, seed));
}

GeneratedSample gen_double_instrument(double c, std::size_t n, std::uint64_t seed) {
  return gen_custom(double_instrument_spec(c, n, seed));
}

}  // namespace semiiv
