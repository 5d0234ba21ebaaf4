#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "semiiv/error.hpp"
#include "semiiv/ivtest.hpp"
#include "semiiv/rng.hpp"
#include "semiiv/simgen.hpp"

using namespace semiiv;

namespace {

using Col = std::vector<double>;

Col col(const Dataset& d, const char* name) { return {d.column(name).begin(), d.column(name).end()}; }

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double sd(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

const StructuralRoles kSingle{{"Z"}, "X", "Y"};
const StructuralRoles kDouble{{"Z1", "Z2"}, "X", "Y"};

}  // namespace

TEST_CASE("roles are validated against the dataset") {
  const auto d = gen_single_instrument(0.0, 50, 1).observed;
  CHECK_NOTHROW(kSingle.validate(d, 1));
  try {
    StructuralRoles{{"W"}, "X", "Y"}.validate(d, 1);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("'W'") != std::string::npos);
  }
  CHECK_THROWS_AS((StructuralRoles{{"Z"}, "Z", "Y"}.validate(d, 1)), InputError);
  CHECK_THROWS_AS((StructuralRoles{{"Z", "X"}, "X", "Y"}.validate(d, 1)), InputError);
  CHECK_THROWS_AS(kSingle.validate(d, 2), InputError);
}

TEST_CASE("control function: noiseless first stage") {
  RandomStream s(1, 1);
  Col z(100);
  for (auto& v : z) v = s.uniform(0.0, 3.0);
  const auto cf = control_function_residual(z, z, SmootherConfig{});
  for (double e : cf.e_x) CHECK(std::abs(e) < 1e-9);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(cf.x_hat[i] + cf.e_x[i] == doctest::Approx(z[i]));
}

TEST_CASE("control function recovers the injected error") {
  const auto g = gen_single_instrument(0.0, 5000, 2);
  const auto x = col(g.observed, "X");
  const auto cf = control_function_residual(g.observed.column("Z"), x, SmootherConfig{});
  CHECK(correlation(cf.e_x, g.truth.column("eps_x")) >= 0.95);
  CHECK(std::abs(mean(cf.e_x)) <= 1e-8 * sd(x));
}

TEST_CASE("control function preconditions") {
  Col z(40, 1.0), x(40, 2.0);
  CHECK_THROWS_AS(control_function_residual(z, x, SmootherConfig{}), SingularFitError);
  CHECK_THROWS_AS(control_function_residual(Col(29, 1.0), Col(29, 1.0), SmootherConfig{}), InputError);
}

TEST_CASE("causal effect: unconfounded linear truth has slope one") {
  StructuralSpec spec;
  spec.instruments = {{"Z", Distribution::uniform(0.0, 4.0), [](double z) { return z * z; }, nullptr}};
  spec.eps_x = [](double, double noise) { return noise; };
  spec.eps_y = [](double, double noise, double) { return noise; };
  spec.n = 2000;
  spec.seed = 3;
  const auto d = gen_custom(spec).observed;
  const auto est = estimate_causal_effect(d, kSingle, TestConfig{});
  auto x = col(d, "X");
  std::sort(x.begin(), x.end());
  const double lo = x[x.size() / 10], hi = x[x.size() * 9 / 10];
  // least-squares slope of s-hat over an interior grid
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const int G = 101;
  for (int g = 0; g < G; ++g) {
    const double q = lo + (hi - lo) * g / (G - 1);
    const double v = est.s(q);
    sx += q;
    sy += v;
    sxx += q * q;
    sxy += q * v;
  }
  const double slope = (G * sxy - sx * sy) / (G * sxx - sx * sx);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.1));
  CHECK(std::abs(mean(est.fit.component_values[0])) < 1e-10);
  CHECK(std::abs(mean(est.fit.component_values[1])) < 1e-10);
}

TEST_CASE("causal effect: constant outcome gives null components") {
  auto g = gen_single_instrument(0.0, 200, 4);
  Dataset d;
  d.add_column("Z", col(g.observed, "Z"));
  d.add_column("X", col(g.observed, "X"));
  d.add_column("Y", Col(200, 3.0));
  const auto est = estimate_causal_effect(d, kSingle, TestConfig{});
  CHECK(est.intercept == doctest::Approx(3.0));
  for (double v : est.fit.component_values[0]) CHECK(std::abs(v) < 1e-9);
  for (double v : est.fit.component_values[1]) CHECK(std::abs(v) < 1e-9);
  CHECK_THROWS_AS(est.s(est.s.upper() + 1.0), InputError);
}

TEST_CASE("additivity: model 2 rejects") {
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = gen_single_instrument(1.0, 1000, 100 + seed).observed;
    rejected += !additivity_test(d, kSingle, TestConfig{}).accepted;
  }
  CHECK(rejected >= 9);
}

TEST_CASE("additivity: noiseless additive truth accepts") {
  // Y = X + e exactly, with the control function supplied directly: the
  // additive fit is exact while Y is not a polynomial in (X, Z).
  RandomStream s(5, 1);
  Col x(300), e(300), z(300), y(300);
  for (int i = 0; i < 300; ++i) {
    x[i] = s.uniform(1.0, 3.0);
    e[i] = s.uniform(-0.5, 0.5);
    z[i] = std::exp(x[i] - e[i]);
    y[i] = x[i] + e[i];
  }
  ControlFunction cf;
  cf.e_x = e;
  for (int i = 0; i < 300; ++i) cf.x_hat.push_back(x[i] - e[i]);
  const auto r = additivity_test(z, x, y, cf, TestConfig{});
  CHECK(r.additive.exact());
  CHECK(!r.surface.exact());
  CHECK(r.accepted);
}

TEST_CASE("additivity: backfitting engine surfaces its scores and convergence") {
  const auto d = gen_single_instrument(0.0, 1000, 6).observed;
  TestConfig cfg;
  cfg.additive.engine = AdditiveEngine::Backfitting;
  const auto r = additivity_test(d, kSingle, cfg);
  CHECK(r.engine == AdditiveEngine::Backfitting);
  CHECK(r.additive.bic.has_value());
  CHECK(r.surface.bic.has_value());
  CHECK(r.convergence.iterations >= 1);
  CHECK(r.accepted == better_score(r.additive, r.surface));
}

TEST_CASE("measurability: identical predictor sets accept") {
  const auto g = gen_single_instrument(0.0, 500, 7);
  const auto& d = g.observed;
  const auto cf = control_function_residual(d.column("Z"), d.column("X"), SmootherConfig{});
  const auto r = compare_residual_sums(cf.x_hat, cf.x_hat, cf.e_x, d.column("Y"), TestConfig{}, std::nullopt);
  CHECK(r.r_alt == r.r_null);
  CHECK(r.accepted);
}

TEST_CASE("measurability: non-injective first stage rejects") {
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    StructuralSpec spec;
    spec.instruments = {{"Z", Distribution::uniform(-2.0, 2.0), [](double z) { return z * z; },
                         [](double z) { return z * z * z; }}};
    spec.n = 2000;
    spec.seed = 200 + seed;
    const auto d = gen_custom(spec).observed;
    rejected += !measurability_test(d, kSingle, TestConfig{}).accepted;
  }
  CHECK(rejected >= 8);
}

TEST_CASE("measurability: bootstrap decision uses alpha") {
  const auto d = gen_single_instrument(0.0, 400, 8).observed;
  BootstrapOptions opts;
  opts.replicates = 100;
  opts.seed = 1;
  const auto r = measurability_test(d, kSingle, TestConfig{}, opts);
  REQUIRE(r.bootstrap.has_value());
  CHECK(r.accepted == !(r.bootstrap->p_value < 0.05));
  CHECK(r.bootstrap->observed == doctest::Approx(r.r_null - r.r_alt).epsilon(1e-9));
}

TEST_CASE("semi-instrument report composes both stages") {
  for (double c : {0.0, 1.0}) {
    const auto d = gen_single_instrument(c, 1000, 9).observed;
    const TestConfig cfg;
    const auto rep = semi_instrument_test(d, kSingle, cfg);
    CHECK(rep.accepted == (rep.additivity.accepted && rep.measurability.accepted));
    const auto failed = rep.failed_stages();
    CHECK((std::find(failed.begin(), failed.end(), "additivity") != failed.end()) == !rep.additivity.accepted);
    CHECK((std::find(failed.begin(), failed.end(), "measurability") != failed.end()) == !rep.measurability.accepted);
    if (c == 1.0) CHECK(!rep.accepted);
  }
}

TEST_CASE("affine reparameterisation of Z leaves decisions unchanged") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (double c : {0.0, 1.0}) {
      const auto g = gen_single_instrument(c, 500, 300 + seed);
      const auto& d = g.observed;
      Col z2 = col(d, "Z");
      for (double& v : z2) v = -2.5 * v + 7.0;
      Dataset t;
      t.add_column("Z", z2);
      t.add_column("X", col(d, "X"));
      t.add_column("Y", col(d, "Y"));
      const auto a = semi_instrument_test(d, kSingle, TestConfig{});
      const auto b = semi_instrument_test(t, kSingle, TestConfig{});
      CHECK(a.additivity.accepted == b.additivity.accepted);
      CHECK(a.measurability.accepted == b.measurability.accepted);
      CHECK(a.accepted == b.accepted);
    }
  }
}

TEST_CASE("combine instruments: noiseless additive first stage") {
  RandomStream s(10, 1);
  Col z1(200), z2(200), x(200);
  for (int i = 0; i < 200; ++i) {
    z1[i] = s.uniform(0.0, 4.0);
    z2[i] = s.uniform(0.0, 4.0);
    x[i] = z1[i] + z2[i];
  }
  const auto c = combine_instruments(z1, z2, x, TestConfig{});
  const double mx = mean(x);
  for (int i = 0; i < 200; ++i) CHECK(std::abs(c.values[i] - (x[i] - mx)) <= 1e-6);
  CHECK(c.f1.mean == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("combine instruments tracks f1 + f2 and ignores an irrelevant instrument") {
  const auto g = gen_double_instrument(0.0, 500, 11);
  const auto& d = g.observed;
  for (auto mode : {CombineMode::Joint, CombineMode::Marginal}) {
    TestConfig cfg;
    cfg.combine = mode;
    const auto c = combine_instruments(d, kDouble, cfg);
    Col truth(500);
    for (int i = 0; i < 500; ++i) truth[i] = d.column("Z1")[i] * d.column("Z1")[i] + d.column("Z2")[i] * d.column("Z2")[i];
    CHECK(correlation(c.values, truth) >= 0.99);
  }

  RandomStream s(11, 2);
  Col z1(300), z2(300), x(300);
  for (int i = 0; i < 300; ++i) {
    z1[i] = s.uniform(0.0, 4.0);
    z2[i] = s.uniform(0.0, 4.0);
    x[i] = z1[i] * z1[i];
  }
  const auto c = combine_instruments(z1, z2, x, TestConfig{});
  CHECK(c.f2.sd < 1e-8);
  CHECK(c.f1.sd > 1.0);
}

TEST_CASE("combine instruments rejects a duplicated column") {
  const auto d = gen_double_instrument(0.0, 100, 12).observed;
  CHECK_THROWS_AS(combine_instruments(d.column("Z1"), d.column("Z1"), d.column("X"), TestConfig{}), InputError);
  CHECK_THROWS_AS(combine_instruments(d, StructuralRoles{{"Z1", "Z1"}, "X", "Y"}, TestConfig{}), InputError);
  CHECK_THROWS_AS(parse_combine_mode("both"), InputError);
}

TEST_CASE("double-instrument test: equal coefficients accept") {
  // Without a bootstrap the measurability stage compares two almost affinely
  // equivalent predictors and its decision is close to a coin flip.
  int accepted = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    BootstrapOptions opts;
    opts.replicates = 100;
    opts.seed = seed;
    const auto r = double_instrument_test(gen_double_instrument(0.0, 1000, 13 + seed).observed, kDouble, TestConfig{},
                                          opts);
    accepted += r.semi.accepted;
    CHECK(r.semi.measurability.bootstrap.has_value());
  }
  CHECK(accepted >= 4);
}

TEST_CASE("double-instrument test: unequal coefficients with distinguishable instruments reject") {
  // f2 linear, g2 quadratic: E[Z2^2 | Z] is not linear in the combined Z.
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto spec = double_instrument_spec(1.0, 1000, 400 + seed);
    spec.instruments[1].f = [](double z) { return 2.0 * z; };
    rejected += !double_instrument_test(gen_custom(spec).observed, kDouble, TestConfig{}).semi.accepted;
  }
  CHECK(rejected >= 8);
}

TEST_CASE("double-instrument test has no additivity signal for exchangeable instruments") {
  // Z1, Z2 iid with f1 = f2 = z^2 and g2 = z^2: E[Z2^2 | Z1^2 + Z2^2] is half the
  // combined instrument, so Y stays additive in (X, e_x) even though c != 0.
  int accepted = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    accepted += double_instrument_test(gen_double_instrument(1.0, 1000, 400 + seed).observed, kDouble, TestConfig{})
                    .semi.additivity.accepted;
  }
  CHECK(accepted >= 9);
}

TEST_CASE("linear double-instrument test: reject for unequal coefficients at n = 100") {
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = linear_double_instrument_test(gen_double_instrument(1.0, 100, 500 + seed).observed, kDouble,
                                                 TestConfig{});
    rejected += !r.accepted;
    REQUIRE(r.statistic.has_value());
    CHECK(r.accepted == (*r.statistic > 0.0));
    CHECK(r.statistic.value() == doctest::Approx(*r.additive.bic - *r.linear.bic));
  }
  CHECK(rejected >= 19);
}

TEST_CASE("linear double-instrument test: exact linear truth accepts") {
  auto g = gen_double_instrument(0.0, 300, 14);
  const auto& d = g.observed;
  const auto c = combine_instruments(d, kDouble, TestConfig{});
  Dataset e;
  e.add_column("Z1", col(d, "Z1"));
  e.add_column("Z2", col(d, "Z2"));
  e.add_column("X", col(d, "X"));
  Col y(300);
  for (int i = 0; i < 300; ++i) y[i] = 2.0 * c.values[i] + 1.0;
  e.add_column("Y", y);
  const auto r = linear_double_instrument_test(e, kDouble, TestConfig{});
  CHECK(r.linear.exact());
  CHECK(r.accepted);
  CHECK(r.slope == doctest::Approx(2.0));
  CHECK(!r.statistic.has_value());
}

TEST_CASE("linear double-instrument test: weak evidence flag") {
  bool flagged_consistent = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = linear_double_instrument_test(gen_double_instrument(0.2, 200, 600 + seed).observed, kDouble,
                                                 TestConfig{});
    if (r.statistic) flagged_consistent &= r.weak_evidence == (std::abs(*r.statistic) < 2.0);
  }
  CHECK(flagged_consistent);
}
