#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semiiv/dataset.hpp"
#include "semiiv/rng.hpp"

namespace semiiv {

struct Distribution {
  enum class Kind { Uniform, Normal };
  Kind kind = Kind::Uniform;
  double a = 0.0;  // lower bound, or mean
  double b = 1.0;  // upper bound, or standard deviation

  static Distribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static Distribution normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }

  [[nodiscard]] bool valid() const;
  double draw(RandomStream& stream) const;
};

using UnaryFn = std::function<double(double)>;

/// One exogenous instrument with its direct effects f (on X) and g (on Y).
struct InstrumentSpec {
  std::string name;
  Distribution distribution = Distribution::uniform(0.0, 1.0);
  UnaryFn f;
  UnaryFn g;  // empty: no direct effect on Y
};

/// Additive structural model
///
///   T    ~ confounder
///   e_x  = eps_x(T, N(0, noise_x_sd^2))
///   e_y  = eps_y(T, N(0, noise_y_sd^2), e_x)
///   X    = sum_j f_j(Z_j) + e_x
///   Y    = s(X) + sum_j g_j(Z_j) + e_y
///
/// Each instrument, T and the two noises are drawn from their own random
/// stream, so a column's values depend only on (seed, column role).
struct StructuralSpec {
  std::vector<InstrumentSpec> instruments;
  Distribution confounder = Distribution::uniform(0.0, 2.0);
  double noise_x_sd = 0.5;
  double noise_y_sd = 0.5;
  std::function<double(double t, double noise)> eps_x;                // default: t + noise
  std::function<double(double t, double noise, double e_x)> eps_y;    // default: t^2 + noise
  UnaryFn s;                                                          // default: identity
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string treatment_name = "X";
  std::string outcome_name = "Y";
};

/// Observed columns, plus the latent truth (T, eps_x, eps_y) kept apart so no
/// test procedure reads it by accident.
struct GeneratedSample {
  Dataset observed;
  Dataset truth;

  // Observed columns followed by the truth columns prefixed with "truth.".
  [[nodiscard]] Dataset with_truth() const;
};

GeneratedSample gen_custom(const StructuralSpec& spec);

// Z ~ U(0,5), T ~ U(0,2), e_x = T + N(0, 0.5^2), e_y = T^2 + N(0, 0.5^2),
// X = Z^2 + e_x, Y = X^2 + c Z^3 + e_y.
GeneratedSample gen_single_instrument(double c, std::size_t n, std::uint64_t seed);

// Z1, Z2 ~ U(0,4), same T and noises, X = Z1^2 + Z2^2 + e_x, Y = X + c Z2^2 + e_y.
GeneratedSample gen_double_instrument(double c, std::size_t n, std::uint64_t seed);

StructuralSpec single_instrument_spec(double c, std::size_t n, std::uint64_t seed);
StructuralSpec double_instrument_spec(double c, std::size_t n, std::uint64_t seed);

}  // namespace semiiv
