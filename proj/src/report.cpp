#include "semiiv/report.hpp"

#include <sstream>

#include "semiiv/dataset.hpp"

namespace semiiv {

using nlohmann::ordered_json;

namespace {

ordered_json config_json(const TestConfig& cfg) {
  ordered_json j;
  j["smoother"] = {{"degree", cfg.smoother.degree},
                   {"span", cfg.smoother.span},
                   {"kernel", std::string(to_string(cfg.smoother.kernel))}};
  j["additive"] = {{"engine", std::string(to_string(cfg.additive.engine))},
                   {"basis_size", cfg.additive.basis_size},
                   {"tol", cfg.additive.backfit.tol},
                   {"max_iter", cfg.additive.backfit.max_iter}};
  j["combine"] = std::string(to_string(cfg.combine));
  j["alpha"] = cfg.alpha;
  return j;
}

ordered_json summary_json(const ComponentSummary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}};
}

ordered_json combined_json(const CombinedInstrument& c) {
  return {{"mode", std::string(to_string(c.mode))}, {"f1", summary_json(c.f1)}, {"f2", summary_json(c.f2)}};
}

ordered_json semi_body(const SemiInstrumentReport& r) {
  ordered_json j;
  j["decision"] = r.accepted ? "accept" : "reject";
  j["failed_stages"] = r.failed_stages();
  ordered_json add;
  add["decision"] = r.additivity.accepted ? "accept" : "reject";
  add["engine"] = std::string(to_string(r.additivity.engine));
  add["additive"] = to_json(r.additivity.additive);
  add["surface"] = to_json(r.additivity.surface);
  add["convergence"] = to_json(r.additivity.convergence);
  j["additivity"] = add;
  ordered_json meas;
  meas["decision"] = r.measurability.accepted ? "accept" : "reject";
  meas["r_alt"] = r.measurability.r_alt;
  meas["r_null"] = r.measurability.r_null;
  meas["statistic"] = r.measurability.r_null - r.measurability.r_alt;
  if (r.measurability.bootstrap) {
    const auto& b = *r.measurability.bootstrap;
    meas["bootstrap"] = {{"observed", b.observed},
                         {"p_value", b.p_value},
                         {"replicates", b.replicate_count},
                         {"tail", b.tail == Tail::Upper ? "upper" : "lower"}};
  } else {
    meas["bootstrap"] = nullptr;
  }
  j["measurability"] = meas;
  return j;
}

ordered_json envelope(const char* kind, const TestConfig& cfg) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["report"] = kind;
  j["config"] = config_json(cfg);
  return j;
}

std::string fmt(double v) { return format_double(v); }

std::string fmt(const ModelScore& s) {
  std::ostringstream out;
  out << "BIC " << (s.exact() ? std::string("exact fit") : fmt(*s.bic)) << " (rss " << fmt(s.rss) << ", df "
      << fmt(s.df) << ")";
  return out.str();
}

void write_semi_text(std::ostream& out, const SemiInstrumentReport& r) {
  out << "additivity:    " << (r.additivity.accepted ? "accept" : "reject") << '\n'
      << "  additive (" << to_string(r.additivity.engine) << ") " << fmt(r.additivity.additive) << '\n'
      << "  surface          " << fmt(r.additivity.surface) << '\n';
  if (!r.additivity.convergence.converged) {
    out << "  warning: backfitting did not converge after " << r.additivity.convergence.iterations << " sweeps\n";
  }
  out << "measurability: " << (r.measurability.accepted ? "accept" : "reject") << '\n'
      << "  R_A " << fmt(r.measurability.r_alt) << ", R_N " << fmt(r.measurability.r_null) << '\n';
  if (r.measurability.bootstrap) {
    out << "  bootstrap p-value " << fmt(r.measurability.bootstrap->p_value) << " over "
        << r.measurability.bootstrap->replicate_count << " replicates\n";
  }
  out << "decision:      " << (r.accepted ? "accept" : "reject") << '\n';
}

void flatten(const ordered_json& j, const std::string& prefix, std::ostream& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (j.is_array()) {
    std::string joined;
    for (const auto& v : j) {
      if (!joined.empty()) joined += ';';
      joined += v.is_string() ? v.get<std::string>() : v.dump();
    }
    out << prefix << ',' << joined << '\n';
  } else if (j.is_string()) {
    out << prefix << ',' << j.get<std::string>() << '\n';
  } else if (j.is_null()) {
    out << prefix << ",\n";
  } else {
    out << prefix << ',' << j.dump() << '\n';
  }
}

}  // namespace

ordered_json to_json(const ModelScore& score) {
  ordered_json j;
  j["n"] = score.n;
  j["rss"] = score.rss;
  j["df"] = score.df;
  j["bic"] = score.bic ? ordered_json(*score.bic) : ordered_json(nullptr);
  j["exact_fit"] = score.exact();
  return j;
}

ordered_json to_json(const ConvergenceRecord& record) {
  return {{"converged", record.converged}, {"iterations", record.iterations}, {"final_change", record.final_change}};
}

ordered_json to_json(const SemiInstrumentReport& report, const TestConfig& cfg) {
  auto j = envelope("semi_instrument", cfg);
  j.update(semi_body(report));
  return j;
}

ordered_json to_json(const DoubleSemiInstrumentReport& report, const TestConfig& cfg) {
  auto j = envelope("double_instrument", cfg);
  j["combined_instrument"] = combined_json(report.combined);
  j.update(semi_body(report.semi));
  j["note"] = "a rejection does not identify which instrument fails";
  return j;
}

ordered_json to_json(const DoubleInstrumentReport& report, const TestConfig& cfg) {
  auto j = envelope("linear_double_instrument", cfg);
  j["decision"] = report.accepted ? "accept" : "reject";
  j["statistic"] = report.statistic ? ordered_json(*report.statistic) : ordered_json(nullptr);
  j["weak_evidence"] = report.weak_evidence;
  j["combined_instrument"] = combined_json(report.combined);
  j["linear"] = to_json(report.linear);
  j["linear"]["slope"] = report.slope;
  j["linear"]["intercept"] = report.intercept;
  j["additive"] = to_json(report.additive);
  j["additive"]["convergence"] = to_json(report.convergence);
  return j;
}

std::string dump_report(const ordered_json& report) { return report.dump(2) + "\n"; }

std::string render_text(const SemiInstrumentReport& report) {
  std::ostringstream out;
  out << "semi-instrument test\n";
  write_semi_text(out, report);
  return out.str();
}

std::string render_text(const DoubleSemiInstrumentReport& report) {
  std::ostringstream out;
  out << "double-instrument test (combined instrument, " << to_string(report.combined.mode) << " fit)\n";
  write_semi_text(out, report.semi);
  if (!report.semi.accepted) out << "note: the test cannot tell which instrument fails\n";
  return out.str();
}

std::string render_text(const DoubleInstrumentReport& report) {
  std::ostringstream out;
  out << "linear double-instrument test\n"
      << "  linear   " << fmt(report.linear) << '\n'
      << "  additive " << fmt(report.additive) << '\n';
  if (report.statistic) out << "  BIC_a - BIC_l = " << fmt(*report.statistic) << '\n';
  if (report.weak_evidence) out << "  warning: |BIC_a - BIC_l| is small; weak evidence\n";
  if (!report.convergence.converged) out << "  warning: backfitting did not converge\n";
  out << "decision: " << (report.accepted ? "accept (same linear coefficients)" : "reject") << '\n';
  return out.str();
}

std::string render_csv(const ordered_json& report) {
  std::ostringstream out;
  out << "field,value\n";
  flatten(report, "", out);
  return out.str();
}

}  // namespace semiiv
