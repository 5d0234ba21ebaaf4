#pragma once

#include <string>

#include <json.hpp>

#include "semiiv/ivtest.hpp"

namespace semiiv {

// Bumped whenever a field is renamed or removed.
inline constexpr int kReportSchemaVersion = 1;

// Exact fits have no finite BIC: "bic" is null and "exact_fit" is true.
nlohmann::ordered_json to_json(const ModelScore& score);
nlohmann::ordered_json to_json(const ConvergenceRecord& record);
nlohmann::ordered_json to_json(const SemiInstrumentReport& report, const TestConfig& cfg);
nlohmann::ordered_json to_json(const DoubleSemiInstrumentReport& report, const TestConfig& cfg);
nlohmann::ordered_json to_json(const DoubleInstrumentReport& report, const TestConfig& cfg);

// Canonical text form; parse(dump_report(j)) re-emits the same bytes.
std::string dump_report(const nlohmann::ordered_json& report);

std::string render_text(const SemiInstrumentReport& report);
std::string render_text(const DoubleSemiInstrumentReport& report);
std::string render_text(const DoubleInstrumentReport& report);

// Flattens a JSON report into "field,value" rows with dotted field paths.
std::string render_csv(const nlohmann::ordered_json& report);

}  // namespace semiiv
