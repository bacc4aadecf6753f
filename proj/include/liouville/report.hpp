#pragma once

// Serialisation of pipeline results: JSON reports, CSV curves, SVG diagrams.
// Output is a pure function of its inputs (no timestamps, fixed number format).

#include <string>
#include <vector>

#include <json.hpp>

#include "liouville/pipeline.hpp"

namespace liouville {

inline constexpr int kReportVersion = 1;

nlohmann::json to_json(const CriticalPointRecord& r, bool with_point = true);
nlohmann::json to_json(const StructureReport& s);
nlohmann::json to_json(const MorseBottReport& m);
nlohmann::json to_json(const FiberSample& f, bool with_points = false);
nlohmann::json to_json(const ConnectivityVerdict& v);
nlohmann::json to_json(const BracketCheck& b);
nlohmann::json settings_json(const ResolvedRun& run);

nlohmann::json classify_report(const ResolvedRun& run, const ClassifyResult& r);
/// `files` lists the CSV/SVG names written next to the report.
nlohmann::json diagram_report(const ResolvedRun& run, const DiagramResult& r, const std::vector<std::string>& files);
nlohmann::json envelope_report(const ResolvedRun& run, const DiagramResult& r);
nlohmann::json connectivity_report(const ResolvedRun& run, const ConnectivityResult& r);
nlohmann::json audit_report(const ResolvedRun& run, const AuditResult& r);
nlohmann::json catalog_json();

/// Shortest round-trip decimal form.
std::string format_number(double v);

std::string stratum_csv(const Stratum& s);
std::string envelope_csv(const Envelopes& e);
std::string isolated_csv(const BifurcationDiagram& d);
std::string fiber_csv(const FiberSample& f);
/// Diagram drawing: strata coloured by type, rank-0 values as dots
/// (filled for focus-focus), envelopes dashed when present.
std::string diagram_svg(const BifurcationDiagram& d, const std::string& title);

/// Writes text, creating parent directories.
void write_text(const std::string& path, const std::string& text);
/// JSON with two-space indentation and a trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace liouville
