#pragma once

// Run configuration and the end-to-end analyses driven by the command line.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "liouville/bifurcation.hpp"
#include "liouville/connectivity.hpp"
#include "liouville/singular.hpp"
#include "liouville/systems.hpp"

namespace liouville {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string system;                 // catalog name
    Params params;
    std::string system_file;            // JSON definition; takes precedence over `system`
    std::map<std::string, double> tolerances;
    std::optional<int> seeds;
    std::optional<int> rank0_seeds;
    std::optional<Grid1> j_grid;
    std::optional<Box2> image_box;
    std::optional<DiffeoSpec> g;
    std::optional<ConeSpec> cone;
    bool no_cone = false;               // drop a cone the system recommends
    std::optional<bool> compact;
    std::optional<bool> proper;
    std::optional<bool> finite_interior_critical_values;
    std::optional<std::string> morse_f;
    std::optional<int> fiber_budget;
    int spot_checks = 5;
    std::vector<Point2> fiber_values;   // extra fibers to sample
    int samples = 10000;                // image samples for the structure check
    double band_tol = 1e-3;             // allowed excess over H± in the structure check
    bool export_fibers = false;
    std::string out_dir = ".";
    std::uint64_t rng_seed = 1;
};

/// Applies the keys of a JSON object (given as text) on top of `cfg`.
/// Throws ConfigError on unknown keys or ill-typed values.
void apply_config_json(RunConfig& cfg, const std::string& json_text);
void apply_config_file(RunConfig& cfg, const std::string& path);

/// Throws ConfigError unless every tolerance override is positive and known.
void validate(const RunConfig& cfg);

/// A system definition loaded from JSON, with the pipeline settings it carries.
struct SystemFile {
    SystemDef sys;
    RunDefaults defaults;
};
SystemFile parse_system_json(const std::string& json_text);
SystemFile load_system_file(const std::string& path);

/// The system and effective settings of one run.
struct ResolvedRun {
    SystemDef sys;
    RunDefaults settings;  // catalog or file defaults with config overrides applied
    std::string source;    // catalog name or file path
    std::optional<ReferenceData> reference;
    int rank0_seeds = 600;
};
ResolvedRun resolve(const RunConfig& cfg);

// ------------------------------------------------------------------ analyses

struct ClassifyResult {
    CriticalSearch search;
    AlmostToricVerdict audit;
    /// 0, or 2 when a degenerate, unresolved or hyperbolic-type record was found.
    int exit_code = 0;
};
ClassifyResult run_classify(const ResolvedRun& run, std::uint64_t rng_seed);

struct DiagramResult {
    CriticalSearch search;
    BifurcationDiagram diagram;         // (J, H) plane
    BifurcationDiagram mapped;          // after g
    std::optional<StructureReport> structure;
};
/// `envelopes` also computes H± and validates the image description.
DiagramResult run_diagram(const ResolvedRun& run, const RunConfig& cfg, bool envelopes);

struct ConnectivityResult {
    DiagramResult diagram;
    ConnectivityVerdict verdict;
    MorseBottReport morse_bott;
    std::vector<FiberSample> fibers;    // requested fibers (cfg.fiber_values)
    int exit_code = 3;                  // 0 guaranteed, 2 weak, 3 no guarantee
};
ConnectivityResult run_connectivity(const ResolvedRun& run, const RunConfig& cfg);

struct BracketCheck {
    int samples = 0;
    double max_relative = 0.0;  // max |{J,H}| / (1 + |dJ||dH|)
    double max_antisymmetry = 0.0;
    bool pass = true;
};
BracketCheck check_bracket(const SystemDef& sys, int samples, std::uint64_t rng_seed);

struct AuditResult {
    BracketCheck bracket;
    ClassifyResult classify;
    MorseBottReport morse_bott;
    DiagramResult diagram;
};
AuditResult run_audit(const ResolvedRun& run, const RunConfig& cfg);

}  // namespace liouville
