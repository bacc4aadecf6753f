// liouville: command-line front end.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "liouville/pipeline.hpp"
#include "liouville/report.hpp"

using namespace liouville;

namespace {

struct Flags {
    std::string system;
    std::vector<std::string> params;
    std::string system_file;
    std::string config;
    std::string out;
    std::uint64_t seed = 1;
    int seeds = 0;
    int rank0_seeds = -1;
    std::vector<std::string> tolerances;
    std::vector<double> j_grid;
    std::vector<double> image_box;
    std::string gx, gy, ginvx, ginvy;
    std::vector<double> cone;
    bool no_cone = false;
    std::optional<bool> compact;
    std::optional<bool> proper;
    std::optional<bool> finite;
    std::string morse_f;
    int fiber_budget = 0;
    int spot_checks = 5;
    std::vector<std::string> fibers;
    int samples = 10000;
    double band_tol = 1e-3;
    bool export_fibers = false;
    bool json_stdout = false;
};

std::pair<std::string, double> key_value(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + s + "'");
    try {
        std::size_t used = 0;
        const double v = std::stod(s.substr(eq + 1), &used);
        if (used != s.size() - eq - 1) throw std::invalid_argument("trailing");
        return {s.substr(0, eq), v};
    } catch (const std::exception&) {
        throw ConfigError("bad number in '" + s + "'");
    }
}

Point2 pair_of(const std::string& s) {
    std::stringstream ss(s);
    double a, b;
    char comma;
    if (!(ss >> a >> comma >> b) || comma != ',') throw ConfigError("expected x,y, got '" + s + "'");
    return {a, b};
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("system", f.system, "catalog system name");
    sub->add_option("-p,--param", f.params, "system parameter key=value (repeatable)");
    sub->add_option("--system-file", f.system_file, "JSON system definition");
    sub->add_option("-c,--config", f.config, "JSON config file; its keys override flags");
    sub->add_option("-o,--out", f.out, "output directory (default: $LIOUVILLE_OUT or .)");
    sub->add_option("--seed", f.seed, "RNG seed");
    sub->add_option("--seeds", f.seeds, "critical-point search seeds");
    sub->add_option("--rank0-seeds", f.rank0_seeds, "seeds also tried with the rank-0 solver");
    sub->add_option("--tol", f.tolerances, "tolerance override key=value (repeatable)");
    sub->add_option("--j-grid", f.j_grid, "envelope grid lo hi step")->expected(3)->delimiter(',');
    sub->add_option("--image-box", f.image_box, "image box xlo xhi ylo yhi")->expected(4)->delimiter(',');
    sub->add_option("--g-x", f.gx, "first component of g in v1 = J, v2 = H");
    sub->add_option("--g-y", f.gy, "second component of g");
    sub->add_option("--g-inv-x", f.ginvx, "first component of the inverse of g");
    sub->add_option("--g-inv-y", f.ginvy, "second component of the inverse of g");
    sub->add_option("--cone", f.cone, "cone alpha,beta[,vx,vy] in radians")->expected(2, 4)->delimiter(',');
    sub->add_flag("--no-cone", f.no_cone, "ignore any recommended cone");
    sub->add_flag_callback("--compact", [&f] { f.compact = true; }, "assert that M is compact");
    sub->add_flag_callback("--non-compact", [&f] { f.compact = false; }, "do not assume compactness");
    sub->add_flag_callback("--proper", [&f] { f.proper = true; }, "assert that F is proper");
    sub->add_flag_callback("--not-proper", [&f] { f.proper = false; }, "do not assume properness");
    sub->add_flag_callback("--finite-critical", [&f] { f.finite = true; },
                           "assert finitely many interior critical values");
    sub->add_flag_callback("--infinite-critical", [&f] { f.finite = false; },
                           "withdraw the finite-critical-values assertion");
    sub->add_option("--morse-f", f.morse_f, "f(x, y) for the Morse-Bott audit");
    sub->add_option("--fiber-budget", f.fiber_budget, "seeds per fiber at the first density");
    sub->add_option("--spot-checks", f.spot_checks, "spot-check fibers in the verdict");
    sub->add_option("--fiber", f.fibers, "sample the fiber over x,y (repeatable)");
    sub->add_option("--samples", f.samples, "image samples for the structure check");
    sub->add_option("--band-tol", f.band_tol, "allowed excess over the envelopes");
    sub->add_flag("--export-fibers", f.export_fibers, "write fiber point clouds as CSV");
    sub->add_flag("--print", f.json_stdout, "also print the JSON report");
}

RunConfig to_config(const Flags& f) {
    RunConfig c;
    c.system = f.system;
    for (const auto& p : f.params) c.params.insert(key_value(p));
    c.system_file = f.system_file;
    if (const char* env = std::getenv("LIOUVILLE_OUT"); env && *env) c.out_dir = env;
    if (!f.out.empty()) c.out_dir = f.out;
    c.rng_seed = f.seed;
    if (f.seeds > 0) c.seeds = f.seeds;
    if (f.rank0_seeds >= 0) c.rank0_seeds = f.rank0_seeds;
    for (const auto& t : f.tolerances) c.tolerances.insert(key_value(t));
    if (!f.j_grid.empty()) c.j_grid = Grid1{f.j_grid[0], f.j_grid[1], f.j_grid[2]};
    if (!f.image_box.empty()) c.image_box = Box2{f.image_box[0], f.image_box[1], f.image_box[2], f.image_box[3]};
    if (!f.gx.empty() || !f.gy.empty()) {
        DiffeoSpec g;
        if (!f.gx.empty()) g.gx = f.gx;
        if (!f.gy.empty()) g.gy = f.gy;
        if (!f.ginvx.empty() && !f.ginvy.empty()) {
            g.inv_x = f.ginvx;
            g.inv_y = f.ginvy;
        }
        c.g = g;
    }
    if (!f.cone.empty()) {
        if (f.cone.size() != 2 && f.cone.size() != 4) throw ConfigError("--cone takes alpha,beta or alpha,beta,vx,vy");
        ConeSpec cs{f.cone[0], f.cone[1], Point2::Zero()};
        if (f.cone.size() == 4) cs.vertex = {f.cone[2], f.cone[3]};
        c.cone = cs;
    }
    c.no_cone = f.no_cone;
    c.compact = f.compact;
    c.proper = f.proper;
    c.finite_interior_critical_values = f.finite;
    if (!f.morse_f.empty()) c.morse_f = f.morse_f;
    if (f.fiber_budget > 0) c.fiber_budget = f.fiber_budget;
    c.spot_checks = f.spot_checks;
    for (const auto& s : f.fibers) c.fiber_values.push_back(pair_of(s));
    c.samples = f.samples;
    c.band_tol = f.band_tol;
    c.export_fibers = f.export_fibers;
    if (!f.config.empty()) apply_config_file(c, f.config);
    return c;
}

std::string path_in(const RunConfig& c, const std::string& name) { return c.out_dir + "/" + name; }

void emit(const RunConfig& c, const std::string& name, const nlohmann::json& j, bool print) {
    write_text(path_in(c, name), dump(j));
    if (print) std::cout << dump(j);
    std::cerr << "wrote " << path_in(c, name) << "\n";
}

int cmd_classify(const RunConfig& c, const ResolvedRun& run, bool print) {
    const auto r = run_classify(run, c.rng_seed);
    emit(c, "classify.json", classify_report(run, r), print);
    int r0 = 0, r1 = 0;
    for (const auto& rec : r.search.records) {
        if (rec.rank == 0) {
            ++r0;
            std::cout << "rank 0  " << to_string(rec.wtype) << "  at (" << format_number(rec.image.x()) << ", "
                      << format_number(rec.image.y()) << ")\n";
        } else {
            ++r1;
        }
    }
    std::cout << r0 << " rank-0 records, " << r1 << " rank-1 representatives; almost-toric "
              << (r.audit.pass ? "PASS" : "FAIL") << "\n";
    return r.exit_code;
}

std::vector<std::string> write_diagram_files(const RunConfig& c, const DiagramResult& r, const std::string& title) {
    std::vector<std::string> files;
    for (std::size_t i = 0; i < r.diagram.strata.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "stratum_%03zu.csv", i);
        write_text(path_in(c, name), stratum_csv(r.diagram.strata[i]));
        files.emplace_back(name);
    }
    write_text(path_in(c, "isolated.csv"), isolated_csv(r.diagram));
    files.emplace_back("isolated.csv");
    if (!r.diagram.envelopes.empty()) {
        write_text(path_in(c, "envelope.csv"), envelope_csv(r.diagram.envelopes));
        files.emplace_back("envelope.csv");
    }
    write_text(path_in(c, "diagram.svg"), diagram_svg(r.diagram, title));
    files.emplace_back("diagram.svg");
    write_text(path_in(c, "diagram_g.svg"), diagram_svg(r.mapped, title + " after g"));
    files.emplace_back("diagram_g.svg");
    return files;
}

int cmd_diagram(const RunConfig& c, const ResolvedRun& run, bool print) {
    const auto r = run_diagram(run, c, true);
    const auto files = write_diagram_files(c, r, run.sys.name);
    emit(c, "diagram.json", diagram_report(run, r, files), print);
    std::cout << r.diagram.strata.size() << " strata, " << r.diagram.isolated_values.size() << " rank-0 values, "
              << r.mapped.tangencies.size() << " vertical tangencies after g";
    if (r.structure) std::cout << "; image structure " << (r.structure->pass() ? "PASS" : "FAIL");
    std::cout << "\n";
    return 0;
}

int cmd_envelopes(const RunConfig& c, const ResolvedRun& run, bool print) {
    const auto r = run_diagram(run, c, true);
    write_text(path_in(c, "envelope.csv"), envelope_csv(r.diagram.envelopes));
    emit(c, "envelopes.json", envelope_report(run, r), print);
    std::cout << r.diagram.envelopes.x.size() << " grid points; image structure "
              << (r.structure && r.structure->pass() ? "PASS" : "FAIL") << "\n";
    return 0;
}

int cmd_connectivity(const RunConfig& c, const ResolvedRun& run, bool print) {
    const auto r = run_connectivity(run, c);
    emit(c, "connectivity.json", connectivity_report(run, r), print);
    if (c.export_fibers)
        for (std::size_t i = 0; i < r.fibers.size(); ++i)
            write_text(path_in(c, "fiber_" + std::to_string(i) + ".csv"), fiber_csv(r.fibers[i]));
    std::cout << to_string(r.verdict.kind);
    if (!r.verdict.failed.empty()) std::cout << " (failed: " << r.verdict.failed << ")";
    std::cout << "\nspot checks:";
    for (const auto& s : r.verdict.spot_checks) std::cout << " " << s.components;
    std::cout << "\nMorse-Bott audit: " << (r.morse_bott.pass ? "PASS" : "FAIL") << "\n";
    for (const auto& f : r.fibers)
        std::cout << "fiber (" << format_number(f.target.x()) << ", " << format_number(f.target.y())
                  << "): " << f.components << " component(s)" << (f.stable ? "" : ", unstable") << "\n";
    return r.exit_code;
}

int cmd_audit(const RunConfig& c, const ResolvedRun& run, bool print) {
    const auto r = run_audit(run, c);
    emit(c, "audit.json", audit_report(run, r), print);
    const bool ok = r.bracket.pass && r.classify.audit.pass && r.morse_bott.pass &&
                    (!r.diagram.structure || r.diagram.structure->pass());
    std::cout << "bracket " << (r.bracket.pass ? "PASS" : "FAIL") << ", almost-toric "
              << (r.classify.audit.pass ? "PASS" : "FAIL") << ", Morse-Bott " << (r.morse_bott.pass ? "PASS" : "FAIL")
              << ", image structure " << (r.diagram.structure && r.diagram.structure->pass() ? "PASS" : "FAIL") << "\n";
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Singularities, bifurcation diagrams and fiber connectivity of integrable systems F = (J, H)"};
    app.require_subcommand(1);
    Flags f;
    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&, const ResolvedRun&, bool);
    };
    const Sub subs[] = {
        {"classify", "locate and classify critical points (exit 2 on degenerate or hyperbolic points)", cmd_classify},
        {"diagram", "trace the bifurcation diagram; write CSV, SVG and a JSON summary", cmd_diagram},
        {"envelopes", "compute H- and H+ over the J grid and check the image description", cmd_envelopes},
        {"connectivity", "connectivity verdict (exit 0 guaranteed, 2 weak, 3 no guarantee)", cmd_connectivity},
        {"audit", "bracket, almost-toric, Morse-Bott and image-structure checks", cmd_audit},
    };
    std::vector<CLI::App*> apps;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, f);
        apps.push_back(sub);
    }
    auto* cat = app.add_subcommand("catalog", "list the built-in systems");
    bool cat_json = false;
    cat->add_flag("--json", cat_json, "print the catalog as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (cat->parsed()) {
        if (cat_json) {
            std::cout << dump(catalog_json());
        } else {
            for (const auto& e : catalog()) {
                std::cout << e.name;
                for (const auto& [k, v] : e.params) std::cout << " " << k << "=" << format_number(v);
                std::cout << "\n    " << e.description << "\n";
            }
        }
        return 0;
    }

    for (std::size_t i = 0; i < apps.size(); ++i) {
        if (!apps[i]->parsed()) continue;
        try {
            const RunConfig cfg = to_config(f);
            const ResolvedRun run = resolve(cfg);
            return subs[i].run(cfg, run, f.json_stdout);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}
