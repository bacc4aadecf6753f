#include "liouville/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "liouville/sampling.hpp"

namespace liouville {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

template <class T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("key '") + key + "': " + e.what());
    }
}

Box2 box_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4 || !(v[0] < v[1]) || !(v[2] < v[3]))
        throw ConfigError("image_box must be [xlo, xhi, ylo, yhi] with xlo < xhi, ylo < yhi");
    return {v[0], v[1], v[2], v[3]};
}

Grid1 grid_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3 || !(v[2] > 0) || v[1] < v[0]) throw ConfigError("j_grid must be [lo, hi, step] with step > 0");
    return {v[0], v[1], v[2]};
}

DiffeoSpec diffeo_from(const json& j) {
    DiffeoSpec g;
    if (j.contains("x")) g.gx = j["x"].get<std::string>();
    if (j.contains("y")) g.gy = j["y"].get<std::string>();
    if (j.contains("inverse_x") != j.contains("inverse_y")) throw ConfigError("g needs both inverse_x and inverse_y");
    if (j.contains("inverse_x")) {
        g.inv_x = j["inverse_x"].get<std::string>();
        g.inv_y = j["inverse_y"].get<std::string>();
    }
    return g;
}

ConeSpec cone_from(const json& j) {
    ConeSpec c;
    c.alpha = get<double>(j, "alpha");
    c.beta = get<double>(j, "beta");
    if (j.contains("vertex")) {
        const auto v = j["vertex"].get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("cone vertex must have two entries");
        c.vertex = {v[0], v[1]};
    }
    if (!(c.alpha > 0 && c.beta > 0 && c.alpha + c.beta < std::numbers::pi))
        throw ConfigError("cone needs alpha > 0, beta > 0, alpha + beta < pi");
    return c;
}

void set_tolerance(Tolerances& t, const std::string& key, double v) {
    if (!(v > 0)) throw ConfigError("tolerance '" + key + "' must be positive");
    if (key == "constraint") t.constraint = v;
    else if (key == "sympl") t.sympl = v;
    else if (key == "poisson") t.poisson = v;
    else if (key == "rank") t.rank = v;
    else if (key == "nondeg") t.nondeg = v;
    else if (key == "dedup") t.dedup = v;
    else if (key == "trace_step") t.trace_step = v;
    else if (key == "min_step") t.min_step = v;
    else if (key == "tang") t.tang = v;
    else if (key == "env") t.env = v;
    else if (key == "max_iter") t.max_iter = static_cast<int>(v);
    else if (key == "max_halvings") t.max_halvings = static_cast<int>(v);
    else throw ConfigError("unknown tolerance '" + key + "'");
}

void apply_defaults_json(RunDefaults& d, const json& j) {
    for (const auto& [k, v] : j.items()) {
        if (k == "image_box") d.image_box = box_from(v);
        else if (k == "j_grid") d.j_grid = grid_from(v);
        else if (k == "g") d.g = diffeo_from(v);
        else if (k == "cone") d.cone = v.is_null() ? std::nullopt : std::optional<ConeSpec>(cone_from(v));
        else if (k == "compact") d.compact = v.get<bool>();
        else if (k == "finite_interior_critical_values") d.finite_interior_critical_values = v.get<bool>();
        else if (k == "morse_f") d.morse_f = v.get<std::string>();
        else if (k == "seeds") d.seeds = v.get<int>();
        else if (k == "fiber_budget") d.fiber_budget = v.get<int>();
        else throw ConfigError("unknown defaults key '" + k + "'");
    }
}

bool hyperbolic_or_bad(WilliamsonType t) {
    return t == WilliamsonType::Degenerate || t == WilliamsonType::Unresolved ||
           t == WilliamsonType::TransversallyHyperbolic || t == WilliamsonType::HyperbolicElliptic ||
           t == WilliamsonType::HyperbolicHyperbolic;
}

}  // namespace

// ------------------------------------------------------------------ config

void apply_config_json(RunConfig& cfg, const std::string& json_text) {
    const json j = parse_json(json_text, "config");
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        for (const auto& [k, v] : j.items()) {
            if (k == "system") cfg.system = v.get<std::string>();
            else if (k == "params") cfg.params = v.get<Params>();
            else if (k == "system_file") cfg.system_file = v.get<std::string>();
            else if (k == "tolerances")
                for (const auto& [tk, tv] : v.items()) cfg.tolerances[tk] = tv.get<double>();
            else if (k == "seeds") cfg.seeds = v.get<int>();
            else if (k == "rank0_seeds") cfg.rank0_seeds = v.get<int>();
            else if (k == "j_grid") cfg.j_grid = grid_from(v);
            else if (k == "image_box") cfg.image_box = box_from(v);
            else if (k == "g") cfg.g = diffeo_from(v);
            else if (k == "cone") {
                if (v.is_null()) {
                    cfg.cone.reset();
                    cfg.no_cone = true;
                } else {
                    cfg.cone = cone_from(v);
                    cfg.no_cone = false;
                }
            } else if (k == "compact") cfg.compact = v.get<bool>();
            else if (k == "proper") cfg.proper = v.get<bool>();
            else if (k == "finite_interior_critical_values") cfg.finite_interior_critical_values = v.get<bool>();
            else if (k == "morse_f") cfg.morse_f = v.get<std::string>();
            else if (k == "fiber_budget") cfg.fiber_budget = v.get<int>();
            else if (k == "spot_checks") cfg.spot_checks = v.get<int>();
            else if (k == "fiber_values") {
                cfg.fiber_values.clear();
                for (const auto& p : v) {
                    const auto xy = p.get<std::vector<double>>();
                    if (xy.size() != 2) throw ConfigError("fiber_values entries must be [x, y]");
                    cfg.fiber_values.emplace_back(xy[0], xy[1]);
                }
            } else if (k == "samples") cfg.samples = v.get<int>();
            else if (k == "band_tol") cfg.band_tol = v.get<double>();
            else if (k == "export_fibers") cfg.export_fibers = v.get<bool>();
            else if (k == "out") cfg.out_dir = v.get<std::string>();
            else if (k == "seed") cfg.rng_seed = v.get<std::uint64_t>();
            else throw ConfigError("unknown config key '" + k + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

void apply_config_file(RunConfig& cfg, const std::string& path) { apply_config_json(cfg, read_file(path)); }

void validate(const RunConfig& cfg) {
    Tolerances probe;
    for (const auto& [k, v] : cfg.tolerances) set_tolerance(probe, k, v);
    if (cfg.system.empty() && cfg.system_file.empty()) throw ConfigError("no system given");
    if (cfg.seeds && *cfg.seeds < 1) throw ConfigError("seeds must be positive");
    if (cfg.rank0_seeds && *cfg.rank0_seeds < 0) throw ConfigError("rank0_seeds must be non-negative");
    if (cfg.fiber_budget && *cfg.fiber_budget < 1) throw ConfigError("fiber_budget must be positive");
    if (cfg.samples < 1) throw ConfigError("samples must be positive");
    if (!(cfg.band_tol > 0)) throw ConfigError("band_tol must be positive");
    if (cfg.spot_checks < 0) throw ConfigError("spot_checks must be non-negative");
}

// ------------------------------------------------------------------ system files

SystemFile parse_system_json(const std::string& json_text) {
    const json j = parse_json(json_text, "system file");
    try {
        const auto vars = get<std::vector<std::string>>(j, "variables");
        const int dim = j.contains("ambient_dim") ? j["ambient_dim"].get<int>() : static_cast<int>(vars.size());
        if (dim != static_cast<int>(vars.size())) throw ConfigError("ambient_dim does not match the variable list");

        std::vector<FormBlock> form;
        const json& f = j.at("form");
        if (f.is_string()) {
            if (f.get<std::string>() != "canonical" || dim % 2) throw ConfigError("form \"canonical\" needs an even dimension");
            form = PhaseSpace::canonical_form(dim / 2);
        } else {
            for (const auto& b : f) {
                FormBlock fb;
                fb.weight = b.value("weight", 1.0);
                if (b.contains("pair")) {
                    fb.kind = FormBlock::Kind::Pair;
                    fb.idx = b["pair"].get<std::vector<int>>();
                    if (fb.idx.size() != 2) throw ConfigError("pair blocks take two indices");
                } else if (b.contains("sphere")) {
                    fb.kind = FormBlock::Kind::Sphere;
                    fb.idx = b["sphere"].get<std::vector<int>>();
                    if (fb.idx.size() != 3) throw ConfigError("sphere blocks take three indices");
                } else {
                    throw ConfigError("form blocks need \"pair\" or \"sphere\"");
                }
                for (int& i : fb.idx) {
                    if (i < 1 || i > dim) throw ConfigError("form index out of range (indices are 1-based)");
                    --i;
                }
                form.push_back(std::move(fb));
            }
        }

        std::vector<ScalarField> cons;
        for (const auto& c : j.value("constraints", std::vector<std::string>{})) cons.push_back(parse_expr(c, dim, vars));

        std::vector<Interval> box;
        for (const auto& iv : get<std::vector<std::vector<double>>>(j, "seed_box")) {
            if (iv.size() != 2 || !(iv[0] < iv[1])) throw ConfigError("seed_box entries must be [lo, hi] with lo < hi");
            box.push_back({iv[0], iv[1]});
        }
        if (static_cast<int>(box.size()) != dim) throw ConfigError("seed_box needs one interval per variable");

        std::vector<int> periodic;
        for (int p : j.value("periodic_dims", std::vector<int>{})) {
            if (p < 1 || p > dim) throw ConfigError("periodic_dims are 1-based variable indices");
            periodic.push_back(p - 1);
        }

        Tolerances tol;
        if (j.contains("tolerances"))
            for (const auto& [k, v] : j["tolerances"].items()) set_tolerance(tol, k, v.get<double>());

        PhaseSpace sp(dim, std::move(cons), std::move(form), std::move(box), std::move(periodic), tol, vars);
        SystemFile out{SystemDef{j.value("name", std::string("custom")), sp, parse_expr(get<std::string>(j, "J"), dim, vars),
                                 parse_expr(get<std::string>(j, "H"), dim, vars), j.value("proper", false)},
                       RunDefaults{}};
        out.defaults.image_box = {-5, 5, -5, 5};
        out.defaults.j_grid = {-5, 5, 0.05};
        if (j.contains("defaults")) apply_defaults_json(out.defaults, j["defaults"]);
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("system file: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(std::string("system file expression: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("system file: ") + e.what());
    }
}

SystemFile load_system_file(const std::string& path) { return parse_system_json(read_file(path)); }

ResolvedRun resolve(const RunConfig& cfg) {
    validate(cfg);
    std::optional<ResolvedRun> run;
    try {
        if (!cfg.system_file.empty()) {
            auto sf = load_system_file(cfg.system_file);
            run = ResolvedRun{std::move(sf.sys), std::move(sf.defaults), cfg.system_file, std::nullopt};
        } else {
            run = ResolvedRun{build(cfg.system, cfg.params), run_defaults(cfg.system, cfg.params), cfg.system,
                              reference_data(cfg.system, cfg.params)};
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const DegenerateEmbedding& e) {
        throw ConfigError(std::string("phase space: ") + e.what());
    }
    ResolvedRun& r = *run;
    for (const auto& [k, v] : cfg.tolerances) set_tolerance(r.sys.space.tol(), k, v);
    RunDefaults& s = r.settings;
    if (cfg.seeds) s.seeds = *cfg.seeds;
    r.rank0_seeds = cfg.rank0_seeds ? *cfg.rank0_seeds : std::min(600, s.seeds);
    if (cfg.j_grid) s.j_grid = *cfg.j_grid;
    if (cfg.image_box) s.image_box = *cfg.image_box;
    if (cfg.g) s.g = *cfg.g;
    if (cfg.cone) s.cone = cfg.cone;
    if (cfg.no_cone) s.cone.reset();
    if (cfg.compact) s.compact = *cfg.compact;
    if (cfg.proper) r.sys.proper = *cfg.proper;
    if (cfg.finite_interior_critical_values) s.finite_interior_critical_values = *cfg.finite_interior_critical_values;
    if (cfg.morse_f) s.morse_f = *cfg.morse_f;
    if (cfg.fiber_budget) s.fiber_budget = *cfg.fiber_budget;
    try {
        PlaneDiffeo check(s.g);
        if (s.morse_f.empty()) throw ConfigError("empty morse_f");
        parse_expr(s.morse_f, 2, {"x", "y"});
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("g: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(std::string("expression: ") + e.what());
    }
    return std::move(*run);
}

// ------------------------------------------------------------------ analyses

ClassifyResult run_classify(const ResolvedRun& run, std::uint64_t rng_seed) {
    ClassifyResult out;
    SearchOptions so;
    so.seeds = run.settings.seeds;
    so.rank0_seeds = run.rank0_seeds;
    so.rng_seed = rng_seed;
    out.search = find_critical_points(run.sys, so);
    out.audit = almost_toric_audit(run.sys, out.search.records, out.search.seeds_used);
    for (const auto& r : out.search.records)
        if (hyperbolic_or_bad(r.wtype)) out.exit_code = 2;
    return out;
}

DiagramResult run_diagram(const ResolvedRun& run, const RunConfig& cfg, bool envelopes) {
    DiagramResult out;
    out.search = run_classify(run, cfg.rng_seed).search;
    TraceOptions to;
    to.image_box = run.settings.image_box;
    out.diagram = assemble_diagram(run.sys, out.search.records, to);
    if (envelopes) {
        EnvelopeOptions eo;
        eo.image_box = run.settings.image_box;
        eo.rng_seed = cfg.rng_seed;
        out.diagram.envelopes = compute_envelopes(run.sys, run.settings.j_grid, eo, &out.diagram);
        StructureOptions so;
        so.samples = cfg.samples;
        so.tol = cfg.band_tol;
        so.rng_seed = cfg.rng_seed;
        so.envelope = eo;
        out.structure = validate_image_structure(out.diagram, run.sys, image_membership(run.sys, 24, cfg.rng_seed), so);
    }
    const PlaneDiffeo g(run.settings.g);
    out.mapped = apply_diffeo(out.diagram, g);
    return out;
}

ConnectivityResult run_connectivity(const ResolvedRun& run, const RunConfig& cfg) {
    ConnectivityResult out;
    out.diagram = run_diagram(run, cfg, false);
    const PlaneDiffeo g(run.settings.g);

    FiberOptions fo;
    fo.budget = run.settings.fiber_budget;
    fo.rng_seed = cfg.rng_seed;

    VerdictOptions vo;
    vo.compact = run.settings.compact;
    vo.cone = run.settings.cone;
    vo.finite_interior_critical_values = run.settings.finite_interior_critical_values;
    vo.spot_checks = cfg.spot_checks;
    vo.fiber = fo;
    vo.rng_seed = cfg.rng_seed;
    out.verdict = connectivity_verdict(run.sys, out.diagram.diagram, g, out.diagram.search.records, vo);

    MorseBottOptions mo;
    mo.rng_seed = cfg.rng_seed;
    out.morse_bott = morse_bott_audit(run.sys, parse_expr(run.settings.morse_f, 2, {"x", "y"}), g, mo, &out.diagram.mapped);

    for (const auto& c : cfg.fiber_values) out.fibers.push_back(sample_fiber(run.sys, c, fo));

    switch (out.verdict.kind) {
        case VerdictKind::Guaranteed: out.exit_code = 0; break;
        case VerdictKind::Weak: out.exit_code = 2; break;
        case VerdictKind::NoGuarantee: out.exit_code = 3; break;
    }
    return out;
}

BracketCheck check_bracket(const SystemDef& sys, int samples, std::uint64_t rng_seed) {
    BracketCheck bc;
    for (const Vec& m : feasible_points(sys.space, samples, rng_seed)) {
        try {
            const PointCheck pc = check_point(sys, m);
            const double rel = std::abs(pc.bracket) / pc.bracket_scale;
            bc.max_relative = std::max(bc.max_relative, rel);
            const double hj = poisson_bracket(sys.space, sys.H, sys.J, m);
            bc.max_antisymmetry = std::max(bc.max_antisymmetry, std::abs(pc.bracket + hj) / pc.bracket_scale);
            ++bc.samples;
        } catch (const DegenerateEmbedding&) {
        }
    }
    bc.pass = bc.samples > 0 && bc.max_relative <= sys.space.tol().poisson && bc.max_antisymmetry <= 1e-12;
    return bc;
}

AuditResult run_audit(const ResolvedRun& run, const RunConfig& cfg) {
    AuditResult out;
    out.bracket = check_bracket(run.sys, 1000, cfg.rng_seed);
    out.diagram = run_diagram(run, cfg, true);
    out.classify.search = out.diagram.search;
    out.classify.audit = almost_toric_audit(run.sys, out.classify.search.records, out.classify.search.seeds_used);
    for (const auto& r : out.classify.search.records)
        if (hyperbolic_or_bad(r.wtype)) out.classify.exit_code = 2;
    MorseBottOptions mo;
    mo.rng_seed = cfg.rng_seed;
    out.morse_bott = morse_bott_audit(run.sys, parse_expr(run.settings.morse_f, 2, {"x", "y"}),
                                      PlaneDiffeo(run.settings.g), mo, &out.diagram.mapped);
    return out;
}

}  // namespace liouville
