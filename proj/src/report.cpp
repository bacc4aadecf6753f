#include "liouville/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace liouville {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json pt(const Point2& p) { return json::array({p.x(), p.y()}); }

// Non-finite values are not representable in JSON; keep them readable.
json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "inf" : "-inf";
}

json type_counts(const std::vector<CriticalPointRecord>& recs, int rank) {
    std::map<std::string, int> c;
    for (const auto& r : recs)
        if (r.rank == rank) ++c[to_string(r.wtype)];
    return c;
}

json header(const char* kind, const ResolvedRun& run) {
    return {{"schema", std::string("liouville.") + kind}, {"version", kReportVersion}, {"system", run.sys.name},
            {"source", run.source}, {"settings", settings_json(run)}};
}

json stratum_summary(const Stratum& s, int index) {
    std::map<std::string, int> types;
    for (auto w : s.wtype) ++types[to_string(w)];
    json j = {{"index", index},
              {"vertices", s.vertices.size()},
              {"closed", s.closed},
              {"start_end", to_string(s.start_end)},
              {"final_end", to_string(s.final_end)},
              {"types", types}};
    if (!s.vertices.empty()) {
        j["first"] = pt(s.vertices.front());
        j["last"] = pt(s.vertices.back());
    }
    return j;
}

json tangency_json(const Tangency& t) {
    return {{"point", pt(t.point)},
            {"kind", to_string(t.kind)},
            {"stratum", t.stratum},
            {"position", t.position},
            {"at_endpoint", t.at_endpoint}};
}

json diagram_core(const BifurcationDiagram& d) {
    json strata = json::array();
    for (std::size_t i = 0; i < d.strata.size(); ++i) strata.push_back(stratum_summary(d.strata[i], static_cast<int>(i)));
    json iso = json::array();
    for (const auto& v : d.isolated_values) iso.push_back({{"value", pt(v.value)}, {"type", to_string(v.wtype)}});
    json tang = json::array();
    for (const auto& t : d.tangencies) tang.push_back(tangency_json(t));
    return {{"image_box", {d.image_box.xlo, d.image_box.xhi, d.image_box.ylo, d.image_box.yhi}},
            {"strata", strata},
            {"isolated_values", iso},
            {"vertical_tangencies", tang}};
}

json envelope_json(const Envelopes& e) {
    json pts = json::array();
    for (std::size_t i = 0; i < e.x.size(); ++i)
        pts.push_back({{"x", e.x[i]},
                       {"hminus", num(e.hminus[i])},
                       {"hplus", num(e.hplus[i])},
                       {"minus_truncated", static_cast<bool>(e.minus_truncated[i])},
                       {"plus_truncated", static_cast<bool>(e.plus_truncated[i])},
                       {"flagged", static_cast<bool>(e.flagged[i])},
                       {"refinement_change", num(e.refinement_change[i])}});
    return {{"step", e.step}, {"points", pts}};
}

std::string fmt(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

json to_json(const CriticalPointRecord& r, bool with_point) {
    json ev = json::array();
    for (const auto& l : r.eigen_data) ev.push_back({l.real(), l.imag()});
    json j = {{"rank", r.rank}, {"type", to_string(r.wtype)}, {"image", pt(r.image)}, {"eigenvalues", ev}};
    if (with_point) j["point"] = vec_json(r.point);
    const Certificate& c = r.cert;
    j["certificate"] = {{"equation_residual", c.equation_residual},
                        {"constraint_residual", c.constraint_residual},
                        {"sigma1", c.sigma1},
                        {"sigma2", c.sigma2},
                        {"rank_scale", c.rank_scale},
                        {"form_det", c.form_det}};
    if (r.rank == 0) {
        j["certificate"]["spectrum_symmetry"] = c.spectrum_symmetry;
        j["certificate"]["commutator"] = c.commutator;
        j["certificate"]["agreeing_draws"] = c.agreeing_draws;
    } else {
        j["certificate"]["restricted_det"] = c.restricted_det;
    }
    return j;
}

json to_json(const StructureReport& s) {
    return {{"pass", s.pass()},
            {"boundary_on_envelopes", s.boundary_ok},
            {"focus_focus_interior", s.focus_interior},
            {"samples_inside_band", s.contained},
            {"band_covered", s.covered},
            {"boundary_checked", s.boundary_checked},
            {"samples", s.samples},
            {"coverage_probes", s.coverage_probes},
            {"max_excess", num(s.max_excess)},
            {"violations", s.violations}};
}

json to_json(const MorseBottReport& m) {
    json rows = json::array();
    for (const auto& c : m.manifolds)
        rows.push_back({{"value", c.value},
                        {"image", pt(c.image)},
                        {"index", c.index},
                        {"coindex", c.coindex},
                        {"nullity", c.nullity},
                        {"dimension", c.dimension},
                        {"points", c.points},
                        {"index_sum_ok", c.consistent()},
                        {"representative", vec_json(c.representative)},
                        {"hessian_eigenvalues", c.eigenvalues}});
    return {{"function", m.f_description},
            {"verdict", m.pass ? "PASS" : "FAIL"},
            {"morse_bott", m.morse_bott},
            {"hypothesis_checked", m.hypothesis_checked},
            {"hypothesis_ok", m.hypothesis_ok},
            {"min_grad_on_sigma", num(m.min_grad_on_sigma)},
            {"seeds", m.seeds_used},
            {"converged", m.converged},
            {"note", m.note},
            {"manifolds", rows}};
}

json to_json(const FiberSample& f, bool with_points) {
    json j = {{"target", pt(f.target)},
              {"components", f.components},
              {"issued", f.issued},
              {"stable", f.stable},
              {"stability", f.stability},
              {"accepted", f.accepted},
              {"epsilon", f.epsilon},
              {"max_residual", f.max_residual},
              {"pca_ratio", num(f.pca_ratio)},
              {"regular_dimension", f.regular_dimension},
              {"note", f.note}};
    if (with_points) {
        json pts = json::array();
        for (const auto& p : f.points) pts.push_back(vec_json(p));
        j["points"] = pts;
        j["labels"] = f.labels;
    }
    return j;
}

json to_json(const ConnectivityVerdict& v) {
    json hyp = json::array();
    for (const auto& h : v.hypotheses) hyp.push_back({{"name", h.name}, {"holds", h.holds}, {"detail", h.detail}});
    json spots = json::array();
    for (const auto& s : v.spot_checks)
        spots.push_back({{"value", pt(s.value)},
                         {"components", s.components},
                         {"issued", s.issued},
                         {"stable", s.stable},
                         {"accepted", s.accepted}});
    json tang = json::array();
    for (const auto& t : v.tangencies) tang.push_back(tangency_json(t));
    return {{"verdict", to_string(v.kind)},
            {"failed_hypothesis", v.failed},
            {"hypotheses", hyp},
            {"vertical_tangencies_after_g", tang},
            {"spot_checks", spots},
            {"note", "spot checks are numerical evidence; the verdict rests on the hypotheses"}};
}

json to_json(const BracketCheck& b) {
    return {{"samples", b.samples},
            {"max_relative_bracket", b.max_relative},
            {"max_antisymmetry_defect", b.max_antisymmetry},
            {"pass", b.pass}};
}

json settings_json(const ResolvedRun& run) {
    const RunDefaults& s = run.settings;
    const Tolerances& t = run.sys.space.tol();
    json g = {{"x", s.g.gx}, {"y", s.g.gy}};
    if (s.g.inv_x) {
        g["inverse_x"] = *s.g.inv_x;
        g["inverse_y"] = *s.g.inv_y;
    }
    json cone = nullptr;
    if (s.cone) cone = {{"alpha", s.cone->alpha}, {"beta", s.cone->beta}, {"vertex", pt(s.cone->vertex)}};
    return {{"image_box", {s.image_box.xlo, s.image_box.xhi, s.image_box.ylo, s.image_box.yhi}},
            {"j_grid", {s.j_grid.lo, s.j_grid.hi, s.j_grid.step}},
            {"g", g},
            {"cone", cone},
            {"compact", s.compact},
            {"proper", run.sys.proper},
            {"finite_interior_critical_values", s.finite_interior_critical_values},
            {"morse_f", s.morse_f},
            {"seeds", s.seeds},
            {"rank0_seeds", run.rank0_seeds},
            {"fiber_budget", s.fiber_budget},
            {"tolerances",
             {{"constraint", t.constraint},
              {"sympl", t.sympl},
              {"poisson", t.poisson},
              {"rank", t.rank},
              {"nondeg", t.nondeg},
              {"dedup", t.dedup},
              {"trace_step", t.trace_step},
              {"min_step", t.min_step},
              {"tang", t.tang},
              {"env", t.env},
              {"max_iter", t.max_iter},
              {"max_halvings", t.max_halvings}}}};
}

json classify_report(const ResolvedRun& run, const ClassifyResult& r) {
    json j = header("classify", run);
    json recs = json::array();
    for (const auto& rec : r.search.records) recs.push_back(to_json(rec));
    json offending = json::array();
    for (const auto& rec : r.audit.offending) offending.push_back(to_json(rec, true));
    j["summary"] = {{"rank0", type_counts(r.search.records, 0)},
                    {"rank1", type_counts(r.search.records, 1)},
                    {"seeds", r.search.seeds_used},
                    {"dropped", r.search.dropped}};
    j["almost_toric"] = {{"pass", r.audit.pass},
                         {"records_checked", r.audit.records_checked},
                         {"seeds_used", r.audit.seeds_used},
                         {"offending", offending},
                         {"note", "conditional on seed coverage"}};
    j["records"] = recs;
    j["exit_code"] = r.exit_code;
    return j;
}

json diagram_report(const ResolvedRun& run, const DiagramResult& r, const std::vector<std::string>& files) {
    json j = header("diagram", run);
    j["jh_plane"] = diagram_core(r.diagram);
    j["after_g"] = diagram_core(r.mapped);
    if (!r.diagram.envelopes.empty()) j["envelopes"] = envelope_json(r.diagram.envelopes);
    if (r.structure) j["image_structure"] = to_json(*r.structure);
    j["files"] = files;
    return j;
}

json envelope_report(const ResolvedRun& run, const DiagramResult& r) {
    json j = header("envelopes", run);
    j["envelopes"] = envelope_json(r.diagram.envelopes);
    if (r.structure) j["image_structure"] = to_json(*r.structure);
    return j;
}

json connectivity_report(const ResolvedRun& run, const ConnectivityResult& r) {
    json j = header("connectivity", run);
    j["verdict"] = to_json(r.verdict);
    j["morse_bott"] = to_json(r.morse_bott);
    json fibers = json::array();
    for (const auto& f : r.fibers) fibers.push_back(to_json(f));
    j["fibers"] = fibers;
    j["exit_code"] = r.exit_code;
    return j;
}

json audit_report(const ResolvedRun& run, const AuditResult& r) {
    json j = header("audit", run);
    j["poisson_bracket"] = to_json(r.bracket);
    j["almost_toric"] = {{"pass", r.classify.audit.pass},
                         {"records_checked", r.classify.audit.records_checked},
                         {"offending", r.classify.audit.offending.size()},
                         {"rank0", type_counts(r.classify.search.records, 0)},
                         {"rank1", type_counts(r.classify.search.records, 1)}};
    j["vertical_tangencies_after_g"] = r.diagram.mapped.tangencies.size();
    if (r.diagram.structure) j["image_structure"] = to_json(*r.diagram.structure);
    j["morse_bott"] = to_json(r.morse_bott);
    return j;
}

json catalog_json() {
    json out = json::array();
    for (const auto& e : catalog()) {
        const ReferenceData ref = e.reference(e.params);
        json r0 = json::array();
        for (const auto& p : ref.rank0)
            r0.push_back({{"label", p.label}, {"image", pt(p.image)}, {"type", to_string(p.wtype)}, {"origin", to_string(p.origin)}});
        json fib = json::array();
        for (const auto& f : ref.fibers)
            fib.push_back({{"value", pt(f.value)}, {"components", f.components}, {"origin", to_string(f.origin)}});
        json entry = {{"name", e.name}, {"description", e.description}, {"params", e.params}, {"rank0", r0}, {"fibers", fib}};
        if (ref.verdict) entry["verdict"] = {{"value", ref.verdict->value}, {"origin", to_string(ref.verdict->origin)}};
        if (ref.vertical_tangencies)
            entry["vertical_tangencies"] = {{"value", ref.vertical_tangencies->value},
                                            {"origin", to_string(ref.vertical_tangencies->origin)}};
        if (ref.almost_toric)
            entry["almost_toric"] = {{"value", ref.almost_toric->value}, {"origin", to_string(ref.almost_toric->origin)}};
        out.push_back(entry);
    }
    return {{"schema", "liouville.catalog"}, {"version", kReportVersion}, {"systems", out}};
}

std::string stratum_csv(const Stratum& s) {
    std::string out = "x,y,wtype\n";
    for (std::size_t i = 0; i < s.vertices.size(); ++i) {
        out += format_number(s.vertices[i].x()) + "," + format_number(s.vertices[i].y()) + ",";
        out += i < s.wtype.size() ? to_string(s.wtype[i]) : "unresolved";
        out += "\n";
    }
    return out;
}

std::string envelope_csv(const Envelopes& e) {
    std::string out = "x,hminus,hplus\n";
    for (std::size_t i = 0; i < e.x.size(); ++i)
        out += format_number(e.x[i]) + "," + format_number(e.hminus[i]) + "," + format_number(e.hplus[i]) + "\n";
    return out;
}

std::string isolated_csv(const BifurcationDiagram& d) {
    std::string out = "x,y,wtype\n";
    for (const auto& v : d.isolated_values)
        out += format_number(v.value.x()) + "," + format_number(v.value.y()) + "," + to_string(v.wtype) + "\n";
    return out;
}

std::string fiber_csv(const FiberSample& f) {
    std::string out;
    if (!f.points.empty()) {
        for (int i = 0; i < f.points.front().size(); ++i) out += "x" + std::to_string(i + 1) + ",";
        out += "component\n";
    }
    for (std::size_t k = 0; k < f.points.size(); ++k) {
        for (int i = 0; i < f.points[k].size(); ++i) out += format_number(f.points[k][i]) + ",";
        out += std::to_string(k < f.labels.size() ? f.labels[k] : -1) + "\n";
    }
    return out;
}

std::string diagram_svg(const BifurcationDiagram& d, const std::string& title) {
    const double W = 720, Hh = 540, m = 50;
    const Box2& b = d.image_box;
    auto X = [&](double x) { return m + (x - b.xlo) / (b.xhi - b.xlo) * (W - 2 * m); };
    auto Y = [&](double y) { return Hh - m - (y - b.ylo) / (b.yhi - b.ylo) * (Hh - 2 * m); };
    auto colour = [](WilliamsonType t) {
        switch (t) {
            case WilliamsonType::EllipticElliptic:
            case WilliamsonType::TransversallyElliptic: return "#1f4e9c";
            case WilliamsonType::FocusFocus: return "#c0392b";
            case WilliamsonType::TransversallyHyperbolic:
            case WilliamsonType::HyperbolicElliptic:
            case WilliamsonType::HyperbolicHyperbolic: return "#e67e22";
            default: return "#888888";
        }
    };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\" viewBox=\"0 0 " << W
       << " " << Hh << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << Hh << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << m << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    os << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << W - 2 * m << "\" height=\"" << Hh - 2 * m
       << "\" fill=\"none\" stroke=\"#bbbbbb\"/>\n";
    if (b.xlo < 0 && b.xhi > 0)
        os << "<line x1=\"" << fmt(X(0), 2) << "\" y1=\"" << m << "\" x2=\"" << fmt(X(0), 2) << "\" y2=\"" << Hh - m
           << "\" stroke=\"#dddddd\"/>\n";
    if (b.ylo < 0 && b.yhi > 0)
        os << "<line x1=\"" << m << "\" y1=\"" << fmt(Y(0), 2) << "\" x2=\"" << W - m << "\" y2=\"" << fmt(Y(0), 2)
           << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << m << "\" y=\"" << Hh - 18 << "\" font-family=\"sans-serif\" font-size=\"11\">x: ["
       << format_number(b.xlo) << ", " << format_number(b.xhi) << "]  y: [" << format_number(b.ylo) << ", "
       << format_number(b.yhi) << "]</text>\n";

    auto polyline = [&](const std::vector<Point2>& pts, const char* stroke, const char* extra) {
        if (pts.size() < 2) return;
        const std::size_t stride = std::max<std::size_t>(1, pts.size() / 1500);
        os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\"" << extra << " points=\"";
        for (std::size_t i = 0; i < pts.size(); i += stride) os << fmt(X(pts[i].x()), 2) << "," << fmt(Y(pts[i].y()), 2) << " ";
        os << fmt(X(pts.back().x()), 2) << "," << fmt(Y(pts.back().y()), 2) << "\"/>\n";
    };
    if (!d.envelopes.lower_curve.empty()) polyline(d.envelopes.lower_curve, "#27ae60", " stroke-dasharray=\"4 3\"");
    if (!d.envelopes.upper_curve.empty()) polyline(d.envelopes.upper_curve, "#27ae60", " stroke-dasharray=\"4 3\"");
    for (const auto& s : d.strata) {
        // split into runs of equal type so colours follow the classification
        std::size_t start = 0;
        for (std::size_t i = 1; i <= s.vertices.size(); ++i) {
            if (i < s.vertices.size() && s.wtype[i] == s.wtype[start]) continue;
            std::vector<Point2> run(s.vertices.begin() + static_cast<long>(start),
                                    s.vertices.begin() + static_cast<long>(std::min(i + 1, s.vertices.size())));
            polyline(run, colour(s.wtype[start]), "");
            start = i;
        }
    }
    for (const auto& v : d.isolated_values) {
        const bool ff = v.wtype == WilliamsonType::FocusFocus;
        os << "<circle cx=\"" << fmt(X(v.value.x()), 2) << "\" cy=\"" << fmt(Y(v.value.y()), 2) << "\" r=\"4\" fill=\""
           << (ff ? colour(v.wtype) : "white") << "\" stroke=\"" << colour(v.wtype) << "\"><title>" << to_string(v.wtype)
           << "</title></circle>\n";
    }
    for (const auto& t : d.tangencies)
        os << "<rect x=\"" << fmt(X(t.point.x()) - 3, 2) << "\" y=\"" << fmt(Y(t.point.y()) - 3, 2)
           << "\" width=\"6\" height=\"6\" fill=\"none\" stroke=\"#8e44ad\"><title>vertical tangency</title></rect>\n";
    os << "</svg>\n";
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace liouville
