// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "liouville/pipeline.hpp"
#include "liouville/report.hpp"
#include "support.hpp"

using namespace liouville;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::vector<MorseBottReport> g_reports;  // every Morse–Bott report produced, for criterion 7

ResolvedRun resolved(const std::string& name, const Params& p = {}) {
    RunConfig cfg;
    cfg.system = name;
    cfg.params = p;
    return resolve(cfg);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// 1: pendulum rank-0 points
Outcome pendulum_rank0() {
    const ResolvedRun run = resolved("spherical-pendulum");
    const ClassifyResult r = run_classify(run, 1);
    int ff = 0, ee = 0, other = 0;
    double dff = 0, dee = 0;
    for (const auto& rec : r.search.records) {
        if (rec.rank != 0) continue;
        if (rec.wtype == WilliamsonType::FocusFocus) {
            ++ff;
            dff = std::max(dff, (rec.image - Point2(0, 1)).norm());
        } else if (rec.wtype == WilliamsonType::EllipticElliptic) {
            ++ee;
            dee = std::max(dee, (rec.image - Point2(0, -1)).norm());
        } else {
            ++other;
        }
    }
    return {ff == 1 && ee == 1 && other == 0 && dff < 1e-8 && dee < 1e-8,
            "FF=" + std::to_string(ff) + " |dFF|=" + fmt(dff) + " EE=" + std::to_string(ee) + " |dEE|=" + fmt(dee) +
                " other=" + std::to_string(other)};
}

// 2: pendulum critical curve against both closed forms
Outcome pendulum_curve_match() {
    const ResolvedRun run = resolved("spherical-pendulum");
    RunConfig cfg;
    cfg.system = "spherical-pendulum";
    const DiagramResult d = run_diagram(run, cfg, false);
    double cart = 0, param = 0, hmin = 1e9, hmax = -1e9;
    int used = 0;
    std::vector<double> crossings;
    for (const auto& s : d.diagram.strata) {
        const auto& v = s.vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i + 1 < v.size() && (v[i].y() < 0) != (v[i + 1].y() < 0)) {
                const double t = v[i].y() / (v[i].y() - v[i + 1].y());
                crossings.push_back(std::abs(v[i].x() + t * (v[i + 1].x() - v[i].x())));
            }
            if (v[i].y() < -1 || v[i].y() > 3) continue;
            const double h = v[i].y();
            cart = std::max(cart, std::abs(std::abs(v[i].x()) - reference_curve(h)));
            const double lam = std::sqrt((-h + std::sqrt(h * h + 3)) / 3);
            const Point2 p = pendulum_curve(lam);
            param = std::max(param, std::max(std::abs(std::abs(v[i].x()) - std::abs(p.x())), std::abs(h - p.y())));
            hmin = std::min(hmin, h);
            hmax = std::max(hmax, h);
            ++used;
        }
    }
    const double xc = 2 * std::pow(3.0, 0.25) / 3;
    double axis = crossings.empty() ? INFINITY : 0;
    for (double c : crossings) axis = std::max(axis, std::abs(c - xc));
    const bool covered = hmin < -1 + 0.01 && hmax > 3 - 0.01;
    return {used > 0 && covered && cart < 1e-6 && param < 1e-6 && crossings.size() == 2 && axis < 1e-6,
            "vertices=" + std::to_string(used) + " h=[" + fmt(hmin) + "," + fmt(hmax) + "] cartesian=" + fmt(cart) +
                " parametric=" + fmt(param) + " axis=" + fmt(axis) + " crossings=" + std::to_string(crossings.size())};
}

// 3: annulus fiber counts and Morse–Bott indices for one n
Outcome annulus(int n) {
    const ResolvedRun run = resolved("annulus", {{"n", double(n)}});
    RunConfig cfg;
    cfg.system = "annulus";
    cfg.params = {{"n", double(n)}};
    cfg.fiber_values = {Point2(0.3, 1.4)};  // |c| = 1.43, a regular value inside the annulus
    const ConnectivityResult r = run_connectivity(run, cfg);
    g_reports.push_back(r.morse_bott);
    const FiberSample& f = r.fibers.front();
    bool counts = f.issued && f.stability.size() == 3;
    for (int c : f.stability) counts = counts && c == n;
    // n critical circles share each level; the audit must see one index per level
    std::map<double, std::set<int>> levels;
    for (const auto& m : r.morse_bott.manifolds) levels[std::round(m.value * 1e6) / 1e6].insert(m.index);
    std::string idx;
    bool single = true;
    for (const auto& [v, is] : levels) {
        single = single && is.size() == 1;
        for (int i : is) idx += std::to_string(i);
    }
    const bool indices = single && idx == "0213";
    std::string stab;
    for (int c : f.stability) stab += std::to_string(c) + " ";
    return {counts && indices && !r.morse_bott.pass,
            "n=" + std::to_string(n) + " counts=" + stab + "indices=" + idx +
                " audit=" + (r.morse_bott.pass ? "PASS" : "FAIL")};
}

// 4: connectivity theorem on the pendulum
Outcome pendulum_connectivity() {
    const ResolvedRun run = resolved("spherical-pendulum");
    RunConfig cfg;
    cfg.system = "spherical-pendulum";
    const ConnectivityResult r = run_connectivity(run, cfg);
    g_reports.push_back(r.morse_bott);
    int ones = 0;
    for (const auto& s : r.verdict.spot_checks) ones += s.issued && s.components == 1;
    const bool all = ones == static_cast<int>(r.verdict.spot_checks.size());
    return {r.verdict.kind == VerdictKind::Guaranteed && ones >= 5 && all && run.settings.cone.has_value() &&
                run.settings.g.gx == "v2",
            to_string(r.verdict.kind) + " spot-checks with one component: " + std::to_string(ones) + "/" +
                std::to_string(r.verdict.spot_checks.size())};
}

// 5: the six normal forms, bare and under 20 symplectic conjugations
Outcome normal_forms() {
    const std::pair<const char*, WilliamsonType> cases[] = {
        {"model-ee", WilliamsonType::EllipticElliptic},
        {"model-ff", WilliamsonType::FocusFocus},
        {"model-te", WilliamsonType::TransversallyElliptic},
        {"model-th", WilliamsonType::TransversallyHyperbolic},
        {"model-he", WilliamsonType::HyperbolicElliptic},
        {"model-hh", WilliamsonType::HyperbolicHyperbolic},
    };
    std::mt19937_64 rng(20240601);
    int checks = 0, bad = 0;
    for (const auto& [name, want] : cases) {
        const SystemDef base = build(name);
        const bool rank1 = want == WilliamsonType::TransversallyElliptic || want == WilliamsonType::TransversallyHyperbolic;
        Vec probe = Vec::Zero(4);
        if (rank1) probe[2] = 0.4;  // k1 ≠ 0 keeps dJ non-zero
        auto classify = [&](const SystemDef& s, const Vec& m) {
            const RankInfo ri = critical_rank(s, m);
            if (ri.rank == 0 && !rank1) return classify_rank0(s, m).wtype;
            if (ri.rank == 1 && rank1) return classify_rank1(s, m).wtype;
            return WilliamsonType::Unresolved;
        };
        ++checks;
        bad += classify(base, probe) != want;
        for (int k = 0; k < 20; ++k) {
            const Mat S = testsupport::random_symplectic(rng, 2);
            const auto lin = testsupport::linear_map(S);
            SystemDef conj = base;
            conj.J = compose(base.J, lin);
            conj.H = compose(base.H, lin);
            ++checks;
            bad += classify(conj, S.inverse() * probe) != want;
        }
    }
    return {bad == 0, std::to_string(checks - bad) + "/" + std::to_string(checks) + " classifications exact"};
}

// 6: image band on the pendulum, negative control on the annulus
Outcome image_description() {
    RunConfig cfg;
    cfg.system = "spherical-pendulum";
    cfg.samples = 10000;
    cfg.band_tol = 1e-3;
    const DiagramResult p = run_diagram(resolve(cfg), cfg, true);
    RunConfig an = cfg;
    an.system = "annulus";
    an.params = {{"n", 1}};
    const DiagramResult a = run_diagram(resolve(an), an, true);
    const bool pend = p.structure && p.structure->samples == 10000 && p.structure->contained && p.structure->pass();
    const bool neg = a.structure && !a.structure->pass();
    return {pend && neg, "pendulum samples=" + std::to_string(p.structure ? p.structure->samples : 0) +
                             " max_excess=" + fmt(p.structure ? p.structure->max_excess : NAN) +
                             " pass=" + (pend ? "yes" : "no") + "; annulus check " + (neg ? "fails" : "passes")};
}

// 7: property suites
Outcome properties() {
    std::vector<std::string> failed;

    std::mt19937_64 rng(2024);
    double wg = 0, wh = 0;
    for (int t = 0; t < 200; ++t) {
        const int arity = 1 + t % 4;
        const ExprTree e = parse_expr(testsupport::random_expr(rng, arity, 3), arity);
        const Vec x = testsupport::random_point(rng, arity);
        const Jet2 j = e.eval_jet2(x);
        wg = std::max(wg, (j.gradient() - testsupport::fd_gradient(e, x)).norm() / (1 + j.gradient().norm()));
        const Mat H = j.hessian(), Hf = testsupport::fd_hessian(e, x);
        for (int a = 0; a < arity; ++a)
            for (int b = 0; b < arity; ++b) {
                const double d = std::abs(H(a, b) - Hf(a, b));
                wh = std::max(wh, std::min(d, d / std::abs(H(a, b))));
            }
    }
    if (!(wg <= 1e-6 && wh <= 1e-4)) failed.push_back("AD/FD g=" + fmt(wg) + " h=" + fmt(wh));

    for (const auto& e : catalog()) {
        const BracketCheck b = check_bracket(e.build(e.params), 1000, 7);
        if (!b.pass) failed.push_back("bracket " + e.name);
    }

    int mb = 0;
    for (const auto& r : g_reports)
        for (const auto& m : r.manifolds) {
            ++mb;
            if (!m.consistent()) failed.push_back("index+coindex+dim at L=" + fmt(m.value));
        }
    if (mb == 0) failed.push_back("no Morse-Bott manifolds to check");

    // every report kind, twice with the same seed
    RunConfig cfg;
    cfg.system = "toric-r4";
    cfg.samples = 2000;
    const ResolvedRun run = resolve(cfg);
    auto all_reports = [&] {
        std::vector<std::string> out;
        out.push_back(dump(classify_report(run, run_classify(run, cfg.rng_seed))));
        const DiagramResult d = run_diagram(run, cfg, true);
        out.push_back(dump(diagram_report(run, d, {})));
        out.push_back(dump(envelope_report(run, d)));
        out.push_back(envelope_csv(d.diagram.envelopes));
        out.push_back(isolated_csv(d.diagram));
        for (const auto& s : d.diagram.strata) out.push_back(stratum_csv(s));
        out.push_back(diagram_svg(d.diagram, "t"));
        const ConnectivityResult c = run_connectivity(run, cfg);
        out.push_back(dump(connectivity_report(run, c)));
        out.push_back(dump(audit_report(run, run_audit(run, cfg))));
        out.push_back(dump(catalog_json()));
        return out;
    };
    const auto first = all_reports(), second = all_reports();
    int same = 0;
    for (std::size_t i = 0; i < first.size(); ++i) same += first[i] == second[i];
    if (same != static_cast<int>(first.size())) failed.push_back("reproducibility");

    std::string detail = "AD g=" + fmt(wg) + " h=" + fmt(wh) + "; brackets " + std::to_string(catalog().size()) +
                         " systems; MB manifolds " + std::to_string(mb) + "; reproducible " + std::to_string(same) +
                         "/" + std::to_string(first.size());
    for (const auto& f : failed) detail += "; FAILED " + f;
    return {failed.empty(), detail};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, 10, pendulum_rank0},
        {2, 30, pendulum_curve_match},
        {3, 360, [] {
             // budget is per n: each run is timed separately below
             Outcome o{true, ""};
             for (int n : {1, 2, 3}) {
                 const auto t0 = std::chrono::steady_clock::now();
                 Outcome r = annulus(n);
                 const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                 if (s >= 120) r.pass = false;
                 o.pass = o.pass && r.pass;
                 o.detail += (o.detail.empty() ? "" : "; ") + r.detail + " (" + fmt(s) + " s)";
             }
             return o;
         }},
        {4, 180, pendulum_connectivity},
        {5, 10, normal_forms},
        {6, 60, image_description},
        {7, 1e9, properties}  // no runtime bound,
    };
    bool all = true;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (s >= c.budget_s) {
            o.pass = false;
            o.detail += " [over the " + fmt(c.budget_s) + " s budget]";
        }
        all = all && o.pass;
        std::printf("criterion %d: %s (%.2f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", s, o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
