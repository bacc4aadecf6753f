#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "liouville/connectivity.hpp"
#include "liouville/pipeline.hpp"
#include "liouville/systems.hpp"

using namespace liouville;

TEST_SUITE("connectivity") {

TEST_CASE("union-find on hand-made clouds") {
    const PhaseSpace sp(4, {}, PhaseSpace::canonical_form(2), std::vector<Interval>(4, {-1, 1}));
    std::vector<Vec> pts;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 20; ++i) {
            Vec v = Vec::Zero(4);
            v[0] = 10.0 * c + 0.1 * i;
            pts.push_back(v);
        }
    std::vector<int> labels;
    CHECK(count_components(sp, pts, 0.15, &labels) == 3);
    REQUIRE(labels.size() == pts.size());
    CHECK(labels.front() == 0);
    CHECK(labels[20] == 1);
    CHECK(labels.back() == 2);
    CHECK(count_components(sp, pts, 0.05, nullptr) == 60);
    CHECK(count_components(sp, pts, 100, nullptr) == 1);
    CHECK(count_components(sp, {}, 1, nullptr) == 0);

    const double eps = clustering_radius(sp, pts, 3.0, 1e-4, 0.5);
    CHECK(eps == doctest::Approx(0.3));
    std::vector<Vec> same(5, Vec::Zero(4));
    CHECK(clustering_radius(sp, same, 3.0, 1e-4) == 1e-4);
}

TEST_CASE("periodic metric joins across the seam") {
    const SystemDef an = build("annulus", {{"n", 1}});
    std::vector<Vec> pts;
    for (int i = 0; i < 30; ++i) {
        Vec v = Vec::Zero(5);
        v[2] = 1;
        v[3] = -std::numbers::pi + 2 * std::numbers::pi * (i + 0.5) / 30;
        pts.push_back(v);
    }
    CHECK(count_components(an.space, pts, 0.25, nullptr) == 1);
}

TEST_CASE("annulus fibers have n components") {
    for (int n : {1, 2}) {
        CAPTURE(n);
        const SystemDef sys = build("annulus", {{"n", double(n)}});
        FiberOptions fo;
        fo.budget = 600;
        const FiberSample f = sample_fiber(sys, Point2(0.3, 1.4), fo);
        REQUIRE(f.issued);
        CHECK(f.components == n);
        CHECK(f.stable);
        REQUIRE(f.stability.size() == 3);
        CHECK(f.stability[1] == n);
        CHECK(f.stability[2] == n);
        CHECK(f.max_residual < 1e-9);
        CHECK(f.regular_dimension);
        CHECK(f.pca_ratio > 10);
    }
}

TEST_CASE("an empty fiber issues no count") {
    const SystemDef sys = build("annulus", {{"n", 1}});
    FiberOptions fo;
    fo.budget = 200;
    const FiberSample f = sample_fiber(sys, Point2(0.1, 0.1), fo);
    CHECK_FALSE(f.issued);
}

TEST_CASE("minimum level is a single component") {
    const SystemDef sys = build("toric-r4");
    FiberOptions fo;
    fo.budget = 400;
    const FiberSample f = sample_fiber(sys, Point2(0, 0), fo);
    REQUIRE(f.issued);
    CHECK(f.components == 1);
}

TEST_CASE("Morse-Bott reports are dimensionally consistent") {
    struct Case {
        const char* name;
        Params p;
        DiffeoSpec g;
        std::string f;
    };
    const Case cases[] = {
        {"spherical-pendulum", {}, {"v2", "v1", "v2", "v1"}, "v1"},
        {"annulus", {{"n", 1}}, {"v1", "v2", "v1", "v2"}, "v1"},
        {"toric-s2s2", {}, {"v1", "v2", "v1", "v2"}, "v1 + 2*v2"},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const SystemDef sys = build(c.name, c.p);
        MorseBottOptions mo;
        mo.seeds = 150;
        const MorseBottReport r = morse_bott_audit(sys, parse_expr(c.f, 2), PlaneDiffeo(c.g), mo);
        REQUIRE_FALSE(r.manifolds.empty());
        for (const auto& m : r.manifolds) {
            CAPTURE(m.value);
            CHECK(m.index + m.coindex + m.dimension == 4);
            CHECK(m.consistent());
        }
    }
}

TEST_CASE("annulus Morse-Bott indices") {
    const SystemDef sys = build("annulus", {{"n", 2}});
    MorseBottOptions mo;
    mo.seeds = 200;
    const MorseBottReport r = morse_bott_audit(sys, parse_expr("v1", 2), PlaneDiffeo(DiffeoSpec{}), mo);
    REQUIRE(r.manifolds.size() == 8);  // each critical level holds n = 2 circles
    std::map<long, std::set<int>> by_value;
    for (const auto& m : r.manifolds) {
        CHECK(m.dimension == 1);
        by_value[std::lround(m.value)].insert(m.index);
    }
    const std::map<long, std::set<int>> want = {{-2, {0}}, {-1, {2}}, {1, {1}}, {2, {3}}};
    CHECK(by_value == want);
    CHECK_FALSE(r.pass);
}

TEST_CASE("verdict names the failed hypothesis") {
    RunConfig cfg;
    cfg.system = "annulus";
    cfg.params = {{"n", 2}};
    cfg.spot_checks = 2;
    cfg.fiber_budget = 400;
    cfg.seeds = 400;
    const ResolvedRun run = resolve(cfg);
    const ConnectivityResult r = run_connectivity(run, cfg);
    CHECK(r.verdict.kind == VerdictKind::NoGuarantee);
    CHECK_FALSE(r.verdict.failed.empty());
    CHECK(r.exit_code == 3);
    for (const auto& s : r.verdict.spot_checks)
        if (s.issued) CHECK(s.components == 2);
}

TEST_CASE("guaranteed verdicts agree with their spot checks") {
    RunConfig cfg;
    cfg.system = "toric-r4";
    cfg.fiber_budget = 400;
    const ResolvedRun run = resolve(cfg);
    const ConnectivityResult r = run_connectivity(run, cfg);
    REQUIRE(r.verdict.kind == VerdictKind::Guaranteed);
    CHECK(r.exit_code == 0);
    CHECK(r.verdict.failed.empty());
    REQUIRE(r.verdict.spot_checks.size() >= 5);
    for (const auto& s : r.verdict.spot_checks) {
        CHECK(s.issued);
        CHECK(s.components == 1);
    }
    CHECK(to_string(VerdictKind::Guaranteed) == "GUARANTEED-CONNECTED");
    CHECK(to_string(VerdictKind::Weak) == "WEAK-GUARANTEE");
    CHECK(to_string(VerdictKind::NoGuarantee) == "NO-GUARANTEE");
}

}
