#include <doctest.h>

#include <cmath>
#include <set>

#include "liouville/singular.hpp"
#include "liouville/systems.hpp"

using namespace liouville;

TEST_SUITE("systems") {

TEST_CASE("reference curve values") {
    CHECK(reference_curve(-1) == doctest::Approx(0).scale(1));
    CHECK(reference_curve(0) == doctest::Approx(2 * std::pow(3.0, 0.25) / 3).epsilon(1e-14));
    CHECK_THROWS_AS(reference_curve(-1.0001), std::domain_error);
    CHECK_THROWS_AS(reference_curve(std::nan("")), std::domain_error);
}

TEST_CASE("parametric and Cartesian forms agree") {
    double worst = 0;
    for (int i = 1; i <= 200; ++i) {
        const double lam = i / 200.0;
        const Point2 p = pendulum_curve(lam);
        // 3 - h² + h·s cancels for large h, so the error scales with h²
        const double err = std::abs(std::abs(p.x()) - reference_curve(p.y()));
        worst = std::max(worst, err / (1 + std::abs(p.x()) + p.y() * p.y()));
    }
    CHECK(worst < 1e-12);
    CHECK((pendulum_curve(1) - Point2(0, -1)).norm() < 1e-15);
}

TEST_CASE("catalog lookups") {
    std::set<std::string> names;
    for (const auto& e : catalog()) names.insert(e.name);
    for (const char* n : {"spherical-pendulum", "annulus", "coupled-spin-oscillator", "toric-s2s2", "toric-r4",
                          "model-ee", "model-ff", "model-te", "model-th", "model-he", "model-hh"})
        CHECK(names.count(n) == 1);
    CHECK_THROWS_AS(build("no-such-system"), std::invalid_argument);
    CHECK_THROWS_AS(build("annulus", {{"m", 2}}), std::invalid_argument);
    CHECK_THROWS_AS(build("annulus", {{"n", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(build("annulus", {{"n", 1.5}}), std::invalid_argument);
    CHECK_THROWS_AS(build("spherical-pendulum", {{"n", 2}}), std::invalid_argument);
    CHECK(build("annulus", {{"n", 3}}).space.ambient_dim() == 5);
}

TEST_CASE("reference rank-0 points are critical with the stated type") {
    for (const auto& e : catalog()) {
        CAPTURE(e.name);
        const SystemDef sys = e.build(e.params);
        for (const auto& r : e.reference(e.params).rank0) {
            if (r.point.size() == 0) continue;
            CHECK(critical_rank(sys, r.point).rank == 0);
            CHECK(classify_rank0(sys, r.point).wtype == r.wtype);
            CHECK(std::abs(sys.J.eval(r.point) - r.image.x()) < 1e-12);
            CHECK(std::abs(sys.H.eval(r.point) - r.image.y()) < 1e-12);
        }
    }
}

TEST_CASE("coupled spin-oscillator rank-0 points") {
    const SystemDef sys = build("coupled-spin-oscillator");
    SearchOptions so;
    so.seeds = 300;
    so.rank0_seeds = 300;
    const auto cs = find_critical_points(sys, so);
    int ff = 0, ee = 0;
    for (const auto& r : cs.records) {
        if (r.rank != 0) continue;
        if (r.wtype == WilliamsonType::FocusFocus) {
            ++ff;
            CHECK((r.image - Point2(1, 0)).norm() < 1e-8);
        } else if (r.wtype == WilliamsonType::EllipticElliptic) {
            ++ee;
            CHECK((r.image - Point2(-1, 0)).norm() < 1e-8);
        }
    }
    CHECK(ff == 1);
    CHECK(ee == 1);
}

TEST_CASE("overlap fixture is closed and self-overlapping") {
    const auto c = overlap_fixture(400);
    REQUIRE(c.size() == 400);
    // the inner loop passes through the origin
    double nearest = 1e9;
    for (const auto& p : c) nearest = std::min(nearest, p.norm());
    CHECK(nearest < 0.02);
    // winding number about (0.25, 0) is 2: the region is covered twice
    double turn = 0;
    const Point2 o(0.25, 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Point2 a = c[i] - o, b = c[(i + 1) % c.size()] - o;
        turn += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    }
    CHECK(std::round(turn / (2 * std::acos(-1.0))) == 2);
}

}
