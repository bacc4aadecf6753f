#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "liouville/bifurcation.hpp"
#include "liouville/systems.hpp"

using namespace liouville;

namespace {

constexpr double pi = std::numbers::pi;

Stratum polyline(std::vector<Point2> v, bool closed = false) {
    Stratum s;
    s.vertices = std::move(v);
    s.wtype.assign(s.vertices.size(), WilliamsonType::TransversallyElliptic);
    s.points.assign(s.vertices.size(), Vec());
    s.closed = closed;
    if (closed) s.start_end = s.final_end = Stratum::End::Closed;
    return s;
}

Stratum circle(double r, int n = 720) {
    std::vector<Point2> v;
    for (int i = 0; i < n; ++i) v.emplace_back(r * std::cos(2 * pi * i / n), r * std::sin(2 * pi * i / n));
    return polyline(std::move(v), true);
}

BifurcationDiagram traced(const std::string& name, const Params& p, double step = -1) {
    SystemDef sys = build(name, p);
    if (step > 0) sys.space.tol().trace_step = step;
    SearchOptions so;
    so.seeds = 400;
    so.rank0_seeds = 100;
    const auto cs = find_critical_points(sys, so);
    TraceOptions to;
    to.image_box = run_defaults(name, p).image_box;
    return assemble_diagram(sys, cs.records, to);
}

}  // namespace

TEST_SUITE("bifurcation") {

TEST_CASE("pendulum stratum follows the closed form") {
    SystemDef sys = build("spherical-pendulum");
    SearchOptions so;
    so.seeds = 400;
    so.rank0_seeds = 100;
    const auto cs = find_critical_points(sys, so);
    TraceOptions to;
    to.image_box = {-4, 4, -1.5, 3.0};
    const BifurcationDiagram d = assemble_diagram(sys, cs.records, to);
    REQUIRE_FALSE(d.strata.empty());
    double worst = 0, worst_param = 0, worst_res = 0;
    int used = 0;
    for (const auto& s : d.strata)
        for (std::size_t i = 0; i < s.vertices.size(); ++i) {
            const Point2& v = s.vertices[i];
            if (v.y() < -1 || v.y() > 3) continue;
            worst = std::max(worst, std::abs(std::abs(v.x()) - reference_curve(v.y())));
            // the parametrisation is monotone in h: λ² solves 3λ⁴ + 2hλ² − 1 = 0
            const double lam = std::sqrt((-v.y() + std::sqrt(v.y() * v.y() + 3)) / 3);
            worst_param = std::max(worst_param, std::abs(std::abs(v.x()) - std::abs(pendulum_curve(lam).x())));
            worst_res = std::max(worst_res, vertex_residual(sys, s.points[i]));
            ++used;
        }
    CHECK(used > 100);
    CHECK(worst < 1e-6);
    CHECK(worst_param < 1e-6);
    CHECK(worst_res < 1e-6);
    CHECK(d.tangencies.empty());  // dj/dλ never vanishes along the curve
}

TEST_CASE("annulus strata are circles with four tangencies") {
    for (double step : {1e-3, 5e-4}) {
        CAPTURE(step);
        const BifurcationDiagram d = traced("annulus", {{"n", 2}}, step);
        REQUIRE(d.strata.size() == 2);
        std::vector<double> radii;
        for (const auto& s : d.strata) {
            CHECK(s.closed);
            double lo = 1e9, hi = 0;
            for (const auto& v : s.vertices) {
                lo = std::min(lo, v.norm());
                hi = std::max(hi, v.norm());
            }
            CHECK(hi - lo < 1e-8);
            radii.push_back(lo);
        }
        std::sort(radii.begin(), radii.end());
        CHECK(radii[0] == doctest::Approx(1).epsilon(1e-8));
        CHECK(radii[1] == doctest::Approx(2).epsilon(1e-8));
        REQUIRE(d.tangencies.size() == 4);
        for (const auto& t : d.tangencies) {
            CHECK(std::abs(t.point.y()) < 1e-5);
            const double r = std::abs(t.point.x());
            CHECK((std::abs(r - 1) < 1e-5 || std::abs(r - 2) < 1e-5));
        }
    }
}

TEST_CASE("vertical segment reports every vertex") {
    BifurcationDiagram d;
    d.strata.push_back(polyline({{1, 0}, {1, 0.1}, {1, 0.2}, {1, 0.3}}));
    const auto t = detect_vertical_tangencies(d);
    CHECK(t.size() == 4);
    CHECK(t.front().at_endpoint);
    CHECK(t.back().at_endpoint);
    BifurcationDiagram slanted;
    slanted.strata.push_back(polyline({{0, 0}, {0.1, 0.2}, {0.2, 0.4}}));
    CHECK(detect_vertical_tangencies(slanted).empty());
}

TEST_CASE("diffeo handling") {
    BifurcationDiagram d;
    d.strata.push_back(circle(1.5, 90));
    d.isolated_values.push_back({{0.25, -0.5}, WilliamsonType::FocusFocus});
    d.image_box = {-2, 2, -2, 2};

    const PlaneDiffeo id(DiffeoSpec{});
    const BifurcationDiagram same = apply_diffeo(d, id);
    REQUIRE(same.strata.front().vertices.size() == d.strata.front().vertices.size());
    for (std::size_t i = 0; i < d.strata.front().vertices.size(); ++i)
        CHECK(std::memcmp(same.strata.front().vertices[i].data(), d.strata.front().vertices[i].data(),
                          2 * sizeof(double)) == 0);
    CHECK(same.tangencies.size() == detect_vertical_tangencies(d).size());

    const PlaneDiffeo g({"v1 + 0.3*v2^2", "v2", "v1 - 0.3*v2^2", "v2"}, {-3, 3, -3, 3});
    const PlaneDiffeo ginv = g.inverse_map();
    const BifurcationDiagram back = apply_diffeo(apply_diffeo(d, g), ginv);
    double worst = 0;
    for (std::size_t i = 0; i < d.strata.front().vertices.size(); ++i)
        worst = std::max(worst, (back.strata.front().vertices[i] - d.strata.front().vertices[i]).norm());
    CHECK(worst <= 1e-8);
    CHECK((back.isolated_values.front().value - d.isolated_values.front().value).norm() <= 1e-8);

    CHECK_THROWS_AS(PlaneDiffeo({"v1^3", "v2"}), std::invalid_argument);      // det vanishes on x = 0
    CHECK_THROWS_AS(PlaneDiffeo({"v1", "v2", "v1 + 1", "v2"}), std::invalid_argument);  // wrong inverse
    const PlaneDiffeo swap({"v2", "v1", "v2", "v1"});
    CHECK((swap(Point2(1, 2)) - Point2(2, 1)).norm() == 0);
}

TEST_CASE("contacts with a vertical line") {
    BifurcationDiagram disk;
    disk.strata.push_back(circle(1));
    auto in_disk = [](const Point2& p) { return p.norm() <= 1; };
    const auto c = classify_contact(disk, 1.0, in_disk);
    REQUIRE(c.size() == 1);
    CHECK(c[0].kind == ContactKind::OutwardContact);
    CHECK(c[0].outward);
    CHECK(c[0].nondegenerate);
    CHECK(std::abs(c[0].point.y()) < 1e-9);

    BifurcationDiagram ann;
    ann.strata.push_back(circle(1));
    ann.strata.push_back(circle(2));
    auto in_ann = [](const Point2& p) { return p.norm() >= 1 && p.norm() <= 2; };
    const auto ci = classify_contact(ann, 1.0, in_ann);
    int contacts = 0, crossings = 0;
    for (const auto& p : ci) {
        if (p.kind == ContactKind::Transversal) {
            ++crossings;
            continue;
        }
        ++contacts;
        CHECK(p.kind == ContactKind::NondegenerateContact);
        CHECK_FALSE(p.outward);
    }
    CHECK(contacts == 1);
    CHECK(crossings == 2);  // x = 1 cuts the outer circle twice
}

TEST_CASE("cone assertion") {
    BifurcationDiagram d;
    d.strata.push_back(polyline({{0, 0}, {1, 0.5}, {2, -0.5}}));
    const ConeSpec wide{pi / 3, pi / 3, Point2(-0.1, 0)};
    CHECK(check_cone(d, {{3, 1}, {1, -0.2}}, wide));
    CHECK_FALSE(check_cone(d, {{-1, 0}}, wide));
    CHECK_FALSE(check_cone(d, {{1, 3}}, wide));
    CHECK_THROWS_AS(check_cone(d, {}, ConeSpec{0, 1, Point2::Zero()}), std::invalid_argument);
    CHECK_THROWS_AS(check_cone(d, {}, ConeSpec{2, 1.2, Point2::Zero()}), std::invalid_argument);
    CHECK_THROWS_AS(check_cone(d, {}, ConeSpec{-0.1, 1, Point2::Zero()}), std::invalid_argument);
}

TEST_CASE("envelopes") {
    {
        const SystemDef sys = build("toric-s2s2");
        EnvelopeOptions eo;
        eo.image_box = run_defaults("toric-s2s2").image_box;
        for (double x : {0.1, 0.5, 0.9}) {
            const auto v = envelope_at(sys, x, eo);
            REQUIRE(v.has_value());
            CHECK(v->lo == doctest::Approx(0).scale(1).epsilon(1e-6));
            CHECK(v->hi == doctest::Approx(1).epsilon(1e-6));
        }
        CHECK_FALSE(envelope_at(sys, 1.5, eo).has_value());
    }
    {
        const SystemDef sys = build("spherical-pendulum");
        EnvelopeOptions eo;
        eo.image_box = {-4, 4, -1.5, 6};
        const auto v = envelope_at(sys, 0.0, eo);
        REQUIRE(v.has_value());
        CHECK(v->lo == doctest::Approx(-1).epsilon(1e-6));
        CHECK(v->hi_truncated);
        const double xc = 2 * std::pow(3.0, 0.25) / 3;
        const auto c = envelope_at(sys, xc, eo);
        REQUIRE(c.has_value());
        CHECK(c->lo == doctest::Approx(0).scale(1).epsilon(1e-5));
    }
}

TEST_CASE("grid and interpolation") {
    const Grid1 g{0, 1, 0.25};
    CHECK(g.points().size() == 5);
    Envelopes e;
    e.x = {0, 1, 2};
    e.hminus = {0, 1, 0};
    e.hplus = {2, 2, 2};
    CHECK(e.lower(0.5) == doctest::Approx(0.5));
    CHECK(std::isnan(e.lower(3)));
    CHECK(e.upper(1.5) == 2);
}

}
