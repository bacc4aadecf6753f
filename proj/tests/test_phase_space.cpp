#include <doctest.h>

#include <cmath>
#include <numbers>

#include "liouville/phase_space.hpp"
#include "liouville/sampling.hpp"
#include "liouville/systems.hpp"
#include "support.hpp"

using namespace liouville;

namespace {

PhaseSpace r4() { return PhaseSpace(4, {}, PhaseSpace::canonical_form(2), std::vector<Interval>(4, {-1, 1})); }

Vec vec(std::initializer_list<double> v) {
    Vec x(static_cast<int>(v.size()));
    int i = 0;
    for (double d : v) x[i++] = d;
    return x;
}

// q̇ = p, ṗ = −k + (q·k − |p|²) q
Vec pendulum_rhs(const Vec& m) {
    const Eigen::Vector3d q = m.head<3>(), p = m.tail<3>(), k(0, 0, 1);
    Vec out(6);
    out.head<3>() = p;
    out.tail<3>() = -k + (q.dot(k) - p.squaredNorm()) * q;
    return out;
}

}  // namespace

TEST_SUITE("phasespace") {

TEST_CASE("unconstrained frame is the standard basis") {
    const PhaseSpace sp = r4();
    const Mat E = tangent_basis(sp, vec({0.3, -0.2, 0.5, 1.0}));
    CHECK(E.isApprox(Mat::Identity(4, 4)));
}

TEST_CASE("TS^2 frames are orthonormal and tangent") {
    const SystemDef sys = build("spherical-pendulum");
    for (const Vec& m : {vec({0, 0, 1, 1, 0, 0}), vec({0, 0, -1, 0, 0, 0})}) {
        const Mat E = tangent_basis(sys.space, m);
        REQUIRE(E.cols() == 4);
        CHECK((E.transpose() * E - Mat::Identity(4, 4)).norm() < 1e-12);
        CHECK((sys.space.constraint_jacobian(m) * E).norm() < 1e-12);
    }
    // the radial direction is excluded at the south pole
    const Mat E = tangent_basis(sys.space, vec({0, 0, -1, 0, 0, 0}));
    Vec radial = Vec::Zero(6);
    radial[2] = 1;
    CHECK((E.transpose() * radial).norm() < 1e-12);
}

TEST_CASE("canonical Hamiltonian field") {
    const PhaseSpace sp = r4();
    const auto p1 = parse_expr("v3", 4);
    const Vec v = hamiltonian_field(sp, p1, vec({0.1, 0.2, 0.3, 0.4}));
    CHECK((v - vec({1, 0, 0, 0})).norm() < 1e-14);
    const auto q1 = parse_expr("v1", 4);
    CHECK(poisson_bracket(sp, q1, p1, vec({0.5, -1, 2, 0})) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("pendulum fields match the equations of motion") {
    const SystemDef sys = build("spherical-pendulum");
    const auto pts = feasible_points(sys.space, 50, 3);
    REQUIRE(pts.size() > 40);
    for (const Vec& m : pts) {
        CHECK((hamiltonian_field(sys.space, sys.H, m) - pendulum_rhs(m)).norm() < 1e-9);
        const Eigen::Vector3d q = m.head<3>(), p = m.tail<3>(), k(0, 0, 1);
        Vec xj(6);
        xj.head<3>() = -q.cross(k);
        xj.tail<3>() = -p.cross(k);
        CHECK((hamiltonian_field(sys.space, sys.J, m) - xj).norm() < 1e-9);
    }
}

TEST_CASE("brackets vanish and are antisymmetric across the catalog") {
    for (const auto& e : catalog()) {
        CAPTURE(e.name);
        const SystemDef sys = e.build(e.params);
        const auto pts = feasible_points(sys.space, e.name == "spherical-pendulum" ? 1000 : 200, 5);
        REQUIRE(!pts.empty());
        double worst = 0, anti = 0;
        for (const Vec& m : pts) {
            const PointCheck pc = check_point(sys, m);
            worst = std::max(worst, std::abs(pc.bracket) / pc.bracket_scale);
            anti = std::max(anti, std::abs(pc.bracket + poisson_bracket(sys.space, sys.H, sys.J, m)));
            CHECK(pc.constraint_rank == sys.space.num_constraints());
            CHECK(std::abs(pc.form_det) > sys.space.tol().sympl);
        }
        CHECK(worst <= sys.space.tol().poisson);
        CHECK(anti <= 1e-12);
    }
}

TEST_CASE("RK4 along X_H conserves J and H") {
    const SystemDef sys = build("spherical-pendulum");
    Vec m = feasible_points(sys.space, 1, 17).front();
    const double J0 = sys.J.eval(m), H0 = sys.H.eval(m);
    const double h = 1e-3;
    auto f = [&](const Vec& x) { return hamiltonian_field(sys.space, sys.H, x); };
    for (int i = 0; i < 1000; ++i) {
        const Vec k1 = f(m), k2 = f(m + 0.5 * h * k1), k3 = f(m + 0.5 * h * k2), k4 = f(m + h * k3);
        m += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    CHECK(std::abs(sys.J.eval(m) - J0) < 1e-6);
    CHECK(std::abs(sys.H.eval(m) - H0) < 1e-6);
}

TEST_CASE("newton_project examples") {
    const SystemDef sys = build("spherical-pendulum");
    {
        const auto r = newton_project(sys.space, constraint_targets(sys.space), vec({1.1, 0, 0, 0, 0, 0}));
        REQUIRE(r.ok());
        CHECK((r.x - vec({1, 0, 0, 0, 0, 0})).norm() < 1e-10);
    }
    {
        const auto r = newton_project(sys.space, fiber_targets(sys, 0.0, -1.0), vec({0.05, -0.03, -0.98, 0.01, 0.02, 0.0}));
        REQUIRE(r.ok());
        CHECK((r.x - vec({0, 0, -1, 0, 0, 0})).norm() < 1e-4);
    }
    {
        const SystemDef an = build("annulus", {{"n", 2}});
        const auto seeds = seed_points(an.space, 40, 9);
        int ok = 0;
        for (const Vec& s : seeds) {
            const auto r = newton_project(an.space, fiber_targets(an, 0.5, 1.2), s);
            if (!r.ok()) continue;
            ++ok;
            CHECK(an.space.constraint_residual(r.x) < 1e-10);
            CHECK(std::abs(an.J.eval(r.x) - 0.5) < 1e-10);
            CHECK(std::abs(an.H.eval(r.x) - 1.2) < 1e-10);
        }
        CHECK(ok > 0);
    }
}

TEST_CASE("newton_project is idempotent") {
    const SystemDef sys = build("coupled-spin-oscillator");
    for (const Vec& m : feasible_points(sys.space, 30, 21)) {
        const auto r = newton_project(sys.space, constraint_targets(sys.space), m);
        REQUIRE(r.ok());
        CHECK(sys.space.distance(r.x, m) < sys.space.tol().constraint);
    }
}

TEST_CASE("periodic coordinates wrap") {
    const SystemDef an = build("annulus", {{"n", 1}});
    Vec a = Vec::Zero(5), b = Vec::Zero(5);
    a[2] = b[2] = 1;
    a[3] = 3.1;
    b[3] = -3.1;
    CHECK(an.space.distance(a, b) == doctest::Approx(2 * std::numbers::pi - 6.2).epsilon(1e-12));
    const Vec w = an.space.wrap(a + Vec::Unit(5, 3) * 2 * std::numbers::pi);
    CHECK(w[3] == doctest::Approx(3.1));
}

TEST_CASE("invalid embeddings are rejected") {
    // five ambient coordinates with no constraint cannot carry a 4-manifold
    CHECK_THROWS(PhaseSpace(5, {}, PhaseSpace::canonical_form(2), std::vector<Interval>(5, {-1, 1})));
}

}
