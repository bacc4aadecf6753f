#include "liouville/systems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace liouville {

namespace {

constexpr double pi = std::numbers::pi;

Params merge(const std::string& name, const Params& defaults, const Params& given) {
    Params out = defaults;
    for (const auto& [k, v] : given) {
        if (!defaults.count(k)) throw std::invalid_argument("system '" + name + "' has no parameter '" + k + "'");
        out[k] = v;
    }
    return out;
}

std::vector<Interval> cube(int n, double r) { return std::vector<Interval>(n, Interval{-r, r}); }

int annulus_n(const Params& p) {
    const double n = p.at("n");
    if (!(n >= 1.0) || n != std::floor(n) || n > 64) throw std::invalid_argument("annulus parameter n must be an integer in [1, 64]");
    return static_cast<int>(n);
}

SystemDef make(std::string name, int dim, const std::vector<std::string>& names, const std::vector<std::string>& cons,
               std::vector<FormBlock> form, std::vector<Interval> box, std::vector<int> periodic, const std::string& J,
               const std::string& H, bool proper) {
    std::vector<ScalarField> c;
    for (const auto& s : cons) c.push_back(parse_expr(s, dim, names));
    PhaseSpace sp(dim, std::move(c), std::move(form), std::move(box), std::move(periodic), {}, names);
    return SystemDef{std::move(name), sp, parse_expr(J, dim, names), parse_expr(H, dim, names), proper};
}

// ------------------------------------------------------------------ spherical pendulum

SystemDef pendulum(const Params&) {
    std::vector<Interval> box = {{-1, 1}, {-1, 1}, {-1, 1}, {-2.5, 2.5}, {-2.5, 2.5}, {-2.5, 2.5}};
    return make("spherical-pendulum", 6, {"q1", "q2", "q3", "p1", "p2", "p3"},
                {"q1^2 + q2^2 + q3^2 - 1", "q1*p1 + q2*p2 + q3*p3"}, PhaseSpace::canonical_form(3), box, {},
                "q1*p2 - q2*p1", "0.5*(p1^2 + p2^2 + p3^2) + q3", true);
}

RunDefaults pendulum_defaults(const Params&) {
    RunDefaults d;
    d.image_box = {-4.0, 4.0, -1.5, 6.0};
    d.j_grid = {-4.5, 4.5, 0.05};
    d.g = {"v2", "v1", "v2", "v1"};
    d.cone = ConeSpec{pi / 3, pi / 3, Point2(-2.0, 0.0)};
    d.compact = false;
    return d;
}

ReferenceData pendulum_reference(const Params&) {
    ReferenceData r;
    Vec north(6), south(6);
    north << 0, 0, 1, 0, 0, 0;
    south << 0, 0, -1, 0, 0, 0;
    r.rank0 = {{"north pole", north, {0.0, 1.0}, WilliamsonType::FocusFocus, Origin::Analytic},
               {"south pole", south, {0.0, -1.0}, WilliamsonType::EllipticElliptic, Origin::Analytic}};
    r.almost_toric = Tagged<bool>{true, Origin::Analytic};
    r.vertical_tangencies = Tagged<int>{0, Origin::Analytic};
    r.fibers = {{{0.5, 1.0}, 1, Origin::Analytic}, {{-0.3, 0.2}, 1, Origin::Analytic}};
    r.verdict = Tagged<std::string>{"GUARANTEED-CONNECTED", Origin::Analytic};
    return r;
}

// ------------------------------------------------------------------ annulus
// Sphere (x, y, z) with height h = 3/2 + z/2 ∈ [1, 2] and a circle pair (b, c).
// The area form is 2 dh∧da; weight 1/2 turns it into dh∧da.

SystemDef annulus(const Params& p) {
    const int n = annulus_n(p);
    std::vector<FormBlock> form = {{FormBlock::Kind::Sphere, {0, 1, 2}, 0.5},
                                   {FormBlock::Kind::Pair, {4, 3}, static_cast<double>(n)}};
    std::vector<Interval> box = {{-1, 1}, {-1, 1}, {-1, 1}, {-pi, pi}, {-pi, pi}};
    const std::string ns = std::to_string(n);
    return make("annulus", 5, {"x", "y", "z", "b", "c"}, {"x^2 + y^2 + z^2 - 1"}, form, box, {3, 4},
                "(1.5 + 0.5*z)*cos(" + ns + "*b)", "(1.5 + 0.5*z)*sin(" + ns + "*b)", true);
}

RunDefaults annulus_defaults(const Params&) {
    RunDefaults d;
    d.image_box = {-2.5, 2.5, -2.5, 2.5};
    d.j_grid = {-2.0, 2.0, 0.05};
    d.g = {"v1", "v2", "v1", "v2"};
    d.compact = true;
    return d;
}

ReferenceData annulus_reference(const Params& p) {
    const int n = annulus_n(p);
    ReferenceData r;
    r.almost_toric = Tagged<bool>{true, Origin::Analytic};
    r.vertical_tangencies = Tagged<int>{4, Origin::Analytic};
    r.fibers = {{{1.5 * std::cos(0.3), 1.5 * std::sin(0.3)}, n, Origin::Analytic},
                {{-1.2, 0.4}, n, Origin::Analytic}};
    r.verdict = Tagged<std::string>{"NO-GUARANTEE", Origin::Analytic};
    return r;
}

// ------------------------------------------------------------------ coupled spin-oscillator
// S² × ℝ² with the unit area form on S² and 4 dv∧du on the plane, so that both
// summands of J rotate their factor with period 2π.

SystemDef coupled(const Params&) {
    std::vector<FormBlock> form = {{FormBlock::Kind::Sphere, {0, 1, 2}, 1.0}, {FormBlock::Kind::Pair, {4, 3}, 4.0}};
    std::vector<Interval> box = {{-1, 1}, {-1, 1}, {-1, 1}, {-1.5, 1.5}, {-1.5, 1.5}};
    return make("coupled-spin-oscillator", 5, {"x", "y", "z", "u", "v"}, {"x^2 + y^2 + z^2 - 1"}, form, box, {},
                "2*u^2 + 2*v^2 + z", "u*x + v*y", true);
}

RunDefaults coupled_defaults(const Params&) {
    RunDefaults d;
    d.image_box = {-1.5, 5.0, -3.0, 3.0};
    d.j_grid = {-1.0, 4.0, 0.05};
    d.g = {"v1", "v2", "v1", "v2"};
    d.cone = ConeSpec{pi / 3, pi / 3, Point2(-2.0, 0.0)};
    return d;
}

ReferenceData coupled_reference(const Params&) {
    ReferenceData r;
    Vec north(5), south(5);
    north << 0, 0, 1, 0, 0;
    south << 0, 0, -1, 0, 0;
    r.rank0 = {{"north pole", north, {1.0, 0.0}, WilliamsonType::FocusFocus, Origin::Convention},
               {"south pole", south, {-1.0, 0.0}, WilliamsonType::EllipticElliptic, Origin::Convention}};
    r.almost_toric = Tagged<bool>{true, Origin::Convention};
    r.vertical_tangencies = Tagged<int>{0, Origin::NumericOracle};
    r.fibers = {{{0.5, 0.1}, 1, Origin::NumericOracle}};
    r.verdict = Tagged<std::string>{"GUARANTEED-CONNECTED", Origin::NumericOracle};
    return r;
}

// ------------------------------------------------------------------ toric S² × S²

SystemDef toric_s2s2(const Params&) {
    std::vector<FormBlock> form = {{FormBlock::Kind::Sphere, {0, 1, 2}, 0.5}, {FormBlock::Kind::Sphere, {3, 4, 5}, 0.5}};
    return make("toric-s2s2", 6, {"x1", "y1", "z1", "x2", "y2", "z2"},
                {"x1^2 + y1^2 + z1^2 - 1", "x2^2 + y2^2 + z2^2 - 1"}, form, cube(6, 1.0), {}, "(1 + z1)/2",
                "(1 + z2)/2", true);
}

const char* rot45_x = "(v1 + v2)/sqrt(2)";
const char* rot45_y = "(v2 - v1)/sqrt(2)";
const char* rot45_inv_x = "(v1 - v2)/sqrt(2)";
const char* rot45_inv_y = "(v1 + v2)/sqrt(2)";

RunDefaults toric_s2s2_defaults(const Params&) {
    RunDefaults d;
    d.image_box = {-0.25, 1.25, -0.25, 1.25};
    d.j_grid = {0.0, 1.0, 0.025};
    d.g = {rot45_x, rot45_y, rot45_inv_x, rot45_inv_y};
    d.compact = true;
    return d;
}

ReferenceData toric_s2s2_reference(const Params&) {
    ReferenceData r;
    const double c[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    for (const auto& v : c)
        r.rank0.push_back({"corner", Vec(), {v[0], v[1]}, WilliamsonType::EllipticElliptic, Origin::Analytic});
    r.almost_toric = Tagged<bool>{true, Origin::Analytic};
    r.vertical_tangencies = Tagged<int>{0, Origin::Analytic};
    r.fibers = {{{0.5, 0.5}, 1, Origin::Analytic}};
    r.verdict = Tagged<std::string>{"GUARANTEED-CONNECTED", Origin::Analytic};
    return r;
}

// ------------------------------------------------------------------ quadratic models on ℝ⁴ = (x1, x2, ξ1, ξ2)

struct Model {
    const char* name;
    const char* description;
    const char* J;
    const char* H;
    WilliamsonType rank0;  // type at the origin, or Unresolved if the origin is rank 1
    bool almost_toric;
};

const Model models[] = {
    {"toric-r4", "elliptic-elliptic normal form (toric model on R^4)", "(x1^2 + k1^2)/2", "(x2^2 + k2^2)/2",
     WilliamsonType::EllipticElliptic, true},
    {"model-ee", "elliptic-elliptic normal form", "(x1^2 + k1^2)/2", "(x2^2 + k2^2)/2",
     WilliamsonType::EllipticElliptic, true},
    {"model-ff", "focus-focus normal form", "x1*k2 - x2*k1", "x1*k1 + x2*k2", WilliamsonType::FocusFocus, true},
    {"model-te", "transversally elliptic normal form", "k1", "(x2^2 + k2^2)/2", WilliamsonType::Unresolved, true},
    {"model-th", "transversally hyperbolic normal form", "k1", "x2*k2", WilliamsonType::Unresolved, false},
    {"model-he", "hyperbolic-elliptic normal form", "x1*k1", "(x2^2 + k2^2)/2", WilliamsonType::HyperbolicElliptic,
     false},
    {"model-hh", "hyperbolic-hyperbolic normal form", "x1*k1", "x2*k2", WilliamsonType::HyperbolicHyperbolic, false},
};

SystemDef model_system(const Model& m) {
    std::vector<FormBlock> form = PhaseSpace::canonical_form(2);
    const bool toric = std::string(m.name) == "toric-r4";
    return make(m.name, 4, {"x1", "x2", "k1", "k2"}, {}, form, cube(4, toric ? 2.0 : 1.5), {}, m.J, m.H,
                toric || m.name == std::string("model-te") || m.name == std::string("model-ee"));
}

RunDefaults model_defaults(const Model& m) {
    RunDefaults d;
    if (std::string(m.name) == "toric-r4") {
        d.image_box = {-0.5, 3.0, -0.5, 3.0};
        d.j_grid = {0.0, 3.0, 0.05};
        d.g = {rot45_x, rot45_y, rot45_inv_x, rot45_inv_y};
        d.cone = ConeSpec{pi / 3, pi / 3, Point2(-0.1, 0.0)};
    } else {
        d.image_box = {-2.0, 2.0, -2.0, 2.0};
        d.j_grid = {-1.0, 1.0, 0.1};
        d.g = {"v1", "v2", "v1", "v2"};
    }
    return d;
}

ReferenceData model_reference(const Model& m) {
    ReferenceData r;
    if (m.rank0 != WilliamsonType::Unresolved)
        r.rank0.push_back({"origin", Vec::Zero(4), {0.0, 0.0}, m.rank0, Origin::Analytic});
    r.almost_toric = Tagged<bool>{m.almost_toric, Origin::Analytic};
    if (std::string(m.name) == "toric-r4") {
        r.vertical_tangencies = Tagged<int>{0, Origin::Analytic};
        r.fibers = {{{0.0, 0.0}, 1, Origin::Analytic}, {{0.5, 1.0}, 1, Origin::Analytic}};
        r.verdict = Tagged<std::string>{"GUARANTEED-CONNECTED", Origin::Analytic};
    }
    return r;
}

std::vector<CatalogEntry> make_catalog() {
    std::vector<CatalogEntry> c;
    c.push_back({"spherical-pendulum", "spherical pendulum on TS^2 in R^6, J = angular momentum about the vertical",
                 {}, pendulum, pendulum_defaults, pendulum_reference});
    c.push_back({"annulus", "(h cos nb, h sin nb) on S^2 x T^2 with h in [1,2]; fibers have n components",
                 {{"n", 1.0}}, annulus, annulus_defaults, annulus_reference});
    c.push_back({"coupled-spin-oscillator", "(2u^2 + 2v^2 + z, ux + vy) on S^2 x R^2", {}, coupled,
                 coupled_defaults, coupled_reference});
    c.push_back({"toric-s2s2", "product of height functions on S^2 x S^2", {}, toric_s2s2, toric_s2s2_defaults,
                 toric_s2s2_reference});
    for (const auto& m : models)
        c.push_back({m.name, m.description, {}, [&m](const Params&) { return model_system(m); },
                     [&m](const Params&) { return model_defaults(m); },
                     [&m](const Params&) { return model_reference(m); }});
    return c;
}

}  // namespace

std::string to_string(Origin o) {
    switch (o) {
        case Origin::Analytic: return "analytic";
        case Origin::NumericOracle: return "numeric_oracle";
        case Origin::Convention: return "convention";
    }
    return "analytic";
}

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> c = make_catalog();
    return c;
}

const CatalogEntry& catalog_entry(const std::string& name) {
    for (const auto& e : catalog())
        if (e.name == name) return e;
    throw std::invalid_argument("unknown catalog system '" + name + "'");
}

SystemDef build(const std::string& name, const Params& params) {
    const auto& e = catalog_entry(name);
    return e.build(merge(name, e.params, params));
}

RunDefaults run_defaults(const std::string& name, const Params& params) {
    const auto& e = catalog_entry(name);
    return e.defaults(merge(name, e.params, params));
}

ReferenceData reference_data(const std::string& name, const Params& params) {
    const auto& e = catalog_entry(name);
    return e.reference(merge(name, e.params, params));
}

double reference_curve(double h) {
    if (!(h >= -1.0)) throw std::domain_error("reference_curve requires h >= -1");
    const double s = std::sqrt(h * h + 3.0);
    const double v = (2.0 / 9.0) * (3.0 - h * h + h * s) * std::sqrt(h + s);
    return std::max(v, 0.0);
}

Point2 pendulum_curve(double lambda) {
    const double l2 = lambda * lambda, l4 = l2 * l2;
    return {(l4 - 1.0) / lambda, (1.0 - 3.0 * l4) / (2.0 * l2)};
}

std::vector<Point2> overlap_fixture(int samples) {
    // Limaçon r = 1/2 + cos t: a closed curve whose inner loop overlaps the outer one.
    std::vector<Point2> out;
    for (int i = 0; i < samples; ++i) {
        const double t = 2.0 * pi * i / samples;
        const double r = 0.5 + std::cos(t);
        out.emplace_back(r * std::cos(t), r * std::sin(t));
    }
    return out;
}

}  // namespace liouville
