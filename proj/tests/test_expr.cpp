#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "liouville/expr.hpp"
#include "support.hpp"

using namespace liouville;

TEST_SUITE("exprdsl") {

TEST_CASE("parse: focus-focus component") {
    const auto e = parse_expr("v1*v4 - v2*v3", 4);
    const double x[] = {1.5, -2.0, 0.25, 3.0};
    CHECK(e.eval(x) == doctest::Approx(1.5 * 3.0 - (-2.0) * 0.25));
    CHECK(e.arity() == 4);
}

TEST_CASE("parse: constant zero") {
    const auto e = parse_expr("0", 2);
    CHECK_FALSE(e.depends_on_variables());
    const double x[] = {3.0, 4.0};
    const Jet2 j = e.eval_jet2(x);
    CHECK(j.value() == 0.0);
    CHECK(j.gradient().isZero(0));
    CHECK(j.hessian().isZero(0));
}

TEST_CASE("parse: Pythagorean identity at 100 points") {
    const auto e = parse_expr("sin(v1)^2 + cos(v1)^2", 1);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng);
        CHECK(e.eval(std::span<const double>(&x, 1)) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("precedence and associativity") {
    const double none[] = {0.0};
    auto val = [&](const char* s) { return parse_expr(s, 1).eval(none); };
    CHECK(val("2^3^2") == 512.0);
    CHECK(val("-2^2") == -4.0);
    CHECK(val("8/4/2") == 1.0);
    CHECK(val("1-2-3") == -4.0);
    CHECK(val("2*3+4*5") == 26.0);
    CHECK(val("2*(3+4)*5") == 70.0);
    CHECK(val("pi") == std::numbers::pi);
    CHECK(val("e") == std::numbers::e);
    CHECK(val("1.5e2 + 2E-1") == doctest::Approx(150.2));
    CHECK(val("  ( 1 +\t2 )\n* 3 ") == 9.0);
}

TEST_CASE("errors carry offsets") {
    try {
        parse_expr("v1 + * v2", 2);
        FAIL("no throw");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 5);
    }
    CHECK_THROWS_AS(parse_expr("foo(v1)", 1), ParseError);
    CHECK_THROWS_AS(parse_expr("v5", 4), ParseError);
    CHECK_THROWS_AS(parse_expr("v0", 4), ParseError);
    CHECK_THROWS_AS(parse_expr("(v1", 1), ParseError);
    CHECK_THROWS_AS(parse_expr("v1)", 1), ParseError);
    CHECK_THROWS_AS(parse_expr("", 1), ParseError);
    try {
        parse_expr("v1 + zz", 1);
        FAIL("no throw");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 5);
        CHECK(std::strstr(e.what(), "zz") != nullptr);
    }
}

TEST_CASE("named variables alias v-indices") {
    const auto e = parse_expr("q1*p2 - v2*p1", 4, {"q1", "q2", "p1", "p2"});
    const double x[] = {1, 2, 3, 4};
    CHECK(e.eval(x) == 1 * 4 - 2 * 3);
}

TEST_CASE("domain errors name the subexpression") {
    const double x[] = {-1.0};
    CHECK_THROWS_AS(parse_expr("sqrt(v1)", 1).eval_jet2(x), DomainError);
    CHECK_THROWS_AS(parse_expr("log(v1 + 1)", 1).eval(x), DomainError);
    CHECK_THROWS_AS(parse_expr("1/(v1 + 1)", 1).eval(x), DomainError);
    CHECK_THROWS_AS(parse_expr("v1^0.5", 1).eval(x), DomainError);
    CHECK(parse_expr("v1^3", 1).eval(x) == -1.0);
    CHECK(parse_expr("(2*v1)^-2", 1).eval(x) == 0.25);
    try {
        parse_expr("v1 + sqrt(v1 - 1)", 1).eval(x);
        FAIL("no throw");
    } catch (const DomainError& e) {
        CHECK(e.subexpression().find("sqrt") != std::string::npos);
    }
}

TEST_CASE("jets of reference expressions") {
    {
        const double x[] = {3, 4};
        const Jet2 j = parse_expr("v1^2 + v2^2", 2).eval_jet2(x);
        CHECK(j.value() == 25);
        CHECK(j.grad(0) == 6);
        CHECK(j.grad(1) == 8);
        CHECK(j.hess(0, 0) == 2);
        CHECK(j.hess(1, 1) == 2);
        CHECK(j.hess(0, 1) == 0);
    }
    {
        const double x[] = {1};
        CHECK(parse_expr("(v1^4 - 1)/v1", 1).eval_jet2(x).value() == 0.0);
    }
    {
        const double x[] = {2, 5};
        const Jet2 j = parse_expr("v1*v2", 2).eval_jet2(x);
        CHECK(j.value() == 10);
        CHECK(j.grad(0) == 5);
        CHECK(j.grad(1) == 2);
        CHECK(j.hess(0, 1) == 1);
        CHECK(j.hess(1, 0) == 1);
        CHECK(j.hess(0, 0) == 0);
    }
}

TEST_CASE("quadratics are exact") {
    const auto e = parse_expr("3*v1^2 - 2*v1*v2 + 0.5*v2^2 + v3 - 7", 3);
    std::mt19937_64 rng(11);
    for (int k = 0; k < 20; ++k) {
        const Eigen::VectorXd x = testsupport::random_point(rng, 3, 5.0);
        const Jet2 j = e.eval_jet2(x);
        CHECK(j.grad(0) == doctest::Approx(6 * x[0] - 2 * x[1]).epsilon(1e-15));
        CHECK(j.grad(1) == doctest::Approx(-2 * x[0] + x[1]).epsilon(1e-15));
        CHECK(j.grad(2) == 1.0);
        CHECK(j.hess(0, 0) == 6.0);
        CHECK(j.hess(0, 1) == -2.0);
        CHECK(j.hess(1, 1) == 1.0);
        CHECK(j.hess(2, 2) == 0.0);
        CHECK(j.hessian() == j.hessian().transpose());
    }
}

TEST_CASE("AD agrees with central differences on 200 random trees") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    double worst_g = 0.0, worst_h = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int arity = 1 + t % 4;
        const auto e = parse_expr(testsupport::random_expr(rng, arity, 3), arity);
        const Eigen::VectorXd x = testsupport::random_point(rng, arity);
        const Jet2 j = e.eval_jet2(x);
        const Eigen::VectorXd g = j.gradient();
        const double eg = (g - testsupport::fd_gradient(e, x)).norm() / (1.0 + g.norm());
        worst_g = std::max(worst_g, eg);
        const Eigen::MatrixXd H = j.hessian(), Hf = testsupport::fd_hessian(e, x);
        for (int a = 0; a < arity; ++a)
            for (int b = 0; b < arity; ++b) {
                const double d = std::abs(H(a, b) - Hf(a, b));
                worst_h = std::max(worst_h, std::min(d, d / std::abs(H(a, b))));
            }
        ++checked;
    }
    CHECK(checked == 200);
    CHECK(worst_g <= 1e-6);
    CHECK(worst_h <= 1e-4);
}

TEST_CASE("round trip through to_string") {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 200; ++t) {
        const int arity = 1 + t % 3;
        const auto e = parse_expr(testsupport::random_expr(rng, arity, 4), arity);
        const auto back = parse_expr(e.to_string(), arity);
        CHECK(back == e);
    }
}

TEST_CASE("chain rule through compose") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto outer = parse_expr(testsupport::random_expr(rng, 2, 2), 2);
        const auto u = parse_expr(testsupport::random_expr(rng, 3, 2), 3);
        const auto w = parse_expr(testsupport::random_expr(rng, 3, 2), 3);
        const auto comp = compose(outer, {u, w});
        const Eigen::VectorXd x = testsupport::random_point(rng, 3);
        const Jet2 ju = u.eval_jet2(x), jw = w.eval_jet2(x);
        const double inner[] = {ju.value(), jw.value()};
        const Jet2 jo = outer.eval_jet2(inner);
        Eigen::MatrixXd Ji(2, 3);
        Ji.row(0) = ju.gradient().transpose();
        Ji.row(1) = jw.gradient().transpose();
        const Eigen::VectorXd g = Ji.transpose() * jo.gradient();
        const Eigen::MatrixXd H =
            Ji.transpose() * jo.hessian() * Ji + jo.grad(0) * ju.hessian() + jo.grad(1) * jw.hessian();
        const Jet2 jc = comp.eval_jet2(x);
        CHECK(jc.value() == doctest::Approx(jo.value()).epsilon(1e-12));
        CHECK((jc.gradient() - g).norm() <= 1e-10 * (1 + g.norm()));
        CHECK((jc.hessian() - H).norm() <= 1e-10 * (1 + H.norm()));
    }
}

TEST_CASE("evaluation is deterministic") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto e = parse_expr(testsupport::random_expr(rng, 3, 4), 3);
        const Eigen::VectorXd x = testsupport::random_point(rng, 3);
        const Jet2 a = e.eval_jet2(x), b = e.eval_jet2(x);
        REQUIRE(a.raw().size() == b.raw().size());
        CHECK(std::memcmp(a.raw().data(), b.raw().data(), a.raw().size() * sizeof(double)) == 0);
    }
}

TEST_CASE("packed Hessian storage is symmetric") {
    const auto e = parse_expr("sin(v1*v2) + v3^2*v1", 3);
    const double x[] = {0.3, -0.7, 1.1};
    const Jet2 j = e.eval_jet2(x);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) CHECK(j.hess(a, b) == j.hess(b, a));
}

}
