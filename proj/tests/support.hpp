#pragma once

// Shared fixtures for the unit tests: random expressions, finite-difference
// oracles, random linear symplectic maps.

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "liouville/expr.hpp"
#include "liouville/phase_space.hpp"

namespace testsupport {

/// Random smooth expression over v1..v`arity`, finite on [-1, 1]^arity.
inline std::string random_expr(std::mt19937_64& rng, int arity, int depth) {
    std::uniform_int_distribution<int> pick(0, 11);
    std::uniform_int_distribution<int> var(1, arity);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    auto leaf = [&] {
        std::ostringstream os;
        if (pick(rng) % 3 == 0)
            os << std::fixed << std::abs(coef(rng));
        else
            os << "v" << var(rng);
        return os.str();
    };
    if (depth <= 0) return leaf();
    const std::string a = random_expr(rng, arity, depth - 1);
    const std::string b = random_expr(rng, arity, depth - 1);
    switch (pick(rng)) {
        case 0: return "(" + a + " + " + b + ")";
        case 1: return "(" + a + " - " + b + ")";
        case 2: return "(" + a + " * " + b + ")";
        case 3: return "sin(" + a + ")";
        case 4: return "cos(" + a + ")";
        case 5: return "exp(0.3 * " + a + ")";
        case 6: return "sqrt(1 + (" + a + ")^2)";
        case 7: return "log(2 + sin(" + a + "))";
        case 8: return "(" + a + ") / (1.5 + cos(" + b + "))";
        case 9: return "(" + a + ")^3";
        case 10: return "-(" + a + ")^2";
        default: return "(1.2 + sin(" + a + "))^0.5";
    }
}

inline Eigen::VectorXd random_point(std::mt19937_64& rng, int n, double r = 1.0) {
    std::uniform_real_distribution<double> u(-r, r);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    return x;
}

inline Eigen::VectorXd fd_gradient(const liouville::ExprTree& e, const Eigen::VectorXd& x, double h = 1e-6) {
    Eigen::VectorXd g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x, b = x;
        const double hi = h * (1.0 + std::abs(x[i]));
        a[i] += hi;
        b[i] -= hi;
        g[i] = (e.eval(a) - e.eval(b)) / (2 * hi);
    }
    return g;
}

inline Eigen::MatrixXd fd_hessian(const liouville::ExprTree& e, const Eigen::VectorXd& x, double h = 1e-4) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd H(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            auto f = [&](double si, double sj) {
                Eigen::VectorXd y = x;
                y[i] += si * h;
                y[j] += sj * h;
                return e.eval(y);
            };
            H(i, j) = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * h * h);
        }
    return H;
}

/// Random symplectic matrix for the canonical form on (q1..qn, p1..pn).
inline Eigen::MatrixXd random_symplectic(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n), B(n, n), C(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) += u(rng);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            B(i, j) = B(j, i) = u(rng);
            C(i, j) = C(j, i) = u(rng);
        }
    const int N = 2 * n;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N), U = Eigen::MatrixXd::Identity(N, N),
                    L = Eigen::MatrixXd::Identity(N, N);
    D.topLeftCorner(n, n) = A;
    D.bottomRightCorner(n, n) = A.inverse().transpose();
    U.topRightCorner(n, n) = B;
    L.bottomLeftCorner(n, n) = C;
    return D * U * L;
}

inline Eigen::MatrixXd canonical_omega(int n) {
    Eigen::MatrixXd O = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    O.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    O.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
    return O;
}

/// Expressions for the components of S·v over v1..vN.
inline std::vector<liouville::ExprTree> linear_map(const Eigen::MatrixXd& S) {
    std::vector<liouville::ExprTree> out;
    for (int i = 0; i < S.rows(); ++i) {
        std::ostringstream os;
        os.precision(17);
        os << "0";
        for (int j = 0; j < S.cols(); ++j) os << " + (" << S(i, j) << ") * v" << j + 1;
        out.push_back(liouville::parse_expr(os.str(), static_cast<int>(S.cols())));
    }
    return out;
}

}  // namespace testsupport
