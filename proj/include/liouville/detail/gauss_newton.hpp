#pragma once

// Minimum-norm damped Gauss–Newton shared by the critical-set solvers.

#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace liouville::detail {

struct GaussNewtonResult {
    Eigen::VectorXd z;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;  // max-norm of the final residual
};

/// `eval(z, r, J)` fills the residual and, when J is non-null, the Jacobian;
/// it returns false when z leaves the domain. `normalize` wraps periodic
/// coordinates.
template <class Eval, class Normalize>
GaussNewtonResult gauss_newton(Eigen::VectorXd z, int m, Eval&& eval, Normalize&& normalize, double tol,
                               int max_iter, int max_halvings = 8) {
    GaussNewtonResult out;
    Eigen::VectorXd r(m), rt(m);
    Eigen::MatrixXd J(m, z.size());
    z = normalize(std::move(z));
    if (!eval(z, r, nullptr) || !r.allFinite()) {
        out.z = z;
        out.residual = INFINITY;
        return out;
    }
    for (out.iterations = 0;; ++out.iterations) {
        out.residual = r.cwiseAbs().maxCoeff();
        if (out.residual < tol) {
            out.converged = true;
            break;
        }
        if (out.iterations >= max_iter) break;
        if (!eval(z, r, &J) || !J.allFinite()) break;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
        cod.setThreshold(1e-12);
        const Eigen::VectorXd step = cod.solve(r);
        const double rn = r.norm();
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= max_halvings; ++h, t *= 0.5) {
            Eigen::VectorXd trial = normalize(Eigen::VectorXd(z - t * step));
            if (eval(trial, rt, nullptr) && rt.allFinite() && rt.norm() < rn) {
                z = std::move(trial);
                r = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    out.z = std::move(z);
    return out;
}

}  // namespace liouville::detail
