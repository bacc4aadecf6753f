#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "liouville/expr.hpp"

namespace liouville {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Numerical thresholds shared by the whole pipeline. Every field can be
/// overridden from a system file or the command line.
struct Tolerances {
    double constraint = 1e-10;  // residual accepted by newton_project
    double sympl = 1e-8;        // |det| of the restricted form
    double poisson = 1e-8;      // relative {J,H} bound
    double rank = 1e-7;         // singular values of dF restricted to the tangent space
    double nondeg = 1e-8;       // eigenvalue magnitudes, relative to the linearisation norm
    double dedup = 1e-5;        // ambient radius for merging critical points
    double trace_step = 1e-3;   // image-plane continuation step
    double min_step = 1e-7;
    double tang = 1e-6;         // vertical-tangency threshold on |t_x|/|t|
    double env = 1e-4;          // envelope agreement
    int max_iter = 50;
    int max_halvings = 8;
};

class DegenerateEmbedding : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One term of the ambient 2-form.
///   Pair   (i, j):    w · dx_i ∧ dx_j
///   Sphere (i, j, k): w · x·(u × v) with x = (x_i, x_j, x_k), the area form on the unit sphere
struct FormBlock {
    enum class Kind { Pair, Sphere };
    Kind kind = Kind::Pair;
    std::vector<int> idx;
    double weight = 1.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// A symplectic four-manifold realised as the zero set of `constraints` in an
/// ambient coordinate space, with the 2-form given by `form` restricted to it.
class PhaseSpace {
public:
    PhaseSpace(int ambient_dim, std::vector<ScalarField> constraints, std::vector<FormBlock> form,
               std::vector<Interval> seed_box, std::vector<int> periodic_dims = {}, Tolerances tol = {},
               std::vector<std::string> names = {});

    /// Canonical Σ dq^i ∧ dp_i on (q1..qn, p1..pn).
    static std::vector<FormBlock> canonical_form(int n);

    int ambient_dim() const noexcept { return dim_; }
    int num_constraints() const noexcept { return static_cast<int>(constraints_.size()); }
    const std::vector<ScalarField>& constraints() const noexcept { return constraints_; }
    const std::vector<FormBlock>& form() const noexcept { return form_; }
    const std::vector<Interval>& seed_box() const noexcept { return seed_box_; }
    const std::vector<int>& periodic_dims() const noexcept { return periodic_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const Tolerances& tol() const noexcept { return tol_; }
    Tolerances& tol() noexcept { return tol_; }

    bool is_periodic(int i) const;
    /// Maps periodic coordinates into [-pi, pi).
    Vec wrap(Vec x) const;
    /// Ambient difference with periodic coordinates taken modulo 2*pi.
    Vec difference(const Vec& a, const Vec& b) const;
    double distance(const Vec& a, const Vec& b) const { return difference(a, b).norm(); }

    /// Ambient 2-form matrix at x: ω(u, v) = uᵀ Ω(x) v.
    Mat ambient_form(const Vec& x) const;
    /// Constraint Jacobian (k × N).
    Mat constraint_jacobian(const Vec& x) const;
    double constraint_residual(const Vec& x) const;

    ScalarField parse(const std::string& src) const { return parse_expr(src, dim_, names_); }

private:
    int dim_;
    std::vector<ScalarField> constraints_;
    std::vector<FormBlock> form_;
    std::vector<Interval> seed_box_;
    std::vector<int> periodic_;
    Tolerances tol_;
    std::vector<std::string> names_;
};

/// An integrable system F = (J, H) on a phase space.
struct SystemDef {
    std::string name;
    PhaseSpace space;
    ScalarField J;
    ScalarField H;
    bool proper = false;  // user assertion, recorded in reports; not decidable from samples
};

/// Tangent data at a feasible point.
struct LocalFrame {
    Mat E;  // N × 4, orthonormal basis of the constraint tangent space
    Mat C;  // k × N constraint Jacobian
    Mat W;  // 4 × 4 restricted form, W = Eᵀ Ω E
};

LocalFrame local_frame(const PhaseSpace& sp, const Vec& m);

/// Orthonormal 4-frame of ker(constraint Jacobian) at m.
Mat tangent_basis(const PhaseSpace& sp, const Vec& m);

/// The tangent vector v with ω(v, ·) = df on the constraint tangent space.
Vec hamiltonian_field(const PhaseSpace& sp, const ScalarField& f, const Vec& m);

/// ω(X_f, X_g)(m).
double poisson_bracket(const PhaseSpace& sp, const ScalarField& f, const ScalarField& g, const Vec& m);

struct Target {
    ScalarField field;
    double value = 0.0;
};

struct ProjectResult {
    enum class Status { Converged, NoConvergence, RankCollapse };
    Status status = Status::NoConvergence;
    Vec x;
    int iterations = 0;
    double residual = 0.0;

    bool ok() const noexcept { return status == Status::Converged; }
};

/// Damped Gauss–Newton (minimum-norm steps, backtracking by halving) onto the
/// common zero set of field − value over all targets.
ProjectResult newton_project(const PhaseSpace& sp, const std::vector<Target>& targets, const Vec& x0);

/// Targets for the constraints alone.
std::vector<Target> constraint_targets(const PhaseSpace& sp);

/// Targets for the fiber F⁻¹(c): constraints plus J = c1, H = c2.
std::vector<Target> fiber_targets(const SystemDef& sys, double c1, double c2);

/// Intrinsic Hessian of f on the constraint manifold, expressed in `frame.E`.
/// Valid at critical points of f restricted to M (Lagrange-multiplier
/// correction of the ambient Hessian).
struct TangentJet {
    double value = 0.0;
    Vec grad;  // 4-vector, Eᵀ∇f
    Mat hess;  // 4 × 4
    Vec multipliers;
};
TangentJet tangent_jet(const PhaseSpace& sp, const ScalarField& f, const Vec& m, const LocalFrame& frame);

/// Numerical checks of the PhaseSpace / SystemDef invariants at a point.
struct PointCheck {
    int constraint_rank = 0;
    double form_det = 0.0;
    double bracket = 0.0;  // {J,H}(m)
    double bracket_scale = 1.0;
};
PointCheck check_point(const SystemDef& sys, const Vec& m);

}  // namespace liouville
