#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "liouville/phase_space.hpp"

namespace liouville {

enum class WilliamsonType {
    EllipticElliptic,
    FocusFocus,
    TransversallyElliptic,
    TransversallyHyperbolic,
    HyperbolicElliptic,
    HyperbolicHyperbolic,
    Degenerate,
    Unresolved,
};

std::string to_string(WilliamsonType t);
WilliamsonType williamson_from_string(const std::string& s);

/// Types allowed in an almost-toric system.
bool is_almost_toric_type(WilliamsonType t);

struct Certificate {
    double equation_residual = 0.0;    // residual of the critical-point equations
    double constraint_residual = 0.0;
    double sigma1 = 0.0;               // singular values of dF restricted to the tangent space
    double sigma2 = 0.0;
    double rank_scale = 1.0;           // scale the rank tolerance is multiplied by
    double form_det = 0.0;             // det of the restricted 2-form
    double spectrum_symmetry = 0.0;    // rank 0: max_i min_j |λ_i + λ_j| / |A|
    double commutator = 0.0;           // rank 0: |[A_J, A_H]| / (|A_J| |A_H|)
    double restricted_det = 0.0;       // rank 1: det of the 2×2 transversal Hessian
    int agreeing_draws = 0;            // rank 0: generic combinations that agreed
};

struct CriticalPointRecord {
    Vec point;
    int rank = 0;  // 0 or 1
    WilliamsonType wtype = WilliamsonType::Unresolved;
    /// Rank 0: the four eigenvalues of the linearised field of c1 J + c2 H.
    /// Rank 1: the two eigenvalues of the transversal Hessian (imaginary parts 0).
    std::vector<std::complex<double>> eigen_data;
    Eigen::Vector2d image = Eigen::Vector2d::Zero();
    Certificate cert;
};

// ------------------------------------------------------------------ rank

struct RankInfo {
    int rank = 2;  // 0, 1, 2, or -1 when the decision is ambiguous
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    double scale = 1.0;
    Eigen::Vector2d kernel = Eigen::Vector2d::Zero();  // (a, b) with a dJ + b dH ≈ 0 on the tangent space
};

RankInfo critical_rank(const SystemDef& sys, const Vec& m);

// ------------------------------------------------------------------ critical-set equations

struct Rank1Solution {
    Vec x;
    double theta = 0.0;  // cosθ dJ + sinθ dH = 0 on the tangent space
    bool converged = false;
    double residual = 0.0;
};

/// Optional image-plane slice ⟨F(x) − point, normal⟩ = 0 used by continuation.
struct ImageSlice {
    Eigen::Vector2d point;
    Eigen::Vector2d normal;
};

/// Gauss–Newton on {cosθ ∇J + sinθ ∇H − Cᵀμ = 0, c = 0 [, slice]} in (x, μ, θ).
Rank1Solution solve_rank1(const SystemDef& sys, const Vec& x0, double theta0, const std::optional<ImageSlice>& slice,
                          int max_iter = 50);

/// θ minimising |cosθ dJ + sinθ dH| on the tangent space at x.
double initial_theta(const SystemDef& sys, const Vec& x);

struct PointSolution {
    Vec x;
    bool converged = false;
    double residual = 0.0;
};

/// Gauss–Newton on {∇J − Cᵀμ = 0, ∇H − Cᵀν = 0, c = 0}.
PointSolution solve_rank0(const SystemDef& sys, const Vec& x0, int max_iter = 30);

/// Gauss–Newton on {∇f − Cᵀμ = 0, c = 0}: critical points of f on M.
PointSolution solve_critical(const PhaseSpace& sp, const ScalarField& f, const Vec& x0, int max_iter = 50);

// ------------------------------------------------------------------ classification

struct Rank0Classification {
    WilliamsonType wtype = WilliamsonType::Unresolved;
    std::vector<std::complex<double>> eigenvalues;  // from the first generic combination
    std::vector<WilliamsonType> per_draw;
    double spectrum_symmetry = 0.0;
    double commutator = 0.0;
    std::string diagnostics;
};

/// Williamson type from the eigenvalue pattern of Ω⁻¹·Hess(c1 J + c2 H) for
/// five random generic combinations c, which must agree.
Rank0Classification classify_rank0(const SystemDef& sys, const Vec& m, std::uint64_t seed = 0x5eedULL);

/// Eigenvalue pattern of a 4×4 Hamiltonian matrix (exposed for tests).
WilliamsonType classify_spectrum(const std::vector<std::complex<double>>& ev, double nondeg_tol);

struct Rank1Classification {
    WilliamsonType wtype = WilliamsonType::Unresolved;
    Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();
    double det = 0.0;
    Eigen::Vector2d multiplier = Eigen::Vector2d::Zero();  // (a, b) with a dJ + b dH = 0, b ≥ 0
};

/// Hessian of aJ + bH (a dJ + b dH = 0) restricted to the symplectic
/// complement of span{X_G, ∇G}, G = −bJ + aH.
Rank1Classification classify_rank1(const SystemDef& sys, const Vec& m);

// ------------------------------------------------------------------ search

struct SearchOptions {
    int seeds = 1500;
    int rank0_seeds = 600;       // seeds also tried with the rank-0 solver
    std::uint64_t rng_seed = 1;
    double rep_spacing = 0.05;   // image-plane binning of rank-1 representatives
};

struct CriticalSearch {
    std::vector<CriticalPointRecord> records;
    int seeds_used = 0;
    int dropped = 0;  // seeds whose solves did not converge
};

CriticalSearch find_critical_points(const SystemDef& sys, const SearchOptions& opt = {});

/// Builds a full record (rank, type, certificate) for a converged critical point.
CriticalPointRecord make_record(const SystemDef& sys, const Vec& m, double equation_residual,
                                std::uint64_t seed = 0x5eedULL);

struct AlmostToricVerdict {
    bool pass = true;
    int seeds_used = 0;
    int records_checked = 0;
    std::vector<CriticalPointRecord> offending;
};

/// Pass iff every record is elliptic-elliptic, focus-focus or transversally
/// elliptic. Conditional on the seed coverage stated in `seeds_used`.
AlmostToricVerdict almost_toric_audit(const SystemDef& sys, const std::vector<CriticalPointRecord>& records,
                                      int seeds_used = 0);

}  // namespace liouville
