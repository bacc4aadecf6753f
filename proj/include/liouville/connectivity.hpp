#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "liouville/bifurcation.hpp"
#include "liouville/phase_space.hpp"
#include "liouville/plane.hpp"
#include "liouville/singular.hpp"

namespace liouville {

// ------------------------------------------------------------------ fiber sampling

struct FiberOptions {
    int budget = 1500;           // seeds at the first density; then 2× and 4×
    int min_accept = 50;         // fewer accepted points: no count is issued
    std::uint64_t rng_seed = 1;
    double eps_factor = 3.0;     // ε = eps_factor · quantile of nearest-neighbour distances
    double eps_quantile = 0.95;  // 0.5 gives the plain median rule
    double eps_floor = 1e-4;     // lower bound on ε (point-like fibers)
    int pca_neighbors = 12;
    int pca_probes = 40;
};

struct FiberSample {
    Point2 target = Point2::Zero();
    std::vector<Vec> points;    // accepted points at the final density, sorted
    std::vector<int> labels;    // component id per point
    double epsilon = 0.0;
    int components = 0;
    std::vector<int> stability;  // component counts at budget, 2×, 4×
    std::vector<int> accepted;   // accepted points at each density
    bool stable = false;         // last two counts agree
    bool issued = false;         // enough points for a count
    double max_residual = 0.0;
    double pca_ratio = 0.0;      // median λ₂/λ₃ of local covariance spectra
    bool regular_dimension = false;
    std::string note;
};

FiberSample sample_fiber(const SystemDef& sys, const Point2& c, const FiberOptions& opt = {});

/// Component count of an ε-neighbour graph (union–find, periodic metric).
/// `labels` receives component ids numbered by first appearance.
int count_components(const PhaseSpace& sp, const std::vector<Vec>& points, double eps, std::vector<int>* labels);

/// ε = max(factor · q-quantile of nearest-neighbour distances, floor).
double clustering_radius(const PhaseSpace& sp, const std::vector<Vec>& points, double factor, double floor,
                         double quantile = 0.5);

// ------------------------------------------------------------------ Morse–Bott audit

struct CriticalManifold {
    double value = 0.0;          // L on the manifold
    Point2 image = Point2::Zero();
    int index = 0;
    int coindex = 0;
    int nullity = 0;             // zero eigenvalues of the Hessian of L on M
    int dimension = 0;           // from re-projection probes
    int points = 0;              // critical points found in the cluster
    Vec representative;
    std::vector<double> eigenvalues;
    bool consistent() const { return index + coindex + dimension == 4; }
};

struct MorseBottOptions {
    int seeds = 400;
    std::uint64_t rng_seed = 1;
    int probes = 8;
    double probe_size = 1e-3;
    double grad_floor = 1e-6;  // min |∇f| on Σ_F for the hypothesis check
};

struct MorseBottReport {
    std::string f_description;
    std::vector<CriticalManifold> manifolds;
    bool morse_bott = true;       // nullity equals the manifold dimension everywhere
    bool pass = true;             // no index or co-index equal to 1, and Morse–Bott
    bool hypothesis_checked = false;
    bool hypothesis_ok = true;    // f has no critical point on g(Σ_F)
    double min_grad_on_sigma = 0.0;
    int seeds_used = 0;
    int converged = 0;
    std::string note;
};

/// Critical manifolds of L = f ∘ g ∘ F on M with transversal indices.
/// `mapped` (optional) is the diagram after g, used for the hypothesis check.
MorseBottReport morse_bott_audit(const SystemDef& sys, const ScalarField& f, const PlaneDiffeo& g,
                                 const MorseBottOptions& opt = {}, const BifurcationDiagram* mapped = nullptr);

// ------------------------------------------------------------------ verdict

enum class VerdictKind { Guaranteed, Weak, NoGuarantee };
std::string to_string(VerdictKind k);

struct Hypothesis {
    std::string name;
    bool holds = false;
    std::string detail;
};

struct SpotCheck {
    Point2 value = Point2::Zero();
    int components = 0;
    bool issued = false;
    bool stable = false;
    int accepted = 0;
};

struct VerdictOptions {
    bool compact = false;
    std::optional<ConeSpec> cone;
    bool finite_interior_critical_values = false;
    int spot_checks = 5;
    int cone_samples = 2000;
    double spot_clearance = 0.05;  // spot values keep this distance from Σ_F
    std::vector<Point2> extra_values;
    FiberOptions fiber;
    std::uint64_t rng_seed = 1;
};

struct ConnectivityVerdict {
    VerdictKind kind = VerdictKind::NoGuarantee;
    std::vector<Hypothesis> hypotheses;
    std::string failed;  // first hypothesis that failed, empty when guaranteed
    std::vector<SpotCheck> spot_checks;
    int vertical_tangencies = 0;
    std::vector<Tangency> tangencies;  // after g
};

/// `d` is the diagram in the (J, H) plane; `records` feed the almost-toric audit.
ConnectivityVerdict connectivity_verdict(const SystemDef& sys, const BifurcationDiagram& d, const PlaneDiffeo& g,
                                         const std::vector<CriticalPointRecord>& records, const VerdictOptions& opt);

}  // namespace liouville
