#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "liouville/phase_space.hpp"
#include "liouville/plane.hpp"
#include "liouville/singular.hpp"

namespace liouville {

/// A traced stratum of the bifurcation set: a polyline in the image plane.
struct Stratum {
    enum class End { LeftBox, Closed, Rank0, Stall, Limit };

    std::vector<Point2> vertices;
    std::vector<WilliamsonType> wtype;  // per vertex
    std::vector<Vec> points;            // ambient critical point behind each vertex
    bool closed = false;
    End start_end = End::LeftBox;  // how the backward half ended
    End final_end = End::LeftBox;  // how the forward half ended
    bool stalled() const { return start_end == End::Stall || final_end == End::Stall; }
};

std::string to_string(Stratum::End e);

struct IsolatedValue {
    Point2 value = Point2::Zero();
    WilliamsonType wtype = WilliamsonType::Unresolved;
};

enum class ContactKind { Transversal, VerticalTangency, NondegenerateContact, OutwardContact, DegenerateContact };
std::string to_string(ContactKind k);

struct Tangency {
    Point2 point = Point2::Zero();
    ContactKind kind = ContactKind::VerticalTangency;
    int stratum = -1;
    double position = 0.0;   // fractional vertex index of the refined location
    bool at_endpoint = false;
};

/// Lower and upper envelopes of the image over a J-grid.
struct Envelopes {
    std::vector<double> x;
    std::vector<double> hminus;
    std::vector<double> hplus;
    std::vector<bool> minus_truncated;  // value clipped to the image box
    std::vector<bool> plus_truncated;
    std::vector<bool> flagged;          // optimiser and strata disagree, or refinement moved the value
    std::vector<double> refinement_change;
    double step = 0.0;
    bool mapped = false;  // true after a diffeo; only the graph polylines remain meaningful
    std::vector<Point2> lower_curve;
    std::vector<Point2> upper_curve;

    bool empty() const { return x.empty(); }
    /// Linear interpolation; NaN outside the grid.
    double lower(double xv) const;
    double upper(double xv) const;
    /// Estimated linear-interpolation error of the lower/upper envelope at xv.
    double lower_interp_error(double xv) const;
    double upper_interp_error(double xv) const;
    bool upper_truncated_at(double xv) const;
    bool lower_truncated_at(double xv) const;
};

struct BifurcationDiagram {
    std::vector<Stratum> strata;
    std::vector<IsolatedValue> isolated_values;  // rank-0 images
    std::vector<Tangency> tangencies;
    Envelopes envelopes;
    Box2 image_box;
};

/// A plane map g with a checked non-vanishing Jacobian on its domain box.
class PlaneDiffeo {
public:
    /// Throws std::invalid_argument if |det Dg| ≤ 1e-8 at any of the
    /// `check_grid`² sample points of the domain, or if the declared inverse
    /// fails a round trip there.
    explicit PlaneDiffeo(const DiffeoSpec& spec, const Box2& domain = {-1e3, 1e3, -1e3, 1e3}, int check_grid = 41);

    Point2 operator()(const Point2& p) const;
    Eigen::Matrix2d jacobian(const Point2& p) const;
    bool has_inverse() const { return inv_.has_value(); }
    Point2 inverse(const Point2& p) const;
    /// The declared inverse as a diffeo in its own right.
    PlaneDiffeo inverse_map() const;
    const Box2& domain() const { return domain_; }
    const DiffeoSpec& spec() const { return spec_; }
    bool is_identity() const { return identity_; }
    double min_abs_det() const { return min_det_; }
    const ExprTree& gx() const { return gx_; }
    const ExprTree& gy() const { return gy_; }

private:
    PlaneDiffeo() = default;
    DiffeoSpec spec_;
    Box2 domain_;
    ExprTree gx_, gy_;
    std::optional<std::pair<ExprTree, ExprTree>> inv_;
    bool identity_ = false;
    double min_det_ = 0.0;
};

// ------------------------------------------------------------------ tracing

struct TraceOptions {
    Box2 image_box;
    double near_factor = 3.0;   // skip representatives within near_factor·trace_step of a traced vertex
    int max_vertices = 400000;  // per stratum half
};

std::vector<Stratum> trace_strata(const SystemDef& sys, const std::vector<CriticalPointRecord>& records,
                                  const TraceOptions& opt);

/// Strata plus rank-0 values as a diagram (no envelopes yet), with
/// vertical tangencies detected.
BifurcationDiagram assemble_diagram(const SystemDef& sys, const std::vector<CriticalPointRecord>& records,
                                    const TraceOptions& opt);

/// Residual of the rank-1 critical equations at a vertex's ambient point.
double vertex_residual(const SystemDef& sys, const Vec& point);

// ------------------------------------------------------------------ plane geometry

BifurcationDiagram apply_diffeo(const BifurcationDiagram& d, const PlaneDiffeo& g);

std::vector<Tangency> detect_vertical_tangencies(const BifurcationDiagram& d, double tang_tol = 1e-6);

/// Whether a point of the plane lies in the image.
using Membership = std::function<bool(const Point2&)>;

struct ContactPoint {
    Point2 point = Point2::Zero();
    ContactKind kind = ContactKind::Transversal;
    int stratum = -1;
    bool nondegenerate = false;
    bool outward = false;
    double second_derivative = 0.0;  // of x along arclength at a contact
};

struct ContactOptions {
    double line_tol = 1e-6;       // |x* − line_x| accepted as touching
    double curvature_tol = 1e-3;  // |d²x/ds²| below this is a degenerate contact
    double probe = 0.02;          // vertical offset of the outward membership probes
};

std::vector<ContactPoint> classify_contact(const BifurcationDiagram& d, double line_x, const Membership& inside,
                                           const ContactOptions& opt = {});

/// True iff every sample lies in the cone of rays from `cone.vertex` with
/// angle in [−α, β]. Throws std::invalid_argument unless α, β > 0 and α + β < π.
bool check_cone(const BifurcationDiagram& d, const std::vector<Point2>& image_samples, const ConeSpec& cone);

// ------------------------------------------------------------------ envelopes

struct EnvelopeOptions {
    int seeds = 24;             // multi-start seeds per grid point
    int ascent_steps = 20;
    std::uint64_t rng_seed = 1;
    Box2 image_box;             // values beyond it are clipped and marked truncated
    bool refine_check = true;   // recompute with doubled seeds and record the change
};

/// inf / sup of H over {J = x} for one abscissa. Returns nullopt if no
/// feasible point with J = x was found.
struct EnvelopeValue {
    double lo = 0.0, hi = 0.0;
    bool lo_truncated = false, hi_truncated = false;
};
std::optional<EnvelopeValue> envelope_at(const SystemDef& sys, double x, const EnvelopeOptions& opt,
                                         std::uint64_t stream = 0);

/// `strata` (optional, same coordinates as the image plane of sys) is used
/// to cross-check and, where a stratum is more extreme, to correct the values.
Envelopes compute_envelopes(const SystemDef& sys, const Grid1& j_grid, const EnvelopeOptions& opt,
                            const BifurcationDiagram* strata = nullptr);

struct StructureReport {
    bool boundary_ok = true;     // (a)
    bool focus_interior = true;  // (b)
    bool contained = true;       // (c) samples inside the band
    bool covered = true;         // (c) band points have non-empty fibers
    int boundary_checked = 0;
    int samples = 0;
    int coverage_probes = 0;
    double max_excess = 0.0;     // largest band violation among samples
    std::vector<std::string> violations;
    bool pass() const { return boundary_ok && focus_interior && contained && covered; }
};

struct StructureOptions {
    int samples = 10000;
    double tol = -1.0;            // band tolerance; negative means env_tol
    int boundary_per_stratum = 30;
    int coverage_columns = 30;
    int coverage_rows = 5;
    std::uint64_t rng_seed = 1;
    EnvelopeOptions envelope;
};

/// Checks (a) elliptic strata lie on an envelope, (b) focus-focus values are
/// interior, (c) images of random feasible points lie between H⁻ and H⁺ and
/// the band between them is covered by the image. `d` must be in the (J, H)
/// plane of sys.
StructureReport validate_image_structure(const BifurcationDiagram& d, const SystemDef& sys, const Membership& inside,
                                         const StructureOptions& opt = {});

/// Images F(m) of feasible points.
std::vector<Point2> image_samples(const SystemDef& sys, int count, std::uint64_t seed);

/// Fiber non-emptiness by multi-start projection onto F = c (c mapped through
/// g⁻¹ when g is given).
Membership image_membership(const SystemDef& sys, int seeds = 24, std::uint64_t rng_seed = 1,
                            const PlaneDiffeo* g = nullptr);

}  // namespace liouville
