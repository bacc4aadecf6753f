#include "liouville/bifurcation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "liouville/detail/gauss_newton.hpp"
#include "liouville/sampling.hpp"

namespace liouville {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Point2 image_of(const SystemDef& sys, const Vec& x) { return {sys.J.eval(x), sys.H.eval(x)}; }

Point2 theta_tangent(double th) { return {-std::sin(th), std::cos(th)}; }

struct TraceStart {
    Vec x;
    double theta;
    Point2 c;
};

struct Half {
    std::vector<Point2> v;
    std::vector<Vec> x;
    std::vector<WilliamsonType> w;  // only set for an appended rank-0 vertex
    std::vector<bool> fixed_type;
    Stratum::End end = Stratum::End::LeftBox;
};

Half trace_half(const SystemDef& sys, const TraceStart& s, Point2 t, const std::vector<CriticalPointRecord>& rank0,
                const TraceOptions& opt) {
    const Tolerances& tol = sys.space.tol();
    const double hmax = tol.trace_step;
    double step = hmax;
    Half h;
    Vec x = s.x, dx_prev;
    double th = s.theta, prev_step = 0.0;
    Point2 c = s.c;
    const Point2 t0 = t;
    for (;;) {
        if (static_cast<int>(h.v.size()) >= opt.max_vertices) {
            h.end = Stratum::End::Limit;
            return h;
        }
        const Point2 pred = c + step * t;
        Vec guess = x;
        if (prev_step > 0.0) guess = x + dx_prev * (step / prev_step);
        const auto sol = solve_rank1(sys, guess, th, ImageSlice{pred, t}, tol.max_iter);
        bool ok = sol.converged;
        Point2 cn;
        if (ok) {
            cn = image_of(sys, sol.x);
            ok = (cn - c).norm() < 2.0 * step;
        }
        if (!ok) {
            step *= 0.5;
            if (step < tol.min_step) {
                h.end = Stratum::End::Stall;
                return h;
            }
            continue;
        }
        dx_prev = sys.space.difference(sol.x, x);
        prev_step = step;
        x = sol.x;
        th = sol.theta;
        c = cn;
        Point2 tn = theta_tangent(th);
        if (tn.dot(t) < 0) tn = -tn;
        t = tn;

        const bool long_enough = h.v.size() >= 10;
        if (long_enough && (c - s.c).norm() <= 1.5 * hmax) {
            if ((c - s.c).dot(t0) < 0) {
                h.v.push_back(c);
                h.x.push_back(x);
                h.w.push_back(WilliamsonType::Unresolved);
                h.fixed_type.push_back(false);
            }
            h.end = Stratum::End::Closed;
            return h;
        }
        h.v.push_back(c);
        h.x.push_back(x);
        h.w.push_back(WilliamsonType::Unresolved);
        h.fixed_type.push_back(false);
        for (const auto& r : rank0) {
            if ((c - r.image).norm() <= 1.5 * hmax) {
                h.v.push_back(r.image);
                h.x.push_back(r.point);
                h.w.push_back(r.wtype);
                h.fixed_type.push_back(true);
                h.end = Stratum::End::Rank0;
                return h;
            }
        }
        if (!opt.image_box.contains(c)) {
            h.end = Stratum::End::LeftBox;
            return h;
        }
        step = std::min(step * 1.5, hmax);
    }
}

bool near_polyline(const std::vector<Stratum>& strata, const Point2& p, double r) {
    for (const auto& s : strata)
        for (const auto& v : s.vertices)
            if ((v - p).squaredNorm() <= r * r) return true;
    return false;
}

// Parabolic refinement through three consecutive vertices; returns (point, offset in [-1, 1]).
std::pair<Point2, double> parabolic_extremum(const Point2& a, const Point2& b, const Point2& c) {
    const double qa = 0.5 * (a.x() + c.x() - 2.0 * b.x());
    const double qb = 0.5 * (c.x() - a.x());
    double s = 0.0;
    if (std::abs(qa) > 0.0) s = std::clamp(-qb / (2.0 * qa), -1.0, 1.0);
    auto interp = [&](double fa, double fb, double fc) {
        return fb + s * 0.5 * (fc - fa) + s * s * 0.5 * (fa + fc - 2.0 * fb);
    };
    return {Point2(interp(a.x(), b.x(), c.x()), interp(a.y(), b.y(), c.y())), s};
}

int sgn(double v) { return (v > 0) - (v < 0); }

}  // namespace

std::string to_string(Stratum::End e) {
    switch (e) {
        case Stratum::End::LeftBox: return "left-box";
        case Stratum::End::Closed: return "closed";
        case Stratum::End::Rank0: return "rank0";
        case Stratum::End::Stall: return "stall";
        case Stratum::End::Limit: return "limit";
    }
    return "left-box";
}

std::string to_string(ContactKind k) {
    switch (k) {
        case ContactKind::Transversal: return "transversal";
        case ContactKind::VerticalTangency: return "vertical-tangency";
        case ContactKind::NondegenerateContact: return "nondegenerate-contact";
        case ContactKind::OutwardContact: return "outward-contact";
        case ContactKind::DegenerateContact: return "degenerate-contact";
    }
    return "transversal";
}

// ------------------------------------------------------------------ Envelopes

namespace {

// Index k with x[k] ≤ xv ≤ x[k+1], or -1.
int bracket(const std::vector<double>& xs, double xv) {
    if (xs.size() < 2 || !(xv >= xs.front()) || !(xv <= xs.back())) return xs.size() == 1 && xv == xs[0] ? 0 : -1;
    auto it = std::upper_bound(xs.begin(), xs.end(), xv);
    int k = static_cast<int>(it - xs.begin()) - 1;
    return std::min(k, static_cast<int>(xs.size()) - 2);
}

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double xv) {
    const int k = bracket(xs, xv);
    if (k < 0) return kNaN;
    if (xs.size() == 1) return ys[0];
    const double t = (xv - xs[k]) / (xs[k + 1] - xs[k]);
    return ys[k] + t * (ys[k + 1] - ys[k]);
}

double interp_error(const std::vector<double>& xs, const std::vector<double>& ys, double xv) {
    const int k = bracket(xs, xv);
    if (k < 0) return kNaN;
    double e = 0.0;
    const int n = static_cast<int>(xs.size());
    for (int i : {k, k + 1})
        if (i >= 1 && i + 1 < n) e = std::max(e, std::abs(ys[i - 1] - 2.0 * ys[i] + ys[i + 1]) / 8.0);
    return e;
}

}  // namespace

double Envelopes::lower(double xv) const { return interp(x, hminus, xv); }
double Envelopes::upper(double xv) const { return interp(x, hplus, xv); }
double Envelopes::lower_interp_error(double xv) const { return interp_error(x, hminus, xv); }
double Envelopes::upper_interp_error(double xv) const { return interp_error(x, hplus, xv); }

bool Envelopes::upper_truncated_at(double xv) const {
    const int k = bracket(x, xv);
    if (k < 0) return false;
    return plus_truncated[k] || (k + 1 < static_cast<int>(x.size()) && plus_truncated[k + 1]);
}

bool Envelopes::lower_truncated_at(double xv) const {
    const int k = bracket(x, xv);
    if (k < 0) return false;
    return minus_truncated[k] || (k + 1 < static_cast<int>(x.size()) && minus_truncated[k + 1]);
}

// ------------------------------------------------------------------ PlaneDiffeo

namespace {

bool plain_identity(const ExprTree& x, const ExprTree& y) {
    const auto& nx = x.nodes();
    const auto& ny = y.nodes();
    return nx.size() == 1 && ny.size() == 1 && nx[0].kind == NodeKind::Var && nx[0].var == 0 &&
           ny[0].kind == NodeKind::Var && ny[0].var == 1;
}

}  // namespace

PlaneDiffeo::PlaneDiffeo(const DiffeoSpec& spec, const Box2& domain, int check_grid) : spec_(spec), domain_(domain) {
    const std::vector<std::string> names = {"x", "y"};
    gx_ = parse_expr(spec.gx, 2, names);
    gy_ = parse_expr(spec.gy, 2, names);
    identity_ = plain_identity(gx_, gy_);
    if (spec.inv_x && spec.inv_y) inv_ = std::make_pair(parse_expr(*spec.inv_x, 2, names), parse_expr(*spec.inv_y, 2, names));
    else if (spec.inv_x || spec.inv_y) throw std::invalid_argument("diffeo inverse needs both components");

    min_det_ = std::numeric_limits<double>::infinity();
    const int m = std::max(2, check_grid);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const Point2 p(domain.xlo + (domain.xhi - domain.xlo) * i / (m - 1),
                           domain.ylo + (domain.yhi - domain.ylo) * j / (m - 1));
            double det;
            try {
                det = jacobian(p).determinant();
            } catch (const DomainError& e) {
                throw std::invalid_argument(std::string("diffeo undefined on its domain: ") + e.what());
            }
            min_det_ = std::min(min_det_, std::abs(det));
            if (!(std::abs(det) > 1e-8)) {
                std::ostringstream os;
                os << "diffeo Jacobian determinant " << det << " at (" << p.x() << ", " << p.y() << ")";
                throw std::invalid_argument(os.str());
            }
            if (inv_) {
                const Point2 back = inverse((*this)(p));
                if ((back - p).norm() > 1e-8 * (1.0 + p.norm()))
                    throw std::invalid_argument("declared diffeo inverse fails the round trip");
            }
        }
}

Point2 PlaneDiffeo::operator()(const Point2& p) const {
    if (identity_) return p;
    const double v[2] = {p.x(), p.y()};
    return {gx_.eval(v), gy_.eval(v)};
}

Eigen::Matrix2d PlaneDiffeo::jacobian(const Point2& p) const {
    const double v[2] = {p.x(), p.y()};
    const Jet2 a = gx_.eval_jet2(v), b = gy_.eval_jet2(v);
    Eigen::Matrix2d J;
    J << a.grad(0), a.grad(1), b.grad(0), b.grad(1);
    return J;
}

Point2 PlaneDiffeo::inverse(const Point2& p) const {
    if (!inv_) throw std::logic_error("diffeo has no declared inverse");
    const double v[2] = {p.x(), p.y()};
    return {inv_->first.eval(v), inv_->second.eval(v)};
}

PlaneDiffeo PlaneDiffeo::inverse_map() const {
    if (!inv_) throw std::logic_error("diffeo has no declared inverse");
    PlaneDiffeo g;
    g.spec_ = {*spec_.inv_x, *spec_.inv_y, spec_.gx, spec_.gy};
    g.gx_ = inv_->first;
    g.gy_ = inv_->second;
    g.inv_ = std::make_pair(gx_, gy_);
    g.identity_ = plain_identity(g.gx_, g.gy_);
    // Domain of the inverse: bounding box of the image of the domain's boundary.
    Box2 b{INFINITY, -INFINITY, INFINITY, -INFINITY};
    const int m = 41;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i != 0 && i != m - 1 && j != 0 && j != m - 1) continue;
            const Point2 p(domain_.xlo + (domain_.xhi - domain_.xlo) * i / (m - 1),
                           domain_.ylo + (domain_.yhi - domain_.ylo) * j / (m - 1));
            const Point2 q = (*this)(p);
            b.xlo = std::min(b.xlo, q.x());
            b.xhi = std::max(b.xhi, q.x());
            b.ylo = std::min(b.ylo, q.y());
            b.yhi = std::max(b.yhi, q.y());
        }
    g.domain_ = b;
    g.min_det_ = 0.0;
    return g;
}

// ------------------------------------------------------------------ tracing

double vertex_residual(const SystemDef& sys, const Vec& point) {
    const RankInfo r = critical_rank(sys, point);
    return std::max(r.sigma2, sys.space.constraint_residual(point));
}

std::vector<Stratum> trace_strata(const SystemDef& sys, const std::vector<CriticalPointRecord>& records,
                                  const TraceOptions& opt) {
    const Tolerances& tol = sys.space.tol();
    std::vector<CriticalPointRecord> rank0;
    for (const auto& r : records)
        if (r.rank == 0) rank0.push_back(r);

    std::vector<Stratum> strata;
    for (const auto& rep : records) {
        if (rep.rank != 1 || !opt.image_box.contains(rep.image)) continue;
        bool near0 = false;
        for (const auto& r : rank0) near0 = near0 || (r.image - rep.image).norm() <= opt.near_factor * tol.trace_step;
        if (near0 || near_polyline(strata, rep.image, opt.near_factor * tol.trace_step)) continue;

        double th;
        try {
            th = initial_theta(sys, rep.point);
        } catch (const std::exception&) {
            continue;
        }
        const TraceStart start{rep.point, th, rep.image};
        const Point2 t = theta_tangent(th);
        Half fwd = trace_half(sys, start, t, rank0, opt);
        Half bwd;
        if (fwd.end != Stratum::End::Closed) bwd = trace_half(sys, start, -t, rank0, opt);

        Stratum s;
        s.closed = fwd.end == Stratum::End::Closed;
        s.final_end = fwd.end;
        s.start_end = s.closed ? Stratum::End::Closed : bwd.end;
        std::vector<bool> fixed;
        for (int i = static_cast<int>(bwd.v.size()) - 1; i >= 0; --i) {
            s.vertices.push_back(bwd.v[i]);
            s.points.push_back(bwd.x[i]);
            s.wtype.push_back(bwd.w[i]);
            fixed.push_back(bwd.fixed_type[i]);
        }
        s.vertices.push_back(rep.image);
        s.points.push_back(rep.point);
        s.wtype.push_back(WilliamsonType::Unresolved);
        fixed.push_back(false);
        for (std::size_t i = 0; i < fwd.v.size(); ++i) {
            s.vertices.push_back(fwd.v[i]);
            s.points.push_back(fwd.x[i]);
            s.wtype.push_back(fwd.w[i]);
            fixed.push_back(fwd.fixed_type[i]);
        }
        for (std::size_t i = 0; i < s.vertices.size(); ++i) {
            if (fixed[i]) continue;
            try {
                s.wtype[i] = classify_rank1(sys, s.points[i]).wtype;
            } catch (const std::exception&) {
                s.wtype[i] = WilliamsonType::Unresolved;
            }
        }
        strata.push_back(std::move(s));
    }
    return strata;
}

BifurcationDiagram assemble_diagram(const SystemDef& sys, const std::vector<CriticalPointRecord>& records,
                                    const TraceOptions& opt) {
    BifurcationDiagram d;
    d.image_box = opt.image_box;
    d.strata = trace_strata(sys, records, opt);
    for (const auto& r : records)
        if (r.rank == 0) d.isolated_values.push_back({r.image, r.wtype});
    d.tangencies = detect_vertical_tangencies(d, sys.space.tol().tang);
    return d;
}

// ------------------------------------------------------------------ plane geometry

BifurcationDiagram apply_diffeo(const BifurcationDiagram& d, const PlaneDiffeo& g) {
    auto map = [&](const Point2& p) {
        if (!g.domain().contains(p)) {
            std::ostringstream os;
            os << "point (" << p.x() << ", " << p.y() << ") outside the diffeo domain";
            throw std::out_of_range(os.str());
        }
        return g(p);
    };
    BifurcationDiagram out = d;
    for (auto& s : out.strata)
        for (auto& v : s.vertices) v = map(v);
    for (auto& iv : out.isolated_values) iv.value = map(iv.value);
    Envelopes& e = out.envelopes;
    if (!e.mapped) {
        e.lower_curve.clear();
        e.upper_curve.clear();
        for (std::size_t i = 0; i < e.x.size(); ++i) {
            e.lower_curve.emplace_back(e.x[i], e.hminus[i]);
            e.upper_curve.emplace_back(e.x[i], e.hplus[i]);
        }
    }
    for (auto& p : e.lower_curve) p = map(p);
    for (auto& p : e.upper_curve) p = map(p);
    if (!g.is_identity()) e.mapped = true;
    // The image box is carried along as the bounding box of its mapped corners.
    if (!g.is_identity()) {
        const Box2& b = d.image_box;
        Box2 nb{INFINITY, -INFINITY, INFINITY, -INFINITY};
        for (const Point2& p : {Point2(b.xlo, b.ylo), Point2(b.xlo, b.yhi), Point2(b.xhi, b.ylo), Point2(b.xhi, b.yhi)}) {
            const Point2 q = g(p);
            nb.xlo = std::min(nb.xlo, q.x());
            nb.xhi = std::max(nb.xhi, q.x());
            nb.ylo = std::min(nb.ylo, q.y());
            nb.yhi = std::max(nb.yhi, q.y());
        }
        out.image_box = nb;
    }
    double tang_tol = 1e-6;
    out.tangencies = detect_vertical_tangencies(out, tang_tol);
    return out;
}

std::vector<Tangency> detect_vertical_tangencies(const BifurcationDiagram& d, double tang_tol) {
    std::vector<Tangency> out;
    for (int si = 0; si < static_cast<int>(d.strata.size()); ++si) {
        const auto& v = d.strata[si].vertices;
        const int n = static_cast<int>(v.size());
        if (n < 2) continue;
        const bool closed = d.strata[si].closed && n >= 3;
        auto at = [&](int i) -> const Point2& { return v[((i % n) + n) % n]; };
        auto seg_x = [&](int i) { return at(i + 1).x() - at(i).x(); };  // segment i → i+1

        std::vector<int> flag(n, 0);  // 1 = small tangent, 2 = sign change
        for (int i = 0; i < n; ++i) {
            const bool endpoint = !closed && (i == 0 || i == n - 1);
            Point2 t;
            if (!endpoint)
                t = at(i + 1) - at(i - 1);
            else if (i == 0)
                t = v[1] - v[0];
            else
                t = v[n - 1] - v[n - 2];
            if (std::abs(t.x()) < tang_tol * t.norm()) flag[i] = 1;
            if (!endpoint) {
                const int a = sgn(seg_x(i - 1)), b = sgn(seg_x(i));
                if (a != 0 && b != 0 && a != b) flag[i] = 2;
            }
        }
        // Runs of flagged vertices. Each sign change is one event and absorbs
        // the small-tangent flags around it; runs without a sign change (a
        // vertical stretch) report every vertex.
        std::vector<std::vector<int>> runs;
        auto collect = [&](int idx) {
            if (!flag[idx]) {
                if (!runs.empty() && !runs.back().empty()) runs.emplace_back();
                return;
            }
            if (runs.empty()) runs.emplace_back();
            runs.back().push_back(idx);
        };
        if (closed) {
            int s0 = -1;
            for (int i = 0; i < n && s0 < 0; ++i)
                if (!flag[i]) s0 = i;
            if (s0 < 0) {
                runs.emplace_back();
                for (int i = 0; i < n; ++i) runs.back().push_back(i);
            } else {
                for (int off = 1; off <= n; ++off) collect((s0 + off) % n);
            }
        } else {
            for (int i = 0; i < n; ++i) collect(i);
        }
        for (const auto& run : runs) {
            if (run.empty()) continue;
            bool change = false;
            for (int idx : run) {
                if (flag[idx] != 2) continue;
                change = true;
                const auto [p, s] = parabolic_extremum(at(idx - 1), at(idx), at(idx + 1));
                out.push_back({p, ContactKind::VerticalTangency, si, static_cast<double>(idx) + s, false});
            }
            if (change) continue;
            for (int idx : run) {
                const bool endpoint = !closed && (idx == 0 || idx == n - 1);
                out.push_back({v[idx], ContactKind::VerticalTangency, si, static_cast<double>(idx), endpoint});
            }
        }
    }
    return out;
}

std::vector<ContactPoint> classify_contact(const BifurcationDiagram& d, double line_x, const Membership& inside,
                                           const ContactOptions& opt) {
    std::vector<ContactPoint> out;
    for (int si = 0; si < static_cast<int>(d.strata.size()); ++si) {
        const auto& v = d.strata[si].vertices;
        const int n = static_cast<int>(v.size());
        if (n < 2) continue;
        const bool closed = d.strata[si].closed && n >= 3;
        auto at = [&](int i) -> const Point2& { return v[((i % n) + n) % n]; };

        // Tangential contacts at refined x-extrema.
        std::vector<int> contact_vertices;
        const int first = closed ? 0 : 1, last = closed ? n - 1 : n - 2;
        for (int i = first; i <= last; ++i) {
            const double a = at(i).x() - at(i - 1).x(), b = at(i + 1).x() - at(i).x();
            if (!(sgn(a) != 0 && sgn(b) != 0 && sgn(a) != sgn(b))) continue;
            const auto [p, s] = parabolic_extremum(at(i - 1), at(i), at(i + 1));
            if (std::abs(p.x() - line_x) > opt.line_tol) continue;
            const double qa = 0.5 * (at(i - 1).x() + at(i + 1).x() - 2.0 * at(i).x());
            const double ds = 0.5 * (at(i + 1) - at(i - 1)).norm();
            ContactPoint c;
            c.point = Point2(line_x, p.y());
            c.stratum = si;
            c.second_derivative = ds > 0 ? 2.0 * qa / (ds * ds) : 0.0;
            c.nondegenerate = std::abs(c.second_derivative) >= opt.curvature_tol;
            const bool up = inside(Point2(line_x, p.y() + opt.probe));
            const bool down = inside(Point2(line_x, p.y() - opt.probe));
            c.outward = !up && !down;
            if (!c.nondegenerate)
                c.kind = ContactKind::DegenerateContact;
            else
                c.kind = c.outward ? ContactKind::OutwardContact : ContactKind::NondegenerateContact;
            out.push_back(c);
            contact_vertices.push_back(i);
        }
        auto near_contact = [&](int i) {
            for (int c : contact_vertices) {
                int dist = std::abs(i - c);
                if (closed) dist = std::min(dist, n - dist);
                if (dist <= 3) return true;
            }
            return false;
        };
        // Endpoints lying on the line.
        if (!closed) {
            for (int i : {0, n - 1}) {
                if (std::abs(v[i].x() - line_x) > opt.line_tol || near_contact(i)) continue;
                const Point2 t = i == 0 ? Point2(v[1] - v[0]) : Point2(v[n - 1] - v[n - 2]);
                ContactPoint c;
                c.point = v[i];
                c.stratum = si;
                c.kind = std::abs(t.x()) < 1e-6 * t.norm() ? ContactKind::DegenerateContact : ContactKind::Transversal;
                out.push_back(c);
                contact_vertices.push_back(i);
            }
        }
        // Transversal crossings.
        const int segs = closed ? n : n - 1;
        for (int i = 0; i < segs; ++i) {
            const Point2& a = at(i);
            const Point2& b = at(i + 1);
            const bool sa = a.x() >= line_x, sb = b.x() >= line_x;
            if (sa == sb || near_contact(i) || near_contact(i + 1)) continue;
            const double t = (line_x - a.x()) / (b.x() - a.x());
            ContactPoint c;
            c.point = Point2(line_x, a.y() + t * (b.y() - a.y()));
            c.stratum = si;
            c.kind = ContactKind::Transversal;
            out.push_back(c);
        }
    }
    std::sort(out.begin(), out.end(), [](const ContactPoint& a, const ContactPoint& b) { return a.point.y() < b.point.y(); });
    return out;
}

bool check_cone(const BifurcationDiagram& d, const std::vector<Point2>& image_samples, const ConeSpec& cone) {
    if (!(cone.alpha > 0.0) || !(cone.beta > 0.0) || !(cone.alpha + cone.beta < std::numbers::pi))
        throw std::invalid_argument("cone requires alpha > 0, beta > 0 and alpha + beta < pi");
    const double ca = std::cos(cone.alpha), sa = std::sin(cone.alpha);
    const double cb = std::cos(cone.beta), sb = std::sin(cone.beta);
    auto in_cone = [&](const Point2& p) {
        const Point2 q = p - cone.vertex;
        const double eps = 1e-12 * (1.0 + q.norm());
        return ca * q.y() + sa * q.x() >= -eps && sb * q.x() - cb * q.y() >= -eps;
    };
    for (const auto& p : image_samples)
        if (!in_cone(p)) return false;
    for (const auto& s : d.strata)
        for (const auto& v : s.vertices)
            if (!in_cone(v)) return false;
    for (const auto& iv : d.isolated_values)
        if (!in_cone(iv.value)) return false;
    return true;
}

// ------------------------------------------------------------------ envelopes

namespace {

// Critical points of H on {constraints, J = level}.
bool kkt_polish(const SystemDef& sys, double level, Vec& x) {
    const PhaseSpace& sp = sys.space;
    const int n = sp.ambient_dim(), k = sp.num_constraints();
    const int m = n + k + 1;
    Vec z = Vec::Zero(n + k + 1);
    z.head(n) = x;
    auto eval = [&](const Vec& zz, Vec& r, Mat* Jac) -> bool {
        const Vec xx = zz.head(n);
        Jet2 jJ, jH;
        std::vector<Jet2> jc;
        try {
            jJ = sys.J.eval_jet2(xx);
            jH = sys.H.eval_jet2(xx);
            for (const auto& c : sp.constraints()) jc.push_back(c.eval_jet2(xx));
        } catch (const DomainError&) {
            return false;
        }
        Vec g = jH.gradient() - zz[n + k] * jJ.gradient();
        for (int i = 0; i < k; ++i) {
            g -= zz[n + i] * jc[i].gradient();
            r[n + i] = jc[i].value();
        }
        r.head(n) = g;
        r[n + k] = jJ.value() - level;
        if (Jac) {
            Mat& Jm = *Jac;
            Jm.setZero();
            Mat h = jH.hessian() - zz[n + k] * jJ.hessian();
            for (int i = 0; i < k; ++i) {
                h -= zz[n + i] * jc[i].hessian();
                Jm.block(0, n + i, n, 1) = -jc[i].gradient();
                Jm.block(n + i, 0, 1, n) = jc[i].gradient().transpose();
            }
            Jm.block(0, 0, n, n) = h;
            Jm.block(0, n + k, n, 1) = -jJ.gradient();
            Jm.block(n + k, 0, 1, n) = jJ.gradient().transpose();
        }
        return true;
    };
    // Multipliers from least squares at the start.
    try {
        Mat A(n, k + 1);
        for (int i = 0; i < k; ++i) A.col(i) = sp.constraints()[i].eval_jet2(x).gradient();
        A.col(k) = sys.J.eval_jet2(x).gradient();
        z.tail(k + 1) = A.colPivHouseholderQr().solve(sys.H.eval_jet2(x).gradient());
    } catch (const DomainError&) {
        return false;
    }
    auto normalize = [&](Vec zz) {
        zz.head(n) = sp.wrap(zz.head(n));
        return zz;
    };
    const auto res = detail::gauss_newton(z, m, eval, normalize, sp.tol().constraint, 30, sp.tol().max_halvings);
    if (!res.converged) return false;
    x = res.z.head(n);
    return true;
}

}  // namespace

std::optional<EnvelopeValue> envelope_at(const SystemDef& sys, double x, const EnvelopeOptions& opt,
                                         std::uint64_t stream) {
    const PhaseSpace& sp = sys.space;
    const int n = sp.ambient_dim(), k = sp.num_constraints();
    auto targets = constraint_targets(sp);
    targets.push_back({sys.J, x});
    QuasiRandom qr(n, opt.rng_seed * 0x9E3779B97F4A7C15ULL + stream);

    double lo = INFINITY, hi = -INFINITY;
    bool lo_trunc = false, hi_trunc = false, found = false;
    auto record = [&](const Vec& p) {
        const double h = sys.H.eval(p);
        lo = std::min(lo, h);
        hi = std::max(hi, h);
    };

    for (int i = 0; i < opt.seeds; ++i) {
        const auto pr = newton_project(sp, targets, qr.point(static_cast<std::uint64_t>(i), sp.seed_box()));
        if (!pr.ok()) continue;
        found = true;
        record(pr.x);
        for (int sign : {1, -1}) {
            Vec y = pr.x;
            bool escaped = false;
            for (int it = 0; it < opt.ascent_steps; ++it) {
                Mat A(k + 1, n);
                Vec g;
                try {
                    if (k) A.topRows(k) = sp.constraint_jacobian(y);
                    A.row(k) = sys.J.eval_jet2(y).gradient().transpose();
                    g = sign * sys.H.eval_jet2(y).gradient();
                } catch (const DomainError&) {
                    break;
                }
                Eigen::CompleteOrthogonalDecomposition<Mat> cod(A.transpose());
                const Vec dir = g - A.transpose() * cod.solve(g);
                const double dn = dir.norm();
                if (dn < 1e-12) break;
                const double f0 = sign * sys.H.eval(y);
                double len = std::min(0.5, dn);
                bool moved = false;
                for (int hlv = 0; hlv < 6; ++hlv, len *= 0.5) {
                    const auto q = newton_project(sp, targets, y + (len / dn) * dir);
                    if (q.ok() && sign * sys.H.eval(q.x) > f0) {
                        y = q.x;
                        moved = true;
                        break;
                    }
                }
                if (!moved) break;
                const double h = sys.H.eval(y);
                if ((sign > 0 && h > opt.image_box.yhi) || (sign < 0 && h < opt.image_box.ylo)) {
                    escaped = true;
                    break;
                }
            }
            record(y);
            if (escaped) {
                (sign > 0 ? hi_trunc : lo_trunc) = true;
                continue;
            }
            Vec z = y;
            if (kkt_polish(sys, x, z) && sp.constraint_residual(z) < sp.tol().constraint &&
                std::abs(sys.J.eval(z) - x) < sp.tol().constraint)
                record(z);
        }
    }
    if (!found) return std::nullopt;
    EnvelopeValue v{lo, hi, false, false};
    if (hi_trunc || hi > opt.image_box.yhi) {
        v.hi = std::max(opt.image_box.yhi, lo);
        v.hi_truncated = true;
    }
    if (lo_trunc || lo < opt.image_box.ylo) {
        v.lo = std::min(opt.image_box.ylo, hi);
        v.lo_truncated = true;
    }
    return v;
}

namespace {

std::vector<double> strata_crossings(const BifurcationDiagram& d, double x) {
    std::vector<double> ys;
    for (const auto& s : d.strata) {
        const auto& v = s.vertices;
        const int n = static_cast<int>(v.size());
        const int segs = s.closed ? n : n - 1;
        for (int i = 0; i < segs; ++i) {
            const Point2& a = v[i];
            const Point2& b = v[(i + 1) % n];
            if ((a.x() - x) * (b.x() - x) > 0 || a.x() == b.x()) continue;
            const double t = (x - a.x()) / (b.x() - a.x());
            ys.push_back(a.y() + t * (b.y() - a.y()));
        }
    }
    return ys;
}

}  // namespace

Envelopes compute_envelopes(const SystemDef& sys, const Grid1& j_grid, const EnvelopeOptions& opt,
                            const BifurcationDiagram* strata) {
    Envelopes e;
    e.step = j_grid.step;
    const double env_tol = sys.space.tol().env;
    const auto xs = j_grid.points();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto v = envelope_at(sys, xs[i], opt, i);
        if (!v) continue;
        double change = 0.0;
        if (opt.refine_check) {
            EnvelopeOptions o2 = opt;
            o2.seeds = 2 * opt.seeds;
            const auto v2 = envelope_at(sys, xs[i], o2, i + 1000003ULL);
            if (v2) {
                if (!v->lo_truncated && !v2->lo_truncated) change = std::max(change, std::abs(v->lo - v2->lo));
                if (!v->hi_truncated && !v2->hi_truncated) change = std::max(change, std::abs(v->hi - v2->hi));
                if (v2->lo < v->lo) {
                    v->lo = v2->lo;
                    v->lo_truncated = v2->lo_truncated;
                }
                if (v2->hi > v->hi) {
                    v->hi = v2->hi;
                    v->hi_truncated = v2->hi_truncated;
                }
            }
        }
        bool flag = change >= env_tol;
        if (strata) {
            const auto ys = strata_crossings(*strata, xs[i]);
            if (!ys.empty()) {
                const double ymin = *std::min_element(ys.begin(), ys.end());
                const double ymax = *std::max_element(ys.begin(), ys.end());
                if (!v->lo_truncated && ymin < v->lo - 10.0 * env_tol) {
                    v->lo = ymin;
                    flag = true;
                }
                if (!v->hi_truncated && ymax > v->hi + 10.0 * env_tol) {
                    v->hi = ymax;
                    flag = true;
                }
            }
        }
        e.x.push_back(xs[i]);
        e.hminus.push_back(v->lo);
        e.hplus.push_back(v->hi);
        e.minus_truncated.push_back(v->lo_truncated);
        e.plus_truncated.push_back(v->hi_truncated);
        e.flagged.push_back(flag);
        e.refinement_change.push_back(change);
        e.lower_curve.emplace_back(xs[i], v->lo);
        e.upper_curve.emplace_back(xs[i], v->hi);
    }
    return e;
}

// ------------------------------------------------------------------ image structure

std::vector<Point2> image_samples(const SystemDef& sys, int count, std::uint64_t seed) {
    std::vector<Point2> out;
    for (const Vec& x : feasible_points(sys.space, count, seed)) out.push_back(image_of(sys, x));
    return out;
}

Membership image_membership(const SystemDef& sys, int seeds, std::uint64_t rng_seed, const PlaneDiffeo* g) {
    std::optional<PlaneDiffeo> gg;
    if (g) {
        if (!g->has_inverse() && !g->is_identity())
            throw std::invalid_argument("image membership in mapped coordinates needs the diffeo inverse");
        gg = *g;
    }
    auto starts = std::make_shared<std::vector<Vec>>(seed_points(sys.space, seeds, rng_seed ^ 0xA5A5A5A5ULL));
    return [&sys, starts, gg](const Point2& p) {
        const Point2 c = gg && !gg->is_identity() ? gg->inverse(p) : p;
        const auto targets = fiber_targets(sys, c.x(), c.y());
        for (const Vec& s : *starts)
            if (newton_project(sys.space, targets, s).ok()) return true;
        return false;
    };
}

StructureReport validate_image_structure(const BifurcationDiagram& d, const SystemDef& sys, const Membership& inside,
                                         const StructureOptions& opt) {
    StructureReport rep;
    const double env_tol = sys.space.tol().env;
    const double tol = opt.tol > 0 ? opt.tol : env_tol;
    const Envelopes& e = d.envelopes;
    EnvelopeOptions eo = opt.envelope;
    eo.image_box = d.image_box;
    std::uint64_t stream = 5000000;
    auto exact = [&](double x) { return envelope_at(sys, x, eo, stream++); };
    std::ostringstream msg;

    // (a) elliptic strata vertices lie on an envelope graph or on a vertical edge of the band.
    for (int si = 0; si < static_cast<int>(d.strata.size()); ++si) {
        const auto& s = d.strata[si];
        const int n = static_cast<int>(s.vertices.size());
        const int count = std::min(n, opt.boundary_per_stratum);
        for (int c = 0; c < count; ++c) {
            const int i = count == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(c) * (n - 1) / (count - 1)));
            const auto w = s.wtype[i];
            if (w != WilliamsonType::TransversallyElliptic && w != WilliamsonType::EllipticElliptic) continue;
            const Point2 p = s.vertices[i];
            if (!d.image_box.contains(p)) continue;
            ++rep.boundary_checked;
            const auto ev = exact(p.x());
            bool ok = false;
            if (ev) {
                ok = (!ev->lo_truncated && std::abs(p.y() - ev->lo) <= env_tol) ||
                     (!ev->hi_truncated && std::abs(p.y() - ev->hi) <= env_tol);
            }
            if (!ok) {
                const double delta = 10.0 * env_tol;
                ok = !exact(p.x() - delta) || !exact(p.x() + delta);
            }
            if (!ok) {
                rep.boundary_ok = false;
                msg.str("");
                msg << "(a) stratum " << si << " vertex (" << p.x() << ", " << p.y() << ") is not on an envelope";
                if (ev) msg << " [H- = " << ev->lo << ", H+ = " << ev->hi << "]";
                rep.violations.push_back(msg.str());
            }
        }
    }

    // (b) focus-focus values are interior.
    for (const auto& iv : d.isolated_values) {
        if (iv.wtype != WilliamsonType::FocusFocus) continue;
        const auto ev = exact(iv.value.x());
        const double margin = e.step;
        const bool ok = ev && iv.value.y() > ev->lo + margin && (ev->hi_truncated || iv.value.y() < ev->hi - margin);
        if (!ok) {
            rep.focus_interior = false;
            msg.str("");
            msg << "(b) focus-focus value (" << iv.value.x() << ", " << iv.value.y() << ") is not interior";
            rep.violations.push_back(msg.str());
        }
    }

    // (c) containment of sampled images in the band.
    const auto samples = image_samples(sys, opt.samples, opt.rng_seed);
    rep.samples = static_cast<int>(samples.size());
    int exact_checks = 0;
    int reported = 0;
    for (const auto& p : samples) {
        const double lo = e.lower(p.x()), hi = e.upper(p.x());
        bool ok = !std::isnan(lo) && p.y() >= lo - tol &&
                  (e.upper_truncated_at(p.x()) || p.y() <= hi + tol);
        double excess = 0.0;
        if (!ok && exact_checks < 400) {
            ++exact_checks;
            const auto ev = exact(p.x());
            if (ev) {
                ok = p.y() >= ev->lo - tol && (ev->hi_truncated || p.y() <= ev->hi + tol);
                excess = std::max(ev->lo - p.y(), ev->hi_truncated ? 0.0 : p.y() - ev->hi);
            } else {
                excess = INFINITY;
            }
        } else if (!ok) {
            excess = std::isnan(lo) ? INFINITY : std::max(lo - p.y(), p.y() - hi);
        }
        if (!ok) {
            rep.contained = false;
            rep.max_excess = std::max(rep.max_excess, excess);
            if (reported++ < 20) {
                msg.str("");
                msg << "(c) sample (" << p.x() << ", " << p.y() << ") outside the band";
                rep.violations.push_back(msg.str());
            }
        }
    }

    // (c) coverage: points of the band must be images.
    if (e.x.size() >= 2 && opt.coverage_columns > 0) {
        const double x0 = e.x.front(), x1 = e.x.back();
        for (int c = 0; c < opt.coverage_columns; ++c) {
            const double x = x0 + (x1 - x0) * (0.05 + 0.9 * (c + 0.5) / opt.coverage_columns);
            const double lo = e.lower(x);
            const double hi = e.upper_truncated_at(x) ? std::min(e.upper(x), d.image_box.yhi) : e.upper(x);
            if (std::isnan(lo) || std::isnan(hi) || hi <= lo) continue;
            for (int r = 0; r < opt.coverage_rows; ++r) {
                const double y = lo + (hi - lo) * (r + 1.0) / (opt.coverage_rows + 1.0);
                ++rep.coverage_probes;
                if (!inside(Point2(x, y))) {
                    rep.covered = false;
                    msg.str("");
                    msg << "(c) band point (" << x << ", " << y << ") has an empty fiber";
                    rep.violations.push_back(msg.str());
                }
            }
        }
    }
    return rep;
}

}  // namespace liouville
