#include "liouville/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "liouville/sampling.hpp"

namespace liouville {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

bool lex_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return a[i] < b[i];
    return false;
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<long>(std::min(v.size() - 1, static_cast<std::size_t>(q * v.size())));
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace

double clustering_radius(const PhaseSpace& sp, const std::vector<Vec>& points, double factor, double floor,
                         double q) {
    const int n = static_cast<int>(points.size());
    std::vector<double> nn(n, INFINITY);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = sp.distance(points[i], points[j]);
            nn[i] = std::min(nn[i], d);
            nn[j] = std::min(nn[j], d);
        }
    if (n < 2) return floor;
    return std::max(factor * quantile(nn, q), floor);
}

int count_components(const PhaseSpace& sp, const std::vector<Vec>& points, double eps, std::vector<int>* labels) {
    const int n = static_cast<int>(points.size());
    UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (sp.distance(points[i], points[j]) <= eps) uf.unite(i, j);
    std::map<int, int> ids;
    std::vector<int> lab(n);
    for (int i = 0; i < n; ++i) {
        const int r = uf.find(i);
        auto it = ids.find(r);
        if (it == ids.end()) it = ids.emplace(r, static_cast<int>(ids.size())).first;
        lab[i] = it->second;
    }
    if (labels) *labels = std::move(lab);
    return static_cast<int>(ids.size());
}

FiberSample sample_fiber(const SystemDef& sys, const Point2& c, const FiberOptions& opt) {
    const PhaseSpace& sp = sys.space;
    FiberSample fs;
    fs.target = c;
    const auto targets = fiber_targets(sys, c.x(), c.y());
    QuasiRandom qr(sp.ambient_dim(), opt.rng_seed);

    std::vector<Vec> accepted;
    int projected = 0;
    for (int level : {1, 2, 4}) {
        const int want = opt.budget * level;
        for (; projected < want; ++projected) {
            const auto r = newton_project(sp, targets, qr.point(static_cast<std::uint64_t>(projected), sp.seed_box()));
            if (r.ok()) accepted.push_back(sp.wrap(r.x));
        }
        std::vector<Vec> pts = accepted;
        std::sort(pts.begin(), pts.end(), lex_less);
        fs.accepted.push_back(static_cast<int>(pts.size()));
        if (static_cast<int>(pts.size()) < opt.min_accept) {
            fs.stability.push_back(0);
            continue;
        }
        const double eps = clustering_radius(sp, pts, opt.eps_factor, opt.eps_floor, opt.eps_quantile);
        std::vector<int> labels;
        fs.stability.push_back(count_components(sp, pts, eps, &labels));
        if (level == 4) {
            fs.points = std::move(pts);
            fs.labels = std::move(labels);
            fs.epsilon = eps;
        }
    }
    fs.issued = fs.accepted.back() >= opt.min_accept;
    if (!fs.issued) {
        fs.note = "only " + std::to_string(fs.accepted.back()) + " points accepted; fiber empty or near its boundary";
        return fs;
    }
    fs.components = fs.stability.back();
    fs.stable = fs.stability[1] == fs.stability[2];
    if (!fs.stable) fs.note = "component count changed between the last two densities";
    for (const auto& p : fs.points) {
        double r = sp.constraint_residual(p);
        r = std::max({r, std::abs(sys.J.eval(p) - c.x()), std::abs(sys.H.eval(p) - c.y())});
        fs.max_residual = std::max(fs.max_residual, r);
    }

    // Local PCA: a regular fiber is a 2-manifold, so neighbourhoods spread in two directions.
    const int n = static_cast<int>(fs.points.size());
    const int k = std::min(opt.pca_neighbors, n - 1);
    std::vector<double> ratios;
    if (k >= 4) {
        const int probes = std::min(opt.pca_probes, n);
        for (int pi = 0; pi < probes; ++pi) {
            const int i = static_cast<int>(static_cast<long long>(pi) * n / probes);
            std::vector<std::pair<double, int>> d;
            for (int j = 0; j < n; ++j)
                if (j != i) d.emplace_back(sp.distance(fs.points[i], fs.points[j]), j);
            std::partial_sort(d.begin(), d.begin() + k, d.end());
            Mat D(k, sp.ambient_dim());
            for (int a = 0; a < k; ++a) D.row(a) = sp.difference(fs.points[d[a].second], fs.points[i]).transpose();
            Eigen::SelfAdjointEigenSolver<Mat> es(D.transpose() * D / k);
            const Vec ev = es.eigenvalues().reverse();
            if (ev.size() >= 3) ratios.push_back(ev[2] > 0 ? ev[1] / ev[2] : INFINITY);
        }
    }
    fs.pca_ratio = quantile(ratios, 0.5);
    fs.regular_dimension = fs.pca_ratio > 10.0;
    return fs;
}

// ------------------------------------------------------------------ Morse–Bott

MorseBottReport morse_bott_audit(const SystemDef& sys, const ScalarField& f, const PlaneDiffeo& g,
                                 const MorseBottOptions& opt, const BifurcationDiagram* mapped) {
    const PhaseSpace& sp = sys.space;
    MorseBottReport rep;
    rep.f_description = f.to_string() + " after g = (" + g.gx().to_string() + ", " + g.gy().to_string() + ")";
    const ExprTree gx = compose(g.gx(), {sys.J, sys.H});
    const ExprTree gy = compose(g.gy(), {sys.J, sys.H});
    const ExprTree L = compose(f, {gx, gy});

    if (mapped) {
        rep.hypothesis_checked = true;
        double m = INFINITY;
        auto grad_at = [&](const Point2& p) {
            const double v[2] = {p.x(), p.y()};
            const Jet2 j = f.eval_jet2(v);
            return std::hypot(j.grad(0), j.grad(1));
        };
        for (const auto& s : mapped->strata)
            for (const auto& v : s.vertices) m = std::min(m, grad_at(v));
        for (const auto& iv : mapped->isolated_values) m = std::min(m, grad_at(iv.value));
        rep.min_grad_on_sigma = m;
        rep.hypothesis_ok = !(m <= opt.grad_floor);
    }

    struct Found {
        Vec x;
        double value;
        int index, coindex, nullity, dimension;
        std::vector<double> ev;
    };
    std::vector<Found> found;
    const auto seeds = seed_points(sp, opt.seeds, opt.rng_seed);
    rep.seeds_used = static_cast<int>(seeds.size());
    std::mt19937_64 rng(opt.rng_seed ^ 0x3C6EF372FE94F82BULL);
    for (const Vec& s : seeds) {
        const auto sol = solve_critical(sp, L, s);
        if (!sol.converged) continue;
        ++rep.converged;
        Found fd;
        fd.x = sol.x;
        try {
            const LocalFrame fr = local_frame(sp, sol.x);
            const TangentJet tj = tangent_jet(sp, L, sol.x, fr);
            fd.value = tj.value;
            Eigen::SelfAdjointEigenSolver<Mat> es(tj.hess);
            const Vec ev = es.eigenvalues();
            const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
            const double zero = std::sqrt(sp.tol().nondeg) * scale;
            fd.index = fd.coindex = fd.nullity = 0;
            for (int i = 0; i < ev.size(); ++i) {
                fd.ev.push_back(ev[i]);
                if (ev[i] < -zero)
                    ++fd.index;
                else if (ev[i] > zero)
                    ++fd.coindex;
                else
                    ++fd.nullity;
            }
            // Local dimension of the critical set: perturb along the tangent
            // space, re-solve, and measure the rank of the displacements.
            Mat disp(sp.ambient_dim(), opt.probes);
            for (int p = 0; p < opt.probes; ++p) {
                Vec u(4);
                for (int a = 0; a < 4; ++a) u[a] = 2.0 * unit_uniform(rng) - 1.0;
                u.normalize();
                const auto back = solve_critical(sp, L, sol.x + opt.probe_size * (fr.E * u));
                disp.col(p) = back.converged ? Vec(sp.difference(back.x, sol.x) / opt.probe_size) : Vec(Vec::Zero(sp.ambient_dim()));
            }
            Eigen::JacobiSVD<Mat> svd(disp);
            const auto& sv = svd.singularValues();
            fd.dimension = 0;
            for (int i = 0; i < sv.size(); ++i)
                if (sv[i] > 0.05 * std::sqrt(static_cast<double>(opt.probes))) ++fd.dimension;
        } catch (const std::exception&) {
            continue;
        }
        found.push_back(std::move(fd));
    }

    // Group by signature and critical value, then split each group into ε-clusters.
    std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
        if (a.value != b.value) return a.value < b.value;
        return lex_less(a.x, b.x);
    });
    std::vector<std::vector<int>> groups;
    for (int i = 0; i < static_cast<int>(found.size()); ++i) {
        bool placed = false;
        for (auto& gidx : groups) {
            const Found& r = found[gidx.front()];
            if (r.index == found[i].index && r.coindex == found[i].coindex && r.dimension == found[i].dimension &&
                std::abs(r.value - found[i].value) <= 1e-6 * (1.0 + std::abs(r.value))) {
                gidx.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) groups.push_back({i});
    }
    for (const auto& gidx : groups) {
        std::vector<Vec> pts;
        for (int i : gidx) pts.push_back(found[i].x);
        const double eps = clustering_radius(sp, pts, 3.0, 1e-4, 0.95);
        std::vector<int> labels;
        const int nc = count_components(sp, pts, eps, &labels);
        for (int c = 0; c < nc; ++c) {
            CriticalManifold m;
            bool first = true;
            for (std::size_t a = 0; a < gidx.size(); ++a) {
                if (labels[a] != c) continue;
                const Found& fd = found[gidx[a]];
                ++m.points;
                if (first) {
                    first = false;
                    m.value = fd.value;
                    m.index = fd.index;
                    m.coindex = fd.coindex;
                    m.nullity = fd.nullity;
                    m.dimension = fd.dimension;
                    m.representative = fd.x;
                    m.image = {sys.J.eval(fd.x), sys.H.eval(fd.x)};
                    m.eigenvalues = fd.ev;
                }
            }
            rep.manifolds.push_back(std::move(m));
        }
    }
    std::sort(rep.manifolds.begin(), rep.manifolds.end(), [](const CriticalManifold& a, const CriticalManifold& b) {
        if (a.value != b.value) return a.value < b.value;
        return lex_less(a.representative, b.representative);
    });

    std::ostringstream note;
    for (const auto& m : rep.manifolds) {
        if (m.nullity != m.dimension) rep.morse_bott = false;
        if (m.index == 1 || m.coindex == 1) rep.pass = false;
    }
    if (!rep.morse_bott) {
        rep.pass = false;
        note << "Hessian nullity differs from the critical-manifold dimension; ";
    }
    if (!rep.pass && rep.morse_bott) note << "index or co-index 1 present; ";
    if (rep.hypothesis_checked && !rep.hypothesis_ok) note << "f has a critical point on g(Sigma_F); ";
    if (rep.manifolds.empty()) note << "no critical points found; ";
    rep.note = note.str();
    return rep;
}

// ------------------------------------------------------------------ verdict

std::string to_string(VerdictKind k) {
    switch (k) {
        case VerdictKind::Guaranteed: return "GUARANTEED-CONNECTED";
        case VerdictKind::Weak: return "WEAK-GUARANTEE";
        case VerdictKind::NoGuarantee: return "NO-GUARANTEE";
    }
    return "NO-GUARANTEE";
}

ConnectivityVerdict connectivity_verdict(const SystemDef& sys, const BifurcationDiagram& d, const PlaneDiffeo& g,
                                         const std::vector<CriticalPointRecord>& records, const VerdictOptions& opt) {
    ConnectivityVerdict v;
    const BifurcationDiagram gd = apply_diffeo(d, g);
    v.tangencies = gd.tangencies;
    v.vertical_tangencies = static_cast<int>(gd.tangencies.size());

    // Almost-toric: critical-point records plus every traced stratum vertex.
    const auto audit = almost_toric_audit(sys, records, 0);
    int bad_vertices = 0;
    for (const auto& s : d.strata)
        for (auto w : s.wtype)
            if (!is_almost_toric_type(w)) ++bad_vertices;
    {
        std::ostringstream os;
        os << audit.records_checked << " records, " << audit.offending.size() << " offending; " << bad_vertices
           << " non-elliptic stratum vertices";
        if (!audit.offending.empty())
            os << "; first witness " << to_string(audit.offending.front().wtype) << " at image ("
               << audit.offending.front().image.x() << ", " << audit.offending.front().image.y() << ")";
        v.hypotheses.push_back({"almost-toric", audit.pass && bad_vertices == 0, os.str()});
    }
    {
        std::ostringstream os;
        os << v.vertical_tangencies << " vertical tangencies of g(Sigma_F)";
        v.hypotheses.push_back({"no-vertical-tangencies", v.vertical_tangencies == 0, os.str()});
    }
    bool cone_ok = false;
    if (opt.cone) {
        std::vector<Point2> samples;
        for (const auto& p : image_samples(sys, opt.cone_samples, opt.rng_seed + 17)) samples.push_back(g(p));
        cone_ok = check_cone(gd, samples, *opt.cone);
        std::ostringstream os;
        os << "cone alpha = " << opt.cone->alpha << ", beta = " << opt.cone->beta << " at (" << opt.cone->vertex.x()
           << ", " << opt.cone->vertex.y() << "), " << samples.size() << " samples";
        v.hypotheses.push_back({"cone", cone_ok, os.str()});
    }
    v.hypotheses.push_back({"compact", opt.compact, "user-asserted"});
    v.hypotheses.push_back({"proper", sys.proper, "user-asserted"});
    v.hypotheses.push_back(
        {"finite-interior-critical-values", opt.finite_interior_critical_values, "user-asserted"});

    auto holds = [&](const std::string& name) {
        for (const auto& h : v.hypotheses)
            if (h.name == name) return h.holds;
        return false;
    };
    const bool at = holds("almost-toric");
    const bool no_vt = v.vertical_tangencies == 0;
    const bool shape = opt.compact || cone_ok;

    if (at && no_vt && shape && sys.proper) {
        v.kind = VerdictKind::Guaranteed;
    } else {
        // Weaker route: compact image whose vertical tangencies are all outward non-degenerate contacts.
        bool contacts_ok = opt.compact && at && opt.finite_interior_critical_values && !no_vt;
        std::string contact_detail;
        if (contacts_ok) {
            const Membership inside = image_membership(sys, 24, opt.rng_seed, &g);
            int good = 0;
            for (const auto& t : gd.tangencies) {
                const auto cps = classify_contact(gd, t.point.x(), inside);
                const ContactPoint* best = nullptr;
                for (const auto& cp : cps)
                    if (cp.stratum == t.stratum && (!best || std::abs(cp.point.y() - t.point.y()) <
                                                                 std::abs(best->point.y() - t.point.y())))
                        best = &cp;
                if (best && best->kind == ContactKind::OutwardContact && best->nondegenerate) ++good;
            }
            contacts_ok = good == static_cast<int>(gd.tangencies.size());
            contact_detail = std::to_string(good) + " of " + std::to_string(gd.tangencies.size()) +
                             " vertical tangencies are outward non-degenerate contacts";
        } else {
            contact_detail = "not applicable";
        }
        v.hypotheses.push_back({"outward-contacts-only", contacts_ok, contact_detail});
        if (contacts_ok) {
            v.kind = VerdictKind::Weak;
        } else {
            v.kind = VerdictKind::NoGuarantee;
        }
    }
    if (v.kind != VerdictKind::Guaranteed) {
        const char* order[] = {"almost-toric", "no-vertical-tangencies", "proper"};
        for (const char* h : order)
            if (!holds(h)) {
                v.failed = h;
                break;
            }
        if (v.failed.empty() && !shape) v.failed = opt.cone ? "cone" : "compact";
        if (v.kind == VerdictKind::Weak) v.failed = "no-vertical-tangencies";
    }

    // Spot checks at regular values away from Σ_F.
    std::vector<Point2> values = opt.extra_values;
    auto clear_of_sigma = [&](const Point2& p) {
        for (const auto& s : d.strata)
            for (const auto& q : s.vertices)
                if ((q - p).norm() < opt.spot_clearance) return false;
        for (const auto& iv : d.isolated_values)
            if ((iv.value - p).norm() < opt.spot_clearance) return false;
        return d.image_box.contains(p);
    };
    int wanted = opt.spot_checks;
    for (const auto& p : image_samples(sys, 400, opt.rng_seed + 29)) {
        if (wanted <= 0) break;
        if (!clear_of_sigma(p)) continue;
        values.push_back(p);
        --wanted;
    }
    for (const auto& c : values) {
        FiberOptions fo = opt.fiber;
        const FiberSample fs = sample_fiber(sys, c, fo);
        v.spot_checks.push_back({c, fs.components, fs.issued, fs.stable, fs.accepted.empty() ? 0 : fs.accepted.back()});
    }
    return v;
}

}  // namespace liouville
