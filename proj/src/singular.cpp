#include "liouville/singular.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "liouville/detail/gauss_newton.hpp"
#include "liouville/sampling.hpp"

namespace liouville {

namespace {

struct Jets {
    Jet2 J, H;
    std::vector<Jet2> c;
};

Jets jets_at(const SystemDef& sys, const Vec& x) {
    Jets j;
    j.J = sys.J.eval_jet2(x);
    j.H = sys.H.eval_jet2(x);
    for (const auto& c : sys.space.constraints()) j.c.push_back(c.eval_jet2(x));
    return j;
}

// Rows dJ|ₜ and dH|ₜ in the frame.
Eigen::Matrix<double, 2, 4> restricted_differential(const LocalFrame& fr, const Vec& gJ, const Vec& gH) {
    Eigen::Matrix<double, 2, 4> D;
    D.row(0) = (fr.E.transpose() * gJ).transpose();
    D.row(1) = (fr.E.transpose() * gH).transpose();
    return D;
}

Eigen::Vector2d oriented(Eigen::Vector2d ab) {
    if (std::abs(ab[1]) > 1e-12 ? ab[1] < 0 : ab[0] < 0) ab = -ab;
    return ab;
}

// Ambient Hessian of Σ w_i f_i minus the multiplier correction for the constraints.
Mat lagrangian_hessian(const std::vector<const Jet2*>& fs, const std::vector<double>& w, const std::vector<Jet2>& cs,
                       const Mat& C) {
    const int n = fs.front()->size();
    Vec g = Vec::Zero(n);
    Mat h = Mat::Zero(n, n);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        g += w[i] * fs[i]->gradient();
        h += w[i] * fs[i]->hessian();
    }
    if (!cs.empty()) {
        const Vec mu = C.transpose().colPivHouseholderQr().solve(g);
        for (std::size_t i = 0; i < cs.size(); ++i) h -= mu[i] * cs[i].hessian();
    }
    return h;
}

Mat intrinsic(const LocalFrame& fr, const Mat& h) {
    Mat r = fr.E.transpose() * h * fr.E;
    return 0.5 * (r + r.transpose());
}

}  // namespace

std::string to_string(WilliamsonType t) {
    switch (t) {
        case WilliamsonType::EllipticElliptic: return "elliptic-elliptic";
        case WilliamsonType::FocusFocus: return "focus-focus";
        case WilliamsonType::TransversallyElliptic: return "transversally-elliptic";
        case WilliamsonType::TransversallyHyperbolic: return "transversally-hyperbolic";
        case WilliamsonType::HyperbolicElliptic: return "hyperbolic-elliptic";
        case WilliamsonType::HyperbolicHyperbolic: return "hyperbolic-hyperbolic";
        case WilliamsonType::Degenerate: return "degenerate";
        case WilliamsonType::Unresolved: return "unresolved";
    }
    return "unresolved";
}

WilliamsonType williamson_from_string(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(WilliamsonType::Unresolved); ++i) {
        const auto t = static_cast<WilliamsonType>(i);
        if (to_string(t) == s) return t;
    }
    throw std::invalid_argument("unknown Williamson type '" + s + "'");
}

bool is_almost_toric_type(WilliamsonType t) {
    return t == WilliamsonType::EllipticElliptic || t == WilliamsonType::FocusFocus ||
           t == WilliamsonType::TransversallyElliptic;
}

RankInfo critical_rank(const SystemDef& sys, const Vec& m) {
    const LocalFrame fr = local_frame(sys.space, m);
    const Vec gJ = sys.J.eval_jet2(m).gradient();
    const Vec gH = sys.H.eval_jet2(m).gradient();
    const auto D = restricted_differential(fr, gJ, gH);
    Eigen::JacobiSVD<Eigen::Matrix<double, 2, 4>> svd(D, Eigen::ComputeFullU);
    RankInfo r;
    r.sigma1 = svd.singularValues()[0];
    r.sigma2 = svd.singularValues()[1];
    r.scale = 1.0 + std::max(gJ.norm(), gH.norm());
    r.kernel = oriented(svd.matrixU().col(1));
    const double t = sys.space.tol().rank * r.scale;
    if (r.sigma1 <= t)
        r.rank = 0;
    else if (r.sigma1 <= 10.0 * t)
        r.rank = -1;
    else if (r.sigma2 <= t)
        r.rank = 1;
    else
        r.rank = 2;
    return r;
}

double initial_theta(const SystemDef& sys, const Vec& x) {
    const LocalFrame fr = local_frame(sys.space, x);
    const auto D = restricted_differential(fr, sys.J.eval_jet2(x).gradient(), sys.H.eval_jet2(x).gradient());
    Eigen::JacobiSVD<Eigen::Matrix<double, 2, 4>> svd(D, Eigen::ComputeFullU);
    const Eigen::Vector2d ab = oriented(svd.matrixU().col(1));
    return std::atan2(ab[1], ab[0]);
}

Rank1Solution solve_rank1(const SystemDef& sys, const Vec& x0, double theta0, const std::optional<ImageSlice>& slice,
                          int max_iter) {
    const PhaseSpace& sp = sys.space;
    const int n = sp.ambient_dim();
    const int k = sp.num_constraints();
    const int m = n + k + (slice ? 1 : 0);

    Vec z(n + k + 1);
    z.head(n) = sp.wrap(x0);
    z[n + k] = theta0;
    try {
        const Jets j = jets_at(sys, z.head(n));
        if (k > 0) {
            const Vec g = std::cos(theta0) * j.J.gradient() + std::sin(theta0) * j.H.gradient();
            z.segment(n, k) = sp.constraint_jacobian(z.head(n)).transpose().colPivHouseholderQr().solve(g);
        }
    } catch (const DomainError&) {
        return {x0, theta0, false, INFINITY};
    }

    auto eval = [&](const Vec& zz, Vec& r, Mat* Jac) -> bool {
        const Vec x = zz.head(n);
        Jets j;
        try {
            j = jets_at(sys, x);
        } catch (const DomainError&) {
            return false;
        }
        const double th = zz[n + k], ct = std::cos(th), st = std::sin(th);
        const Vec gJ = j.J.gradient(), gH = j.H.gradient();
        Vec g1 = ct * gJ + st * gH;
        for (int i = 0; i < k; ++i) g1 -= zz[n + i] * j.c[i].gradient();
        r.head(n) = g1;
        for (int i = 0; i < k; ++i) r[n + i] = j.c[i].value();
        if (slice) {
            const Eigen::Vector2d F(j.J.value(), j.H.value());
            r[n + k] = slice->normal.dot(F - slice->point);
        }
        if (Jac) {
            Mat& Jm = *Jac;
            Jm.setZero();
            Mat h = ct * j.J.hessian() + st * j.H.hessian();
            for (int i = 0; i < k; ++i) h -= zz[n + i] * j.c[i].hessian();
            Jm.block(0, 0, n, n) = h;
            for (int i = 0; i < k; ++i) {
                Jm.block(0, n + i, n, 1) = -j.c[i].gradient();
                Jm.block(n + i, 0, 1, n) = j.c[i].gradient().transpose();
            }
            Jm.block(0, n + k, n, 1) = -st * gJ + ct * gH;
            if (slice) Jm.block(n + k, 0, 1, n) = (slice->normal[0] * gJ + slice->normal[1] * gH).transpose();
        }
        return true;
    };
    auto normalize = [&](Vec zz) {
        zz.head(n) = sp.wrap(zz.head(n));
        return zz;
    };
    const auto res = detail::gauss_newton(z, m, eval, normalize, sp.tol().constraint, max_iter, sp.tol().max_halvings);
    return {res.z.head(n), res.z[n + k], res.converged, res.residual};
}

PointSolution solve_rank0(const SystemDef& sys, const Vec& x0, int max_iter) {
    const PhaseSpace& sp = sys.space;
    const int n = sp.ambient_dim();
    const int k = sp.num_constraints();
    Vec z = Vec::Zero(n + 2 * k);
    z.head(n) = sp.wrap(x0);
    auto eval = [&](const Vec& zz, Vec& r, Mat* Jac) -> bool {
        Jets j;
        try {
            j = jets_at(sys, zz.head(n));
        } catch (const DomainError&) {
            return false;
        }
        Vec a = j.J.gradient(), b = j.H.gradient();
        for (int i = 0; i < k; ++i) {
            a -= zz[n + i] * j.c[i].gradient();
            b -= zz[n + k + i] * j.c[i].gradient();
            r[2 * n + i] = j.c[i].value();
        }
        r.head(n) = a;
        r.segment(n, n) = b;
        if (Jac) {
            Mat& Jm = *Jac;
            Jm.setZero();
            Mat ha = j.J.hessian(), hb = j.H.hessian();
            for (int i = 0; i < k; ++i) {
                ha -= zz[n + i] * j.c[i].hessian();
                hb -= zz[n + k + i] * j.c[i].hessian();
                Jm.block(0, n + i, n, 1) = -j.c[i].gradient();
                Jm.block(n, n + k + i, n, 1) = -j.c[i].gradient();
                Jm.block(2 * n + i, 0, 1, n) = j.c[i].gradient().transpose();
            }
            Jm.block(0, 0, n, n) = ha;
            Jm.block(n, 0, n, n) = hb;
        }
        return true;
    };
    auto normalize = [&](Vec zz) {
        zz.head(n) = sp.wrap(zz.head(n));
        return zz;
    };
    const auto res =
        detail::gauss_newton(z, 2 * n + k, eval, normalize, sp.tol().constraint, max_iter, sp.tol().max_halvings);
    return {res.z.head(n), res.converged, res.residual};
}

PointSolution solve_critical(const PhaseSpace& sp, const ScalarField& f, const Vec& x0, int max_iter) {
    const int n = sp.ambient_dim();
    const int k = sp.num_constraints();
    Vec z = Vec::Zero(n + k);
    z.head(n) = sp.wrap(x0);
    if (k > 0) {
        // Least-squares multipliers: a zero start leaves the Lagrangian Hessian
        // singular on the constraint normals.
        try {
            const Vec g0 = f.eval_jet2(z.head(n)).gradient();
            const Mat C = sp.constraint_jacobian(z.head(n));
            z.tail(k) = C.transpose().completeOrthogonalDecomposition().solve(g0);
        } catch (const DomainError&) {
        }
    }
    auto eval = [&](const Vec& zz, Vec& r, Mat* Jac) -> bool {
        const Vec x = zz.head(n);
        Jet2 jf;
        std::vector<Jet2> jc;
        try {
            jf = f.eval_jet2(x);
            for (const auto& c : sp.constraints()) jc.push_back(c.eval_jet2(x));
        } catch (const DomainError&) {
            return false;
        }
        Vec g = jf.gradient();
        for (int i = 0; i < k; ++i) {
            g -= zz[n + i] * jc[i].gradient();
            r[n + i] = jc[i].value();
        }
        r.head(n) = g;
        if (Jac) {
            Mat& Jm = *Jac;
            Jm.setZero();
            Mat h = jf.hessian();
            for (int i = 0; i < k; ++i) {
                h -= zz[n + i] * jc[i].hessian();
                Jm.block(0, n + i, n, 1) = -jc[i].gradient();
                Jm.block(n + i, 0, 1, n) = jc[i].gradient().transpose();
            }
            Jm.block(0, 0, n, n) = h;
        }
        return true;
    };
    auto normalize = [&](Vec zz) {
        zz.head(n) = sp.wrap(zz.head(n));
        return zz;
    };
    const auto res = detail::gauss_newton(z, n + k, eval, normalize, sp.tol().constraint, max_iter, sp.tol().max_halvings);
    return {res.z.head(n), res.converged, res.residual};
}

WilliamsonType classify_spectrum(const std::vector<std::complex<double>>& ev, double nondeg_tol) {
    if (ev.size() != 4) return WilliamsonType::Unresolved;
    double s = 0.0;
    for (const auto& l : ev) s = std::max(s, std::abs(l));
    if (!(s > 0.0)) return WilliamsonType::Degenerate;
    const double small = std::sqrt(nondeg_tol) * s;
    for (std::size_t i = 0; i < 4; ++i) {
        if (std::abs(ev[i]) <= small) return WilliamsonType::Degenerate;
        for (std::size_t j = i + 1; j < 4; ++j)
            if (std::abs(ev[i] - ev[j]) <= small) return WilliamsonType::Degenerate;
    }
    const double pat = 1e-6 * s;
    int real = 0, imag = 0, cplx = 0;
    for (const auto& l : ev) {
        if (std::abs(l.imag()) <= pat)
            ++real;
        else if (std::abs(l.real()) <= pat)
            ++imag;
        else
            ++cplx;
    }
    if (imag == 4) return WilliamsonType::EllipticElliptic;
    if (cplx == 4) return WilliamsonType::FocusFocus;
    if (real == 4) return WilliamsonType::HyperbolicHyperbolic;
    if (real == 2 && imag == 2) return WilliamsonType::HyperbolicElliptic;
    return WilliamsonType::Unresolved;
}

namespace {

// The real QR iteration occasionally stalls on exactly structured matrices;
// the complex solver takes different shifts and is the fallback.
bool hamiltonian_spectrum(const Mat& A, std::vector<std::complex<double>>& ev) {
    Eigen::EigenSolver<Mat> es(A, false);
    if (es.info() == Eigen::Success) {
        ev.assign(es.eigenvalues().data(), es.eigenvalues().data() + A.rows());
        return true;
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> cs(A.cast<std::complex<double>>(), false);
    if (cs.info() != Eigen::Success) return false;
    ev.assign(cs.eigenvalues().data(), cs.eigenvalues().data() + A.rows());
    return true;
}

}  // namespace

Rank0Classification classify_rank0(const SystemDef& sys, const Vec& m, std::uint64_t seed) {
    const PhaseSpace& sp = sys.space;
    const LocalFrame fr = local_frame(sp, m);
    if (std::abs(fr.W.determinant()) <= sp.tol().sympl)
        throw DegenerateEmbedding("restricted 2-form is singular at the rank-0 point");
    const Jets j = jets_at(sys, m);
    const Mat HJ = intrinsic(fr, lagrangian_hessian({&j.J}, {1.0}, j.c, fr.C));
    const Mat HH = intrinsic(fr, lagrangian_hessian({&j.H}, {1.0}, j.c, fr.C));
    const Mat Winv_t = fr.W.transpose().inverse();
    const Mat AJ = Winv_t * HJ;
    const Mat AH = Winv_t * HH;

    Rank0Classification out;
    std::ostringstream diag;
    const double nJ = AJ.norm(), nH = AH.norm();
    if (nJ > 0 && nH > 0) out.commutator = (AJ * AH - AH * AJ).norm() / (nJ * nH);

    // Linear independence of the two linearisations (Cartan condition).
    Mat pair(16, 2);
    pair.col(0) = AJ.reshaped();
    pair.col(1) = AH.reshaped();
    Eigen::JacobiSVD<Mat> psvd(pair);
    const double indep = psvd.singularValues()[0] > 0 ? psvd.singularValues()[1] / psvd.singularValues()[0] : 0.0;
    const bool independent = indep > std::sqrt(sp.tol().nondeg);
    if (!independent) diag << "linearisations of J and H are dependent (ratio " << indep << "); ";
    if (out.commutator > 1e-6) diag << "linearisations do not commute (" << out.commutator << "); ";

    std::mt19937_64 rng(seed);
    for (int d = 0; d < 5; ++d) {
        const double phi = 2.0 * std::numbers::pi * unit_uniform(rng);
        const Mat A = std::cos(phi) * AJ + std::sin(phi) * AH;
        std::vector<std::complex<double>> ev;
        if (!hamiltonian_spectrum(A, ev)) {
            diag << "eigenvalue iteration failed in draw " << d << "; ";
            out.per_draw.push_back(WilliamsonType::Unresolved);
            continue;
        }
        std::sort(ev.begin(), ev.end(), [](auto a, auto b) {
            return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
        });
        const double s = std::max(A.norm(), 1e-300);
        double sym = 0.0;
        for (const auto& a : ev) {
            double best = INFINITY;
            for (const auto& b : ev) best = std::min(best, std::abs(a + b));
            sym = std::max(sym, best / s);
        }
        out.spectrum_symmetry = std::max(out.spectrum_symmetry, sym);
        out.per_draw.push_back(independent ? classify_spectrum(ev, sp.tol().nondeg) : WilliamsonType::Degenerate);
        if (d == 0) out.eigenvalues = ev;
    }
    const bool agree = std::all_of(out.per_draw.begin(), out.per_draw.end(),
                                   [&](WilliamsonType t) { return t == out.per_draw.front(); });
    if (agree) {
        out.wtype = out.per_draw.front();
    } else {
        out.wtype = WilliamsonType::Unresolved;
        diag << "eigenvalue pattern differs across generic combinations: ";
        for (auto t : out.per_draw) diag << to_string(t) << ' ';
    }
    out.diagnostics = diag.str();
    return out;
}

Rank1Classification classify_rank1(const SystemDef& sys, const Vec& m) {
    const PhaseSpace& sp = sys.space;
    Rank1Classification out;
    const RankInfo ri = critical_rank(sys, m);
    if (ri.sigma1 <= sp.tol().rank * ri.scale) return out;  // actually rank 0
    const double a = ri.kernel[0], b = ri.kernel[1];
    out.multiplier = ri.kernel;

    const LocalFrame fr = local_frame(sp, m);
    const Jets j = jets_at(sys, m);
    const Vec gG = fr.E.transpose() * (-b * j.J.gradient() + a * j.H.gradient());
    const Vec XG = fr.W.transpose().fullPivLu().solve(gG);
    Eigen::Matrix<double, 2, 4> Q;
    Q.row(0) = (fr.W * XG).transpose();
    Q.row(1) = (fr.W * gG).transpose();
    Eigen::JacobiSVD<Eigen::Matrix<double, 2, 4>> svd(Q, Eigen::ComputeFullV);
    const Eigen::Matrix<double, 4, 2> P = svd.matrixV().rightCols<2>();

    const Mat HK = intrinsic(fr, lagrangian_hessian({&j.J, &j.H}, {a, b}, j.c, fr.C));
    const Eigen::Matrix2d R = P.transpose() * HK * P;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (R + R.transpose()));
    out.eigenvalues = es.eigenvalues();
    out.det = R.determinant();
    const double scale = HK.squaredNorm();
    if (!(scale > 0.0) || std::abs(out.det) <= sp.tol().nondeg * scale)
        out.wtype = WilliamsonType::Degenerate;
    else if (out.det > 0)
        out.wtype = WilliamsonType::TransversallyElliptic;
    else
        out.wtype = WilliamsonType::TransversallyHyperbolic;
    return out;
}

CriticalPointRecord make_record(const SystemDef& sys, const Vec& m, double equation_residual, std::uint64_t seed) {
    CriticalPointRecord rec;
    rec.point = m;
    rec.image = {sys.J.eval(m), sys.H.eval(m)};
    const RankInfo ri = critical_rank(sys, m);
    const LocalFrame fr = local_frame(sys.space, m);
    rec.cert.equation_residual = equation_residual;
    rec.cert.constraint_residual = sys.space.constraint_residual(m);
    rec.cert.sigma1 = ri.sigma1;
    rec.cert.sigma2 = ri.sigma2;
    rec.cert.rank_scale = ri.scale;
    rec.cert.form_det = fr.W.determinant();
    if (ri.rank == 0) {
        rec.rank = 0;
        const auto c = classify_rank0(sys, m, seed);
        rec.wtype = c.wtype;
        rec.eigen_data = c.eigenvalues;
        rec.cert.spectrum_symmetry = c.spectrum_symmetry;
        rec.cert.commutator = c.commutator;
        rec.cert.agreeing_draws = static_cast<int>(
            std::count(c.per_draw.begin(), c.per_draw.end(), c.per_draw.empty() ? rec.wtype : c.per_draw.front()));
    } else if (ri.rank == 1) {
        rec.rank = 1;
        const auto c = classify_rank1(sys, m);
        rec.wtype = c.wtype;
        rec.eigen_data = {c.eigenvalues[0], c.eigenvalues[1]};
        rec.cert.restricted_det = c.det;
    } else {
        rec.rank = ri.rank < 0 ? 0 : 2;
        rec.wtype = WilliamsonType::Unresolved;
    }
    return rec;
}

CriticalSearch find_critical_points(const SystemDef& sys, const SearchOptions& opt) {
    const PhaseSpace& sp = sys.space;
    CriticalSearch out;
    const auto seeds = seed_points(sp, opt.seeds, opt.rng_seed);
    out.seeds_used = static_cast<int>(seeds.size());

    std::vector<CriticalPointRecord> rank0;
    std::map<std::pair<long long, long long>, CriticalPointRecord> rank1;

    auto accept = [&](const Vec& x, double residual) {
        CriticalPointRecord rec;
        try {
            rec = make_record(sys, x, residual, opt.rng_seed);
        } catch (const std::exception&) {
            return false;
        }
        if (rec.rank == 2) return false;
        if (rec.rank == 0) {
            for (const auto& r : rank0)
                if (sp.distance(r.point, x) <= sp.tol().dedup) return true;
            rank0.push_back(std::move(rec));
        } else {
            const std::pair<long long, long long> key{std::llround(std::floor(rec.image[0] / opt.rep_spacing)),
                                                      std::llround(std::floor(rec.image[1] / opt.rep_spacing))};
            rank1.emplace(key, std::move(rec));
        }
        return true;
    };

    for (std::size_t i = 0; i < seeds.size(); ++i) {
        bool any = false;
        if (static_cast<int>(i) < opt.rank0_seeds) {
            const auto s0 = solve_rank0(sys, seeds[i]);
            if (s0.converged) any = accept(s0.x, s0.residual) || any;
        }
        double th = 0.0;
        try {
            th = initial_theta(sys, seeds[i]);
        } catch (const std::exception&) {
        }
        const auto s1 = solve_rank1(sys, seeds[i], th, std::nullopt, sp.tol().max_iter);
        if (s1.converged) any = accept(s1.x, s1.residual) || any;
        if (!any) ++out.dropped;
    }

    auto by_image = [](const CriticalPointRecord& a, const CriticalPointRecord& b) {
        if (a.image[0] != b.image[0]) return a.image[0] < b.image[0];
        return a.image[1] < b.image[1];
    };
    std::sort(rank0.begin(), rank0.end(), by_image);
    out.records = std::move(rank0);
    std::vector<CriticalPointRecord> r1;
    for (auto& [key, rec] : rank1) r1.push_back(std::move(rec));
    std::sort(r1.begin(), r1.end(), by_image);
    for (auto& r : r1) out.records.push_back(std::move(r));
    return out;
}

AlmostToricVerdict almost_toric_audit(const SystemDef&, const std::vector<CriticalPointRecord>& records,
                                      int seeds_used) {
    AlmostToricVerdict v;
    v.seeds_used = seeds_used;
    v.records_checked = static_cast<int>(records.size());
    for (const auto& r : records)
        if (!is_almost_toric_type(r.wtype)) v.offending.push_back(r);
    v.pass = v.offending.empty();
    return v;
}

}  // namespace liouville
