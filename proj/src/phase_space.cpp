#include "liouville/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace liouville {

namespace {

Vec to_vec(const Jet2& j) {
    Vec g(j.size());
    for (int i = 0; i < j.size(); ++i) g[i] = j.grad(i);
    return g;
}

}  // namespace

PhaseSpace::PhaseSpace(int ambient_dim, std::vector<ScalarField> constraints, std::vector<FormBlock> form,
                       std::vector<Interval> seed_box, std::vector<int> periodic_dims, Tolerances tol,
                       std::vector<std::string> names)
    : dim_(ambient_dim),
      constraints_(std::move(constraints)),
      form_(std::move(form)),
      seed_box_(std::move(seed_box)),
      periodic_(std::move(periodic_dims)),
      tol_(tol),
      names_(std::move(names)) {
    if (dim_ < 4) throw std::invalid_argument("ambient dimension must be at least 4");
    if (dim_ - num_constraints() != 4)
        throw std::invalid_argument("ambient_dim - #constraints must equal 4, got " + std::to_string(dim_) + " - " +
                                    std::to_string(num_constraints()));
    for (const auto& c : constraints_)
        if (c.arity() != dim_) throw std::invalid_argument("constraint arity does not match ambient dimension");
    if (static_cast<int>(seed_box_.size()) != dim_) throw std::invalid_argument("seed box must have one interval per coordinate");
    for (const auto& iv : seed_box_)
        if (!(iv.lo <= iv.hi)) throw std::invalid_argument("seed box interval with lo > hi");
    for (const auto& b : form_) {
        const std::size_t want = b.kind == FormBlock::Kind::Pair ? 2 : 3;
        if (b.idx.size() != want) throw std::invalid_argument("form block has the wrong number of indices");
        for (int i : b.idx)
            if (i < 0 || i >= dim_) throw std::invalid_argument("form block index out of range");
    }
    for (int p : periodic_)
        if (p < 0 || p >= dim_) throw std::invalid_argument("periodic dimension out of range");
    std::sort(periodic_.begin(), periodic_.end());
}

std::vector<FormBlock> PhaseSpace::canonical_form(int n) {
    std::vector<FormBlock> f;
    for (int i = 0; i < n; ++i) f.push_back({FormBlock::Kind::Pair, {i, i + n}, 1.0});
    return f;
}

bool PhaseSpace::is_periodic(int i) const { return std::binary_search(periodic_.begin(), periodic_.end(), i); }

Vec PhaseSpace::wrap(Vec x) const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int p : periodic_) {
        double v = std::fmod(x[p] + std::numbers::pi, two_pi);
        if (v < 0) v += two_pi;
        x[p] = v - std::numbers::pi;
    }
    return x;
}

Vec PhaseSpace::difference(const Vec& a, const Vec& b) const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Vec d = a - b;
    for (int p : periodic_) d[p] -= two_pi * std::nearbyint(d[p] / two_pi);
    return d;
}

Mat PhaseSpace::ambient_form(const Vec& x) const {
    Mat W = Mat::Zero(dim_, dim_);
    for (const auto& b : form_) {
        if (b.kind == FormBlock::Kind::Pair) {
            W(b.idx[0], b.idx[1]) += b.weight;
            W(b.idx[1], b.idx[0]) -= b.weight;
        } else {
            const int i = b.idx[0], j = b.idx[1], k = b.idx[2];
            // x·(u×v) = x_i (u_j v_k − u_k v_j) + x_j (u_k v_i − u_i v_k) + x_k (u_i v_j − u_j v_i)
            auto add = [&](int r, int c, double v) {
                W(r, c) += b.weight * v;
                W(c, r) -= b.weight * v;
            };
            add(j, k, x[i]);
            add(k, i, x[j]);
            add(i, j, x[k]);
        }
    }
    return W;
}

Mat PhaseSpace::constraint_jacobian(const Vec& x) const {
    Mat C(num_constraints(), dim_);
    for (int r = 0; r < num_constraints(); ++r) C.row(r) = to_vec(constraints_[r].eval_jet2(x)).transpose();
    return C;
}

double PhaseSpace::constraint_residual(const Vec& x) const {
    double r = 0.0;
    for (const auto& c : constraints_) r = std::max(r, std::abs(c.eval(x)));
    return r;
}

LocalFrame local_frame(const PhaseSpace& sp, const Vec& m) {
    LocalFrame f;
    const int n = sp.ambient_dim();
    const int k = sp.num_constraints();
    f.C = sp.constraint_jacobian(m);
    if (k == 0) {
        f.E = Mat::Identity(n, 4);
    } else {
        Eigen::JacobiSVD<Mat> svd(f.C, Eigen::ComputeFullV);
        const auto& s = svd.singularValues();
        if (s[k - 1] <= 1e-10 * std::max(1.0, s[0]))
            throw DegenerateEmbedding("constraint Jacobian is rank deficient (sigma_min = " + std::to_string(s[k - 1]) +
                                      ")");
        f.E = svd.matrixV().rightCols(n - k);
    }
    f.W = f.E.transpose() * sp.ambient_form(m) * f.E;
    return f;
}

Mat tangent_basis(const PhaseSpace& sp, const Vec& m) { return local_frame(sp, m).E; }

namespace {

Vec field_in_frame(const PhaseSpace& sp, const LocalFrame& fr, const Vec& grad_t) {
    const double det = fr.W.determinant();
    if (std::abs(det) <= sp.tol().sympl)
        throw DegenerateEmbedding("restricted 2-form is singular (|det| = " + std::to_string(std::abs(det)) + ")");
    // ω(v, w) = vᵀ W w = df(w) for all w  ⇔  Wᵀ v = grad
    return fr.W.transpose().fullPivLu().solve(grad_t);
}

}  // namespace

Vec hamiltonian_field(const PhaseSpace& sp, const ScalarField& f, const Vec& m) {
    const LocalFrame fr = local_frame(sp, m);
    const Vec g = fr.E.transpose() * to_vec(f.eval_jet2(m));
    return fr.E * field_in_frame(sp, fr, g);
}

double poisson_bracket(const PhaseSpace& sp, const ScalarField& f, const ScalarField& g, const Vec& m) {
    const LocalFrame fr = local_frame(sp, m);
    const Vec xf = field_in_frame(sp, fr, fr.E.transpose() * to_vec(f.eval_jet2(m)));
    const Vec xg = field_in_frame(sp, fr, fr.E.transpose() * to_vec(g.eval_jet2(m)));
    return xf.dot(fr.W * xg);
}

std::vector<Target> constraint_targets(const PhaseSpace& sp) {
    std::vector<Target> t;
    for (const auto& c : sp.constraints()) t.push_back({c, 0.0});
    return t;
}

std::vector<Target> fiber_targets(const SystemDef& sys, double c1, double c2) {
    auto t = constraint_targets(sys.space);
    t.push_back({sys.J, c1});
    t.push_back({sys.H, c2});
    return t;
}

ProjectResult newton_project(const PhaseSpace& sp, const std::vector<Target>& targets, const Vec& x0) {
    const Tolerances& tol = sp.tol();
    const int m = static_cast<int>(targets.size());
    const int n = sp.ambient_dim();
    ProjectResult res;
    res.x = sp.wrap(x0);
    Vec r(m);
    Mat Jm(m, n);

    auto residuals = [&](const Vec& x, Vec& out) -> bool {
        try {
            for (int i = 0; i < m; ++i) out[i] = targets[i].field.eval(x) - targets[i].value;
        } catch (const DomainError&) {
            return false;
        }
        return out.allFinite();
    };

    if (!residuals(res.x, r)) {
        res.status = ProjectResult::Status::NoConvergence;
        res.residual = std::numeric_limits<double>::infinity();
        return res;
    }
    Vec trial_r(m);
    for (res.iterations = 0; res.iterations <= tol.max_iter; ++res.iterations) {
        res.residual = m ? r.cwiseAbs().maxCoeff() : 0.0;
        if (res.residual < tol.constraint) {
            res.status = ProjectResult::Status::Converged;
            return res;
        }
        if (res.iterations == tol.max_iter) break;
        try {
            for (int i = 0; i < m; ++i) Jm.row(i) = to_vec(targets[i].field.eval_jet2(res.x)).transpose();
        } catch (const DomainError&) {
            break;
        }
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(Jm);
        cod.setThreshold(1e-13);
        const Vec step = cod.solve(r);
        const double rnorm = r.norm();
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= tol.max_halvings; ++h, t *= 0.5) {
            Vec trial = sp.wrap(res.x - t * step);
            if (residuals(trial, trial_r) && trial_r.norm() < rnorm) {
                res.x = std::move(trial);
                r = trial_r;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.status = cod.rank() < std::min(m, n) ? ProjectResult::Status::RankCollapse
                                                     : ProjectResult::Status::NoConvergence;
            return res;
        }
    }
    res.status = ProjectResult::Status::NoConvergence;
    return res;
}

TangentJet tangent_jet(const PhaseSpace& sp, const ScalarField& f, const Vec& m, const LocalFrame& frame) {
    const Jet2 jf = f.eval_jet2(m);
    const Vec g = to_vec(jf);
    Mat hess = jf.hessian();
    TangentJet out;
    out.value = jf.value();
    const int k = sp.num_constraints();
    if (k > 0) {
        out.multipliers = frame.C.transpose().colPivHouseholderQr().solve(g);
        for (int i = 0; i < k; ++i) hess -= out.multipliers[i] * sp.constraints()[i].eval_jet2(m).hessian();
    } else {
        out.multipliers = Vec();
    }
    out.grad = frame.E.transpose() * g;
    out.hess = frame.E.transpose() * hess * frame.E;
    out.hess = 0.5 * (out.hess + out.hess.transpose()).eval();
    return out;
}

PointCheck check_point(const SystemDef& sys, const Vec& m) {
    PointCheck pc;
    const auto& sp = sys.space;
    if (sp.num_constraints() > 0) {
        Eigen::JacobiSVD<Mat> svd(sp.constraint_jacobian(m));
        const auto& s = svd.singularValues();
        for (int i = 0; i < s.size(); ++i)
            if (s[i] > 1e-10 * std::max(1.0, s[0])) ++pc.constraint_rank;
    }
    const LocalFrame fr = local_frame(sp, m);
    pc.form_det = fr.W.determinant();
    pc.bracket = poisson_bracket(sp, sys.J, sys.H, m);
    pc.bracket_scale = 1.0 + to_vec(sys.J.eval_jet2(m)).norm() * to_vec(sys.H.eval_jet2(m)).norm();
    return pc;
}

}  // namespace liouville
