#include "liouville/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace liouville {

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                           59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

}  // namespace

QuasiRandom::QuasiRandom(int dim, std::uint64_t seed) {
    if (dim < 1 || dim > static_cast<int>(std::size(kPrimes)))
        throw std::invalid_argument("QuasiRandom: unsupported dimension " + std::to_string(dim));
    std::mt19937_64 rng(seed);
    shift_.resize(dim);
    for (double& s : shift_) s = unit_uniform(rng);
}

Vec QuasiRandom::unit_point(std::uint64_t index) const {
    Vec u(dim());
    for (int d = 0; d < dim(); ++d) {
        double v = radical_inverse(index + 1, kPrimes[d]) + shift_[d];
        u[d] = v - std::floor(v);
    }
    return u;
}

Vec QuasiRandom::point(std::uint64_t index, const std::vector<Interval>& box) const {
    Vec u = unit_point(index);
    for (int d = 0; d < dim(); ++d) u[d] = box[d].lo + u[d] * (box[d].hi - box[d].lo);
    return u;
}

std::vector<Vec> seed_points(const PhaseSpace& sp, int count, std::uint64_t seed, std::uint64_t offset) {
    QuasiRandom qr(sp.ambient_dim(), seed);
    std::vector<Vec> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(qr.point(offset + i, sp.seed_box()));
    return out;
}

std::vector<Vec> feasible_points(const PhaseSpace& sp, int count, std::uint64_t seed, std::uint64_t offset) {
    const auto targets = constraint_targets(sp);
    std::vector<Vec> out;
    out.reserve(count);
    for (const Vec& s : seed_points(sp, count, seed, offset)) {
        auto r = newton_project(sp, targets, s);
        if (r.ok()) out.push_back(std::move(r.x));
    }
    return out;
}

}  // namespace liouville
