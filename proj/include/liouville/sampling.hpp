#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "liouville/phase_space.hpp"

namespace liouville {

/// Uniform double in [0, 1) from a 64-bit engine; independent of the
/// standard library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Randomly shifted Halton sequence (Cranley–Patterson rotation keyed by the
/// seed). Deterministic for a given (dim, seed).
class QuasiRandom {
public:
    QuasiRandom(int dim, std::uint64_t seed);

    /// Point with the given index in [0, 1)^dim.
    Vec unit_point(std::uint64_t index) const;
    /// Point mapped into the box.
    Vec point(std::uint64_t index, const std::vector<Interval>& box) const;

    int dim() const noexcept { return static_cast<int>(shift_.size()); }

private:
    std::vector<double> shift_;
};

/// `count` quasi-random points of the seed box.
std::vector<Vec> seed_points(const PhaseSpace& sp, int count, std::uint64_t seed, std::uint64_t offset = 0);

/// Seeds projected onto the constraint set; seeds that fail to converge are skipped.
std::vector<Vec> feasible_points(const PhaseSpace& sp, int count, std::uint64_t seed, std::uint64_t offset = 0);

}  // namespace liouville
