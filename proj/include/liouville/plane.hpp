#pragma once

// Small value types for the (J, H) image plane.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace liouville {

using Point2 = Eigen::Vector2d;

struct Box2 {
    double xlo = -1.0, xhi = 1.0, ylo = -1.0, yhi = 1.0;

    bool contains(const Point2& p, double pad = 0.0) const {
        return p.x() >= xlo - pad && p.x() <= xhi + pad && p.y() >= ylo - pad && p.y() <= yhi + pad;
    }
};

/// Uniform grid lo, lo + step, ..., up to hi (inclusive within rounding).
struct Grid1 {
    double lo = -1.0, hi = 1.0, step = 0.1;

    std::vector<double> points() const {
        std::vector<double> out;
        if (!(step > 0.0) || hi < lo) return out;
        const long count = std::lround(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (long i = 0; i < count; ++i) out.push_back(lo + static_cast<double>(i) * step);
        return out;
    }
};

/// Text form of a plane map g(x, y) over variables v1 = x, v2 = y.
struct DiffeoSpec {
    std::string gx = "v1";
    std::string gy = "v2";
    std::optional<std::string> inv_x;
    std::optional<std::string> inv_y;
};

/// Rays from `vertex` whose angle from the +x axis lies in [-alpha, beta].
struct ConeSpec {
    double alpha = 0.0;
    double beta = 0.0;
    Point2 vertex = Point2::Zero();
};

}  // namespace liouville
