#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "liouville/phase_space.hpp"
#include "liouville/plane.hpp"
#include "liouville/singular.hpp"

namespace liouville {

/// Where a reference value comes from.
///   Analytic      closed form or hand computation
///   NumericOracle frozen output of an independent numerical computation
///   Convention    depends on a normalisation chosen by the catalog
enum class Origin { Analytic, NumericOracle, Convention };
std::string to_string(Origin o);

template <class T>
struct Tagged {
    T value{};
    Origin origin = Origin::Analytic;
};

struct ReferencePoint {
    std::string label;
    Vec point;  // ambient coordinates, empty if not pinned
    Point2 image = Point2::Zero();
    WilliamsonType wtype = WilliamsonType::Unresolved;
    Origin origin = Origin::Analytic;
};

struct ReferenceFiber {
    Point2 value = Point2::Zero();
    int components = 1;
    Origin origin = Origin::Analytic;
};

struct ReferenceData {
    std::vector<ReferencePoint> rank0;
    std::optional<Tagged<bool>> almost_toric;
    std::optional<Tagged<int>> vertical_tangencies;  // after the default g
    std::vector<ReferenceFiber> fibers;
    std::optional<Tagged<std::string>> verdict;
};

/// Pipeline settings a catalog entry recommends.
struct RunDefaults {
    Box2 image_box;
    Grid1 j_grid;
    DiffeoSpec g;
    std::optional<ConeSpec> cone;
    bool compact = false;
    bool finite_interior_critical_values = true;
    std::string morse_f = "v1";
    int seeds = 1500;
    int fiber_budget = 1500;
};

using Params = std::map<std::string, double>;

struct CatalogEntry {
    std::string name;
    std::string description;
    Params params;  // accepted parameters with their defaults
    std::function<SystemDef(const Params&)> build;
    std::function<RunDefaults(const Params&)> defaults;
    std::function<ReferenceData(const Params&)> reference;
};

const std::vector<CatalogEntry>& catalog();
const CatalogEntry& catalog_entry(const std::string& name);

/// Builds a catalog system; unknown parameter names and invalid values throw
/// std::invalid_argument.
SystemDef build(const std::string& name, const Params& params = {});
RunDefaults run_defaults(const std::string& name, const Params& params = {});
ReferenceData reference_data(const std::string& name, const Params& params = {});

/// Magnitude |j| of the spherical-pendulum critical curve at energy h ≥ -1.
double reference_curve(double h);

/// Point (j, h) of the spherical-pendulum critical curve at parameter λ ∈ (0, 1].
Point2 pendulum_curve(double lambda);

/// Image-plane fixture: a closed immersed curve with one self-overlap,
/// standing in for the overlapping image built from S²×S².
std::vector<Point2> overlap_fixture(int samples = 400);

}  // namespace liouville
