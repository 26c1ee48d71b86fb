#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <vector>

namespace svox {

using Point3 = Eigen::Vector3d;
using PointCloud = std::vector<Point3>;

inline bool isFinite(const Point3& p) {
    return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Shared squared-distance kernel. Every nearest-neighbor structure in this
/// project must use this exact expression so that distance ties resolve
/// identically across implementations.
inline double squaredDistance(const Point3& a, const Point3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

/// Integer grid coordinate of a voxel.
struct VoxelKey {
    std::int64_t i = 0;
    std::int64_t j = 0;
    std::int64_t k = 0;

    bool operator==(const VoxelKey&) const = default;

    // Lexicographic order, handy for ordered containers in tests and tools.
    auto operator<=>(const VoxelKey&) const = default;
};

/// A neighbor returned from a nearest-neighbor query.
struct Neighbor {
    Point3 point;
    double distance = 0.0;  // Euclidean, meters
};

}  // namespace svox
