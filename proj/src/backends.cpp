#include "svox/backends.hpp"

#include <stdexcept>

namespace svox {

std::string_view backendName(BackendKind kind) {
    switch (kind) {
        case BackendKind::kSVoxelLinear: return "svoxel-linear";
        case BackendKind::kSVoxelCurved: return "svoxel-curved";
        case BackendKind::kKdTree: return "kdtree";
        case BackendKind::kBruteForce: return "bruteforce";
    }
    return "unknown";
}

BackendKind backendFromName(std::string_view name) {
    if (name == "svoxel-linear") return BackendKind::kSVoxelLinear;
    if (name == "svoxel-curved") return BackendKind::kSVoxelCurved;
    if (name == "kdtree") return BackendKind::kKdTree;
    if (name == "bruteforce") return BackendKind::kBruteForce;
    throw std::invalid_argument("unknown backend: " + std::string(name));
}

namespace {

std::vector<Neighbor> clipRange(std::vector<Neighbor> neighbors, double max_range) {
    while (!neighbors.empty() && neighbors.back().distance > max_range) neighbors.pop_back();
    return neighbors;
}

}  // namespace

std::vector<Neighbor> KdTreeBackend::knnCollect(const Point3& query, int k, double max_range,
                                                std::vector<std::uint32_t>& touched) const {
    touched.clear();
    return clipRange(tree_.knn(query, k), max_range);
}

InsertReport KdTreeBackend::insert(const PointCloud& points) {
    InsertReport report;
    if (rebuild_per_frame_) {
        for (const Point3& p : points) {
            if (!isFinite(p)) {
                ++report.rejected;
                continue;
            }
            accumulated_.push_back(p);
            ++report.inserted;
        }
        tree_.build(accumulated_);
        return report;
    }
    for (const Point3& p : points) {
        if (!isFinite(p)) {
            ++report.rejected;
            continue;
        }
        tree_.insert(p);
        ++report.inserted;
    }
    return report;
}

std::vector<Neighbor> BruteForceBackend::knnCollect(const Point3& query, int k, double max_range,
                                                    std::vector<std::uint32_t>& touched) const {
    touched.clear();
    return clipRange(index_.knn(query, k), max_range);
}

InsertReport BruteForceBackend::insert(const PointCloud& points) {
    InsertReport report;
    for (const Point3& p : points) {
        if (!isFinite(p)) {
            ++report.rejected;
            continue;
        }
        index_.insert(p);
        ++report.inserted;
    }
    return report;
}

std::unique_ptr<MapBackend> makeBackend(BackendKind kind, const SVoxelConfig& voxel_config,
                                        bool kdtree_rebuild_per_frame) {
    switch (kind) {
        case BackendKind::kSVoxelLinear: {
            SVoxelConfig cfg = voxel_config;
            cfg.storage_mode = StorageMode::kLinear;
            return std::make_unique<SVoxelBackend>(cfg);
        }
        case BackendKind::kSVoxelCurved: {
            SVoxelConfig cfg = voxel_config;
            cfg.storage_mode = StorageMode::kCurved;
            return std::make_unique<SVoxelBackend>(cfg);
        }
        case BackendKind::kKdTree:
            return std::make_unique<KdTreeBackend>(kdtree_rebuild_per_frame);
        case BackendKind::kBruteForce:
            return std::make_unique<BruteForceBackend>();
    }
    throw std::logic_error("unreachable backend kind");
}

}  // namespace svox
