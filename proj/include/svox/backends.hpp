#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "svox/baseline.hpp"
#include "svox/types.hpp"
#include "svox/voxel_map.hpp"

namespace svox {

/// Read path shared by registration and the pipeline: a nearest-neighbor
/// query that defers LRU stamping so parallel callers can replay touches in a
/// deterministic order.
class NeighborSearch {
public:
    virtual ~NeighborSearch() = default;

    virtual std::vector<Neighbor> knnCollect(const Point3& query, int k, double max_range,
                                             std::vector<std::uint32_t>& touched) const = 0;

    /// Applies deferred LRU touches; a no-op for structures without eviction.
    virtual void touch(std::span<const std::uint32_t> slots) = 0;
};

enum class BackendKind { kSVoxelLinear, kSVoxelCurved, kKdTree, kBruteForce };

std::string_view backendName(BackendKind kind);
BackendKind backendFromName(std::string_view name);  // throws on unknown name

/// A full odometry map: the NeighborSearch read path plus incremental insert.
class MapBackend : public NeighborSearch {
public:
    virtual InsertReport insert(const PointCloud& points) = 0;
    virtual std::size_t pointCount() const = 0;
    virtual PointCloud allPoints() const = 0;
    virtual std::string_view name() const = 0;
};

class SVoxelBackend final : public MapBackend {
public:
    explicit SVoxelBackend(const SVoxelConfig& config) : map_(config) {}

    std::vector<Neighbor> knnCollect(const Point3& query, int k, double max_range,
                                     std::vector<std::uint32_t>& touched) const override {
        return map_.knnCollect(query, k, max_range, touched);
    }
    void touch(std::span<const std::uint32_t> slots) override { map_.touch(slots); }
    InsertReport insert(const PointCloud& points) override { return map_.insert(points); }
    std::size_t pointCount() const override { return map_.pointCount(); }
    PointCloud allPoints() const override { return map_.allPoints(); }
    std::string_view name() const override {
        return map_.config().storage_mode == StorageMode::kCurved ? "svoxel-curved"
                                                                  : "svoxel-linear";
    }

    SVoxelMap& map() { return map_; }
    const SVoxelMap& map() const { return map_; }

private:
    SVoxelMap map_;
};

/// Non-owning NeighborSearch view over an existing SVoxelMap.
class SVoxelMapView final : public NeighborSearch {
public:
    explicit SVoxelMapView(SVoxelMap& map) : map_(map) {}

    std::vector<Neighbor> knnCollect(const Point3& query, int k, double max_range,
                                     std::vector<std::uint32_t>& touched) const override {
        return map_.knnCollect(query, k, max_range, touched);
    }
    void touch(std::span<const std::uint32_t> slots) override { map_.touch(slots); }

private:
    SVoxelMap& map_;
};

class KdTreeBackend final : public MapBackend {
public:
    /// With rebuild_per_frame the tree is rebuilt from scratch on every
    /// insert batch instead of inserting incrementally.
    explicit KdTreeBackend(bool rebuild_per_frame = false)
        : rebuild_per_frame_(rebuild_per_frame) {}

    std::vector<Neighbor> knnCollect(const Point3& query, int k, double max_range,
                                     std::vector<std::uint32_t>& touched) const override;
    void touch(std::span<const std::uint32_t>) override {}
    InsertReport insert(const PointCloud& points) override;
    std::size_t pointCount() const override { return tree_.size(); }
    PointCloud allPoints() const override { return tree_.points(); }
    std::string_view name() const override {
        return rebuild_per_frame_ ? "kdtree-rebuild" : "kdtree";
    }

    const KdTree& tree() const { return tree_; }

private:
    KdTree tree_;
    PointCloud accumulated_;  // only kept in rebuild mode
    bool rebuild_per_frame_;
};

class BruteForceBackend final : public MapBackend {
public:
    std::vector<Neighbor> knnCollect(const Point3& query, int k, double max_range,
                                     std::vector<std::uint32_t>& touched) const override;
    void touch(std::span<const std::uint32_t>) override {}
    InsertReport insert(const PointCloud& points) override;
    std::size_t pointCount() const override { return index_.size(); }
    PointCloud allPoints() const override { return index_.points(); }
    std::string_view name() const override { return "bruteforce"; }

private:
    BruteForceIndex index_;
};

std::unique_ptr<MapBackend> makeBackend(BackendKind kind, const SVoxelConfig& voxel_config,
                                        bool kdtree_rebuild_per_frame = false);

}  // namespace svox
