#pragma once

#include <cstdint>
#include <vector>

#include "svox/types.hpp"

namespace svox {

/// Exact nearest-neighbor reference by full scan. The correctness oracle for
/// every other structure; keep it obvious.
class BruteForceIndex {
public:
    void insert(const Point3& p) { points_.push_back(p); }
    void insert(const PointCloud& pts) { points_.insert(points_.end(), pts.begin(), pts.end()); }

    /// Exact k nearest by Euclidean distance, ties broken by insertion order.
    std::vector<Neighbor> knn(const Point3& query, int k) const;

    std::size_t size() const { return points_.size(); }
    const PointCloud& points() const { return points_; }

private:
    PointCloud points_;
};

/// Incremental KD-tree with axis-cycling splits and rebuild-on-imbalance.
/// knn() agrees exactly with BruteForceIndex (same distance kernel, same
/// (distance, insertion order) tie-break).
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(const PointCloud& points) { build(points); }

    void build(const PointCloud& points);

    /// Inserts one point. If any subtree on the insertion path ends up with a
    /// child holding more than `alpha` of its size, the highest such subtree
    /// is rebuilt balanced.
    void insert(const Point3& p);
    void insert(const PointCloud& pts);

    std::vector<Neighbor> knn(const Point3& query, int k) const;

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    int rebuildCount() const { return rebuild_count_; }

    /// All stored points (traversal order unspecified).
    PointCloud points() const;

    static constexpr double kAlpha = 0.7;

private:
    static constexpr std::int32_t kNil = -1;

    struct Node {
        Point3 point;
        std::uint64_t seq = 0;
        std::int32_t left = kNil;
        std::int32_t right = kNil;
        std::int32_t count = 1;  // subtree size
    };

    struct Item {
        Point3 point;
        std::uint64_t seq;
    };

    struct Candidate {
        double dist_sq;
        std::uint64_t seq;
        const Node* node;
    };

    std::int32_t buildRange(std::vector<Item>& items, std::vector<std::int32_t>& slots,
                            std::int32_t lo, std::int32_t hi, int depth);
    void collect(std::int32_t node, std::vector<Item>& items,
                 std::vector<std::int32_t>& slots) const;
    void knnRecurse(std::int32_t node, int depth, const Point3& query, std::size_t k,
                    std::vector<Candidate>& best) const;

    std::vector<Node> nodes_;
    std::int32_t root_ = kNil;
    std::uint64_t next_seq_ = 0;
    std::size_t size_ = 0;
    int rebuild_count_ = 0;
};

}  // namespace svox
