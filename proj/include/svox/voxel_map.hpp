#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "svox/types.hpp"

namespace svox {

/// How points are ordered inside a voxel.
enum class StorageMode {
    kLinear,  // arrival order
    kCurved,  // sorted by intra-voxel space-filling-curve (Morton) index
};

struct SVoxelConfig {
    double voxel_size = 0.5;            // meters, > 0
    int neighbor_range = 1;             // Chebyshev search radius in voxels, >= 0
    int k_default = 5;                  // default k for tools that do not set one
    int max_points_per_voxel = 20;      // hard cap, drop-newest
    std::size_t capacity = 100000;      // max live voxels before LRU eviction
    std::array<std::uint64_t, 3> hash_primes{73856093ULL, 19349663ULL, 83492791ULL};
    std::uint64_t table_size = 1ULL << 20;  // hash buckets
    StorageMode storage_mode = StorageMode::kLinear;
    int morton_bits_per_axis = 6;

    /// Throws std::invalid_argument on any violated constraint.
    void validate() const;
};

/// Grid coordinate of the voxel containing p. Floor division, so negative
/// coordinates round toward -inf. Throws std::invalid_argument for
/// non-finite points or s <= 0.
VoxelKey voxelKey(const Point3& p, double voxel_size);

/// Bucket index: ((i*nx) XOR (j*ny) XOR (k*nz)) mod N in wrapping 64-bit
/// unsigned arithmetic, signed keys reinterpreted as two's complement.
std::uint64_t hashKey(const VoxelKey& key, const std::array<std::uint64_t, 3>& primes,
                      std::uint64_t table_size);

/// Intra-voxel z-order index: the offset of p inside the voxel is quantized
/// to bits_per_axis bits per axis and bit-interleaved, x in the lowest lane.
/// p must lie inside the voxel's closed cube; throws otherwise.
std::uint32_t mortonIndex(const Point3& p, const VoxelKey& voxel, double voxel_size,
                          int bits_per_axis);

struct InsertReport {
    std::size_t inserted = 0;            // points stored
    std::size_t capped = 0;              // dropped at a full voxel
    std::size_t rejected = 0;            // non-finite, skipped
    std::vector<VoxelKey> evicted;       // voxels LRU-evicted, in eviction order
};

/// Sparse voxel hash map over 3D points with bounded approximate KNN.
///
/// Voxels live in a fixed-size bucket table with per-bucket collision chains
/// resolved by exact key comparison. Queries only visit voxels within
/// `neighbor_range` (Chebyshev) of the query's voxel; exactness is guaranteed
/// relative to that neighborhood, which is the intended tradeoff. Touched
/// voxels carry a monotone LRU stamp; once the live-voxel count exceeds
/// `capacity` the least recently touched voxels are dropped whole.
///
/// Threading: insert/evict require exclusive access. knnCollect is const and
/// stateless; concurrent readers that want stamping call knnCollect and hand
/// the collected slots to touch(), which bumps stamps through atomics so
/// stamps never decrease under concurrent use.
class SVoxelMap {
public:
    struct StoredPoint {
        Point3 position;
        std::uint64_t seq = 0;      // global arrival number, tie-break for equal distances
        std::uint32_t morton = 0;   // intra-voxel curve index (curved mode)
    };

    SVoxelMap() : SVoxelMap(SVoxelConfig{}) {}
    explicit SVoxelMap(const SVoxelConfig& config);

    const SVoxelConfig& config() const { return config_; }

    /// Batch insert. Non-finite points are rejected (batch continues); points
    /// arriving at a full voxel are dropped and counted as capped. Runs LRU
    /// eviction afterwards so the capacity bound holds on return.
    InsertReport insert(const PointCloud& points);
    InsertReport insert(const Point3& point);

    /// Up to k nearest stored points within max_range, ascending by
    /// (distance, insertion order). Refreshes LRU stamps of visited voxels.
    std::vector<Neighbor> knn(const Point3& query, int k, double max_range);

    /// Read-only KNN: identical result, but instead of stamping it records the
    /// visited voxel slots so the caller can apply touch() later in a
    /// deterministic order.
    std::vector<Neighbor> knnCollect(const Point3& query, int k, double max_range,
                                     std::vector<std::uint32_t>& touched) const;

    /// All stored points with distance <= radius, same neighborhood
    /// restriction as knn, ascending by (distance, insertion order).
    std::vector<Neighbor> rangeSearch(const Point3& query, double radius);

    /// Refresh LRU stamps of the given voxel slots, in order. Safe under
    /// concurrent readers; stamps never decrease.
    void touch(std::span<const std::uint32_t> slots);

    /// Evict least-recently-used voxels until live count <= capacity.
    /// Returns the evicted keys in eviction order.
    std::vector<VoxelKey> evictLru();

    std::size_t voxelCount() const { return live_voxels_; }
    std::size_t pointCount() const { return point_count_; }
    bool empty() const { return live_voxels_ == 0; }

    bool hasVoxel(const VoxelKey& key) const;

    /// Stored points of one voxel in storage order (empty if absent).
    std::vector<StoredPoint> voxelPoints(const VoxelKey& key) const;

    /// Visits every live voxel in deterministic order (bucket ascending, then
    /// chain order). Serialization and exports rely on this order.
    void visitVoxels(
        const std::function<void(const VoxelKey&, std::span<const StoredPoint>)>& fn) const;

    PointCloud allPoints() const;

    /// Snapshot restore path: places points verbatim into the given voxel,
    /// bypassing key recomputation (float-rounded snapshots may sit exactly on
    /// voxel boundaries). The voxel must not exist yet.
    void restoreVoxel(const VoxelKey& key, const PointCloud& points);

private:
    static constexpr std::uint32_t kNil = 0xFFFFFFFFu;

    struct Voxel {
        VoxelKey key;
        std::vector<StoredPoint> points;
        std::uint64_t lru_stamp = 0;
        std::uint32_t next = kNil;  // collision chain
        bool live = false;
    };

    std::uint32_t findSlot(const VoxelKey& key) const;
    std::uint32_t getOrCreate(const VoxelKey& key);
    void unlinkAndFree(std::uint32_t slot);
    void stampSlot(std::uint32_t slot);

    SVoxelConfig config_;
    std::vector<std::uint32_t> bucket_head_;
    std::vector<Voxel> slots_;
    std::vector<std::uint32_t> free_slots_;
    std::uint64_t lru_clock_ = 0;
    std::uint64_t insert_seq_ = 0;
    std::size_t live_voxels_ = 0;
    std::size_t point_count_ = 0;
};

}  // namespace svox
