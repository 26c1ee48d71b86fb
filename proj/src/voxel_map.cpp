#include "svox/voxel_map.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace svox {

void SVoxelConfig::validate() const {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be > 0");
    if (neighbor_range < 0) throw std::invalid_argument("neighbor_range must be >= 0");
    if (k_default < 1) throw std::invalid_argument("k_default must be >= 1");
    if (max_points_per_voxel < 1) throw std::invalid_argument("max_points_per_voxel must be >= 1");
    if (capacity < 1) throw std::invalid_argument("capacity must be >= 1");
    if (table_size < 1) throw std::invalid_argument("table_size must be >= 1");
    for (auto p : hash_primes) {
        if (p == 0 || p % 2 == 0) throw std::invalid_argument("hash primes must be odd");
    }
    if (morton_bits_per_axis < 1 || morton_bits_per_axis > 10) {
        throw std::invalid_argument("morton_bits_per_axis must be in [1, 10]");
    }
}

VoxelKey voxelKey(const Point3& p, double voxel_size) {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be > 0");
    if (!isFinite(p)) throw std::invalid_argument("non-finite point");
    return VoxelKey{static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
                    static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
                    static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
}

std::uint64_t hashKey(const VoxelKey& key, const std::array<std::uint64_t, 3>& primes,
                      std::uint64_t table_size) {
    const std::uint64_t hx = static_cast<std::uint64_t>(key.i) * primes[0];
    const std::uint64_t hy = static_cast<std::uint64_t>(key.j) * primes[1];
    const std::uint64_t hz = static_cast<std::uint64_t>(key.k) * primes[2];
    return (hx ^ hy ^ hz) % table_size;
}

std::uint32_t mortonIndex(const Point3& p, const VoxelKey& voxel, double voxel_size,
                          int bits_per_axis) {
    const std::uint32_t cells = 1u << bits_per_axis;
    std::uint32_t q[3];
    const double mins[3] = {static_cast<double>(voxel.i) * voxel_size,
                            static_cast<double>(voxel.j) * voxel_size,
                            static_cast<double>(voxel.k) * voxel_size};
    const double coords[3] = {p.x(), p.y(), p.z()};
    for (int a = 0; a < 3; ++a) {
        const double offset = (coords[a] - mins[a]) / voxel_size;
        if (!(offset >= 0.0 && offset <= 1.0)) {
            throw std::invalid_argument("point outside voxel cube");
        }
        const auto cell = static_cast<std::uint32_t>(offset * cells);
        q[a] = std::min(cell, cells - 1);  // closed upper face maps to the last cell
    }
    std::uint32_t code = 0;
    for (int bit = 0; bit < bits_per_axis; ++bit) {
        for (int a = 0; a < 3; ++a) {
            code |= ((q[a] >> bit) & 1u) << (3 * bit + a);
        }
    }
    return code;
}

SVoxelMap::SVoxelMap(const SVoxelConfig& config) : config_(config) {
    config_.validate();
    bucket_head_.assign(config_.table_size, kNil);
}

std::uint32_t SVoxelMap::findSlot(const VoxelKey& key) const {
    const std::uint64_t bucket = hashKey(key, config_.hash_primes, config_.table_size);
    for (std::uint32_t s = bucket_head_[bucket]; s != kNil; s = slots_[s].next) {
        if (slots_[s].key == key) return s;
    }
    return kNil;
}

std::uint32_t SVoxelMap::getOrCreate(const VoxelKey& key) {
    const std::uint64_t bucket = hashKey(key, config_.hash_primes, config_.table_size);
    std::uint32_t tail = kNil;
    for (std::uint32_t s = bucket_head_[bucket]; s != kNil; s = slots_[s].next) {
        if (slots_[s].key == key) return s;
        tail = s;
    }
    std::uint32_t slot;
    if (!free_slots_.empty()) {
        slot = free_slots_.back();
        free_slots_.pop_back();
    } else {
        slot = static_cast<std::uint32_t>(slots_.size());
        slots_.emplace_back();
    }
    Voxel& v = slots_[slot];
    v.key = key;
    v.points.clear();
    v.lru_stamp = 0;
    v.next = kNil;
    v.live = true;
    // Append at the chain tail so that voxel visit order equals creation
    // order within a bucket; snapshot round-trips depend on this.
    if (tail == kNil) {
        bucket_head_[bucket] = slot;
    } else {
        slots_[tail].next = slot;
    }
    ++live_voxels_;
    return slot;
}

void SVoxelMap::unlinkAndFree(std::uint32_t slot) {
    Voxel& v = slots_[slot];
    const std::uint64_t bucket = hashKey(v.key, config_.hash_primes, config_.table_size);
    std::uint32_t prev = kNil;
    for (std::uint32_t s = bucket_head_[bucket]; s != kNil; prev = s, s = slots_[s].next) {
        if (s == slot) {
            if (prev == kNil) {
                bucket_head_[bucket] = v.next;
            } else {
                slots_[prev].next = v.next;
            }
            break;
        }
    }
    point_count_ -= v.points.size();
    v.points.clear();
    v.live = false;
    v.next = kNil;
    --live_voxels_;
    free_slots_.push_back(slot);
}

void SVoxelMap::stampSlot(std::uint32_t slot) {
    std::atomic_ref<std::uint64_t> clock(lru_clock_);
    const std::uint64_t ticket = clock.fetch_add(1, std::memory_order_relaxed) + 1;
    std::atomic_ref<std::uint64_t> stamp(slots_[slot].lru_stamp);
    std::uint64_t cur = stamp.load(std::memory_order_relaxed);
    while (cur < ticket &&
           !stamp.compare_exchange_weak(cur, ticket, std::memory_order_relaxed)) {
    }
}

void SVoxelMap::touch(std::span<const std::uint32_t> slots) {
    for (std::uint32_t s : slots) stampSlot(s);
}

InsertReport SVoxelMap::insert(const Point3& point) {
    return insert(PointCloud{point});
}

InsertReport SVoxelMap::insert(const PointCloud& points) {
    InsertReport report;
    const bool curved = config_.storage_mode == StorageMode::kCurved;
    for (const Point3& p : points) {
        if (!isFinite(p)) {
            ++report.rejected;
            continue;
        }
        const VoxelKey key = voxelKey(p, config_.voxel_size);
        const std::uint32_t slot = getOrCreate(key);
        stampSlot(slot);
        Voxel& v = slots_[slot];
        if (v.points.size() >= static_cast<std::size_t>(config_.max_points_per_voxel)) {
            ++report.capped;
            continue;
        }
        StoredPoint sp{p, insert_seq_++, 0};
        if (curved) {
            sp.morton = mortonIndex(p, key, config_.voxel_size, config_.morton_bits_per_axis);
            auto it = std::upper_bound(
                v.points.begin(), v.points.end(), sp.morton,
                [](std::uint32_t m, const StoredPoint& s) { return m < s.morton; });
            v.points.insert(it, sp);
        } else {
            v.points.push_back(sp);
        }
        ++report.inserted;
        ++point_count_;
    }
    report.evicted = evictLru();
    return report;
}

std::vector<VoxelKey> SVoxelMap::evictLru() {
    std::vector<VoxelKey> evicted;
    if (live_voxels_ <= config_.capacity) return evicted;
    const std::size_t overflow = live_voxels_ - config_.capacity;

    std::vector<std::pair<std::uint64_t, std::uint32_t>> order;  // (stamp, slot)
    order.reserve(live_voxels_);
    for (std::uint32_t s = 0; s < slots_.size(); ++s) {
        if (slots_[s].live) order.emplace_back(slots_[s].lru_stamp, s);
    }
    std::nth_element(order.begin(), order.begin() + overflow - 1, order.end());
    order.resize(overflow);
    std::sort(order.begin(), order.end());

    evicted.reserve(overflow);
    for (const auto& [stamp, slot] : order) {
        evicted.push_back(slots_[slot].key);
        unlinkAndFree(slot);
    }
    return evicted;
}

namespace {

struct Candidate {
    double dist_sq;
    std::uint64_t seq;
    const SVoxelMap::StoredPoint* point;

    bool operator<(const Candidate& o) const {
        return dist_sq != o.dist_sq ? dist_sq < o.dist_sq : seq < o.seq;
    }
};

}  // namespace

std::vector<Neighbor> SVoxelMap::knnCollect(const Point3& query, int k, double max_range,
                                            std::vector<std::uint32_t>& touched) const {
    touched.clear();
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (!(max_range > 0.0)) throw std::invalid_argument("max_range must be > 0");
    std::vector<Neighbor> result;
    if (live_voxels_ == 0) return result;

    const VoxelKey center = voxelKey(query, config_.voxel_size);
    const int r = config_.neighbor_range;
    const double max_sq =
        std::isinf(max_range) ? std::numeric_limits<double>::infinity() : max_range * max_range;

    std::vector<Candidate> merged;
    std::vector<Candidate> local;
    for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) {
            for (int dk = -r; dk <= r; ++dk) {
                const VoxelKey key{center.i + di, center.j + dj, center.k + dk};
                const std::uint32_t slot = findSlot(key);
                if (slot == kNil) continue;
                touched.push_back(slot);
                // Per-voxel top-k, then merge.
                const Voxel& v = slots_[slot];
                local.clear();
                for (const StoredPoint& sp : v.points) {
                    local.push_back({squaredDistance(query, sp.position), sp.seq, &sp});
                }
                if (local.size() > static_cast<std::size_t>(k)) {
                    std::partial_sort(local.begin(), local.begin() + k, local.end());
                    local.resize(k);
                }
                merged.insert(merged.end(), local.begin(), local.end());
            }
        }
    }

    const std::size_t keep = std::min<std::size_t>(k, merged.size());
    std::partial_sort(merged.begin(), merged.begin() + keep, merged.end());
    merged.resize(keep);
    result.reserve(keep);
    for (const Candidate& c : merged) {
        if (c.dist_sq > max_sq) break;
        result.push_back({c.point->position, std::sqrt(c.dist_sq)});
    }
    return result;
}

std::vector<Neighbor> SVoxelMap::knn(const Point3& query, int k, double max_range) {
    std::vector<std::uint32_t> touched;
    auto result = knnCollect(query, k, max_range, touched);
    touch(touched);
    return result;
}

std::vector<Neighbor> SVoxelMap::rangeSearch(const Point3& query, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be > 0");
    std::vector<Neighbor> result;
    if (live_voxels_ == 0) return result;

    const VoxelKey center = voxelKey(query, config_.voxel_size);
    const int r = config_.neighbor_range;
    const double rad_sq = radius * radius;

    std::vector<Candidate> found;
    for (int di = -r; di <= r; ++di) {
        for (int dj = -r; dj <= r; ++dj) {
            for (int dk = -r; dk <= r; ++dk) {
                const VoxelKey key{center.i + di, center.j + dj, center.k + dk};
                const std::uint32_t slot = findSlot(key);
                if (slot == kNil) continue;
                stampSlot(slot);
                for (const StoredPoint& sp : slots_[slot].points) {
                    const double d2 = squaredDistance(query, sp.position);
                    if (d2 <= rad_sq) found.push_back({d2, sp.seq, &sp});
                }
            }
        }
    }
    std::sort(found.begin(), found.end());
    result.reserve(found.size());
    for (const Candidate& c : found) {
        result.push_back({c.point->position, std::sqrt(c.dist_sq)});
    }
    return result;
}

bool SVoxelMap::hasVoxel(const VoxelKey& key) const { return findSlot(key) != kNil; }

std::vector<SVoxelMap::StoredPoint> SVoxelMap::voxelPoints(const VoxelKey& key) const {
    const std::uint32_t slot = findSlot(key);
    if (slot == kNil) return {};
    return slots_[slot].points;
}

void SVoxelMap::visitVoxels(
    const std::function<void(const VoxelKey&, std::span<const StoredPoint>)>& fn) const {
    for (std::uint64_t b = 0; b < config_.table_size; ++b) {
        for (std::uint32_t s = bucket_head_[b]; s != kNil; s = slots_[s].next) {
            fn(slots_[s].key, std::span<const StoredPoint>(slots_[s].points));
        }
    }
}

PointCloud SVoxelMap::allPoints() const {
    PointCloud out;
    out.reserve(point_count_);
    visitVoxels([&](const VoxelKey&, std::span<const StoredPoint> pts) {
        for (const StoredPoint& sp : pts) out.push_back(sp.position);
    });
    return out;
}

void SVoxelMap::restoreVoxel(const VoxelKey& key, const PointCloud& points) {
    if (findSlot(key) != kNil) throw std::invalid_argument("restoreVoxel: voxel already exists");
    if (points.size() > static_cast<std::size_t>(config_.max_points_per_voxel)) {
        throw std::invalid_argument("restoreVoxel: more points than max_points_per_voxel");
    }
    const std::uint32_t slot = getOrCreate(key);
    stampSlot(slot);
    Voxel& v = slots_[slot];
    const bool curved = config_.storage_mode == StorageMode::kCurved;
    for (const Point3& p : points) {
        StoredPoint sp{p, insert_seq_++, 0};
        if (curved) {
            // Order is kept verbatim; the code is only needed for future
            // inserts. Snapshots store float32 coordinates, so a point may
            // sit epsilon outside its recorded voxel — clamp instead of
            // recomputing the key.
            const double s = config_.voxel_size;
            const Point3 lo(static_cast<double>(key.i) * s, static_cast<double>(key.j) * s,
                            static_cast<double>(key.k) * s);
            const Point3 hi(lo.x() + s, lo.y() + s, lo.z() + s);
            const Point3 clamped = p.cwiseMax(lo).cwiseMin(hi);
            sp.morton = mortonIndex(clamped, key, s, config_.morton_bits_per_axis);
        }
        v.points.push_back(sp);
        ++point_count_;
    }
}

}  // namespace svox
