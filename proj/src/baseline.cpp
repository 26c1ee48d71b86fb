#include "svox/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svox {

std::vector<Neighbor> BruteForceIndex::knn(const Point3& query, int k) const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    struct Cand {
        double dist_sq;
        std::size_t idx;
        bool operator<(const Cand& o) const {
            return dist_sq != o.dist_sq ? dist_sq < o.dist_sq : idx < o.idx;
        }
    };
    std::vector<Cand> cands;
    cands.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        cands.push_back({squaredDistance(query, points_[i]), i});
    }
    const std::size_t keep = std::min<std::size_t>(k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end());
    std::vector<Neighbor> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out.push_back({points_[cands[i].idx], std::sqrt(cands[i].dist_sq)});
    }
    return out;
}

void KdTree::build(const PointCloud& points) {
    nodes_.clear();
    root_ = kNil;
    size_ = 0;
    next_seq_ = 0;
    std::vector<Item> items;
    items.reserve(points.size());
    std::vector<std::int32_t> slots;
    slots.reserve(points.size());
    for (const Point3& p : points) {
        items.push_back({p, next_seq_++});
        slots.push_back(static_cast<std::int32_t>(nodes_.size()));
        nodes_.emplace_back();
    }
    size_ = items.size();
    root_ = buildRange(items, slots, 0, static_cast<std::int32_t>(items.size()), 0);
}

std::int32_t KdTree::buildRange(std::vector<Item>& items, std::vector<std::int32_t>& slots,
                                std::int32_t lo, std::int32_t hi, int depth) {
    if (lo >= hi) return kNil;
    const int axis = depth % 3;
    const std::int32_t mid = lo + (hi - lo) / 2;
    std::nth_element(items.begin() + lo, items.begin() + mid, items.begin() + hi,
                     [axis](const Item& a, const Item& b) {
                         return a.point[axis] != b.point[axis] ? a.point[axis] < b.point[axis]
                                                               : a.seq < b.seq;
                     });
    const std::int32_t slot = slots[mid];
    Node& n = nodes_[slot];
    n.point = items[mid].point;
    n.seq = items[mid].seq;
    n.count = hi - lo;
    n.left = buildRange(items, slots, lo, mid, depth + 1);
    n.right = buildRange(items, slots, mid + 1, hi, depth + 1);
    return slot;
}

void KdTree::collect(std::int32_t node, std::vector<Item>& items,
                     std::vector<std::int32_t>& slots) const {
    if (node == kNil) return;
    const Node& n = nodes_[node];
    collect(n.left, items, slots);
    items.push_back({n.point, n.seq});
    slots.push_back(node);
    collect(n.right, items, slots);
}

void KdTree::insert(const PointCloud& pts) {
    for (const Point3& p : pts) insert(p);
}

void KdTree::insert(const Point3& p) {
    const std::int32_t slot = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_[slot].point = p;
    nodes_[slot].seq = next_seq_++;
    ++size_;

    if (root_ == kNil) {
        root_ = slot;
        return;
    }

    // Descend to a leaf position, remembering the path for the balance check.
    std::vector<std::int32_t> path;
    std::int32_t cur = root_;
    int depth = 0;
    while (true) {
        path.push_back(cur);
        Node& n = nodes_[cur];
        ++n.count;
        const int axis = depth % 3;
        std::int32_t& child = p[axis] < n.point[axis] ? n.left : n.right;
        if (child == kNil) {
            child = slot;
            break;
        }
        cur = child;
        ++depth;
    }

    // Rebuild the highest subtree whose heavier child exceeds the alpha bound.
    for (std::size_t i = 0; i < path.size(); ++i) {
        const Node& n = nodes_[path[i]];
        const std::int32_t lc = n.left == kNil ? 0 : nodes_[n.left].count;
        const std::int32_t rc = n.right == kNil ? 0 : nodes_[n.right].count;
        if (std::max(lc, rc) > kAlpha * n.count) {
            std::vector<Item> items;
            std::vector<std::int32_t> slots;
            items.reserve(n.count);
            slots.reserve(n.count);
            collect(path[i], items, slots);
            const std::int32_t rebuilt =
                buildRange(items, slots, 0, static_cast<std::int32_t>(items.size()),
                           static_cast<int>(i));
            if (i == 0) {
                root_ = rebuilt;
            } else {
                Node& parent = nodes_[path[i - 1]];
                (parent.left == path[i] ? parent.left : parent.right) = rebuilt;
            }
            ++rebuild_count_;
            break;
        }
    }
}

std::vector<Neighbor> KdTree::knn(const Point3& query, int k) const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    std::vector<Candidate> best;
    best.reserve(k + 1);
    knnRecurse(root_, 0, query, static_cast<std::size_t>(k), best);
    std::vector<Neighbor> out;
    out.reserve(best.size());
    for (const Candidate& c : best) out.push_back({c.node->point, std::sqrt(c.dist_sq)});
    return out;
}

void KdTree::knnRecurse(std::int32_t node, int depth, const Point3& query, std::size_t k,
                        std::vector<Candidate>& best) const {
    if (node == kNil) return;
    const Node& n = nodes_[node];

    const Candidate cand{squaredDistance(query, n.point), n.seq, &n};
    auto less = [](const Candidate& a, const Candidate& b) {
        return a.dist_sq != b.dist_sq ? a.dist_sq < b.dist_sq : a.seq < b.seq;
    };
    if (best.size() < k) {
        best.insert(std::upper_bound(best.begin(), best.end(), cand, less), cand);
    } else if (less(cand, best.back())) {
        best.pop_back();
        best.insert(std::upper_bound(best.begin(), best.end(), cand, less), cand);
    }

    const int axis = depth % 3;
    const double delta = query[axis] - n.point[axis];
    const std::int32_t near = delta < 0.0 ? n.left : n.right;
    const std::int32_t far = delta < 0.0 ? n.right : n.left;
    knnRecurse(near, depth + 1, query, k, best);
    // Visit the far side unless the splitting plane is strictly farther than
    // the current kth distance; equality must still descend so that
    // equal-distance, lower-seq points are found.
    if (best.size() < k || delta * delta <= best.back().dist_sq) {
        knnRecurse(far, depth + 1, query, k, best);
    }
}

PointCloud KdTree::points() const {
    std::vector<Item> items;
    std::vector<std::int32_t> slots;
    items.reserve(size_);
    slots.reserve(size_);
    collect(root_, items, slots);
    PointCloud out;
    out.reserve(items.size());
    for (const Item& it : items) out.push_back(it.point);
    return out;
}

}  // namespace svox
