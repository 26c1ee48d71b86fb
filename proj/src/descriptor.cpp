#include "svox/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace svox {

ScanDescriptor computeDescriptor(const PointCloud& scan, const DescriptorConfig& cfg) {
    ScanDescriptor d;
    d.rings = cfg.rings;
    d.sectors = cfg.sectors;
    d.bins.assign(static_cast<std::size_t>(cfg.rings) * cfg.sectors, 0.0);

    const double ring_width = cfg.max_radius / cfg.rings;
    const double two_pi = 2.0 * std::numbers::pi;
    for (const Point3& p : scan) {
        if (!isFinite(p)) continue;
        const double radius = std::hypot(p.x(), p.y());
        if (radius >= cfg.max_radius) continue;
        const int ring = std::min(static_cast<int>(radius / ring_width), cfg.rings - 1);
        double azimuth = std::atan2(p.y(), p.x());
        if (azimuth < 0.0) azimuth += two_pi;
        const int sector = std::min(static_cast<int>(azimuth / two_pi * cfg.sectors),
                                    cfg.sectors - 1);
        double& bin = d.at(ring, sector);
        bin = std::max(bin, p.z());
    }
    return d;
}

std::pair<double, int> descriptorDistance(const ScanDescriptor& a, const ScanDescriptor& b) {
    if (a.rings != b.rings || a.sectors != b.sectors) {
        throw std::invalid_argument("descriptor dimensions differ");
    }
    const int rings = a.rings;
    const int sectors = a.sectors;

    // Column norms, reused across shifts.
    std::vector<double> norm_a(sectors, 0.0), norm_b(sectors, 0.0);
    for (int c = 0; c < sectors; ++c) {
        double sa = 0.0, sb = 0.0;
        for (int r = 0; r < rings; ++r) {
            sa += a.at(r, c) * a.at(r, c);
            sb += b.at(r, c) * b.at(r, c);
        }
        norm_a[c] = std::sqrt(sa);
        norm_b[c] = std::sqrt(sb);
    }

    double best = 1.0;
    int best_shift = 0;
    for (int shift = 0; shift < sectors; ++shift) {
        double sum = 0.0;
        int effective = 0;
        for (int c = 0; c < sectors; ++c) {
            const int cb = (c + shift) % sectors;
            if (norm_a[c] == 0.0 || norm_b[cb] == 0.0) continue;
            double dot = 0.0;
            for (int r = 0; r < rings; ++r) dot += a.at(r, c) * b.at(r, cb);
            // Negative correlation counts as fully dissimilar, which keeps the
            // distance inside [0, 1].
            const double sim = std::max(0.0, dot / (norm_a[c] * norm_b[cb]));
            sum += 1.0 - sim;
            ++effective;
        }
        const double dist = effective > 0 ? sum / effective : 1.0;
        if (dist < best) {
            best = dist;
            best_shift = shift;
        }
    }
    return {best, best_shift};
}

double yawFromShift(int shift, int sectors) {
    const double sector_width = 2.0 * std::numbers::pi / sectors;
    double yaw = -shift * sector_width;
    if (yaw < -std::numbers::pi) yaw += 2.0 * std::numbers::pi;
    return yaw;
}

std::string descriptorToCsv(const ScanDescriptor& d) {
    std::ostringstream out;
    for (int r = 0; r < d.rings; ++r) {
        for (int c = 0; c < d.sectors; ++c) {
            if (c) out << ',';
            out << d.at(r, c);
        }
        out << '\n';
    }
    return out.str();
}

std::optional<LoopCandidate> detectLoop(int query_id, const std::vector<Keyframe>& history,
                                        const LoopConfig& cfg) {
    if (query_id < 0 || query_id >= static_cast<int>(history.size())) {
        throw std::out_of_range("detectLoop: query_id outside history");
    }
    const Keyframe& query = history[query_id];
    const int last_eligible = query_id - cfg.temporal_exclusion;
    if (last_eligible < 0) return std::nullopt;

    double best_dist = cfg.distance_threshold;
    int best_id = -1;
    int best_shift = 0;
    for (int i = 0; i < last_eligible; ++i) {
        const auto [dist, shift] = descriptorDistance(query.descriptor, history[i].descriptor);
        if (dist < best_dist) {
            best_dist = dist;
            best_id = i;
            best_shift = shift;
        }
    }
    if (best_id < 0) return std::nullopt;

    // Geometric verification: register the query scan against a local map
    // around the candidate, expressed in the candidate's frame.
    const Keyframe& match = history[best_id];
    SVoxelMap local_map(cfg.verify_map);
    const Pose match_inv = match.pose.inverse();
    const int lo = std::max(0, best_id - cfg.verify_neighbor_keyframes);
    const int hi = std::min(static_cast<int>(history.size()) - 1,
                            best_id + cfg.verify_neighbor_keyframes);
    PointCloud staged;
    for (int i = lo; i <= hi; ++i) {
        const Pose rel = match_inv * history[i].pose;
        staged.clear();
        staged.reserve(history[i].scan.size());
        for (const Point3& p : history[i].scan) staged.push_back(rel * p);
        local_map.insert(staged);
    }

    SVoxelMapView adapter(local_map);
    Pose init;
    init.rotation = so3Exp(Eigen::Vector3d(
        0.0, 0.0, yawFromShift(best_shift, query.descriptor.sectors)));
    const RegistrationResult reg =
        registerScan(query.scan, adapter, init, cfg.verify_registration);
    if (!reg.ok()) return std::nullopt;
    if (reg.fitness < cfg.min_fitness || reg.mean_abs_residual > cfg.max_mean_residual) {
        return std::nullopt;
    }

    LoopCandidate cand;
    cand.query_id = query_id;
    cand.match_id = best_id;
    cand.descriptor_distance = best_dist;
    cand.best_shift = best_shift;
    cand.relative_pose = reg.pose;
    cand.fitness = reg.fitness;
    cand.mean_residual = reg.mean_abs_residual;
    return cand;
}

}  // namespace svox
