#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svox/registration.hpp"
#include "svox/se3.hpp"
#include "svox/types.hpp"
#include "svox/voxel_map.hpp"

namespace svox {

struct DescriptorConfig {
    int rings = 20;
    int sectors = 60;
    double max_radius = 80.0;  // meters
};

/// Rotation-shiftable polar occupancy matrix: ring x sector bins holding the
/// max point height seen in each bin, 0 for empty bins. A yaw rotation of the
/// scan circularly shifts the columns.
struct ScanDescriptor {
    int rings = 0;
    int sectors = 0;
    std::vector<double> bins;  // row-major, rings x sectors

    double& at(int ring, int sector) { return bins[ring * sectors + sector]; }
    double at(int ring, int sector) const { return bins[ring * sectors + sector]; }
    bool empty() const { return bins.empty(); }
};

/// Builds the descriptor from a sensor-frame scan. Points beyond max_radius
/// are ignored; an empty scan yields an all-zero matrix.
ScanDescriptor computeDescriptor(const PointCloud& scan, const DescriptorConfig& cfg);

/// Minimum over all circular sector shifts of the mean column-wise cosine
/// distance (column pairs where either side is all-zero are skipped).
/// Returns (distance in [0,1], best shift). Throws on dimension mismatch.
std::pair<double, int> descriptorDistance(const ScanDescriptor& a, const ScanDescriptor& b);

/// Relative yaw implied by the best column shift of descriptorDistance(a, b):
/// rotating scan b by this yaw about +z aligns it with scan a.
double yawFromShift(int shift, int sectors);

/// CSV dump (one matrix row per line) for offline inspection.
std::string descriptorToCsv(const ScanDescriptor& d);

struct Keyframe {
    int id = 0;
    Pose pose;             // map-frame estimate at creation time
    PointCloud scan;       // sensor-frame, downsampled
    ScanDescriptor descriptor;
};

struct LoopConfig {
    DescriptorConfig descriptor;
    int temporal_exclusion = 50;     // most recent keyframes never match
    double distance_threshold = 0.25;
    double min_fitness = 0.6;
    double max_mean_residual = 0.3;  // meters
    int verify_neighbor_keyframes = 2;
    SVoxelConfig verify_map;         // local map for geometric verification
    RegistrationConfig verify_registration;

    LoopConfig() {
        verify_map.voxel_size = 0.4;
        verify_map.max_points_per_voxel = 30;
        verify_registration.max_corr_dist = 2.0;
        verify_registration.max_iterations = 30;
    }
};

struct LoopCandidate {
    int query_id = 0;
    int match_id = 0;
    double descriptor_distance = 1.0;
    int best_shift = 0;
    Pose relative_pose;  // query pose expressed in the match keyframe frame
    double fitness = 0.0;
    double mean_residual = 0.0;
};

/// Looks for a loop closure for history[query_id]: best descriptor match over
/// keyframes older than the temporal exclusion window, then geometric
/// verification by registering the query scan against a local map built
/// around the candidate. Absence of a loop is a value, not an error.
std::optional<LoopCandidate> detectLoop(int query_id, const std::vector<Keyframe>& history,
                                        const LoopConfig& cfg);

}  // namespace svox
