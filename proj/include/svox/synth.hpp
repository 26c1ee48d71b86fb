#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svox/se3.hpp"
#include "svox/types.hpp"

namespace svox::synth {

/// Stream-seedable RNG (splitmix64 core) with explicit Box-Muller gaussians.
/// Hand-rolled so that generated datasets are reproducible bit-for-bit
/// independent of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t nextU64();
    double uniform01();                    // [0, 1)
    double uniform(double lo, double hi);
    double gaussian(double stddev);

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Axis-aligned box. Solid boxes are obstacles hit from outside; inward boxes
/// are rooms whose interior faces are hit from inside.
struct Box {
    Point3 min_corner;
    Point3 max_corner;
    bool inward = false;
};

/// Finite cylinder around an axis segment. Inward cylinders are tunnels.
struct Cylinder {
    Point3 base;            // axis start
    Eigen::Vector3d axis;   // unit direction
    double radius = 1.0;
    double length = 1.0;
    bool inward = true;
};

/// Finite two-sided rectangle: origin corner plus two orthogonal edge vectors.
struct Rect {
    Point3 origin;
    Eigen::Vector3d edge_u;
    Eigen::Vector3d edge_v;
};

struct World {
    std::vector<Box> boxes;
    std::vector<Cylinder> cylinders;
    std::vector<Rect> rects;

    /// First-hit distance along the ray, if any.
    std::optional<double> castRay(const Point3& origin, const Eigen::Vector3d& dir) const;

    /// True when the position lies in free space (inside every inward
    /// primitive, outside every solid one).
    bool isFree(const Point3& position) const;
};

struct ScanPattern {
    int horizontal_rays = 1024;
    int vertical_rays = 16;
    double vertical_fov_min_deg = -15.0;
    double vertical_fov_max_deg = 15.0;
};

/// Simulated spinning-LiDAR scan in the sensor frame: a grid of ray
/// directions, first hits, plus gaussian range noise. Deterministic for a
/// given rng state; throws if the pose sits in solid space.
PointCloud generateScan(const World& world, const Pose& pose, const ScanPattern& pattern,
                        double max_range, double range_noise_std, Rng& rng);

struct TrajectorySpec {
    std::vector<Point3> waypoints;     // piecewise-linear path, meters
    int frames = 200;
    double odom_trans_noise = 0.0;     // per-frame translation drift std, meters
    double odom_rot_noise = 0.0;       // per-frame yaw drift std, radians
    double range_noise = 0.0;          // per-point range noise std, meters
    double max_yaw_step = 0.12;        // rad/frame turn-rate limit
    ScanPattern pattern;
    double max_range = 120.0;
};

struct Run {
    std::vector<PointCloud> scans;   // sensor frame
    std::vector<Pose> ground_truth;
    std::vector<Pose> drifted_prior; // ground truth with accumulated odometry noise
};

/// Walks the waypoint path at constant arc-length steps, yaw following the
/// direction of travel (rate-limited), and renders one scan per frame.
/// Deterministic per seed.
Run generateRun(const World& world, const TrajectorySpec& spec, std::uint64_t seed);

// Preset worlds and trajectories used by tests, the benchmark and the CLI.

/// Straight corridor along +x with randomized wall boxes for texture.
World corridorWorld(double length, double width, double height, std::uint64_t seed);
TrajectorySpec corridorTrajectory(double length, int frames);

/// Square room with randomized pillars, path margin respected.
World loopWorld(double half_size, std::uint64_t seed);
/// Closed square circuit that returns exactly to its start.
TrajectorySpec loopTrajectory(double half_size, int frames);
/// Figure-eight inside the same room, crossing at the center.
TrajectorySpec figureEightTrajectory(double half_size, int frames);

/// Straight tunnel (inward cylinder along +x) with floor boxes for texture.
World tunnelWorld(double radius, double length, std::uint64_t seed);
TrajectorySpec tunnelTrajectory(double length, int frames);

}  // namespace svox::synth
