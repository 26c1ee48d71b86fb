#include "svox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace svox::synth {

std::uint64_t Rng::nextU64() {
    // splitmix64
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform01() {
    return static_cast<double>(nextU64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::gaussian(double stddev) {
    if (stddev == 0.0) return 0.0;
    if (have_spare_) {
        have_spare_ = false;
        return spare_ * stddev;
    }
    double u1 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    const double u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = mag * std::sin(ang);
    have_spare_ = true;
    return mag * std::cos(ang) * stddev;
}

namespace {

constexpr double kRayEps = 1e-12;

std::optional<double> rayBox(const Box& box, const Point3& o, const Eigen::Vector3d& d) {
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < kRayEps) {
            if (o[a] < box.min_corner[a] || o[a] > box.max_corner[a]) return std::nullopt;
            continue;
        }
        double t0 = (box.min_corner[a] - o[a]) / d[a];
        double t1 = (box.max_corner[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    if (t_enter > t_exit) return std::nullopt;
    if (box.inward) {
        // Room: the ray starts inside and hits the far face.
        if (t_exit > kRayEps) return t_exit;
        return std::nullopt;
    }
    if (t_enter > kRayEps) return t_enter;
    return std::nullopt;
}

std::optional<double> rayCylinder(const Cylinder& cyl, const Point3& o,
                                  const Eigen::Vector3d& d) {
    // Components perpendicular to the axis.
    const Eigen::Vector3d oc = o - cyl.base;
    const Eigen::Vector3d d_perp = d - d.dot(cyl.axis) * cyl.axis;
    const Eigen::Vector3d o_perp = oc - oc.dot(cyl.axis) * cyl.axis;
    const double a = d_perp.squaredNorm();
    if (a < kRayEps) return std::nullopt;  // ray parallel to the axis
    const double b = 2.0 * o_perp.dot(d_perp);
    const double c = o_perp.squaredNorm() - cyl.radius * cyl.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double t_near = (-b - sq) / (2.0 * a);
    const double t_far = (-b + sq) / (2.0 * a);
    const double t = cyl.inward ? t_far : t_near;
    if (t <= kRayEps) return std::nullopt;
    // Open ends: the hit must fall within the axis segment.
    const double along = (oc + t * d).dot(cyl.axis);
    if (along < 0.0 || along > cyl.length) return std::nullopt;
    return t;
}

std::optional<double> rayRect(const Rect& rect, const Point3& o, const Eigen::Vector3d& d) {
    const Eigen::Vector3d n = rect.edge_u.cross(rect.edge_v);
    const double denom = n.dot(d);
    if (std::abs(denom) < kRayEps) return std::nullopt;
    const double t = n.dot(rect.origin - o) / denom;
    if (t <= kRayEps) return std::nullopt;
    const Eigen::Vector3d local = o + t * d - rect.origin;
    const double u = local.dot(rect.edge_u) / rect.edge_u.squaredNorm();
    const double v = local.dot(rect.edge_v) / rect.edge_v.squaredNorm();
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return std::nullopt;
    return t;
}

}  // namespace

std::optional<double> World::castRay(const Point3& origin, const Eigen::Vector3d& dir) const {
    std::optional<double> best;
    auto consider = [&best](const std::optional<double>& t) {
        if (t && (!best || *t < *best)) best = t;
    };
    for (const Box& b : boxes) consider(rayBox(b, origin, dir));
    for (const Cylinder& c : cylinders) consider(rayCylinder(c, origin, dir));
    for (const Rect& r : rects) consider(rayRect(r, origin, dir));
    return best;
}

bool World::isFree(const Point3& p) const {
    for (const Box& b : boxes) {
        const bool inside = (p.array() > b.min_corner.array()).all() &&
                            (p.array() < b.max_corner.array()).all();
        if (b.inward ? !inside : inside) return false;
    }
    for (const Cylinder& c : cylinders) {
        const Eigen::Vector3d oc = p - c.base;
        const double along = oc.dot(c.axis);
        const double radial = (oc - along * c.axis).norm();
        const bool inside = radial < c.radius && along > 0.0 && along < c.length;
        if (c.inward ? !inside : inside) return false;
    }
    return true;
}

PointCloud generateScan(const World& world, const Pose& pose, const ScanPattern& pattern,
                        double max_range, double range_noise_std, Rng& rng) {
    if (!world.isFree(pose.translation)) {
        throw std::invalid_argument("generateScan: sensor pose inside solid geometry");
    }
    const int n = pattern.horizontal_rays * pattern.vertical_rays;

    // Noise is drawn serially up front so the ray loop can run in parallel
    // without changing the output.
    std::vector<double> noise(n, 0.0);
    if (range_noise_std > 0.0) {
        for (double& x : noise) x = rng.gaussian(range_noise_std);
    }

    std::vector<Point3> hits(n, Point3::Zero());
    std::vector<std::uint8_t> hit_mask(n, 0);
    const double deg = std::numbers::pi / 180.0;
    const double v_min = pattern.vertical_fov_min_deg * deg;
    const double v_max = pattern.vertical_fov_max_deg * deg;
    const Eigen::Matrix3d rot = pose.rotationMatrix();

#pragma omp parallel for schedule(static)
    for (int idx = 0; idx < n; ++idx) {
        const int h = idx / pattern.vertical_rays;
        const int v = idx % pattern.vertical_rays;
        const double azimuth = 2.0 * std::numbers::pi * h / pattern.horizontal_rays;
        const double elevation =
            pattern.vertical_rays == 1
                ? 0.5 * (v_min + v_max)
                : v_min + (v_max - v_min) * v / (pattern.vertical_rays - 1);
        const Eigen::Vector3d dir_sensor(std::cos(elevation) * std::cos(azimuth),
                                         std::cos(elevation) * std::sin(azimuth),
                                         std::sin(elevation));
        const auto t = world.castRay(pose.translation, rot * dir_sensor);
        if (!t || *t > max_range) continue;
        const double range = *t + noise[idx];
        hits[idx] = dir_sensor * range;
        hit_mask[idx] = 1;
    }

    PointCloud out;
    out.reserve(n);
    for (int idx = 0; idx < n; ++idx) {
        if (hit_mask[idx]) out.push_back(hits[idx]);
    }
    return out;
}

namespace {

double wrapAngle(double a) {
    while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

Pose yawPose(const Point3& position, double yaw) {
    Pose p;
    p.translation = position;
    p.rotation = so3Exp(Eigen::Vector3d(0.0, 0.0, yaw));
    return p;
}

}  // namespace

Run generateRun(const World& world, const TrajectorySpec& spec, std::uint64_t seed) {
    if (spec.waypoints.size() < 2) throw std::invalid_argument("need at least two waypoints");
    if (spec.frames < 1) throw std::invalid_argument("need at least one frame");

    // Arc-length parameterization of the waypoint polyline.
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < spec.waypoints.size(); ++i) {
        cum.push_back(cum.back() + (spec.waypoints[i] - spec.waypoints[i - 1]).norm());
    }
    const double total = cum.back();
    auto sample = [&](double s) -> Point3 {
        s = std::clamp(s, 0.0, total);
        std::size_t seg = 1;
        while (seg + 1 < cum.size() && cum[seg] < s) ++seg;
        const double seg_len = cum[seg] - cum[seg - 1];
        const double u = seg_len > 0.0 ? (s - cum[seg - 1]) / seg_len : 0.0;
        return spec.waypoints[seg - 1] + u * (spec.waypoints[seg] - spec.waypoints[seg - 1]);
    };

    Run run;
    run.scans.reserve(spec.frames);
    run.ground_truth.reserve(spec.frames);
    run.drifted_prior.reserve(spec.frames);

    Rng scan_rng(seed);
    Rng drift_rng(seed ^ 0xD1F7E0B5ULL);

    const double step = spec.frames > 1 ? total / (spec.frames - 1) : 0.0;
    const bool closed = (spec.waypoints.front() - spec.waypoints.back()).norm() < 1e-12;
    double yaw = 0.0;
    for (int f = 0; f < spec.frames; ++f) {
        const double s = step * f;
        const Point3 position = sample(s);
        // Yaw tracks the direction of travel with a limited turn rate. On a
        // closed circuit the lookahead wraps so the final heading matches the
        // start instead of stalling at the last waypoint.
        const double lookahead = s + std::max(step, 1e-3);
        const Point3 ahead =
            closed ? sample(std::fmod(lookahead, total)) : sample(std::min(lookahead, total));
        const Eigen::Vector3d dir = ahead - position;
        if (f == 0) {
            yaw = std::atan2(dir.y(), dir.x());
        } else if (dir.head<2>().norm() > 1e-9) {
            const double target = std::atan2(dir.y(), dir.x());
            yaw += std::clamp(wrapAngle(target - yaw), -spec.max_yaw_step, spec.max_yaw_step);
            yaw = wrapAngle(yaw);
        }
        run.ground_truth.push_back(yawPose(position, yaw));
    }

    // Drifted priors: compose per-frame ground-truth motion with noise.
    for (int f = 0; f < spec.frames; ++f) {
        if (f == 0) {
            run.drifted_prior.push_back(run.ground_truth.front());
            continue;
        }
        const Pose rel = run.ground_truth[f - 1].inverse() * run.ground_truth[f];
        Pose noise;
        noise.translation = Point3(drift_rng.gaussian(spec.odom_trans_noise),
                                   drift_rng.gaussian(spec.odom_trans_noise),
                                   drift_rng.gaussian(spec.odom_trans_noise));
        noise.rotation = so3Exp(Eigen::Vector3d(0.0, 0.0, drift_rng.gaussian(spec.odom_rot_noise)));
        run.drifted_prior.push_back(run.drifted_prior.back() * (rel * noise));
    }

    for (int f = 0; f < spec.frames; ++f) {
        run.scans.push_back(generateScan(world, run.ground_truth[f], spec.pattern,
                                         spec.max_range, spec.range_noise, scan_rng));
    }
    return run;
}

World corridorWorld(double length, double width, double height, std::uint64_t seed) {
    World world;
    Box shell;
    shell.min_corner = Point3(0.0, -width / 2.0, 0.0);
    shell.max_corner = Point3(length, width / 2.0, height);
    shell.inward = true;
    world.boxes.push_back(shell);

    // Wall boxes, alternating sides, randomized size/offset so sections of
    // the corridor look distinct to the place-recognition descriptor.
    Rng rng(seed ^ 0xC0881D08ULL);
    const double spacing = 3.0;
    int side = 1;
    for (double x = spacing; x < length - 1.0; x += spacing) {
        const double sx = rng.uniform(0.3, 0.9);
        const double sy = rng.uniform(0.25, 0.6);
        const double sz = rng.uniform(0.4, height - 0.5);
        const double cx = x + rng.uniform(-0.8, 0.8);
        const double wall = side > 0 ? width / 2.0 : -width / 2.0;
        const double cy = wall - side * (sy / 2.0 + rng.uniform(0.0, 0.25));
        Box b;
        b.min_corner = Point3(cx - sx / 2.0, cy - sy / 2.0, 0.0);
        b.max_corner = Point3(cx + sx / 2.0, cy + sy / 2.0, sz);
        world.boxes.push_back(b);
        side = -side;
    }
    return world;
}

TrajectorySpec corridorTrajectory(double length, int frames) {
    TrajectorySpec spec;
    spec.waypoints = {Point3(1.5, 0.0, 1.2), Point3(length - 1.5, 0.0, 1.2)};
    spec.frames = frames;
    return spec;
}

World loopWorld(double half_size, std::uint64_t seed) {
    World world;
    Box shell;
    shell.min_corner = Point3(-half_size - 3.0, -half_size - 3.0, 0.0);
    shell.max_corner = Point3(half_size + 3.0, half_size + 3.0, 3.0);
    shell.inward = true;
    world.boxes.push_back(shell);

    // Pillars scattered in the room but kept off the square path, which runs
    // along |x| = half_size or |y| = half_size.
    Rng rng(seed ^ 0x100BE5EEULL);
    const int pillars = 14;
    int placed = 0;
    int guard = 0;
    while (placed < pillars && guard++ < 1000) {
        const double cx = rng.uniform(-half_size - 1.5, half_size + 1.5);
        const double cy = rng.uniform(-half_size - 1.5, half_size + 1.5);
        const double near_x = std::abs(std::abs(cx) - half_size);
        const double near_y = std::abs(std::abs(cy) - half_size);
        const bool on_path = (near_x < 1.2 && std::abs(cy) < half_size + 1.2) ||
                             (near_y < 1.2 && std::abs(cx) < half_size + 1.2);
        if (on_path) continue;
        const double sx = rng.uniform(0.3, 1.0);
        const double sy = rng.uniform(0.3, 1.0);
        const double sz = rng.uniform(0.8, 2.8);
        Box b;
        b.min_corner = Point3(cx - sx / 2.0, cy - sy / 2.0, 0.0);
        b.max_corner = Point3(cx + sx / 2.0, cy + sy / 2.0, sz);
        world.boxes.push_back(b);
        ++placed;
    }
    return world;
}

TrajectorySpec loopTrajectory(double half_size, int frames) {
    TrajectorySpec spec;
    const double h = half_size;
    spec.waypoints = {Point3(-h, -h, 1.2), Point3(h, -h, 1.2), Point3(h, h, 1.2),
                      Point3(-h, h, 1.2),  Point3(-h, -h, 1.2)};
    spec.frames = frames;
    return spec;
}

TrajectorySpec figureEightTrajectory(double half_size, int frames) {
    TrajectorySpec spec;
    const double h = half_size;
    spec.waypoints = {Point3(0.0, 0.0, 1.2), Point3(h, h, 1.2),    Point3(h, -h, 1.2),
                      Point3(0.0, 0.0, 1.2), Point3(-h, h, 1.2),   Point3(-h, -h, 1.2),
                      Point3(0.0, 0.0, 1.2)};
    spec.frames = frames;
    return spec;
}

World tunnelWorld(double radius, double length, std::uint64_t seed) {
    World world;
    Cylinder tube;
    tube.base = Point3(0.0, 0.0, radius);
    tube.axis = Eigen::Vector3d::UnitX();
    tube.radius = radius;
    tube.length = length;
    tube.inward = true;
    world.cylinders.push_back(tube);

    Rng rng(seed ^ 0x7D4E11ULL);
    for (double x = 4.0; x < length - 2.0; x += 5.0) {
        const double sx = rng.uniform(0.3, 0.8);
        const double sy = rng.uniform(0.3, 0.8);
        const double sz = rng.uniform(0.3, 1.0);
        const double cy = rng.uniform(-radius * 0.5, radius * 0.5);
        Box b;
        b.min_corner = Point3(x - sx / 2.0, cy - sy / 2.0, 0.0);
        b.max_corner = Point3(x + sx / 2.0, cy + sy / 2.0, sz);
        world.boxes.push_back(b);
    }
    return world;
}

TrajectorySpec tunnelTrajectory(double length, int frames) {
    TrajectorySpec spec;
    spec.waypoints = {Point3(1.5, 0.0, 1.4), Point3(length - 1.5, 0.0, 1.4)};
    spec.frames = frames;
    return spec;
}

}  // namespace svox::synth
