#include "svox/registration.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace svox {

std::optional<Plane> fitPlane(std::span<const Point3> points, double planarity_max) {
    if (points.size() < 3) throw std::invalid_argument("fitPlane needs at least 3 points");

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const Point3& p : points) centroid += p;
    centroid /= static_cast<double>(points.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Point3& p : points) {
        const Eigen::Vector3d d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(points.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d& evals = eig.eigenvalues();  // ascending
    if (evals[1] <= 1e-12) return std::nullopt;        // collinear or coincident

    Plane plane;
    plane.planarity = evals[0] / evals[1];
    if (plane.planarity > planarity_max) return std::nullopt;

    Eigen::Vector3d n = eig.eigenvectors().col(0);
    // Deterministic sign: the largest-magnitude component is positive.
    int arg = 0;
    n.cwiseAbs().maxCoeff(&arg);
    if (n[arg] < 0.0) n = -n;
    plane.normal = n.normalized();
    plane.offset = -plane.normal.dot(centroid);
    return plane;
}

double huberLoss(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huberWeight(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 1.0 : delta / a;
}

namespace {

struct CorrespondenceWorkspace {
    std::vector<std::vector<std::uint32_t>> touches;
    std::vector<std::vector<Neighbor>> neighbors;
};

/// Per-point body shared by the serial and parallel kernels.
inline void correspondenceForPoint(const NeighborSearch& map, const Point3& source,
                                   const Pose& pose, const RegistrationConfig& cfg,
                                   Correspondence& out, std::vector<std::uint32_t>& touched,
                                   PointCloud& neighbor_pts) {
    out.source = source;
    out.transformed = pose * source;
    out.valid = false;
    const auto neighbors =
        map.knnCollect(out.transformed, cfg.k_plane, cfg.max_corr_dist, touched);
    if (neighbors.size() < 3) return;

    neighbor_pts.clear();
    for (const Neighbor& n : neighbors) neighbor_pts.push_back(n.point);
    const auto plane = fitPlane(neighbor_pts, cfg.planarity_max);
    if (!plane) return;

    out.plane = *plane;
    out.residual = pointToPlaneResidual(out.transformed, *plane);
    out.valid = std::abs(out.residual) <= cfg.max_corr_dist;
}

void buildImpl(const NeighborSearch& map, const PointCloud& scan, const Pose& pose,
               const RegistrationConfig& cfg, std::vector<Correspondence>& out,
               std::vector<std::vector<std::uint32_t>>& touches, bool parallel) {
    const std::int64_t n = static_cast<std::int64_t>(scan.size());
    out.resize(scan.size());
    touches.resize(scan.size());

    if (parallel) {
#pragma omp parallel
        {
            PointCloud scratch;
#pragma omp for schedule(dynamic, 64)
            for (std::int64_t i = 0; i < n; ++i) {
                correspondenceForPoint(map, scan[i], pose, cfg, out[i], touches[i], scratch);
            }
        }
    } else {
        PointCloud scratch;
        for (std::int64_t i = 0; i < n; ++i) {
            correspondenceForPoint(map, scan[i], pose, cfg, out[i], touches[i], scratch);
        }
    }
}

}  // namespace

void applyTouches(NeighborSearch& map, const std::vector<std::vector<std::uint32_t>>& touches) {
    for (const auto& t : touches) map.touch(t);
}

void buildCorrespondencesSerial(const NeighborSearch& map, const PointCloud& scan,
                                const Pose& pose, const RegistrationConfig& cfg,
                                std::vector<Correspondence>& out) {
    std::vector<std::vector<std::uint32_t>> touches;
    buildImpl(map, scan, pose, cfg, out, touches, false);
}

void buildCorrespondencesParallel(const NeighborSearch& map, const PointCloud& scan,
                                  const Pose& pose, const RegistrationConfig& cfg,
                                  std::vector<Correspondence>& out) {
    std::vector<std::vector<std::uint32_t>> touches;
    buildImpl(map, scan, pose, cfg, out, touches, true);
}

namespace {

double robustObjective(const std::vector<Correspondence>& corr, const Pose& pose, double delta) {
    double obj = 0.0;
    for (const Correspondence& c : corr) {
        if (!c.valid) continue;
        const double r = pointToPlaneResidual(pose * c.source, c.plane);
        obj += huberLoss(r, delta);
    }
    return obj;
}

}  // namespace

RegistrationResult registerScan(const PointCloud& scan, NeighborSearch& map, const Pose& init,
                                const RegistrationConfig& cfg) {
    using clock = std::chrono::steady_clock;
    RegistrationResult result;
    result.pose = init;
    if (scan.empty()) throw std::invalid_argument("registerScan: empty scan");

    std::vector<Correspondence> corr;
    std::vector<std::vector<std::uint32_t>> touches;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        const auto t0 = clock::now();
        buildImpl(map, scan, result.pose, cfg, corr, touches, cfg.parallel);
        applyTouches(map, touches);
        result.query_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();

        int valid = 0;
        for (const Correspondence& c : corr) valid += c.valid ? 1 : 0;
        if (valid < cfg.min_correspondences) {
            result.status = RegistrationStatus::kTooFewCorrespondences;
            return result;
        }

        // Gauss-Newton normal equations, accumulated in point order so the
        // result does not depend on the parallel schedule above.
        Matrix6d h = Matrix6d::Zero();
        Vector6d b = Vector6d::Zero();
        double objective = 0.0;
        for (const Correspondence& c : corr) {
            if (!c.valid) continue;
            const Vector6d j = pointToPlaneJacobian(c.transformed, c.plane.normal);
            const double w = huberWeight(c.residual, cfg.huber_delta);
            h.noalias() += w * j * j.transpose();
            b.noalias() += w * j * c.residual;
            objective += huberLoss(c.residual, cfg.huber_delta);
        }

        const Vector6d delta = h.ldlt().solve(-b);
        if (!delta.allFinite()) {
            result.status = RegistrationStatus::kConverged;
            break;
        }

        // Step halving keeps the robust objective non-increasing on the
        // current correspondence set.
        IterationStep step;
        step.objective_before = objective;
        step.correspondences = valid;
        double scale = 1.0;
        Pose candidate;
        double candidate_obj = 0.0;
        bool accepted = false;
        for (int h_iter = 0; h_iter <= 4; ++h_iter) {
            candidate = se3Exp(scale * delta) * result.pose;
            candidate_obj = robustObjective(corr, candidate, cfg.huber_delta);
            if (candidate_obj <= objective) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        ++result.iterations;
        if (!accepted) {
            result.status = RegistrationStatus::kConverged;
            break;
        }

        result.pose = candidate;
        step.objective_after = candidate_obj;
        step.step_scale = scale;
        result.steps.push_back(step);

        if ((scale * delta).norm() < cfg.convergence_eps) {
            result.status = RegistrationStatus::kConverged;
            break;
        }
        if (result.iterations >= cfg.max_iterations) {
            result.status = RegistrationStatus::kMaxIterations;
        }
    }

    // Fitness from the last correspondence set evaluated at the final pose.
    int valid = 0;
    double abs_sum = 0.0;
    for (const Correspondence& c : corr) {
        if (!c.valid) continue;
        ++valid;
        abs_sum += std::abs(pointToPlaneResidual(result.pose * c.source, c.plane));
    }
    result.fitness = static_cast<double>(valid) / static_cast<double>(scan.size());
    result.mean_abs_residual = valid > 0 ? abs_sum / valid : 0.0;
    return result;
}

}  // namespace svox
