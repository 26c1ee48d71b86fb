#pragma once

#include <optional>
#include <span>
#include <vector>

#include "svox/backends.hpp"
#include "svox/se3.hpp"
#include "svox/types.hpp"

namespace svox {

/// Plane {x : normal . x + offset = 0}. planarity is the smallest-to-middle
/// eigenvalue ratio of the fit covariance; small means flat.
struct Plane {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;
    double planarity = 0.0;
};

struct RegistrationConfig {
    int k_plane = 5;                // neighbors per plane fit
    double max_corr_dist = 1.0;     // meters, nearest-neighbor gate
    double planarity_max = 0.1;     // reject fits with lambda_min/lambda_mid above this
    int max_iterations = 20;
    double convergence_eps = 1e-4;  // update-norm threshold
    double huber_delta = 0.1;       // meters
    int min_correspondences = 10;
    bool parallel = true;           // OpenMP correspondence search
};

/// Least-squares plane through >= 3 points (smallest-eigenvalue direction of
/// the centered covariance). Returns nullopt when the neighborhood is not
/// planar enough; throws std::invalid_argument on fewer than 3 points.
std::optional<Plane> fitPlane(std::span<const Point3> points, double planarity_max);

/// Signed distance, meters.
inline double pointToPlaneResidual(const Point3& p, const Plane& plane) {
    return plane.normal.dot(p) + plane.offset;
}

/// One scan point paired with its local map plane, in the map frame.
struct Correspondence {
    Point3 source;        // sensor-frame scan point
    Point3 transformed;   // source mapped by the current pose estimate
    Plane plane;
    double residual = 0.0;
    bool valid = false;
};

/// Correspondence search across scan points: transform, KNN in the map, plane
/// fit, residual. The parallel variant is schedule-independent: per-point
/// results land in per-point slots and LRU touches are replayed serially in
/// point order afterwards, so it is bit-identical to the serial variant.
void buildCorrespondencesSerial(const NeighborSearch& map, const PointCloud& scan,
                                const Pose& pose, const RegistrationConfig& cfg,
                                std::vector<Correspondence>& out);
void buildCorrespondencesParallel(const NeighborSearch& map, const PointCloud& scan,
                                  const Pose& pose, const RegistrationConfig& cfg,
                                  std::vector<Correspondence>& out);

/// Deferred-touch bookkeeping shared by the two kernels.
void applyTouches(NeighborSearch& map, const std::vector<std::vector<std::uint32_t>>& touches);

struct IterationStep {
    double objective_before = 0.0;
    double objective_after = 0.0;
    double step_scale = 1.0;
    int correspondences = 0;
};

enum class RegistrationStatus { kConverged, kMaxIterations, kTooFewCorrespondences };

struct RegistrationResult {
    Pose pose;
    RegistrationStatus status = RegistrationStatus::kConverged;
    double fitness = 0.0;            // valid correspondences / scan size
    double mean_abs_residual = 0.0;  // meters, over valid correspondences
    int iterations = 0;
    double query_ms = 0.0;           // wall time spent in correspondence search
    std::vector<IterationStep> steps;

    bool ok() const { return status != RegistrationStatus::kTooFewCorrespondences; }
};

/// Iterated point-to-plane Gauss-Newton over the 6-DoF left increment, with a
/// Huber loss and step halving so the per-iteration robust objective never
/// increases. On too few correspondences the result carries the last pose and
/// status kTooFewCorrespondences.
RegistrationResult registerScan(const PointCloud& scan, NeighborSearch& map, const Pose& init,
                                const RegistrationConfig& cfg);

/// Analytic Jacobian of the point-to-plane residual at zero increment,
/// ordering [omega; v]; q is the transformed point.
inline Vector6d pointToPlaneJacobian(const Point3& q, const Eigen::Vector3d& normal) {
    Vector6d j;
    j.head<3>() = q.cross(normal);
    j.tail<3>() = normal;
    return j;
}

double huberLoss(double r, double delta);
double huberWeight(double r, double delta);

}  // namespace svox
