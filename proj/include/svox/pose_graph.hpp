#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "svox/se3.hpp"

namespace svox {

struct PoseGraphEdge {
    int from = 0;
    int to = 0;
    Pose measurement;        // expected from^-1 * to
    Matrix6d information = Matrix6d::Identity();  // [omega; v] block order
};

struct OptimizeReport {
    double initial_chi2 = 0.0;
    double final_chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> chi2_history;  // chi2 after each accepted step
};

/// Keyframe pose graph with odometry/loop edges, optimized by
/// Levenberg-Marquardt on SE(3) with left-composed increments and a sparse
/// Cholesky solve of the normal equations.
class PoseGraph {
public:
    /// Throws on duplicate id.
    void addNode(int id, const Pose& pose);

    /// Throws if either endpoint is missing or the information matrix is not
    /// symmetric positive definite.
    void addEdge(int from, int to, const Pose& measurement, const Matrix6d& information);

    /// Gauge anchor; fixed nodes do not move during optimization.
    void setFixed(int id, bool fixed = true);

    /// Residual of one edge: log(Z^-1 * X_from^-1 * X_to).
    Vector6d edgeResidual(const PoseGraphEdge& edge) const;

    /// Analytic residual Jacobians wrt left increments on the two endpoint
    /// poses (d r / d delta at delta = 0).
    void edgeJacobians(const PoseGraphEdge& edge, Matrix6d& j_from, Matrix6d& j_to) const;

    double chi2() const;

    /// Minimizes sum r^T Omega r over non-fixed poses. Requires at least one
    /// fixed node and every node connected to a fixed one; throws otherwise,
    /// naming the orphaned nodes. chi2 is non-increasing across accepted
    /// steps; terminates on relative chi2 change < eps or max_iterations.
    OptimizeReport optimize(int max_iterations = 50, double eps = 1e-6);

    const Pose& pose(int id) const;
    void setPose(int id, const Pose& pose);
    bool hasNode(int id) const { return nodes_.count(id) != 0; }
    std::size_t nodeCount() const { return nodes_.size(); }
    std::size_t edgeCount() const { return edges_.size(); }
    const std::map<int, Pose>& nodes() const { return nodes_; }
    const std::vector<PoseGraphEdge>& edges() const { return edges_; }
    const std::set<int>& fixedNodes() const { return fixed_; }

    /// g2o-style plain-text dump (VERTEX_SE3:QUAT / EDGE_SE3:QUAT / FIX).
    std::string toG2o() const;

private:
    std::map<int, Pose> nodes_;
    std::vector<PoseGraphEdge> edges_;
    std::set<int> fixed_;
};

}  // namespace svox
