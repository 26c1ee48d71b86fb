#include "svox/pose_graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace svox {

void PoseGraph::addNode(int id, const Pose& pose) {
    if (nodes_.count(id)) throw std::invalid_argument("duplicate node id " + std::to_string(id));
    nodes_.emplace(id, pose);
}

void PoseGraph::addEdge(int from, int to, const Pose& measurement, const Matrix6d& information) {
    if (!nodes_.count(from)) throw std::invalid_argument("edge from missing node " + std::to_string(from));
    if (!nodes_.count(to)) throw std::invalid_argument("edge to missing node " + std::to_string(to));
    if (!information.isApprox(information.transpose(), 1e-9)) {
        throw std::invalid_argument("information matrix not symmetric");
    }
    Eigen::LLT<Matrix6d> llt(information);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("information matrix not positive definite");
    }
    edges_.push_back({from, to, measurement, information});
}

void PoseGraph::setFixed(int id, bool fixed) {
    if (!nodes_.count(id)) throw std::invalid_argument("fixing missing node " + std::to_string(id));
    if (fixed) {
        fixed_.insert(id);
    } else {
        fixed_.erase(id);
    }
}

const Pose& PoseGraph::pose(int id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::out_of_range("no node " + std::to_string(id));
    return it->second;
}

void PoseGraph::setPose(int id, const Pose& pose) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::out_of_range("no node " + std::to_string(id));
    it->second = pose;
}

Vector6d PoseGraph::edgeResidual(const PoseGraphEdge& edge) const {
    const Pose& xf = pose(edge.from);
    const Pose& xt = pose(edge.to);
    return se3Log(edge.measurement.inverse() * xf.inverse() * xt);
}

void PoseGraph::edgeJacobians(const PoseGraphEdge& edge, Matrix6d& j_from, Matrix6d& j_to) const {
    // With left increments X <- Exp(d) X, the residual perturbs as
    // r(d) = r0 + Jr^-1(r0) Ad(X_to^-1) (d_to - d_from) to first order.
    const Vector6d r0 = edgeResidual(edge);
    const Matrix6d core = se3RightJacobianInverse(r0) * se3Adjoint(pose(edge.to).inverse());
    j_to = core;
    j_from = -core;
}

double PoseGraph::chi2() const {
    double sum = 0.0;
    for (const PoseGraphEdge& e : edges_) {
        const Vector6d r = edgeResidual(e);
        sum += r.dot(e.information * r);
    }
    return sum;
}

OptimizeReport PoseGraph::optimize(int max_iterations, double eps) {
    if (fixed_.empty()) throw std::logic_error("optimize: no fixed node");

    // Connectivity check from the fixed set over undirected edges.
    {
        std::set<int> reached = fixed_;
        std::vector<int> stack(fixed_.begin(), fixed_.end());
        std::multimap<int, int> adjacency;
        for (const PoseGraphEdge& e : edges_) {
            adjacency.emplace(e.from, e.to);
            adjacency.emplace(e.to, e.from);
        }
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            auto [lo, hi] = adjacency.equal_range(id);
            for (auto it = lo; it != hi; ++it) {
                if (reached.insert(it->second).second) stack.push_back(it->second);
            }
        }
        if (reached.size() != nodes_.size()) {
            std::ostringstream msg;
            msg << "optimize: nodes not connected to a fixed node:";
            for (const auto& [id, p] : nodes_) {
                if (!reached.count(id)) msg << ' ' << id;
            }
            throw std::runtime_error(msg.str());
        }
    }

    // State indexing over free nodes only.
    std::map<int, int> index;
    for (const auto& [id, p] : nodes_) {
        if (!fixed_.count(id)) index.emplace(id, static_cast<int>(index.size()));
    }

    OptimizeReport report;
    report.initial_chi2 = chi2();
    report.final_chi2 = report.initial_chi2;
    if (index.empty()) {
        report.converged = true;
        return report;
    }

    const int dim = static_cast<int>(index.size()) * 6;
    double lambda = 1e-6;
    double current_chi2 = report.initial_chi2;

    std::vector<Eigen::Triplet<double>> triplets;
    for (int iter = 0; iter < max_iterations; ++iter) {
        triplets.clear();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
        for (const PoseGraphEdge& e : edges_) {
            Matrix6d j_from, j_to;
            edgeJacobians(e, j_from, j_to);
            const Vector6d r = edgeResidual(e);
            const bool free_from = index.count(e.from) != 0;
            const bool free_to = index.count(e.to) != 0;
            const int idx_from = free_from ? index.at(e.from) * 6 : -1;
            const int idx_to = free_to ? index.at(e.to) * 6 : -1;

            if (free_from) {
                const Matrix6d h = j_from.transpose() * e.information * j_from;
                for (int a = 0; a < 6; ++a)
                    for (int c = 0; c < 6; ++c)
                        triplets.emplace_back(idx_from + a, idx_from + c, h(a, c));
                b.segment<6>(idx_from) -= j_from.transpose() * e.information * r;
            }
            if (free_to) {
                const Matrix6d h = j_to.transpose() * e.information * j_to;
                for (int a = 0; a < 6; ++a)
                    for (int c = 0; c < 6; ++c)
                        triplets.emplace_back(idx_to + a, idx_to + c, h(a, c));
                b.segment<6>(idx_to) -= j_to.transpose() * e.information * r;
            }
            if (free_from && free_to) {
                const Matrix6d h = j_from.transpose() * e.information * j_to;
                for (int a = 0; a < 6; ++a)
                    for (int c = 0; c < 6; ++c) {
                        triplets.emplace_back(idx_from + a, idx_to + c, h(a, c));
                        triplets.emplace_back(idx_to + c, idx_from + a, h(a, c));
                    }
            }
        }

        Eigen::SparseMatrix<double> h(dim, dim);
        h.setFromTriplets(triplets.begin(), triplets.end());

        bool accepted = false;
        for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
            // Marquardt damping on the diagonal.
            Eigen::SparseMatrix<double> damped = h;
            for (int d = 0; d < dim; ++d) {
                damped.coeffRef(d, d) = h.coeff(d, d) * (1.0 + lambda) + 1e-12;
            }
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
            if (solver.info() != Eigen::Success) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd delta = solver.solve(b);
            if (solver.info() != Eigen::Success || !delta.allFinite()) {
                lambda *= 10.0;
                continue;
            }

            // Candidate state.
            std::map<int, Pose> backup = nodes_;
            for (const auto& [id, slot] : index) {
                nodes_.at(id) = se3Exp(delta.segment<6>(slot * 6)) * nodes_.at(id);
            }
            const double candidate_chi2 = chi2();
            if (candidate_chi2 <= current_chi2) {
                accepted = true;
                lambda = std::max(lambda * 0.5, 1e-12);
                const double drop = current_chi2 - candidate_chi2;
                current_chi2 = candidate_chi2;
                report.chi2_history.push_back(current_chi2);
                ++report.iterations;
                if (drop < eps * std::max(current_chi2, 1.0) || delta.norm() < 1e-12) {
                    report.converged = true;
                }
            } else {
                nodes_ = std::move(backup);
                lambda *= 10.0;
            }
        }
        if (!accepted) {
            report.converged = true;  // no descent direction left
            break;
        }
        if (report.converged) break;
    }

    report.final_chi2 = current_chi2;
    return report;
}

std::string PoseGraph::toG2o() const {
    std::ostringstream out;
    char line[512];
    for (const auto& [id, p] : nodes_) {
        std::snprintf(line, sizeof(line),
                      "VERTEX_SE3:QUAT %d %.12g %.12g %.12g %.12g %.12g %.12g %.12g\n", id,
                      p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.x(),
                      p.rotation.y(), p.rotation.z(), p.rotation.w());
        out << line;
    }
    for (int id : fixed_) out << "FIX " << id << '\n';
    for (const PoseGraphEdge& e : edges_) {
        const Pose& m = e.measurement;
        std::snprintf(line, sizeof(line),
                      "EDGE_SE3:QUAT %d %d %.12g %.12g %.12g %.12g %.12g %.12g %.12g", e.from,
                      e.to, m.translation.x(), m.translation.y(), m.translation.z(),
                      m.rotation.x(), m.rotation.y(), m.rotation.z(), m.rotation.w());
        out << line;
        // g2o stores the upper triangle of the information matrix in
        // (x y z qx qy qz) block order; ours is [omega; v], so permute.
        Matrix6d info = Matrix6d::Zero();
        info.block<3, 3>(0, 0) = e.information.block<3, 3>(3, 3);
        info.block<3, 3>(0, 3) = e.information.block<3, 3>(3, 0);
        info.block<3, 3>(3, 0) = e.information.block<3, 3>(0, 3);
        info.block<3, 3>(3, 3) = e.information.block<3, 3>(0, 0);
        for (int a = 0; a < 6; ++a) {
            for (int c = a; c < 6; ++c) {
                std::snprintf(line, sizeof(line), " %.12g", info(a, c));
                out << line;
            }
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace svox
