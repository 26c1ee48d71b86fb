#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "svox/types.hpp"

namespace svox {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rigid transform. Composition is pose-on-point: world = rotation * p + translation.
struct Pose {
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose identity() { return Pose{}; }

    Point3 operator*(const Point3& p) const { return rotation * p + translation; }

    Pose operator*(const Pose& other) const {
        return Pose{(rotation * other.rotation).normalized(),
                    rotation * other.translation + translation};
    }

    Pose inverse() const {
        const Eigen::Quaterniond inv = rotation.conjugate();
        return Pose{inv, -(inv * translation)};
    }

    Eigen::Matrix3d rotationMatrix() const { return rotation.toRotationMatrix(); }

    Eigen::Matrix4d matrix() const;
    static Pose fromMatrix(const Eigen::Matrix4d& m);
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// SO(3) exponential: axis-angle vector to rotation.
Eigen::Quaterniond so3Exp(const Eigen::Vector3d& omega);

/// SO(3) logarithm: rotation to axis-angle vector.
Eigen::Vector3d so3Log(const Eigen::Quaterniond& q);

/// Tangent ordering is [omega; v]: rotation block first, translation second.
Pose se3Exp(const Vector6d& xi);
Vector6d se3Log(const Pose& pose);

/// Adjoint of X: Exp(Ad_X xi) == X * Exp(xi) * X^-1.
Matrix6d se3Adjoint(const Pose& pose);

/// Inverse left Jacobian of SO(3).
Eigen::Matrix3d so3LeftJacobianInverse(const Eigen::Vector3d& omega);

/// Inverse left/right Jacobians of SE(3) at xi = [omega; v].
Matrix6d se3LeftJacobianInverse(const Vector6d& xi);
Matrix6d se3RightJacobianInverse(const Vector6d& xi);

/// Geodesic rotation angle between two poses, radians.
double rotationAngle(const Pose& a, const Pose& b);

}  // namespace svox
