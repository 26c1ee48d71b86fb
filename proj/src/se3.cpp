#include "svox/se3.hpp"

#include <cmath>

namespace svox {

namespace {
constexpr double kTiny = 1e-9;
}

Eigen::Matrix4d Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotationMatrix();
    m.block<3, 1>(0, 3) = translation;
    return m;
}

Pose Pose::fromMatrix(const Eigen::Matrix4d& m) {
    Pose p;
    p.rotation = Eigen::Quaterniond(Eigen::Matrix3d(m.block<3, 3>(0, 0))).normalized();
    p.translation = m.block<3, 1>(0, 3);
    return p;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d s;
    s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return s;
}

Eigen::Quaterniond so3Exp(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    if (theta < kTiny) {
        Eigen::Quaterniond q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
        return q.normalized();
    }
    return Eigen::Quaterniond(Eigen::AngleAxisd(theta, omega / theta));
}

Eigen::Vector3d so3Log(const Eigen::Quaterniond& q) {
    const Eigen::AngleAxisd aa(q.normalized());
    return aa.angle() * aa.axis();
}

namespace {

/// V(omega) with t = V * v in Exp([omega; v]).
Eigen::Matrix3d se3V(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    const Eigen::Matrix3d w = skew(omega);
    if (theta < kTiny) {
        return Eigen::Matrix3d::Identity() + 0.5 * w + w * w / 6.0;
    }
    const double t2 = theta * theta;
    return Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / t2 * w +
           (theta - std::sin(theta)) / (t2 * theta) * w * w;
}

}  // namespace

Pose se3Exp(const Vector6d& xi) {
    const Eigen::Vector3d omega = xi.head<3>();
    const Eigen::Vector3d v = xi.tail<3>();
    return Pose{so3Exp(omega), se3V(omega) * v};
}

Vector6d se3Log(const Pose& pose) {
    Vector6d xi;
    const Eigen::Vector3d omega = so3Log(pose.rotation);
    xi.head<3>() = omega;
    // V(omega) is the SO(3) left Jacobian, so its inverse is reused here.
    xi.tail<3>() = so3LeftJacobianInverse(omega) * pose.translation;
    return xi;
}

Matrix6d se3Adjoint(const Pose& pose) {
    const Eigen::Matrix3d r = pose.rotationMatrix();
    Matrix6d ad = Matrix6d::Zero();
    ad.block<3, 3>(0, 0) = r;
    ad.block<3, 3>(3, 0) = skew(pose.translation) * r;
    ad.block<3, 3>(3, 3) = r;
    return ad;
}

Eigen::Matrix3d so3LeftJacobianInverse(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    const Eigen::Matrix3d w = skew(omega);
    if (theta < kTiny) {
        return Eigen::Matrix3d::Identity() - 0.5 * w + w * w / 12.0;
    }
    const double t2 = theta * theta;
    const double coeff = 1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    return Eigen::Matrix3d::Identity() - 0.5 * w + coeff * w * w;
}

namespace {

/// Q block of the SE(3) left Jacobian (Barfoot's closed form), tangent
/// ordering [omega; v].
Eigen::Matrix3d se3JacobianQ(const Eigen::Vector3d& omega, const Eigen::Vector3d& v) {
    const Eigen::Matrix3d W = skew(omega);
    const Eigen::Matrix3d V = skew(v);
    const double theta = omega.norm();

    double c1, c2, c3;  // series-safe coefficients
    if (theta < 1e-4) {
        const double t2 = theta * theta;
        c1 = 1.0 / 6.0 - t2 / 120.0;
        c2 = -1.0 / 24.0 + t2 / 720.0;
        c3 = -1.0 / 120.0;
    } else {
        const double t2 = theta * theta;
        const double t3 = t2 * theta;
        const double st = std::sin(theta);
        const double ct = std::cos(theta);
        c1 = (theta - st) / t3;
        c2 = (1.0 - 0.5 * t2 - ct) / (t2 * t2);
        c3 = 0.5 * (c2 - 3.0 * (theta - st - t3 / 6.0) / (t3 * t2));
    }

    return 0.5 * V + c1 * (W * V + V * W + W * V * W) -
           c2 * (W * W * V + V * W * W - 3.0 * W * V * W) - c3 * (W * V * W * W + W * W * V * W);
}

}  // namespace

Matrix6d se3LeftJacobianInverse(const Vector6d& xi) {
    const Eigen::Vector3d omega = xi.head<3>();
    const Eigen::Vector3d v = xi.tail<3>();
    const Eigen::Matrix3d jinv = so3LeftJacobianInverse(omega);
    const Eigen::Matrix3d q = se3JacobianQ(omega, v);
    Matrix6d out = Matrix6d::Zero();
    out.block<3, 3>(0, 0) = jinv;
    out.block<3, 3>(3, 3) = jinv;
    out.block<3, 3>(3, 0) = -jinv * q * jinv;
    return out;
}

Matrix6d se3RightJacobianInverse(const Vector6d& xi) { return se3LeftJacobianInverse(-xi); }

double rotationAngle(const Pose& a, const Pose& b) {
    return Eigen::AngleAxisd(a.rotation.conjugate() * b.rotation).angle();
}

}  // namespace svox
