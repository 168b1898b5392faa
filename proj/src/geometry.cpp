#include "mstack/geometry.hpp"

#include <cmath>
#include <numbers>

namespace mstack {

namespace {
constexpr double kPi = std::numbers::pi;
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

Mat3 rot_x(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix();
}

Mat3 rot_y(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

Mat3 rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

double wrap_heading(double eta) {
  double r = std::fmod(eta + kPi, 2.0 * kPi);
  if (r <= 0.0) {
    r += 2.0 * kPi;
  }
  return r - kPi;
}

double heading_of(const Mat3& rotation) {
  const Vec3 bx = rotation.col(0);
  const double horizontal = std::hypot(bx.x(), bx.y());
  if (horizontal <= 1e-6) {
    throw DegenerateHeading("body x-axis is vertical, heading undefined");
  }
  return wrap_heading(std::atan2(bx.y(), bx.x()));
}

Vec3 so3_error(const Mat3& rotation, const Mat3& desired) {
  return 0.5 * vee(rotation.transpose() * desired -
                   desired.transpose() * rotation);
}

Mat3 orthonormalized(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

bool is_rotation(const Mat3& m, double tol) {
  const Mat3 gram = m.transpose() * m;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  return std::abs(m.determinant() - 1.0) <= tol;
}

Mat3 rotation_from_thrust_heading(const Vec3& thrust_dir, double heading) {
  const Vec3 b3 = thrust_dir.normalized();
  if (std::abs(b3.z()) < 1e-9) {
    throw DegenerateHeading("thrust direction horizontal, heading frame undefined");
  }
  // b1 lies in the plane orthogonal to b3 with its horizontal projection at
  // exactly the requested azimuth.
  const double ch = std::cos(heading);
  const double sh = std::sin(heading);
  const double z = -(b3.x() * ch + b3.y() * sh) / b3.z();
  const Vec3 b1 = Vec3(ch, sh, z).normalized();
  const Vec3 b2 = b3.cross(b1);
  Mat3 r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b3;
  return r;
}

}  // namespace mstack
