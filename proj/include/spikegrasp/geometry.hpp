#pragma once

#include <cmath>

namespace spikegrasp {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
          a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  return n > 0.0 ? v / n : Vec3{0, 0, 0};
}

// Row-major 3x3 matrix. Columns of a rotation are the rotated frame's basis
// vectors expressed in the parent frame.
struct Mat3 {
  double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }

  static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 r;
    r.m[0] = c0.x;
    r.m[1] = c1.x;
    r.m[2] = c2.x;
    r.m[3] = c0.y;
    r.m[4] = c1.y;
    r.m[5] = c2.y;
    r.m[6] = c0.z;
    r.m[7] = c1.z;
    r.m[8] = c2.z;
    return r;
  }

  Vec3 col(int j) const { return {m[j], m[3 + j], m[6 + j]}; }
  Vec3 row(int i) const { return {m[3 * i], m[3 * i + 1], m[3 * i + 2]}; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
        r.m[3 * i + j] = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[3 * i + j] = m[3 * j + i];
    return r;
  }

  double trace() const { return m[0] + m[4] + m[8]; }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

// Rotation about an arbitrary unit axis (Rodrigues).
inline Mat3 rotation_about(const Vec3& axis, double angle) {
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Vec3 a = normalized(axis);
  Mat3 r;
  r.m[0] = t * a.x * a.x + c;
  r.m[1] = t * a.x * a.y - s * a.z;
  r.m[2] = t * a.x * a.z + s * a.y;
  r.m[3] = t * a.x * a.y + s * a.z;
  r.m[4] = t * a.y * a.y + c;
  r.m[5] = t * a.y * a.z - s * a.x;
  r.m[6] = t * a.x * a.z - s * a.y;
  r.m[7] = t * a.y * a.z + s * a.x;
  r.m[8] = t * a.z * a.z + c;
  return r;
}

inline Mat3 rotation_z(double angle) {
  return rotation_about(Vec3{0, 0, 1}, angle);
}

// Geodesic distance on SO(3): angle of R1^T R2.
inline double rotation_geodesic(const Mat3& r1, const Mat3& r2) {
  double c = ((r1.transposed() * r2).trace() - 1.0) * 0.5;
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return std::acos(c);
}

// Rigid transform: p_parent = R * p_local + t.
struct Pose {
  Mat3 R;
  Vec3 t;

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  Vec3 apply_inverse(const Vec3& p) const { return R.transposed() * (p - t); }
  Vec3 rotate(const Vec3& v) const { return R * v; }
  Vec3 rotate_inverse(const Vec3& v) const { return R.transposed() * v; }

  Pose inverse() const {
    Mat3 rt = R.transposed();
    return Pose{rt, -(rt * t)};
  }
};

inline double deg_to_rad(double d) {
  return d * 0.017453292519943295769236907684886;
}

}  // namespace spikegrasp
