#include "cdpm/primitives.hpp"

#include <algorithm>
#include <cmath>

#include "cdpm/errors.hpp"

namespace cdpm {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Vec3 gaussian_direction(RandomStream& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.squaredNorm() < 1e-24);
  return v.normalized();
}

// Arc-length element of the ellipse (rx cos t, ry sin t).
double ellipse_ds(double rx, double ry, double t) {
  const double s = std::sin(t), c = std::cos(t);
  return std::sqrt(rx * rx * s * s + ry * ry * c * c);
}

// Perimeter of the ellipse with semi-axes rx, ry (composite Simpson).
double ellipse_perimeter(double rx, double ry) {
  constexpr int kIntervals = 512;  // even
  const double h = kTwoPi / kIntervals;
  double sum = ellipse_ds(rx, ry, 0.0) + ellipse_ds(rx, ry, kTwoPi);
  for (int i = 1; i < kIntervals; ++i)
    sum += ellipse_ds(rx, ry, i * h) * ((i % 2) ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

PrimitiveKind primitive_kind_from_string(const std::string& s) {
  if (s == "sphere") return PrimitiveKind::kSphere;
  if (s == "box") return PrimitiveKind::kBox;
  if (s == "cylinder") return PrimitiveKind::kCylinder;
  throw InvalidInputError("unknown primitive kind '" + s + "'");
}

std::string to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::kSphere: return "sphere";
    case PrimitiveKind::kBox: return "box";
    case PrimitiveKind::kCylinder: return "cylinder";
  }
  return "?";
}

void PrimitiveShape::validate() const {
  if (!(scale.minCoeff() > 0.0))
    throw InvalidInputError("PrimitiveShape: scale components must be positive");
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  if (err.lpNorm<Eigen::Infinity>() > 1e-6)
    throw InvalidInputError("PrimitiveShape: rotation is not orthonormal");
}

RayHit intersect(const PrimitiveShape& shape, const Vec3& origin, const Vec3& dir) {
  // Work in object space: x_obj = R^T x_world.
  const Vec3 o = shape.rotation.transpose() * origin;
  const Vec3 d = shape.rotation.transpose() * dir;
  const Vec3& s = shape.scale;
  RayHit out;

  auto finish = [&](double t, const Vec3& n_obj) {
    out.hit = true;
    out.t = t;
    out.normal_world = (shape.rotation * n_obj).normalized();
  };

  switch (shape.kind) {
    case PrimitiveKind::kSphere: {
      // Unit-sphere space.
      const Vec3 ou = o.cwiseQuotient(s);
      const Vec3 du = d.cwiseQuotient(s);
      const double a = du.squaredNorm();
      const double b = 2.0 * ou.dot(du);
      const double c = ou.squaredNorm() - 1.0;
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) return out;
      const double sq = std::sqrt(disc);
      double t = (-b - sq) / (2.0 * a);
      if (t <= 1e-12) t = (-b + sq) / (2.0 * a);
      if (t <= 1e-12) return out;
      const Vec3 pu = ou + t * du;  // on the unit sphere
      // Implicit gradient of |x/s|^2 = 1.
      finish(t, pu.cwiseQuotient(s));
      break;
    }
    case PrimitiveKind::kBox: {
      double t_near = -1e300, t_far = 1e300;
      int near_axis = -1;
      for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < 1e-15) {
          if (std::abs(o[k]) > s[k]) return out;
          continue;
        }
        double t0 = (-s[k] - o[k]) / d[k];
        double t1 = (s[k] - o[k]) / d[k];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > t_near) {
          t_near = t0;
          near_axis = k;
        }
        t_far = std::min(t_far, t1);
        if (t_near > t_far) return out;
      }
      double t = t_near;
      if (t <= 1e-12) t = t_far;
      if (t <= 1e-12 || t > 1e299 || near_axis < 0) return out;
      const Vec3 p = o + t * d;
      // Outward normal on the face whose slab bounded the entry.
      int axis = near_axis;
      if (t == t_far) {
        // Exiting hit (origin inside); pick the dominant face of p.
        Vec3 rel = p.cwiseQuotient(s).cwiseAbs();
        rel.maxCoeff(&axis);
      }
      Vec3 n = Vec3::Zero();
      n[axis] = (p[axis] >= 0.0) ? 1.0 : -1.0;
      finish(t, n);
      break;
    }
    case PrimitiveKind::kCylinder: {
      const double rx = s.x(), ry = s.y(), hh = s.z();
      double best_t = 1e300;
      Vec3 best_n;
      // Side: (x/rx)^2 + (y/ry)^2 = 1, |z| <= hh.
      {
        const double ox = o.x() / rx, oy = o.y() / ry;
        const double dx = d.x() / rx, dy = d.y() / ry;
        const double a = dx * dx + dy * dy;
        if (a > 1e-30) {
          const double b = 2.0 * (ox * dx + oy * dy);
          const double c = ox * ox + oy * oy - 1.0;
          const double disc = b * b - 4.0 * a * c;
          if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
              if (t <= 1e-12 || t >= best_t) continue;
              const Vec3 p = o + t * d;
              if (std::abs(p.z()) <= hh) {
                best_t = t;
                best_n = Vec3(p.x() / (rx * rx), p.y() / (ry * ry), 0.0);
                break;  // roots are ordered; first valid is nearest
              }
            }
          }
        }
      }
      // Caps: z = +-hh, inside the ellipse.
      if (std::abs(d.z()) > 1e-15) {
        for (double zcap : {hh, -hh}) {
          const double t = (zcap - o.z()) / d.z();
          if (t <= 1e-12 || t >= best_t) continue;
          const Vec3 p = o + t * d;
          const double ex = p.x() / rx, ey = p.y() / ry;
          if (ex * ex + ey * ey <= 1.0) {
            best_t = t;
            best_n = Vec3(0.0, 0.0, zcap > 0.0 ? 1.0 : -1.0);
          }
        }
      }
      if (best_t < 1e299) finish(best_t, best_n);
      break;
    }
  }
  return out;
}

PointCloud sample_surface(const PrimitiveShape& shape, std::size_t n, RandomStream& rng) {
  shape.validate();
  if (n < 1) throw InvalidInputError("sample_surface: n must be >= 1");
  const Vec3& s = shape.scale;
  PointCloud pc(n);

  switch (shape.kind) {
    case PrimitiveKind::kSphere: {
      // Normalized Gaussian direction; when the scale is anisotropic the
      // mapped density is corrected by rejection on the area element
      // |(s_y s_z u_x, s_x s_z u_y, s_x s_y u_z)|.
      const Vec3 w(s.y() * s.z(), s.x() * s.z(), s.x() * s.y());
      const double wmax = w.maxCoeff();
      const bool isotropic = (s.x() == s.y() && s.y() == s.z());
      for (std::size_t i = 0; i < n; ++i) {
        Vec3 u;
        for (;;) {
          u = gaussian_direction(rng);
          if (isotropic) break;
          const double dens = (u.cwiseProduct(w)).norm() / wmax;
          if (rng.uniform() <= dens) break;
        }
        pc[i] = shape.rotation * u.cwiseProduct(s);
      }
      break;
    }
    case PrimitiveKind::kBox: {
      // Face areas for +-x, +-y, +-z.
      const double ax = 4.0 * s.y() * s.z();
      const double ay = 4.0 * s.x() * s.z();
      const double az = 4.0 * s.x() * s.y();
      const double cum[3] = {ax, ax + ay, ax + ay + az};
      for (std::size_t i = 0; i < n; ++i) {
        const double r = rng.uniform() * cum[2];
        const int axis = (r < cum[0]) ? 0 : (r < cum[1] ? 1 : 2);
        const double side = (rng.uniform() < 0.5) ? -1.0 : 1.0;
        Vec3 p;
        p[axis] = side * s[axis];
        const int u = (axis + 1) % 3, v = (axis + 2) % 3;
        p[u] = (2.0 * rng.uniform() - 1.0) * s[u];
        p[v] = (2.0 * rng.uniform() - 1.0) * s[v];
        pc[i] = shape.rotation * p;
      }
      break;
    }
    case PrimitiveKind::kCylinder: {
      const double rx = s.x(), ry = s.y(), hh = s.z();
      const double side_area = 2.0 * hh * ellipse_perimeter(rx, ry);
      const double cap_area = 3.14159265358979323846 * rx * ry;  // each
      const double total = side_area + 2.0 * cap_area;
      const double ds_max = std::max(rx, ry);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = rng.uniform() * total;
        Vec3 p;
        if (r < side_area) {
          double theta;
          do {
            theta = rng.uniform() * kTwoPi;
          } while (rng.uniform() > ellipse_ds(rx, ry, theta) / ds_max);
          p = Vec3(rx * std::cos(theta), ry * std::sin(theta),
                   (2.0 * rng.uniform() - 1.0) * hh);
        } else {
          const double zcap = (r < side_area + cap_area) ? hh : -hh;
          // Uniform on the unit disc, mapped affinely (area-preserving ratio).
          const double rad = std::sqrt(rng.uniform());
          const double ang = rng.uniform() * kTwoPi;
          p = Vec3(rx * rad * std::cos(ang), ry * rad * std::sin(ang), zcap);
        }
        pc[i] = shape.rotation * p;
      }
      break;
    }
  }
  return pc;
}

}  // namespace cdpm
