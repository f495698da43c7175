#include "spikegrasp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spikegrasp/error.hpp"
#include "spikegrasp/io.hpp"
#include "spikegrasp/parallel.hpp"
#include "spikegrasp/rng.hpp"

namespace spikegrasp::scene {

SceneConfig::SceneConfig(const PipelineConfig& c) {
  image_height = c.image_height;
  image_width = c.image_width;
  focal_px = c.focal_px;
  baseline = c.baseline;
  camera_height = c.camera_height;
  camera_back = c.camera_back;
  table_half_extent = c.table_half_extent;
  table_height = c.table_height;
  size_min = c.size_min;
  size_max = c.size_max;
  albedo_min = c.albedo_min;
  albedo_max = c.albedo_max;
  overlap_tolerance = c.overlap_tolerance;
  placement_retries = c.placement_retries;
  lighting.direction = Vec3{c.light_dir_x, c.light_dir_y, c.light_dir_z};
  lighting.ambient_background = c.ambient_background;
  lighting.ambient_light = c.ambient_light;
  lighting.intensity = c.light_intensity;
}

void StereoRig::pixel_ray(CameraSide side, double px, double py, Vec3& origin,
                          Vec3& dir) const {
  Pose pose = camera_pose(side);
  Vec3 d_cam{(px - cx()) / focal_px, (py - cy()) / focal_px, 1.0};
  origin = pose.t;
  dir = normalized(pose.R * d_cam);
}

// -------------------------------------------------------------------------
// signed distances (exact for all three primitives)
// -------------------------------------------------------------------------

double signed_distance(const Primitive& prim, const Vec3& world_point) {
  Vec3 p = prim.pose.apply_inverse(world_point);
  switch (prim.kind) {
    case ShapeKind::sphere:
      return norm(p) - prim.size.x;
    case ShapeKind::box: {
      Vec3 q{std::fabs(p.x) - prim.size.x, std::fabs(p.y) - prim.size.y,
             std::fabs(p.z) - prim.size.z};
      Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
      double outside = norm(qp);
      double inside = std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
      return outside + inside;
    }
    case ShapeKind::cylinder: {
      double dr = std::sqrt(p.x * p.x + p.y * p.y) - prim.size.x;
      double dz = std::fabs(p.z) - prim.size.z;
      double ox = std::max(dr, 0.0), oz = std::max(dz, 0.0);
      double outside = std::sqrt(ox * ox + oz * oz);
      double inside = std::min(std::max(dr, dz), 0.0);
      return outside + inside;
    }
  }
  return 0.0;
}

// -------------------------------------------------------------------------
// ray intersections
// -------------------------------------------------------------------------

static std::optional<RayHit> hit_sphere(double r, const Vec3& o,
                                        const Vec3& d) {
  double b = dot(o, d);
  double c = dot(o, o) - r * r;
  double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  double s = std::sqrt(disc);
  double t = -b - s;
  if (t < 1e-9) t = -b + s;
  if (t < 1e-9) return std::nullopt;
  Vec3 p = o + d * t;
  return RayHit{t, p, normalized(p)};
}

static std::optional<RayHit> hit_box(const Vec3& h, const Vec3& o,
                                     const Vec3& d) {
  double tmin = -1e30, tmax = 1e30;
  int axis_min = -1;
  const double oa[3] = {o.x, o.y, o.z};
  const double da[3] = {d.x, d.y, d.z};
  const double ha[3] = {h.x, h.y, h.z};
  for (int a = 0; a < 3; ++a) {
    if (std::fabs(da[a]) < 1e-14) {
      if (std::fabs(oa[a]) > ha[a]) return std::nullopt;
      continue;
    }
    double inv = 1.0 / da[a];
    double t0 = (-ha[a] - oa[a]) * inv;
    double t1 = (ha[a] - oa[a]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis_min = a;
    }
    if (t1 < tmax) tmax = t1;
    if (tmin > tmax) return std::nullopt;
  }
  double t = tmin;
  int axis = axis_min;
  if (t < 1e-9) {
    // origin inside or behind the entry face: exit hit, normal from exit face
    t = tmax;
    if (t < 1e-9) return std::nullopt;
    axis = -1;
  }
  Vec3 p = o + d * t;
  Vec3 n{0, 0, 0};
  const double pa[3] = {p.x, p.y, p.z};
  if (axis < 0) {
    // choose the face the exit point lies on
    double best = -1e30;
    for (int a = 0; a < 3; ++a) {
      double v = std::fabs(pa[a]) - ha[a];
      if (v > best) {
        best = v;
        axis = a;
      }
    }
  }
  if (axis == 0) n = Vec3{pa[0] > 0 ? 1.0 : -1.0, 0, 0};
  if (axis == 1) n = Vec3{0, pa[1] > 0 ? 1.0 : -1.0, 0};
  if (axis == 2) n = Vec3{0, 0, pa[2] > 0 ? 1.0 : -1.0};
  return RayHit{t, p, n};
}

static std::optional<RayHit> hit_cylinder(double r, double hz, const Vec3& o,
                                          const Vec3& d) {
  double best_t = 1e30;
  Vec3 best_n;
  bool found = false;

  double a = d.x * d.x + d.y * d.y;
  if (a > 1e-14) {
    double b = o.x * d.x + o.y * d.y;
    double c = o.x * o.x + o.y * o.y - r * r;
    double disc = b * b - a * c;
    if (disc >= 0.0) {
      double s = std::sqrt(disc);
      for (double t : {(-b - s) / a, (-b + s) / a}) {
        if (t < 1e-9 || t >= best_t) continue;
        double z = o.z + t * d.z;
        if (std::fabs(z) <= hz) {
          best_t = t;
          Vec3 p = o + d * t;
          best_n = normalized(Vec3{p.x, p.y, 0.0});
          found = true;
        }
      }
    }
  }
  if (std::fabs(d.z) > 1e-14) {
    for (double cap : {hz, -hz}) {
      double t = (cap - o.z) / d.z;
      if (t < 1e-9 || t >= best_t) continue;
      double x = o.x + t * d.x, y = o.y + t * d.y;
      if (x * x + y * y <= r * r) {
        best_t = t;
        best_n = Vec3{0, 0, cap > 0 ? 1.0 : -1.0};
        found = true;
      }
    }
  }
  if (!found) return std::nullopt;
  return RayHit{best_t, o + d * best_t, best_n};
}

std::optional<RayHit> intersect(const Primitive& prim, const Vec3& origin,
                                const Vec3& dir) {
  Vec3 o = prim.pose.apply_inverse(origin);
  Vec3 d = prim.pose.rotate_inverse(dir);
  std::optional<RayHit> local;
  switch (prim.kind) {
    case ShapeKind::sphere:
      local = hit_sphere(prim.size.x, o, d);
      break;
    case ShapeKind::box:
      local = hit_box(prim.size, o, d);
      break;
    case ShapeKind::cylinder:
      local = hit_cylinder(prim.size.x, prim.size.z, o, d);
      break;
  }
  if (!local) return std::nullopt;
  return RayHit{local->t, prim.pose.apply(local->point),
                prim.pose.rotate(local->normal)};
}

SceneHit raycast(const SceneDescription& scene, const Vec3& origin,
                 const Vec3& dir) {
  SceneHit out;
  double best = 1e30;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    auto h = intersect(scene.objects[i], origin, dir);
    if (h && h->t < best) {
      best = h->t;
      out.object_index = static_cast<int>(i);
      out.hit = *h;
    }
  }
  return out;
}

double bounding_radius(const Primitive& prim) {
  switch (prim.kind) {
    case ShapeKind::sphere:
      return prim.size.x;
    case ShapeKind::box:
      return norm(prim.size);
    case ShapeKind::cylinder:
      return std::sqrt(prim.size.x * prim.size.x + prim.size.z * prim.size.z);
  }
  return 0.0;
}

// -------------------------------------------------------------------------
// surface sampling
// -------------------------------------------------------------------------

std::vector<SurfaceSample> surface_samples(const Primitive& prim,
                                           int approx_count) {
  std::vector<SurfaceSample> out;
  out.reserve(static_cast<std::size_t>(approx_count));
  const Pose& pose = prim.pose;

  auto push = [&](const Vec3& p_local, const Vec3& n_local) {
    out.push_back({pose.apply(p_local), pose.rotate(n_local)});
  };

  switch (prim.kind) {
    case ShapeKind::sphere: {
      // Fibonacci spiral
      double r = prim.size.x;
      double golden = 2.399963229728653;
      for (int i = 0; i < approx_count; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / approx_count;
        double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        double a = golden * i;
        Vec3 n{rho * std::cos(a), rho * std::sin(a), z};
        push(n * r, n);
      }
      break;
    }
    case ShapeKind::box: {
      int per_face = std::max(1, approx_count / 6);
      int g = std::max(1, static_cast<int>(std::round(std::sqrt(
                              static_cast<double>(per_face)))));
      Vec3 h = prim.size;
      for (int face = 0; face < 6; ++face) {
        int axis = face / 2;
        double sign = (face % 2) ? -1.0 : 1.0;
        for (int i = 0; i < g; ++i)
          for (int j = 0; j < g; ++j) {
            double u = (i + 0.5) / g * 2.0 - 1.0;
            double v = (j + 0.5) / g * 2.0 - 1.0;
            Vec3 p, n{0, 0, 0};
            if (axis == 0) {
              p = Vec3{sign * h.x, u * h.y, v * h.z};
              n.x = sign;
            } else if (axis == 1) {
              p = Vec3{u * h.x, sign * h.y, v * h.z};
              n.y = sign;
            } else {
              p = Vec3{u * h.x, v * h.y, sign * h.z};
              n.z = sign;
            }
            push(p, n);
          }
      }
      break;
    }
    case ShapeKind::cylinder: {
      double r = prim.size.x, hz = prim.size.z;
      int side = approx_count * 2 / 3;
      int g = std::max(2, static_cast<int>(std::round(std::sqrt(
                              static_cast<double>(side)))));
      for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
          double a = (i + 0.5) / g * 6.283185307179586;
          double z = ((j + 0.5) / g * 2.0 - 1.0) * hz;
          Vec3 n{std::cos(a), std::sin(a), 0.0};
          push(Vec3{n.x * r, n.y * r, z}, n);
        }
      int cap = std::max(1, approx_count / 6);
      int gc = std::max(1, static_cast<int>(std::round(
                               std::sqrt(static_cast<double>(cap)))));
      for (double sign : {1.0, -1.0})
        for (int i = 0; i < gc; ++i)
          for (int j = 0; j < gc; ++j) {
            double x = ((i + 0.5) / gc * 2.0 - 1.0) * r;
            double y = ((j + 0.5) / gc * 2.0 - 1.0) * r;
            if (x * x + y * y > r * r) continue;
            push(Vec3{x, y, sign * hz}, Vec3{0, 0, sign});
          }
      break;
    }
  }
  return out;
}

bool overlap_ok(const SceneDescription& scene, double tolerance,
                int samples_per_object) {
  for (std::size_t a = 0; a < scene.objects.size(); ++a) {
    auto pts = surface_samples(scene.objects[a], samples_per_object);
    for (std::size_t b = 0; b < scene.objects.size(); ++b) {
      if (a == b) continue;
      for (const auto& s : pts)
        if (signed_distance(scene.objects[b], s.point) < -tolerance)
          return false;
    }
  }
  return true;
}

// -------------------------------------------------------------------------
// generation
// -------------------------------------------------------------------------

static StereoRig make_rig(const SceneConfig& cfg) {
  StereoRig rig;
  rig.focal_px = cfg.focal_px;
  rig.baseline = cfg.baseline;
  rig.height = cfg.image_height;
  rig.width = cfg.image_width;

  // aim from the baseline midpoint so the table centre stays visible in
  // both views, then offset the left camera half a baseline
  Vec3 mid{0.0, -cfg.camera_back, cfg.table_height + cfg.camera_height};
  Vec3 target{0.0, 0.0, cfg.table_height + 0.02};
  Vec3 fwd = normalized(target - mid);
  Vec3 up{0, 0, 1};
  Vec3 xc = normalized(cross(fwd, up));  // horizontal: rectified pair
  Vec3 yc = cross(fwd, xc);              // points downward
  Vec3 pos = mid - xc * (0.5 * cfg.baseline);
  rig.left_pose = Pose{Mat3::from_columns(xc, yc, fwd), pos};
  return rig;
}

SceneDescription generate_scene(std::uint64_t seed, int n_objects,
                                const SceneConfig& config) {
  require(n_objects >= 1, errc::precondition, "n_objects must be >= 1");
  require(config.size_min > 0 && config.size_max >= config.size_min,
          errc::precondition, "invalid size range");

  SceneDescription scene;
  scene.seed = seed;
  scene.table_height = config.table_height;
  scene.rig = make_rig(config);
  scene.lighting = config.lighting;

  Rng rng(seed, /*stream=*/0x5ce2e);
  for (int obj = 0; obj < n_objects; ++obj) {
    bool placed = false;
    for (int attempt = 0; attempt < config.placement_retries && !placed;
         ++attempt) {
      Primitive prim;
      int kind = static_cast<int>(rng.uniform_int(3));
      prim.kind = static_cast<ShapeKind>(kind);
      double s0 = rng.uniform(config.size_min, config.size_max);
      double s1 = rng.uniform(config.size_min, config.size_max);
      double s2 = rng.uniform(config.size_min, config.size_max);
      double yaw = rng.uniform(0.0, 6.283185307179586);
      prim.albedo = rng.uniform(config.albedo_min, config.albedo_max);

      double rest_z = 0.0;
      switch (prim.kind) {
        case ShapeKind::sphere:
          prim.size = Vec3{s0, s0, s0};
          rest_z = s0;
          break;
        case ShapeKind::box:
          prim.size = Vec3{s0, s1, s2};
          rest_z = s2;
          break;
        case ShapeKind::cylinder:
          prim.size = Vec3{s0, s0, s1};
          rest_z = s1;
          break;
      }

      double margin = bounding_radius(prim);
      double span = std::max(0.0, config.table_half_extent - margin);
      double px = rng.uniform(-span, span);
      double py = rng.uniform(-span, span);
      prim.pose.R = rotation_z(yaw);
      prim.pose.t = Vec3{px, py, config.table_height + rest_z};

      // bounding-sphere separation: conservative, guarantees the
      // signed-distance invariant without sampling during generation
      bool ok = true;
      for (const auto& other : scene.objects) {
        double dist = norm(other.pose.t - prim.pose.t);
        if (dist < bounding_radius(other) + margin +
                       config.overlap_tolerance) {
          ok = false;
          break;
        }
      }
      if (ok) {
        scene.objects.push_back(prim);
        placed = true;
      }
    }
    if (!placed) break;  // densest packing reached for this budget
  }

  if (scene.objects.empty())
    fail(errc::placement_failure,
         "no non-overlapping placement found within retry budget");
  return scene;
}

// -------------------------------------------------------------------------
// rendering
// -------------------------------------------------------------------------

static double shade(const SceneDescription& scene, const Primitive& prim,
                    const RayHit& hit) {
  Vec3 to_light = normalized(-scene.lighting.direction);
  double lambert = std::max(0.0, dot(hit.normal, to_light));
  return prim.albedo *
         (scene.lighting.ambient_light + scene.lighting.intensity * lambert);
}

LuminanceField render_luminance(const SceneDescription& scene,
                                CameraSide camera) {
  const StereoRig& rig = scene.rig;
  LuminanceField field;
  field.height = rig.height;
  field.width = rig.width;
  field.values.assign(static_cast<std::size_t>(rig.height) * rig.width,
                      scene.lighting.ambient_background);
  parallel_for(rig.height, [&](int y) {
    for (int x = 0; x < rig.width; ++x) {
      Vec3 o, d;
      rig.pixel_ray(camera, x, y, o, d);
      SceneHit h = raycast(scene, o, d);
      if (h.object_index >= 0)
        field.values[static_cast<std::size_t>(y) * rig.width + x] =
            shade(scene, scene.objects[h.object_index], h.hit);
    }
  });
  return field;
}

ObjectMask render_mask(const SceneDescription& scene, CameraSide camera) {
  const StereoRig& rig = scene.rig;
  ObjectMask mask;
  mask.height = rig.height;
  mask.width = rig.width;
  mask.labels.assign(static_cast<std::size_t>(rig.height) * rig.width, 0);
  parallel_for(rig.height, [&](int y) {
    for (int x = 0; x < rig.width; ++x) {
      Vec3 o, d;
      rig.pixel_ray(camera, x, y, o, d);
      SceneHit h = raycast(scene, o, d);
      if (h.object_index >= 0)
        mask.labels[static_cast<std::size_t>(y) * rig.width + x] =
            h.object_index + 1;
    }
  });
  return mask;
}

std::vector<double> render_depth(const SceneDescription& scene,
                                 CameraSide camera) {
  const StereoRig& rig = scene.rig;
  Pose pose = rig.camera_pose(camera);
  std::vector<double> depth(static_cast<std::size_t>(rig.height) * rig.width,
                            0.0);
  parallel_for(rig.height, [&](int y) {
    for (int x = 0; x < rig.width; ++x) {
      Vec3 o, d;
      rig.pixel_ray(camera, x, y, o, d);
      SceneHit h = raycast(scene, o, d);
      if (h.object_index >= 0)
        depth[static_cast<std::size_t>(y) * rig.width + x] =
            pose.apply_inverse(h.hit.point).z;
    }
  });
  return depth;
}

// -------------------------------------------------------------------------
// scene file
// -------------------------------------------------------------------------

static const char* kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere:
      return "sphere";
    case ShapeKind::box:
      return "box";
    case ShapeKind::cylinder:
      return "cylinder";
  }
  return "sphere";
}

static ShapeKind kind_from(const std::string& s) {
  if (s == "sphere") return ShapeKind::sphere;
  if (s == "box") return ShapeKind::box;
  if (s == "cylinder") return ShapeKind::cylinder;
  fail(errc::io, "unknown shape kind: " + s);
}

static std::string vec_str(const Vec3& v) {
  return format_f64(v.x) + " " + format_f64(v.y) + " " + format_f64(v.z);
}

static std::string mat_str(const Mat3& m) {
  std::string s;
  for (int i = 0; i < 9; ++i) {
    if (i) s += " ";
    s += format_f64(m.m[i]);
  }
  return s;
}

static Vec3 vec_from(const std::vector<double>& v) {
  if (v.size() != 3) fail(errc::io, "expected 3 numbers");
  return Vec3{v[0], v[1], v[2]};
}

static Mat3 mat_from(const std::vector<double>& v) {
  if (v.size() != 9) fail(errc::io, "expected 9 numbers");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m.m[i] = v[i];
  return m;
}

void save_scene(const SceneDescription& scene, const std::string& path) {
  KvFile kv;
  kv.set_i64("format_version", 1);
  kv.set_u64_hex("seed", scene.seed);
  kv.set_u64_hex("config_hash", scene.config_hash);
  kv.set_f64("table_height", scene.table_height);
  kv.set_f64("camera.focal_px", scene.rig.focal_px);
  kv.set_f64("camera.baseline", scene.rig.baseline);
  kv.set_i64("camera.height", scene.rig.height);
  kv.set_i64("camera.width", scene.rig.width);
  kv.set("camera.position", vec_str(scene.rig.left_pose.t));
  kv.set("camera.rotation", mat_str(scene.rig.left_pose.R));
  kv.set("light.direction", vec_str(scene.lighting.direction));
  kv.set_f64("light.ambient_background", scene.lighting.ambient_background);
  kv.set_f64("light.ambient_light", scene.lighting.ambient_light);
  kv.set_f64("light.intensity", scene.lighting.intensity);
  kv.set_i64("objects", static_cast<std::int64_t>(scene.objects.size()));
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const Primitive& p = scene.objects[i];
    std::string base = "object." + std::to_string(i) + ".";
    kv.set(base + "kind", kind_name(p.kind));
    kv.set(base + "size", vec_str(p.size));
    kv.set(base + "position", vec_str(p.pose.t));
    kv.set(base + "rotation", mat_str(p.pose.R));
    kv.set_f64(base + "albedo", p.albedo);
  }
  kv.save(path);
}

SceneDescription load_scene(const std::string& path) {
  KvFile kv = KvFile::load(path);
  if (kv.get_i64("format_version") != 1)
    fail(errc::io, "unsupported scene format version");
  SceneDescription scene;
  scene.seed = kv.get_u64_hex("seed");
  scene.config_hash = kv.get_u64_hex("config_hash");
  scene.table_height = kv.get_f64("table_height");
  scene.rig.focal_px = kv.get_f64("camera.focal_px");
  scene.rig.baseline = kv.get_f64("camera.baseline");
  scene.rig.height = static_cast<int>(kv.get_i64("camera.height"));
  scene.rig.width = static_cast<int>(kv.get_i64("camera.width"));
  scene.rig.left_pose.t = vec_from(kv.get_f64_list("camera.position"));
  scene.rig.left_pose.R = mat_from(kv.get_f64_list("camera.rotation"));
  scene.lighting.direction = vec_from(kv.get_f64_list("light.direction"));
  scene.lighting.ambient_background = kv.get_f64("light.ambient_background");
  scene.lighting.ambient_light = kv.get_f64("light.ambient_light");
  scene.lighting.intensity = kv.get_f64("light.intensity");
  int n = static_cast<int>(kv.get_i64("objects"));
  if (n < 1) fail(errc::precondition, "scene file lists no objects");
  for (int i = 0; i < n; ++i) {
    std::string base = "object." + std::to_string(i) + ".";
    Primitive p;
    p.kind = kind_from(kv.get(base + "kind"));
    p.size = vec_from(kv.get_f64_list(base + "size"));
    p.pose.t = vec_from(kv.get_f64_list(base + "position"));
    p.pose.R = mat_from(kv.get_f64_list(base + "rotation"));
    p.albedo = kv.get_f64(base + "albedo");
    scene.objects.push_back(p);
  }
  return scene;
}

}  // namespace spikegrasp::scene
