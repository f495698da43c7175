#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spikegrasp/config.hpp"
#include "spikegrasp/geometry.hpp"

namespace spikegrasp::scene {

enum class ShapeKind { sphere, box, cylinder };
enum class CameraSide { left, right };

// Geometric primitive with a world pose. `size` meaning per kind:
//   sphere:   x = radius
//   box:      x,y,z = half-extents
//   cylinder: x = radius, z = half-height (axis = local z)
struct Primitive {
  ShapeKind kind = ShapeKind::sphere;
  Pose pose;
  Vec3 size{0.02, 0.02, 0.02};
  double albedo = 0.8;
};

// Rectified stereo pair: the right camera differs from the left only by a
// translation along the left camera's x axis.
struct StereoRig {
  double focal_px = 100.0;
  double baseline = 0.10;
  int height = 64;
  int width = 64;
  Pose left_pose;  // camera-to-world; camera x right, y down, z forward

  double cx() const { return 0.5 * (width - 1); }
  double cy() const { return 0.5 * (height - 1); }

  Pose camera_pose(CameraSide side) const {
    if (side == CameraSide::left) return left_pose;
    Pose p = left_pose;
    p.t = p.t + p.R.col(0) * baseline;
    return p;
  }

  // Ray through the pixel centre, in world coordinates.
  void pixel_ray(CameraSide side, double px, double py, Vec3& origin,
                 Vec3& dir) const;

  // Camera-frame point for pixel (px,py) at depth z (left camera).
  Vec3 backproject(double px, double py, double z) const {
    return Vec3{(px - cx()) / focal_px * z, (py - cy()) / focal_px * z, z};
  }

  double disparity_for_depth(double z) const {
    return focal_px * baseline / z;
  }
};

struct Lighting {
  Vec3 direction{0.3, 0.25, -0.9};  // travel direction of the light
  double ambient_background = 0.05;
  double ambient_light = 0.25;
  double intensity = 0.9;
};

struct SceneDescription {
  std::uint64_t seed = 0;
  double table_height = 0.0;
  StereoRig rig;
  Lighting lighting;
  std::vector<Primitive> objects;
  std::uint64_t config_hash = 0;
};

struct LuminanceField {
  int height = 0, width = 0;
  std::vector<double> values;  // row-major irradiance, >= 0
  double timestamp = 0.0;
};

struct ObjectMask {
  int height = 0, width = 0;
  std::vector<int> labels;  // 0 = background, else 1-based object id
};

// Subset of PipelineConfig needed by generation/shading.
struct SceneConfig {
  int image_height = 64, image_width = 64;
  double focal_px = 100.0, baseline = 0.10;
  double camera_height = 0.36, camera_back = 0.34;
  double table_half_extent = 0.22, table_height = 0.0;
  double size_min = 0.012, size_max = 0.032;
  double albedo_min = 0.35, albedo_max = 0.95;
  double overlap_tolerance = 0.001;
  int placement_retries = 100;
  Lighting lighting;

  SceneConfig() = default;
  explicit SceneConfig(const PipelineConfig& c);
};

// --- geometric queries -----------------------------------------------------

struct RayHit {
  double t = 0.0;
  Vec3 point;   // world
  Vec3 normal;  // world, outward, unit
};

double signed_distance(const Primitive& prim, const Vec3& world_point);
std::optional<RayHit> intersect(const Primitive& prim, const Vec3& origin,
                                const Vec3& dir);

struct SceneHit {
  int object_index = -1;  // -1 = miss
  RayHit hit;
};
SceneHit raycast(const SceneDescription& scene, const Vec3& origin,
                 const Vec3& dir);

double bounding_radius(const Primitive& prim);

// Deterministic structured surface samples with outward normals.
struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};
std::vector<SurfaceSample> surface_samples(const Primitive& prim,
                                           int approx_count);

// Pairwise interpenetration check by signed-distance sampling.
bool overlap_ok(const SceneDescription& scene, double tolerance,
                int samples_per_object);

// --- operations --------------------------------------------------------------

SceneDescription generate_scene(std::uint64_t seed, int n_objects,
                                const SceneConfig& config);
LuminanceField render_luminance(const SceneDescription& scene,
                                CameraSide camera);
ObjectMask render_mask(const SceneDescription& scene, CameraSide camera);

// Camera-frame z of the nearest hit per pixel, 0 where the ray misses.
// Ground-truth side only; inference back-projects through the hidden state.
std::vector<double> render_depth(const SceneDescription& scene,
                                 CameraSide camera);

// --- scene file --------------------------------------------------------------

void save_scene(const SceneDescription& scene, const std::string& path);
SceneDescription load_scene(const std::string& path);

}  // namespace spikegrasp::scene
