#include "spikegrasp/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spikegrasp/error.hpp"
#include "spikegrasp/io.hpp"
#include "spikegrasp/parallel.hpp"

namespace spikegrasp::labeler {

static double angle_between(const Vec3& a, const Vec3& b) {
  double c = dot(normalized(a), normalized(b));
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return std::acos(c);
}

bool force_closure(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                   const Vec3& n2, double mu) {
  require(mu > 0, errc::precondition, "friction coefficient must be > 0");
  Vec3 axis = p2 - p1;
  require(norm(axis) > 1e-12, errc::domain,
          "degenerate grasp: coincident contacts");
  axis = normalized(axis);
  double cone = std::atan(mu);
  // outward normals: contact 1 opposes +axis, contact 2 opposes -axis
  double a1 = angle_between(n1, -axis);
  double a2 = angle_between(n2, axis);
  return a1 <= cone && a2 <= cone;
}

ContactPair find_contacts(const GraspPose& grasp,
                          const SceneDescription& scene) {
  const Pose& cam = scene.rig.left_pose;
  Vec3 lat_cam = grasp.rotation.col(0);
  Vec3 center_w = cam.apply(grasp.translation);
  Vec3 lat_w = cam.rotate(lat_cam);

  double half = 0.5 * grasp.width;
  ContactPair contacts;

  // jaws close inward from +/- half width
  Vec3 o1 = center_w - lat_w * half;
  scene::SceneHit h1 = scene::raycast(scene, o1, lat_w);
  Vec3 o2 = center_w + lat_w * half;
  scene::SceneHit h2 = scene::raycast(scene, o2, -lat_w);

  bool hit1 = h1.object_index >= 0 && h1.hit.t <= grasp.width;
  bool hit2 = h2.object_index >= 0 && h2.hit.t <= grasp.width;
  if (!hit1 && !hit2)
    fail(errc::no_contact, "jaws meet no surface");
  if (!hit1 || !hit2) return contacts;  // one-sided: not a closure
  if (h1.object_index != h2.object_index) return contacts;
  if (h1.hit.t + h2.hit.t > grasp.width + 1e-12) return contacts;  // crossed

  contacts.p1 = h1.hit.point;
  contacts.n1 = h1.hit.normal;
  contacts.p2 = h2.hit.point;
  contacts.n2 = h2.hit.normal;
  contacts.object_index = h1.object_index;
  contacts.valid = norm(contacts.p2 - contacts.p1) > 1e-12;
  return contacts;
}

double min_friction(const GraspPose& grasp, const SceneDescription& scene) {
  ContactPair c = find_contacts(grasp, scene);
  if (!c.valid) return std::numeric_limits<double>::infinity();
  Vec3 axis = normalized(c.p2 - c.p1);
  double a1 = angle_between(c.n1, -axis);
  double a2 = angle_between(c.n2, axis);
  double worst = std::max(a1, a2);
  if (worst >= 0.5 * 3.14159265358979323846)
    return std::numeric_limits<double>::infinity();
  return std::tan(worst);
}

std::vector<Vec3> GripperModel::body_samples(double width,
                                             double pitch) const {
  std::vector<Vec3> samples;
  auto sample_box = [&](const Vec3& lo, const Vec3& hi) {
    int nx = std::max(2, static_cast<int>(std::ceil((hi.x - lo.x) / pitch)) + 1);
    int ny = std::max(2, static_cast<int>(std::ceil((hi.y - lo.y) / pitch)) + 1);
    int nz = std::max(2, static_cast<int>(std::ceil((hi.z - lo.z) / pitch)) + 1);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j)
        for (int k = 0; k < nz; ++k)
          samples.push_back(Vec3{
              lo.x + (hi.x - lo.x) * i / (nx - 1),
              lo.y + (hi.y - lo.y) * j / (ny - 1),
              lo.z + (hi.z - lo.z) * k / (nz - 1)});
  };
  double half = 0.5 * width;
  double z_tip = fingertip_overshoot;
  double z_back = z_tip - finger_length;
  // fingers flank the jaw planes at +/- width/2 (x = closing axis,
  // z = approach axis, origin at the grasp centre)
  sample_box(Vec3{half, -0.5 * finger_width, z_back},
             Vec3{half + finger_thickness, 0.5 * finger_width, z_tip});
  sample_box(Vec3{-half - finger_thickness, -0.5 * finger_width, z_back},
             Vec3{-half, 0.5 * finger_width, z_tip});
  // palm sits behind the fingers, spanning them along x
  sample_box(Vec3{-0.5 * palm_y, -0.5 * palm_x, z_back - palm_z},
             Vec3{0.5 * palm_y, 0.5 * palm_x, z_back});
  return samples;
}

int collision_check(const GraspPose& grasp, const SceneDescription& scene,
                    const GripperModel& gripper, double pitch) {
  require(pitch > 0, errc::precondition, "sampling pitch must be > 0");
  const Pose& cam = scene.rig.left_pose;
  for (const Vec3& local : gripper.body_samples(grasp.width, pitch)) {
    Vec3 p_cam = grasp.rotation * local + grasp.translation;
    Vec3 p_world = cam.apply(p_cam);
    if (p_world.z < scene.table_height) return 0;
    for (const auto& prim : scene.objects)
      if (scene::signed_distance(prim, p_world) < 0.0) return 0;
  }
  return 1;
}

// -------------------------------------------------------------------------
// graspness counting (Eq. 10-12 side)
// -------------------------------------------------------------------------

std::vector<double> pointwise_graspness(const GraspCandidateSet& candidates,
                                        double quality_threshold) {
  std::vector<double> out(static_cast<std::size_t>(candidates.n_points), 0.0);
  for (int i = 0; i < candidates.n_points; ++i) {
    std::int64_t passing = 0, total = 0;
    for (int j = 0; j < candidates.n_views; ++j)
      for (int k = 0; k < candidates.per_view; ++k) {
        std::size_t idx = candidates.index(i, j, k);
        ++total;
        if (candidates.quality[idx] > quality_threshold &&
            candidates.collision_free[idx])
          ++passing;
      }
    out[static_cast<std::size_t>(i)] =
        total > 0 ? static_cast<double>(passing) / static_cast<double>(total)
                  : 0.0;
  }
  return out;
}

std::vector<double> viewwise_graspness(const GraspCandidateSet& candidates,
                                       double quality_threshold) {
  std::vector<double> out(
      static_cast<std::size_t>(candidates.n_points) * candidates.n_views, 0.0);
  for (int i = 0; i < candidates.n_points; ++i)
    for (int j = 0; j < candidates.n_views; ++j) {
      std::int64_t passing = 0, total = 0;
      for (int k = 0; k < candidates.per_view; ++k) {
        std::size_t idx = candidates.index(i, j, k);
        ++total;
        if (candidates.quality[idx] > quality_threshold &&
            candidates.collision_free[idx])
          ++passing;
      }
      out[static_cast<std::size_t>(i) * candidates.n_views + j] =
          total > 0 ? static_cast<double>(passing) / static_cast<double>(total)
                    : 0.0;
    }
  return out;
}

NormalizedGraspness normalize_graspness(const std::vector<double>& pointwise,
                                        const std::vector<double>& viewwise,
                                        int n_points, int n_views) {
  require(static_cast<int>(pointwise.size()) == n_points, errc::shape_mismatch,
          "pointwise length mismatch");
  require(static_cast<int>(viewwise.size()) == n_points * n_views,
          errc::shape_mismatch, "viewwise length mismatch");
  NormalizedGraspness out;
  out.pointwise.assign(pointwise.size(), 0.0);
  out.viewwise.assign(viewwise.size(), 0.0);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : pointwise) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (n_points > 0 && hi > lo)
    for (int i = 0; i < n_points; ++i)
      out.pointwise[static_cast<std::size_t>(i)] =
          (pointwise[static_cast<std::size_t>(i)] - lo) / (hi - lo);
  // hi == lo: degenerate, everything stays 0

  for (int j = 0; j < n_views; ++j) {
    double clo = std::numeric_limits<double>::infinity();
    double chi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_points; ++i) {
      double v = viewwise[static_cast<std::size_t>(i) * n_views + j];
      clo = std::min(clo, v);
      chi = std::max(chi, v);
    }
    if (chi > clo)
      for (int i = 0; i < n_points; ++i)
        out.viewwise[static_cast<std::size_t>(i) * n_views + j] =
            (viewwise[static_cast<std::size_t>(i) * n_views + j] - clo) /
            (chi - clo);
  }
  return out;
}

// -------------------------------------------------------------------------
// candidate generation
// -------------------------------------------------------------------------

std::vector<CandidateLabel> candidate_grid(
    const SceneDescription& scene, const Vec3& point_cam, const Vec3& view,
    int inplane_bins, int depth_bins, double depth_step, double width_max,
    double u_min, double u_max, const GripperModel& gripper, double pitch) {
  std::vector<CandidateLabel> grid(
      static_cast<std::size_t>(inplane_bins) * depth_bins);
  double pi = 3.14159265358979323846;
  for (int a = 0; a < inplane_bins; ++a) {
    Mat3 rot = grasp::rotation_from_params(view, a * pi / inplane_bins);
    Vec3 approach = rot.col(2);
    for (int d = 0; d < depth_bins; ++d) {
      GraspPose candidate;
      candidate.rotation = rot;
      candidate.translation = point_cam + approach * ((d + 1) * depth_step);
      candidate.width = width_max;

      CandidateLabel label;
      double u = std::numeric_limits<double>::infinity();
      try {
        u = min_friction(candidate, scene);
      } catch (const error& e) {
        if (e.kind() != errc::no_contact) throw;
      }
      bool positive = std::isfinite(u) && u <= u_max;
      if (positive) {
        double u_eff = std::max(u, u_min);
        label.quality = grasp::score_from_friction(u_eff, u_min, u_max, true);
        ContactPair c = find_contacts(candidate, scene);
        double contact_span = norm(c.p2 - c.p1);
        label.width = std::min(width_max, contact_span + 0.01);
      }
      label.collision_free =
          collision_check(candidate, scene, gripper, pitch) == 1;
      grid[static_cast<std::size_t>(a) * depth_bins + d] = label;
    }
  }
  return grid;
}

// -------------------------------------------------------------------------
// per-scene label maps
// -------------------------------------------------------------------------

SceneLabels make_scene_labels(const SceneDescription& scene,
                              const PipelineConfig& config) {
  scene::ObjectMask mask = scene::render_mask(scene, scene::CameraSide::left);
  std::vector<double> depth =
      scene::render_depth(scene, scene::CameraSide::left);

  SceneLabels labels;
  labels.height = mask.height;
  labels.width = mask.width;
  std::size_t n = static_cast<std::size_t>(mask.height) * mask.width;
  labels.objectness.assign(n, 0.0);
  labels.graspness.assign(n, 0.0);

  std::vector<std::size_t> object_pixels;
  int stride = std::max(1, config.graspness_pixel_stride);
  for (int y = 0; y < mask.height; y += stride)
    for (int x = 0; x < mask.width; x += stride) {
      std::size_t i = static_cast<std::size_t>(y) * mask.width + x;
      if (mask.labels[i] != 0) object_pixels.push_back(i);
    }
  for (std::size_t i = 0; i < n; ++i)
    labels.objectness[i] = mask.labels[i] != 0 ? 1.0 : 0.0;
  if (object_pixels.empty()) return labels;

  std::vector<Vec3> views =
      grasp::fibonacci_sphere_views(config.label_views);
  GripperModel gripper(config);

  std::vector<double> raw(object_pixels.size(), 0.0);
  parallel_for(static_cast<int>(object_pixels.size()), [&](int pi) {
    std::size_t i = object_pixels[static_cast<std::size_t>(pi)];
    int y = static_cast<int>(i) / mask.width;
    int x = static_cast<int>(i) % mask.width;
    Vec3 point = scene.rig.backproject(x, y, depth[i]);
    std::int64_t passing = 0, total = 0;
    for (const Vec3& view : views) {
      auto grid = candidate_grid(scene, point, view, config.label_inplane,
                                 config.label_depths, config.depth_step,
                                 config.width_max, config.friction_min,
                                 config.friction_max, gripper,
                                 config.collision_pitch);
      for (const auto& c : grid) {
        ++total;
        if (c.quality > config.quality_threshold && c.collision_free)
          ++passing;
      }
    }
    raw[static_cast<std::size_t>(pi)] =
        total > 0 ? static_cast<double>(passing) / static_cast<double>(total)
                  : 0.0;
  });

  double lo = *std::min_element(raw.begin(), raw.end());
  double hi = *std::max_element(raw.begin(), raw.end());
  for (std::size_t pi = 0; pi < object_pixels.size(); ++pi)
    labels.graspness[object_pixels[pi]] =
        hi > lo ? (raw[pi] - lo) / (hi - lo) : 0.0;

  if (stride > 1) {
    // fill skipped object pixels from the nearest computed row-major sample
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x) {
        std::size_t i = static_cast<std::size_t>(y) * mask.width + x;
        if (mask.labels[i] == 0 || labels.graspness[i] != 0.0) continue;
        int sy = (y / stride) * stride, sx = (x / stride) * stride;
        std::size_t si = static_cast<std::size_t>(sy) * mask.width + sx;
        if (mask.labels[si] != 0) labels.graspness[i] = labels.graspness[si];
      }
  }
  return labels;
}

void save_labels(const SceneLabels& labels, const std::string& dir,
                 const std::string& stem, std::uint64_t config_hash) {
  write_f32_grid(dir + "/" + stem + "_objectness.grid", labels.objectness,
                 labels.height, labels.width, config_hash);
  write_f32_grid(dir + "/" + stem + "_graspness.grid", labels.graspness,
                 labels.height, labels.width, config_hash);
  std::ostringstream os;
  os << "# per-pixel label summary\n";
  std::size_t object_count = 0;
  double mean_g = 0.0;
  for (std::size_t i = 0; i < labels.objectness.size(); ++i)
    if (labels.objectness[i] > 0) {
      ++object_count;
      mean_g += labels.graspness[i];
    }
  os << "object_pixels = " << object_count << "\n";
  os << "mean_object_graspness = "
     << format_f64(object_count ? mean_g / object_count : 0.0) << "\n";
  write_text_file(dir + "/" + stem + "_summary.txt", os.str());
}

}  // namespace spikegrasp::labeler
