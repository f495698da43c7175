#pragma once

#include <string>
#include <vector>

#include "spikegrasp/config.hpp"
#include "spikegrasp/grasp.hpp"
#include "spikegrasp/scene.hpp"

namespace spikegrasp::labeler {

using grasp::GraspPose;
using scene::SceneDescription;

// Two-finger antipodal friction-cone test: both contact normals (outward)
// must lie within atan(mu) of the signed grasp axis p2 - p1.
bool force_closure(const Vec3& p1, const Vec3& n1, const Vec3& p2,
                   const Vec3& n2, double mu);

// Contacts found by casting the jaw-closing segment against the scene.
// Returns +infinity when no valid two-contact closure on a single object
// exists; throws errc::no_contact when the jaws meet no surface at all.
// Grasp is given in the left-camera frame.
struct ContactPair {
  Vec3 p1, n1, p2, n2;
  int object_index = -1;
  bool valid = false;
};
ContactPair find_contacts(const GraspPose& grasp,
                          const SceneDescription& scene);
double min_friction(const GraspPose& grasp, const SceneDescription& scene);

// Two finger boxes + palm box, parameterized by the jaw width.
struct GripperModel {
  double finger_width = 0.01;      // y extent
  double finger_thickness = 0.01;  // x extent beyond the jaw plane
  double finger_length = 0.04;     // z extent
  double palm_x = 0.02, palm_y = 0.08, palm_z = 0.02;
  double fingertip_overshoot = 0.005;

  GripperModel() = default;
  explicit GripperModel(const PipelineConfig& c)
      : finger_width(c.finger_width),
        finger_thickness(c.finger_thickness),
        finger_length(c.finger_length),
        palm_x(c.palm_x),
        palm_y(c.palm_y),
        palm_z(c.palm_z),
        fingertip_overshoot(c.fingertip_overshoot) {}

  // Sample points of the gripper body in the gripper frame at the given
  // jaw width and sampling pitch.
  std::vector<Vec3> body_samples(double width, double pitch) const;
};

// 1 = collision-free, 0 = collision (inside a primitive or below the table).
int collision_check(const GraspPose& grasp, const SceneDescription& scene,
                    const GripperModel& gripper, double pitch);

// --- candidate sets & graspness (counting side) ------------------------------

// Candidate grasps at N scene points x V views, L candidates per (point,
// view): quality in [0,1] plus a binary collision-free flag.
struct GraspCandidateSet {
  int n_points = 0, n_views = 0, per_view = 0;  // N, V, L
  std::vector<double> quality;   // N*V*L
  std::vector<std::uint8_t> collision_free;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * n_views + j) * per_view + k;
  }
};

std::vector<double> pointwise_graspness(const GraspCandidateSet& candidates,
                                        double quality_threshold);
// Flattened N x V row-major.
std::vector<double> viewwise_graspness(const GraspCandidateSet& candidates,
                                       double quality_threshold);

struct NormalizedGraspness {
  std::vector<double> pointwise;  // N, in [0,1]
  std::vector<double> viewwise;   // N*V, column-normalized per view
};
NormalizedGraspness normalize_graspness(const std::vector<double>& pointwise,
                                        const std::vector<double>& viewwise,
                                        int n_points, int n_views);

// --- candidate generation (geometry side) ------------------------------------

struct CandidateLabel {
  double quality = 0.0;      // Eq.-style q, 0 for non-positive grasps
  double width = 0.0;        // measured contact width, clamped
  bool collision_free = false;
};

// Evaluates an (angle, depth) grid of grasps approaching `point` (camera
// frame) along the view direction. Grid layout matches the prediction head:
// cell = angle_index * depth_bins + depth_index.
std::vector<CandidateLabel> candidate_grid(
    const SceneDescription& scene, const Vec3& point_cam, const Vec3& view,
    int inplane_bins, int depth_bins, double depth_step, double width_max,
    double u_min, double u_max, const GripperModel& gripper, double pitch);

// --- per-scene label maps -----------------------------------------------------

struct SceneLabels {
  int height = 0, width = 0;
  std::vector<double> objectness;  // 1 on object pixels
  std::vector<double> graspness;   // normalized pointwise, 0 on background
};

SceneLabels make_scene_labels(const SceneDescription& scene,
                              const PipelineConfig& config);

void save_labels(const SceneLabels& labels, const std::string& dir,
                 const std::string& stem, std::uint64_t config_hash);

}  // namespace spikegrasp::labeler
