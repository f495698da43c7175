#pragma once

#include <string>
#include <vector>

#include "spikegrasp/config.hpp"
#include "spikegrasp/grasp.hpp"
#include "spikegrasp/labeler.hpp"
#include "spikegrasp/scene.hpp"

namespace spikegrasp::eval {

using grasp::GraspPose;
using scene::SceneDescription;

struct EvalConfig {
  double nms_translation = 0.03;   // meters
  double nms_rotation = 0.5235987755982988;  // radians (30 deg)
  int per_object_cap = 10;
  std::vector<double> friction_set = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2};
  int precision_cap = 50;  // K_t = min(cap, M_t)
  double association_radius = 0.01;
  double collision_pitch = 0.002;
  labeler::GripperModel gripper;

  EvalConfig() = default;
  explicit EvalConfig(const PipelineConfig& c)
      : nms_translation(c.nms_translation),
        nms_rotation(deg_to_rad(c.nms_rotation_deg)),
        per_object_cap(c.per_object_cap),
        friction_set(c.friction_set),
        precision_cap(c.precision_cap),
        association_radius(c.association_radius),
        collision_pitch(c.collision_pitch_fine),
        gripper(c) {}
};

// Greedy SE(3) suppression over a score-descending list: a grasp survives
// unless some kept grasp is simultaneously within both thresholds.
std::vector<GraspPose> nms_se3(const std::vector<GraspPose>& sorted_grasps,
                               double translation_thresh,
                               double rotation_thresh);

// Nearest scene object whose surface lies within the association radius of
// the jaw midpoint; -1 when unassigned.
int assign_object(const GraspPose& grasp, const SceneDescription& scene,
                  double association_radius);

// Keeps at most `cap` grasps per assigned object id (unassigned pass through).
std::vector<GraspPose> cap_per_object(const std::vector<GraspPose>& grasps,
                                      const SceneDescription& scene,
                                      double association_radius, int cap);

// 1 iff assigned, collision-free and force-closed at friction mu.
int true_positive(const GraspPose& grasp, const SceneDescription& scene,
                  double mu, const EvalConfig& config);

// Precision-at-k averaged over k = 1..K_t.
double ap_frame(const std::vector<int>& flags, int k_t);

struct FrameReport {
  std::string frame_id;
  std::vector<double> ap_per_mu;  // aligned with the friction set
};

struct EvalReport {
  std::vector<double> friction_set;
  std::vector<FrameReport> frames;
  std::vector<double> dataset_ap_per_mu;
  double ap_overall = 0.0;
  double ap_04 = 0.0;  // friction 0.4 entry when present
  double ap_08 = 0.0;
};

// Full per-frame pipeline: sort, NMS, cap, flags, AP_mu for every mu.
FrameReport evaluate_frame(const std::vector<GraspPose>& grasps,
                           const SceneDescription& scene,
                           const std::string& frame_id,
                           const EvalConfig& config);

EvalReport ap_overall(const std::vector<FrameReport>& frames,
                      const std::vector<double>& friction_set);

void write_report(const EvalReport& report, const EvalConfig& config,
                  std::uint64_t config_hash, const std::string& path);

}  // namespace spikegrasp::eval
