#include "spikegrasp/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "spikegrasp/error.hpp"
#include "spikegrasp/io.hpp"

namespace spikegrasp::eval {

std::vector<GraspPose> nms_se3(const std::vector<GraspPose>& sorted_grasps,
                               double translation_thresh,
                               double rotation_thresh) {
  for (std::size_t i = 1; i < sorted_grasps.size(); ++i)
    require(sorted_grasps[i - 1].score >= sorted_grasps[i].score,
            errc::precondition, "NMS input must be sorted by score");
  std::vector<GraspPose> kept;
  for (const auto& g : sorted_grasps) {
    bool suppressed = false;
    for (const auto& k : kept) {
      double dt = norm(g.translation - k.translation);
      double dr = rotation_geodesic(g.rotation, k.rotation);
      if (dt < translation_thresh && dr < rotation_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(g);
  }
  return kept;
}

int assign_object(const GraspPose& grasp, const SceneDescription& scene,
                  double association_radius) {
  Vec3 mid_world = scene.rig.left_pose.apply(grasp.translation);
  int best = -1;
  // signed distance: interior midpoints always assign, the radius bounds
  // how far outside the surface the midpoint may sit
  double best_dist = association_radius;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    double d = scene::signed_distance(scene.objects[i], mid_world);
    if (d <= best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<GraspPose> cap_per_object(const std::vector<GraspPose>& grasps,
                                      const SceneDescription& scene,
                                      double association_radius, int cap) {
  std::map<int, int> counts;
  std::vector<GraspPose> kept;
  for (const auto& g : grasps) {
    int obj = assign_object(g, scene, association_radius);
    if (obj >= 0) {
      if (counts[obj] >= cap) continue;
      ++counts[obj];
    }
    kept.push_back(g);
  }
  return kept;
}

int true_positive(const GraspPose& grasp, const SceneDescription& scene,
                  double mu, const EvalConfig& config) {
  int obj = assign_object(grasp, scene, config.association_radius);
  if (obj < 0) return 0;
  if (labeler::collision_check(grasp, scene, config.gripper,
                               config.collision_pitch) != 1)
    return 0;
  double u;
  try {
    u = labeler::min_friction(grasp, scene);
  } catch (const error& e) {
    if (e.kind() == errc::no_contact) return 0;
    throw;
  }
  return std::isfinite(u) && u <= mu ? 1 : 0;
}

double ap_frame(const std::vector<int>& flags, int k_t) {
  if (flags.empty() || k_t <= 0) return 0.0;  // empty predictions score 0
  require(k_t <= static_cast<int>(flags.size()), errc::precondition,
          "K_t exceeds the flag list");
  double ap = 0.0;
  int hits = 0;
  for (int k = 1; k <= k_t; ++k) {
    hits += flags[static_cast<std::size_t>(k - 1)];
    ap += static_cast<double>(hits) / k;
  }
  return ap / k_t;
}

FrameReport evaluate_frame(const std::vector<GraspPose>& grasps,
                           const SceneDescription& scene,
                           const std::string& frame_id,
                           const EvalConfig& config) {
  std::vector<GraspPose> sorted = grasps;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const GraspPose& a, const GraspPose& b) {
                     return a.score > b.score;
                   });
  std::vector<GraspPose> surviving =
      nms_se3(sorted, config.nms_translation, config.nms_rotation);
  surviving = cap_per_object(surviving, scene, config.association_radius,
                             config.per_object_cap);

  int m_t = static_cast<int>(surviving.size());
  int k_t = std::min(config.precision_cap, m_t);

  FrameReport report;
  report.frame_id = frame_id;
  for (double mu : config.friction_set) {
    std::vector<int> flags;
    flags.reserve(static_cast<std::size_t>(m_t));
    for (const auto& g : surviving)
      flags.push_back(true_positive(g, scene, mu, config));
    report.ap_per_mu.push_back(ap_frame(flags, k_t));
  }
  return report;
}

EvalReport ap_overall(const std::vector<FrameReport>& frames,
                      const std::vector<double>& friction_set) {
  require(!frames.empty(), errc::precondition, "need at least one frame");
  EvalReport report;
  report.friction_set = friction_set;
  report.frames = frames;
  report.dataset_ap_per_mu.assign(friction_set.size(), 0.0);
  for (const auto& f : frames) {
    require(f.ap_per_mu.size() == friction_set.size(), errc::shape_mismatch,
            "frame report does not match the friction set");
    for (std::size_t i = 0; i < friction_set.size(); ++i)
      report.dataset_ap_per_mu[i] += f.ap_per_mu[i];
  }
  for (auto& v : report.dataset_ap_per_mu)
    v /= static_cast<double>(frames.size());
  double total = 0.0;
  for (std::size_t i = 0; i < friction_set.size(); ++i) {
    total += report.dataset_ap_per_mu[i];
    if (std::fabs(friction_set[i] - 0.4) < 1e-12)
      report.ap_04 = report.dataset_ap_per_mu[i];
    if (std::fabs(friction_set[i] - 0.8) < 1e-12)
      report.ap_08 = report.dataset_ap_per_mu[i];
  }
  report.ap_overall = total / static_cast<double>(friction_set.size());
  return report;
}

void write_report(const EvalReport& report, const EvalConfig& config,
                  std::uint64_t config_hash, const std::string& path) {
  std::ostringstream os;
  os << "frame,mu,ap\n";
  for (const auto& f : report.frames)
    for (std::size_t i = 0; i < report.friction_set.size(); ++i)
      os << f.frame_id << "," << format_f64(report.friction_set[i]) << ","
         << format_f64(f.ap_per_mu[i]) << "\n";
  os << "summary,key,value\n";
  for (std::size_t i = 0; i < report.friction_set.size(); ++i)
    os << "summary,ap_mu_" << format_f64(report.friction_set[i]) << ","
       << format_f64(report.dataset_ap_per_mu[i]) << "\n";
  os << "summary,ap_overall," << format_f64(report.ap_overall) << "\n";
  os << "summary,ap_0.4," << format_f64(report.ap_04) << "\n";
  os << "summary,ap_0.8," << format_f64(report.ap_08) << "\n";
  os << "summary,nms_translation," << format_f64(config.nms_translation)
     << "\n";
  os << "summary,nms_rotation_rad," << format_f64(config.nms_rotation) << "\n";
  os << "summary,per_object_cap," << config.per_object_cap << "\n";
  os << "summary,precision_cap," << config.precision_cap << "\n";
  os << "summary,association_radius," << format_f64(config.association_radius)
     << "\n";
  {
    std::ostringstream fs;
    for (std::size_t i = 0; i < config.friction_set.size(); ++i) {
      if (i) fs << " ";
      fs << format_f64(config.friction_set[i]);
    }
    os << "summary,friction_set," << fs.str() << "\n";
  }
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "0x%016llx",
                static_cast<unsigned long long>(config_hash));
  os << "summary,config_hash," << hash_buf << "\n";
  write_text_file(path, os.str());
}

}  // namespace spikegrasp::eval
