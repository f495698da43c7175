#pragma once

#include <string>
#include <vector>

#include "spikegrasp/geometry.hpp"
#include "spikegrasp/graspable.hpp"
#include "spikegrasp/nn.hpp"

namespace spikegrasp::grasp {

using nn::ParamStore;
using nn::Tensor;
using nn::Var;

// Parallel-jaw grasp in the camera frame. Columns of R: x = jaw closing
// axis, y = completes the frame, z = approach direction.
struct GraspPose {
  Mat3 rotation;
  Vec3 translation;
  double width = 0.0;
  double score = 0.0;
};

// Orthonormality, determinant, width and score range checks (1e-6 band).
bool pose_valid(const GraspPose& pose, double width_max);

// V approach directions spread over the unit sphere.
std::vector<Vec3> fibonacci_sphere_views(int count);

// R = R_view(approach) * R_roll(angle): approach becomes column z, the
// in-plane angle rolls the closing axis about it. angle in [0, pi).
Mat3 rotation_from_params(const Vec3& approach, double angle);
Mat3 rotation_from_params(int view_index, double angle,
                          const std::vector<Vec3>& views);

// Sample source for the cylinder crop: back-projected pixels carrying
// hidden features (feature rows are gathered lazily through the graph).
struct SampleSource {
  std::vector<Vec3> points;                       // camera frame
  std::vector<std::pair<int, int>> feat_pixels;   // (y,x) into the h field
};

// Canonical-frame candidate tensor: K_samp rows of 3 normalized coordinates
// plus the originating feature pixels for gathering.
struct CandidateTensor {
  Tensor coords;  // (K_samp, 3), divided by the crop radius
  std::vector<std::pair<int, int>> feat_pixels;  // length K_samp
};

CandidateTensor crop_cylinder(const Vec3& seed_point, const Vec3& approach,
                              const SampleSource& source, double height,
                              double radius, int k_samples);

// Shared per-sample MLP followed by coordinate-wise max over samples.
struct SetEncoder {
  int feat_channels = 0;  // C of the (3 + C) rows
  int hidden = 0;
  Var w1, b1, w2, b2;

  SetEncoder() = default;
  SetEncoder(int feat_channels, int hidden, std::uint64_t seed,
             ParamStore& store);
};

Var encode_candidates(const CandidateTensor& tensor, const Var& feature_field,
                      const SetEncoder& encoder);

// Linear head: C' -> A*D*2 (scores then widths). Scores are
// sigmoid-bounded, widths clamped to [0, width_max].
struct GraspHead {
  int in_channels = 0;
  int inplane_bins = 0, depth_bins = 0;
  double width_max = 0.1;
  Var w, b;

  GraspHead() = default;
  GraspHead(int in_channels, int inplane_bins, int depth_bins,
            double width_max, std::uint64_t seed, ParamStore& store);
};

struct GraspGrid {
  Var scores;  // (S, A*D)
  Var widths;  // (S, A*D)
};

GraspGrid predict_grasps(const std::vector<Var>& seed_features,
                         const GraspHead& head);

// Per-seed argmax over the A x D grid (ties -> lowest flat index), composed
// into full poses and sorted by score descending.
std::vector<GraspPose> select_best(const Tensor& scores, const Tensor& widths,
                                   const graspable::SeedSet& seeds,
                                   const std::vector<Vec3>& views,
                                   int inplane_bins, int depth_bins,
                                   double depth_step);

// Eq.-style quality from the minimum friction coefficient:
//   q = ln(u_max/u) / ln(u_max/u_min) for positive grasps, else 0.
double score_from_friction(double u, double u_min, double u_max,
                           bool positive);

// Grasp list file: header plus one 14-number record per grasp.
void save_grasps(const std::vector<GraspPose>& grasps, const std::string& path,
                 const std::string& frame_id, std::uint64_t config_hash);
std::vector<GraspPose> load_grasps(const std::string& path,
                                   std::string* frame_id = nullptr,
                                   std::uint64_t* config_hash = nullptr);

}  // namespace spikegrasp::grasp
