#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikegrasp/io.hpp"

namespace spikegrasp {

// Every tunable of the pipeline in one versioned, hashable record. All
// randomness derives from `seed`; no subsystem draws ambient entropy.
struct PipelineConfig {
  int format_version = 1;
  std::uint64_t seed = 1;

  // scene generation
  int scene_objects = 3;
  double table_half_extent = 0.08;   // placement square, meters
  double table_height = 0.0;
  double size_min = 0.020;           // primitive radius/half-size range
  double size_max = 0.032;
  double albedo_min = 0.35;
  double albedo_max = 0.95;
  double overlap_tolerance = 0.001;  // meters
  int placement_retries = 100;
  double ambient_background = 0.05;  // irradiance units
  double ambient_light = 0.25;
  double light_intensity = 0.9;
  double light_dir_x = 0.3, light_dir_y = 0.25, light_dir_z = -0.9;

  // stereo rig
  int image_height = 64;
  int image_width = 64;
  double focal_px = 120.0;
  double baseline = 0.06;
  double camera_height = 0.24;    // above table, meters
  double camera_back = 0.20;      // behind table centre, meters

  // spike camera
  double spike_threshold = 2e-3;  // default: mid-gray fires every ~4 intervals
  double readout_rate = 1000.0;
  int spike_frames = 32;          // K
  int window_frames = 8;          // N per sub-stream

  // network
  int feat_channels = 8;       // C_i (paper: 128)
  int hidden_channels = 8;     // learned channels of h (disparity is extra)
  int outer_iterations = 2;    // paper: 16
  int inner_steps = 4;         // spiking steps per update
  int lookup_radius = 1;
  double tau_out = 0.9;
  double tau_mem = 0.8;
  double tau_adapt = 0.95;
  double threshold_base = 0.5;   // ALIF resting threshold
  double beta_adapt = 0.2;
  double surrogate_gamma = 0.5;
  double disparity_max = 12.0;   // quarter-res units, WTA search bound

  // grasp parameterization
  int views = 12;                  // V (desk: 60)
  int inplane_bins = 12;           // A over [0, pi)
  int depth_bins = 4;              // D
  double depth_step = 0.01;        // bins at {1,2,3,4} cm
  double cylinder_height = 0.04;   // d
  double cylinder_radius = 0.05;   // r
  int crop_samples = 16;           // K_samp (desk: 64)
  double width_max = 0.10;
  int encoder_hidden = 16;         // set-encoder MLP width C'

  // seed selection
  double objectness_threshold = 0.5;
  int top_seeds = 8;               // desk: 64

  // friction / scoring
  double friction_min = 0.2;
  double friction_max = 1.2;

  // labels
  double quality_threshold = 0.5;     // c_thresh of Eq. 10
  int label_views = 12;               // = views, kept explicit
  int label_inplane = 4;              // candidate sub-grid per view
  int label_depths = 2;
  double collision_pitch = 0.005;     // sampling pitch for training labels
  double collision_pitch_fine = 0.002;
  int graspness_pixel_stride = 1;

  // gripper body (meters)
  double finger_width = 0.01, finger_thickness = 0.01, finger_length = 0.04;
  double palm_x = 0.02, palm_y = 0.08, palm_z = 0.02;
  double fingertip_overshoot = 0.005;

  // loss
  double loss_alpha = 1.0;
  double loss_beta = 1.0;
  double loss_lambda = 1.0;
  double ce_floor = 1e-7;

  // training
  double learning_rate = 2e-4;  // full-scale default; toy preset overrides
  double lr_decay = 0.95;
  int train_steps = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // evaluation
  double nms_translation = 0.03;
  double nms_rotation_deg = 30.0;
  int per_object_cap = 10;
  int precision_cap = 50;  // K_t
  std::vector<double> friction_set = {0.2, 0.4, 0.6, 0.8, 1.0, 1.2};
  double association_radius = 0.01;

  // cost model
  double w_mac = 4.6;
  double w_ac = 0.9;

  // Desk defaults sized for quick runs; `toy` shrinks the network for the
  // acceptance training budget.
  static PipelineConfig desk();
  static PipelineConfig toy();

  KvFile to_kv() const;
  static PipelineConfig from_kv(const KvFile& kv);
  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;

  std::uint64_t hash() const { return to_kv().content_hash(); }

  void validate() const;  // throws errc::config on out-of-contract values
};

}  // namespace spikegrasp
