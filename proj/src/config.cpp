#include "spikegrasp/config.hpp"

#include <sstream>

namespace spikegrasp {

PipelineConfig PipelineConfig::desk() {
  PipelineConfig c;
  c.spike_frames = 96;
  c.window_frames = 32;
  c.feat_channels = 16;
  c.hidden_channels = 16;
  c.outer_iterations = 16;
  c.inner_steps = 8;
  c.views = 60;
  c.crop_samples = 64;
  c.encoder_hidden = 32;
  c.top_seeds = 64;
  c.label_views = 60;
  c.collision_pitch = 0.002;
  return c;
}

PipelineConfig PipelineConfig::toy() {
  PipelineConfig c;          // struct defaults are the toy scale
  c.learning_rate = 5e-3;    // 2e-4 cannot halve the loss in 200 steps
  c.objectness_threshold = 0.35;  // 200-step objectness plateaus below 0.5
  return c;
}

KvFile PipelineConfig::to_kv() const {
  KvFile kv;
  kv.set_i64("format_version", format_version);
  kv.set_u64_hex("seed", seed);

  kv.set_i64("scene.objects", scene_objects);
  kv.set_f64("scene.table_half_extent", table_half_extent);
  kv.set_f64("scene.table_height", table_height);
  kv.set_f64("scene.size_min", size_min);
  kv.set_f64("scene.size_max", size_max);
  kv.set_f64("scene.albedo_min", albedo_min);
  kv.set_f64("scene.albedo_max", albedo_max);
  kv.set_f64("scene.overlap_tolerance", overlap_tolerance);
  kv.set_i64("scene.placement_retries", placement_retries);
  kv.set_f64("scene.ambient_background", ambient_background);
  kv.set_f64("scene.ambient_light", ambient_light);
  kv.set_f64("scene.light_intensity", light_intensity);
  kv.set_f64("scene.light_dir_x", light_dir_x);
  kv.set_f64("scene.light_dir_y", light_dir_y);
  kv.set_f64("scene.light_dir_z", light_dir_z);

  kv.set_i64("rig.image_height", image_height);
  kv.set_i64("rig.image_width", image_width);
  kv.set_f64("rig.focal_px", focal_px);
  kv.set_f64("rig.baseline", baseline);
  kv.set_f64("rig.camera_height", camera_height);
  kv.set_f64("rig.camera_back", camera_back);

  kv.set_f64("spike.threshold", spike_threshold);
  kv.set_f64("spike.readout_rate", readout_rate);
  kv.set_i64("spike.frames", spike_frames);
  kv.set_i64("spike.window_frames", window_frames);

  kv.set_i64("net.feat_channels", feat_channels);
  kv.set_i64("net.hidden_channels", hidden_channels);
  kv.set_i64("net.outer_iterations", outer_iterations);
  kv.set_i64("net.inner_steps", inner_steps);
  kv.set_i64("net.lookup_radius", lookup_radius);
  kv.set_f64("net.tau_out", tau_out);
  kv.set_f64("net.tau_mem", tau_mem);
  kv.set_f64("net.tau_adapt", tau_adapt);
  kv.set_f64("net.threshold_base", threshold_base);
  kv.set_f64("net.beta_adapt", beta_adapt);
  kv.set_f64("net.surrogate_gamma", surrogate_gamma);
  kv.set_f64("net.disparity_max", disparity_max);

  kv.set_i64("grasp.views", views);
  kv.set_i64("grasp.inplane_bins", inplane_bins);
  kv.set_i64("grasp.depth_bins", depth_bins);
  kv.set_f64("grasp.depth_step", depth_step);
  kv.set_f64("grasp.cylinder_height", cylinder_height);
  kv.set_f64("grasp.cylinder_radius", cylinder_radius);
  kv.set_i64("grasp.crop_samples", crop_samples);
  kv.set_f64("grasp.width_max", width_max);
  kv.set_i64("grasp.encoder_hidden", encoder_hidden);

  kv.set_f64("seeds.objectness_threshold", objectness_threshold);
  kv.set_i64("seeds.top_m", top_seeds);

  kv.set_f64("friction.min", friction_min);
  kv.set_f64("friction.max", friction_max);

  kv.set_f64("label.quality_threshold", quality_threshold);
  kv.set_i64("label.views", label_views);
  kv.set_i64("label.inplane", label_inplane);
  kv.set_i64("label.depths", label_depths);
  kv.set_f64("label.collision_pitch", collision_pitch);
  kv.set_f64("label.collision_pitch_fine", collision_pitch_fine);
  kv.set_i64("label.pixel_stride", graspness_pixel_stride);

  kv.set_f64("gripper.finger_width", finger_width);
  kv.set_f64("gripper.finger_thickness", finger_thickness);
  kv.set_f64("gripper.finger_length", finger_length);
  kv.set_f64("gripper.palm_x", palm_x);
  kv.set_f64("gripper.palm_y", palm_y);
  kv.set_f64("gripper.palm_z", palm_z);
  kv.set_f64("gripper.fingertip_overshoot", fingertip_overshoot);

  kv.set_f64("loss.alpha", loss_alpha);
  kv.set_f64("loss.beta", loss_beta);
  kv.set_f64("loss.lambda", loss_lambda);
  kv.set_f64("loss.ce_floor", ce_floor);

  kv.set_f64("train.learning_rate", learning_rate);
  kv.set_f64("train.lr_decay", lr_decay);
  kv.set_i64("train.steps", train_steps);
  kv.set_f64("train.adam_beta1", adam_beta1);
  kv.set_f64("train.adam_beta2", adam_beta2);
  kv.set_f64("train.adam_eps", adam_eps);

  kv.set_f64("eval.nms_translation", nms_translation);
  kv.set_f64("eval.nms_rotation_deg", nms_rotation_deg);
  kv.set_i64("eval.per_object_cap", per_object_cap);
  kv.set_i64("eval.precision_cap", precision_cap);
  {
    std::ostringstream ss;
    for (std::size_t i = 0; i < friction_set.size(); ++i) {
      if (i) ss << " ";
      ss << format_f64(friction_set[i]);
    }
    kv.set("eval.friction_set", ss.str());
  }
  kv.set_f64("eval.association_radius", association_radius);

  kv.set_f64("cost.w_mac", w_mac);
  kv.set_f64("cost.w_ac", w_ac);
  return kv;
}

PipelineConfig PipelineConfig::from_kv(const KvFile& kv) {
  PipelineConfig c;
  auto i = [&](const char* k, int dflt) {
    return kv.has(k) ? static_cast<int>(kv.get_i64(k)) : dflt;
  };
  auto f = [&](const char* k, double dflt) {
    return kv.has(k) ? kv.get_f64(k) : dflt;
  };

  c.format_version = i("format_version", c.format_version);
  if (c.format_version != 1) fail(errc::config, "unsupported config version");
  if (kv.has("seed")) c.seed = kv.get_u64_hex("seed");

  c.scene_objects = i("scene.objects", c.scene_objects);
  c.table_half_extent = f("scene.table_half_extent", c.table_half_extent);
  c.table_height = f("scene.table_height", c.table_height);
  c.size_min = f("scene.size_min", c.size_min);
  c.size_max = f("scene.size_max", c.size_max);
  c.albedo_min = f("scene.albedo_min", c.albedo_min);
  c.albedo_max = f("scene.albedo_max", c.albedo_max);
  c.overlap_tolerance = f("scene.overlap_tolerance", c.overlap_tolerance);
  c.placement_retries = i("scene.placement_retries", c.placement_retries);
  c.ambient_background = f("scene.ambient_background", c.ambient_background);
  c.ambient_light = f("scene.ambient_light", c.ambient_light);
  c.light_intensity = f("scene.light_intensity", c.light_intensity);
  c.light_dir_x = f("scene.light_dir_x", c.light_dir_x);
  c.light_dir_y = f("scene.light_dir_y", c.light_dir_y);
  c.light_dir_z = f("scene.light_dir_z", c.light_dir_z);

  c.image_height = i("rig.image_height", c.image_height);
  c.image_width = i("rig.image_width", c.image_width);
  c.focal_px = f("rig.focal_px", c.focal_px);
  c.baseline = f("rig.baseline", c.baseline);
  c.camera_height = f("rig.camera_height", c.camera_height);
  c.camera_back = f("rig.camera_back", c.camera_back);

  c.spike_threshold = f("spike.threshold", c.spike_threshold);
  c.readout_rate = f("spike.readout_rate", c.readout_rate);
  c.spike_frames = i("spike.frames", c.spike_frames);
  c.window_frames = i("spike.window_frames", c.window_frames);

  c.feat_channels = i("net.feat_channels", c.feat_channels);
  c.hidden_channels = i("net.hidden_channels", c.hidden_channels);
  c.outer_iterations = i("net.outer_iterations", c.outer_iterations);
  c.inner_steps = i("net.inner_steps", c.inner_steps);
  c.lookup_radius = i("net.lookup_radius", c.lookup_radius);
  c.tau_out = f("net.tau_out", c.tau_out);
  c.tau_mem = f("net.tau_mem", c.tau_mem);
  c.tau_adapt = f("net.tau_adapt", c.tau_adapt);
  c.threshold_base = f("net.threshold_base", c.threshold_base);
  c.beta_adapt = f("net.beta_adapt", c.beta_adapt);
  c.surrogate_gamma = f("net.surrogate_gamma", c.surrogate_gamma);
  c.disparity_max = f("net.disparity_max", c.disparity_max);

  c.views = i("grasp.views", c.views);
  c.inplane_bins = i("grasp.inplane_bins", c.inplane_bins);
  c.depth_bins = i("grasp.depth_bins", c.depth_bins);
  c.depth_step = f("grasp.depth_step", c.depth_step);
  c.cylinder_height = f("grasp.cylinder_height", c.cylinder_height);
  c.cylinder_radius = f("grasp.cylinder_radius", c.cylinder_radius);
  c.crop_samples = i("grasp.crop_samples", c.crop_samples);
  c.width_max = f("grasp.width_max", c.width_max);
  c.encoder_hidden = i("grasp.encoder_hidden", c.encoder_hidden);

  c.objectness_threshold =
      f("seeds.objectness_threshold", c.objectness_threshold);
  c.top_seeds = i("seeds.top_m", c.top_seeds);

  c.friction_min = f("friction.min", c.friction_min);
  c.friction_max = f("friction.max", c.friction_max);

  c.quality_threshold = f("label.quality_threshold", c.quality_threshold);
  c.label_views = i("label.views", c.label_views);
  c.label_inplane = i("label.inplane", c.label_inplane);
  c.label_depths = i("label.depths", c.label_depths);
  c.collision_pitch = f("label.collision_pitch", c.collision_pitch);
  c.collision_pitch_fine =
      f("label.collision_pitch_fine", c.collision_pitch_fine);
  c.graspness_pixel_stride = i("label.pixel_stride", c.graspness_pixel_stride);

  c.finger_width = f("gripper.finger_width", c.finger_width);
  c.finger_thickness = f("gripper.finger_thickness", c.finger_thickness);
  c.finger_length = f("gripper.finger_length", c.finger_length);
  c.palm_x = f("gripper.palm_x", c.palm_x);
  c.palm_y = f("gripper.palm_y", c.palm_y);
  c.palm_z = f("gripper.palm_z", c.palm_z);
  c.fingertip_overshoot = f("gripper.fingertip_overshoot", c.fingertip_overshoot);

  c.loss_alpha = f("loss.alpha", c.loss_alpha);
  c.loss_beta = f("loss.beta", c.loss_beta);
  c.loss_lambda = f("loss.lambda", c.loss_lambda);
  c.ce_floor = f("loss.ce_floor", c.ce_floor);

  c.learning_rate = f("train.learning_rate", c.learning_rate);
  c.lr_decay = f("train.lr_decay", c.lr_decay);
  c.train_steps = i("train.steps", c.train_steps);
  c.adam_beta1 = f("train.adam_beta1", c.adam_beta1);
  c.adam_beta2 = f("train.adam_beta2", c.adam_beta2);
  c.adam_eps = f("train.adam_eps", c.adam_eps);

  c.nms_translation = f("eval.nms_translation", c.nms_translation);
  c.nms_rotation_deg = f("eval.nms_rotation_deg", c.nms_rotation_deg);
  c.per_object_cap = i("eval.per_object_cap", c.per_object_cap);
  c.precision_cap = i("eval.precision_cap", c.precision_cap);
  if (kv.has("eval.friction_set"))
    c.friction_set = kv.get_f64_list("eval.friction_set");
  c.association_radius = f("eval.association_radius", c.association_radius);

  c.w_mac = f("cost.w_mac", c.w_mac);
  c.w_ac = f("cost.w_ac", c.w_ac);

  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  return from_kv(KvFile::load(path));
}

void PipelineConfig::save(const std::string& path) const {
  to_kv().save(path);
}

void PipelineConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(errc::config, what);
  };
  check(scene_objects >= 1, "scene.objects must be >= 1");
  check(size_min > 0 && size_max >= size_min, "bad primitive size range");
  check(image_height > 0 && image_width > 0, "bad resolution");
  check(image_height % 16 == 0 && image_width % 16 == 0,
        "resolution must be divisible by 16");
  check(baseline > 0, "baseline must be positive");
  check(spike_threshold > 0, "spike threshold must be positive");
  check(readout_rate > 0, "readout rate must be positive");
  check(spike_frames > 0 && window_frames > 0, "bad frame counts");
  check(spike_frames >= 3 * window_frames,
        "stream too short for three sub-streams");
  check(tau_out > 0 && tau_out < 1, "tau_out must lie in (0,1)");
  check(tau_mem > 0 && tau_mem < 1, "tau_mem must lie in (0,1)");
  check(tau_adapt > 0 && tau_adapt < 1, "tau_adapt must lie in (0,1)");
  check(threshold_base > 0, "threshold_base must be positive");
  check(beta_adapt >= 0, "beta_adapt must be nonnegative");
  check(views >= 1 && inplane_bins >= 1 && depth_bins >= 1, "bad grasp grid");
  check(cylinder_height > 0 && cylinder_radius > 0, "bad cylinder");
  check(crop_samples >= 1, "crop_samples must be >= 1");
  check(width_max > 0, "width_max must be positive");
  check(objectness_threshold > 0 && objectness_threshold < 1,
        "objectness threshold must lie in (0,1)");
  check(top_seeds >= 1, "top_m must be >= 1");
  check(friction_min > 0 && friction_min < friction_max,
        "need 0 < u_min < u_max");
  check(!friction_set.empty(), "friction set must be nonempty");
  for (std::size_t i = 1; i < friction_set.size(); ++i)
    check(friction_set[i] > friction_set[i - 1],
          "friction set must be ascending");
  check(nms_translation > 0 && nms_rotation_deg > 0, "bad NMS thresholds");
  check(precision_cap > 0, "precision cap must be positive");
  check(lookup_radius >= 0, "lookup radius must be >= 0");
}

}  // namespace spikegrasp
