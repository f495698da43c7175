#include "spikegrasp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spikegrasp/error.hpp"
#include "spikegrasp/io.hpp"
#include "spikegrasp/parallel.hpp"

namespace spikegrasp::pipeline {

Model Model::init(const PipelineConfig& config, std::uint64_t seed) {
  Model m;
  m.init_seed = seed;
  m.input_channels = 3 * config.window_frames;
  m.hidden_total = 1 + config.hidden_channels;

  int taps = 4 * (2 * config.lookup_radius + 1);
  int x_channels = m.hidden_total + taps + config.feat_channels;

  rsnn::AlifParams alif;
  alif.tau_mem = config.tau_mem;
  alif.tau_adapt = config.tau_adapt;
  alif.threshold_base = config.threshold_base;
  alif.beta_adapt = config.beta_adapt;
  alif.gamma = config.surrogate_gamma;

  Rng root(seed);
  m.extractor = pathway::ConvStack(m.input_channels, config.feat_channels,
                                   root.fork(1).next_u64(), m.store);
  m.update = rsnn::UpdateModule(x_channels, config.hidden_channels,
                                config.hidden_channels, alif, config.tau_out,
                                root.fork(2).next_u64(), m.store);
  m.decoder = graspable::Decoder(m.hidden_total, config.hidden_channels,
                                 root.fork(3).next_u64(), m.store);
  m.viewhead = graspable::ViewHead(m.hidden_total, config.views,
                                   root.fork(4).next_u64(), m.store);
  m.set_encoder = grasp::SetEncoder(m.hidden_total, config.encoder_hidden,
                                    root.fork(5).next_u64(), m.store);
  m.head = grasp::GraspHead(config.encoder_hidden, config.inplane_bins,
                            config.depth_bins, config.width_max,
                            root.fork(6).next_u64(), m.store);
  m.views = grasp::fibonacci_sphere_views(config.views);
  return m;
}

// -------------------------------------------------------------------------
// checkpoint
// -------------------------------------------------------------------------

void save_checkpoint(const Model& model, const std::string& path,
                     std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, "cannot open " + path);
  os.write("SGCP", 4);
  write_u16(os, 1);
  write_u64(os, model.init_seed);
  write_u64(os, config_hash);
  write_u32(os, static_cast<std::uint32_t>(model.store.params.size()));
  for (const auto& p : model.store.params) {
    write_u16(os, static_cast<std::uint16_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u8(os, static_cast<std::uint8_t>(p->val.ndim()));
    for (int d = 0; d < p->val.ndim(); ++d)
      write_u32(os, static_cast<std::uint32_t>(p->val.dim(d)));
    for (std::size_t i = 0; i < p->val.numel(); ++i)
      write_f32(os, static_cast<float>(p->val[i]));
  }
}

std::uint64_t load_checkpoint(Model& model, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "SGCP", 4) != 0)
    fail(errc::io, "not a checkpoint file: " + path);
  if (read_u16(is) != 1) fail(errc::io, "unsupported checkpoint version");
  model.init_seed = read_u64(is);
  std::uint64_t config_hash = read_u64(is);
  std::uint32_t count = read_u32(is);
  require(count == model.store.params.size(), errc::io,
          "checkpoint tensor count does not match the model");
  for (auto& p : model.store.params) {
    std::uint16_t name_len = read_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    require(name == p->name, errc::io,
            "checkpoint tensor order mismatch at " + p->name);
    int ndim = read_u8(is);
    require(ndim == p->val.ndim(), errc::io, "rank mismatch at " + name);
    for (int d = 0; d < ndim; ++d)
      require(static_cast<int>(read_u32(is)) == p->val.dim(d), errc::io,
              "shape mismatch at " + name);
    for (std::size_t i = 0; i < p->val.numel(); ++i)
      p->val[i] = static_cast<double>(read_f32(is));
  }
  return config_hash;
}

// -------------------------------------------------------------------------
// inputs
// -------------------------------------------------------------------------

SampleInputs prepare_inputs(const scene::SceneDescription& scenery,
                            const PipelineConfig& config, bool with_labels,
                            const std::string& id) {
  SampleInputs sample;
  sample.scenery = scenery;
  sample.id = id;

  double dt = 1.0 / config.readout_rate;
  int k_frames = config.spike_frames;
  int n = config.window_frames;
  double t_mid = (k_frames / 2) * dt;  // stream starts at t0 = 0

  for (scene::CameraSide side :
       {scene::CameraSide::left, scene::CameraSide::right}) {
    scene::LuminanceField lum = scene::render_luminance(scenery, side);
    spike::SpikeStream stream = spike::simulate_static(
        lum, k_frames, config.spike_threshold, config.readout_rate, side);
    spike::SpikeStream w0 = spike::window(stream, t_mid - n * dt, n);
    spike::SpikeStream w1 = spike::window(stream, t_mid, n);
    spike::SpikeStream w2 = spike::window(stream, t_mid + n * dt, n);
    Tensor t = pathway::substreams_to_tensor(w0, w1, w2);
    if (side == scene::CameraSide::left)
      sample.left = std::move(t);
    else
      sample.right = std::move(t);
  }
  sample.mask = scene::render_mask(scenery, scene::CameraSide::left);
  if (with_labels) {
    sample.labels = labeler::make_scene_labels(scenery, config);
    sample.has_labels = true;
  }
  return sample;
}

// -------------------------------------------------------------------------
// disparity bootstrap
// -------------------------------------------------------------------------

Tensor bootstrap_disparity(const Tensor& left_stream,
                           const Tensor& right_stream, double min_disparity_q,
                           double max_disparity_q) {
  require(left_stream.same_shape(right_stream), errc::shape_mismatch,
          "stereo streams differ in shape");
  int channels = left_stream.dim(0);
  int h = left_stream.dim(1), w = left_stream.dim(2);

  // spike-count playback images (the TFP estimate up to a constant factor)
  Tensor count_l({h, w}), count_r({h, w});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        count_l.at2(y, x) += left_stream.at3(c, y, x);
        count_r.at2(y, x) += right_stream.at3(c, y, x);
      }

  const int half = 2;  // 5x5 matching patch
  int d_max = static_cast<int>(4.0 * max_disparity_q);

  auto patch_dot = [&](const Tensor& a, int ay, int ax, const Tensor& b,
                       int by, int bx) {
    double s = 0.0;
    for (int dy = -half; dy <= half; ++dy)
      for (int dx = -half; dx <= half; ++dx) {
        int y1 = std::clamp(ay + dy, 0, h - 1);
        int x1 = std::clamp(ax + dx, 0, w - 1);
        int y2 = std::clamp(by + dy, 0, h - 1);
        int x2 = std::clamp(bx + dx, 0, w - 1);
        s += a.at2(y1, x1) * b.at2(y2, x2);
      }
    return s;
  };

  Tensor disp_full({h, w}), weight({h, w});
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double lnorm = std::sqrt(patch_dot(count_l, y, x, count_l, y, x));
      int span = std::min(d_max, x);
      std::vector<double> score(static_cast<std::size_t>(span) + 1, 0.0);
      int best_d = 0;
      double best = -2.0;
      for (int d = 0; d <= span; ++d) {
        double rnorm =
            std::sqrt(patch_dot(count_r, y, x - d, count_r, y, x - d));
        double ncc = patch_dot(count_l, y, x, count_r, y, x - d) /
                     (lnorm * rnorm + 1e-9);
        score[static_cast<std::size_t>(d)] = ncc;
        if (ncc > best) {
          best = ncc;
          best_d = d;
        }
      }
      double refined = best_d;
      if (best_d > 0 && best_d < span) {
        double s0 = score[static_cast<std::size_t>(best_d) - 1];
        double s1 = best;
        double s2 = score[static_cast<std::size_t>(best_d) + 1];
        double denom = s0 - 2.0 * s1 + s2;
        if (std::fabs(denom) > 1e-12) {
          double delta = 0.5 * (s0 - s2) / denom;
          if (delta > -0.5 && delta < 0.5) refined += delta;
        }
      }
      disp_full.at2(y, x) = refined;
      weight.at2(y, x) = lnorm;
    }
  });

  // energy-weighted pooling to quarter resolution, in quarter-pixel units
  int h4 = h / 4, w4 = w / 4;
  Tensor disp({h4, w4});
  for (int qy = 0; qy < h4; ++qy)
    for (int qx = 0; qx < w4; ++qx) {
      double num = 0.0, den = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) {
          double wgt = weight.at2(qy * 4 + dy, qx * 4 + dx);
          num += wgt * disp_full.at2(qy * 4 + dy, qx * 4 + dx);
          den += wgt;
        }
      double d_q = den > 1e-9 ? (num / den) / 4.0 : min_disparity_q;
      disp.at2(qy, qx) = std::clamp(d_q, min_disparity_q, max_disparity_q);
    }
  return disp;
}

// -------------------------------------------------------------------------
// forward
// -------------------------------------------------------------------------

ForwardResult forward(const Model& model, const SampleInputs& sample,
                      const PipelineConfig& config, SpikeMode mode,
                      cost::CostTrace* trace,
                      const graspable::SeedSet* frozen_seeds) {
  int full_h = sample.left.dim(1), full_w = sample.left.dim(2);
  int h4 = full_h / 4, w4 = full_w / 4;

  Var left = nn::constant(sample.left);
  Var right = nn::constant(sample.right);
  pathway::FeaturePyramid pyr_l = pathway::extract_features(left, model.extractor);
  pathway::FeaturePyramid pyr_r =
      pathway::extract_features(right, model.extractor);

  Var volume = pathway::correlate(pyr_l.f4, pyr_r.f4);
  std::vector<Var> pyramid = pathway::build_pyramid(volume);

  ForwardResult result;
  result.disparity = bootstrap_disparity(sample.left, sample.right, 0.25,
                                         config.disparity_max);

  // hidden field: frozen disparity channel (scaled to [0,1] so its
  // magnitude matches the spiking channels) + zero learned channels
  Tensor h0({1 + config.hidden_channels, h4, w4});
  for (int y = 0; y < h4; ++y)
    for (int x = 0; x < w4; ++x)
      h0.at3(0, y, x) = result.disparity.at2(y, x) / config.disparity_max;
  Var h = nn::constant(h0);
  Var idx = nn::constant(result.disparity);
  Var context = pyr_l.f4;

  rsnn::TraceBinding binding;
  if (trace) binding = rsnn::bind_trace(model.update, h4, w4, *trace);

  double activity = 0.0;
  for (int k = 0; k < config.outer_iterations; ++k) {
    Var corr = pathway::lookup(pyramid, idx, config.lookup_radius);
    rsnn::UpdateResult step = rsnn::update_iteration(
        h, corr, context, model.update, config.inner_steps, mode, trace,
        trace ? &binding : nullptr, k * config.inner_steps);
    h = step.h_next;
    activity += step.activity;
  }
  result.mean_activity =
      config.outer_iterations > 0 ? activity / config.outer_iterations : 0.0;
  result.h_final = h;

  result.maps = graspable::predict_maps(h, model.decoder, full_h, full_w);
  result.map_values = graspable::maps_values(result.maps);
  result.view_probs = nn::sigmoid(model.viewhead.forward(h));

  graspable::BackprojectionField backproj;
  backproj.disparity = result.disparity;
  backproj.rig = sample.scenery.rig;

  if (frozen_seeds) {
    result.seeds = *frozen_seeds;
    result.have_seeds = !result.seeds.seeds.empty();
    if (!result.have_seeds) return result;
  } else {
    try {
      result.seeds = graspable::select_seeds(
          result.map_values, result.view_probs->val, backproj,
          config.objectness_threshold, config.top_seeds);
      result.have_seeds = true;
    } catch (const error& e) {
      if (e.kind() != errc::empty_seeds) throw;
      result.have_seeds = false;
      return result;
    }
  }

  // sample source: back-projected quarter-resolution pixels carrying h rows
  grasp::SampleSource source;
  for (int qy = 0; qy < h4; ++qy)
    for (int qx = 0; qx < w4; ++qx) {
      double d_quarter = std::max(0.25, result.disparity.at2(qy, qx));
      double z = sample.scenery.rig.focal_px * sample.scenery.rig.baseline /
                 (4.0 * d_quarter);
      source.points.push_back(
          sample.scenery.rig.backproject(4.0 * qx + 1.5, 4.0 * qy + 1.5, z));
      source.feat_pixels.push_back({qy, qx});
    }

  graspable::SeedSet kept;
  for (const auto& seed : result.seeds.seeds) {
    try {
      grasp::CandidateTensor crop = grasp::crop_cylinder(
          seed.point, model.views[static_cast<std::size_t>(seed.view)], source,
          config.cylinder_height, config.cylinder_radius,
          config.crop_samples);
      result.seed_features.push_back(
          grasp::encode_candidates(crop, h, model.set_encoder));
      kept.seeds.push_back(seed);
    } catch (const error& e) {
      if (e.kind() != errc::empty_region) throw;
    }
  }
  result.seeds = kept;
  if (result.seeds.seeds.empty()) {
    result.have_seeds = false;
    return result;
  }
  result.grids = grasp::predict_grasps(result.seed_features, model.head);
  return result;
}

// -------------------------------------------------------------------------
// loss assembly
// -------------------------------------------------------------------------

losses::LossResult build_loss(const Model& model, const SampleInputs& sample,
                              const ForwardResult& fwd,
                              const PipelineConfig& config) {
  require(sample.has_labels, errc::precondition,
          "loss requires labeled samples");
  int full_h = sample.left.dim(1), full_w = sample.left.dim(2);
  std::vector<int> map_shape{1, full_h, full_w};
  Tensor obj_label(map_shape), grasp_label(map_shape), obj_mask(map_shape);
  for (std::size_t i = 0; i < sample.labels.objectness.size(); ++i) {
    obj_label[i] = sample.labels.objectness[i];
    grasp_label[i] = sample.labels.graspness[i];
    obj_mask[i] = sample.labels.objectness[i] != 0.0 ? 1.0 : 0.0;
  }

  losses::LossInputs inputs;
  inputs.objectness_prob = fwd.maps.objectness;
  inputs.graspness = fwd.maps.graspness;
  inputs.objectness_label = obj_label;
  inputs.graspness_label = grasp_label;
  inputs.object_mask = obj_mask;

  labeler::GripperModel gripper(config);
  int cells = config.inplane_bins * config.depth_bins;
  int v = config.views;

  if (fwd.have_seeds) {
    int s_count = static_cast<int>(fwd.seeds.seeds.size());
    std::vector<std::pair<int, int>> seed_qpixels;
    std::vector<bool> on_object(static_cast<std::size_t>(s_count), false);
    for (int s = 0; s < s_count; ++s) {
      const auto& seed = fwd.seeds.seeds[static_cast<std::size_t>(s)];
      seed_qpixels.push_back({std::min(seed.py / 4, full_h / 4 - 1),
                              std::min(seed.px / 4, full_w / 4 - 1)});
      std::size_t i = static_cast<std::size_t>(seed.py) * full_w + seed.px;
      on_object[static_cast<std::size_t>(s)] = sample.mask.labels[i] != 0;
    }

    // view-wise graspness targets at the seeds (Eq. 10 pass rates, then
    // column-wise normalization over this step's seed population)
    std::vector<double> raw_view(static_cast<std::size_t>(s_count) * v, 0.0);
    std::vector<double> raw_point(static_cast<std::size_t>(s_count), 0.0);
    for (int s = 0; s < s_count; ++s) {
      if (!on_object[static_cast<std::size_t>(s)]) continue;
      const auto& seed = fwd.seeds.seeds[static_cast<std::size_t>(s)];
      for (int j = 0; j < v; ++j) {
        auto grid = labeler::candidate_grid(
            sample.scenery, seed.point,
            model.views[static_cast<std::size_t>(j)], config.label_inplane,
            config.label_depths, config.depth_step, config.width_max,
            config.friction_min, config.friction_max, gripper,
            config.collision_pitch);
        int passing = 0;
        for (const auto& c : grid)
          if (c.quality > config.quality_threshold && c.collision_free)
            ++passing;
        raw_view[static_cast<std::size_t>(s) * v + j] =
            static_cast<double>(passing) / static_cast<double>(grid.size());
      }
    }
    labeler::NormalizedGraspness normalized = labeler::normalize_graspness(
        raw_point, raw_view, s_count, v);

    Tensor view_label({s_count, v}), seed_mask({s_count, v});
    for (int s = 0; s < s_count; ++s)
      for (int j = 0; j < v; ++j) {
        view_label.at2(s, j) = normalized.viewwise[static_cast<std::size_t>(s) * v + j];
        seed_mask.at2(s, j) = on_object[static_cast<std::size_t>(s)] ? 1.0 : 0.0;
      }

    // score / width targets at the assigned view, on the head's grid
    Tensor score_label({s_count, cells}), score_mask({s_count, cells});
    Tensor width_label({s_count, cells}), width_mask({s_count, cells});
    for (int s = 0; s < s_count; ++s) {
      if (!on_object[static_cast<std::size_t>(s)]) continue;
      const auto& seed = fwd.seeds.seeds[static_cast<std::size_t>(s)];
      auto grid = labeler::candidate_grid(
          sample.scenery, seed.point,
          model.views[static_cast<std::size_t>(seed.view)],
          config.inplane_bins, config.depth_bins, config.depth_step,
          config.width_max, config.friction_min, config.friction_max, gripper,
          config.collision_pitch);
      for (int c = 0; c < cells; ++c) {
        score_label.at2(s, c) = grid[static_cast<std::size_t>(c)].quality;
        score_mask.at2(s, c) = 1.0;
        width_label.at2(s, c) = grid[static_cast<std::size_t>(c)].width;
        width_mask.at2(s, c) =
            grid[static_cast<std::size_t>(c)].quality > 0.0 ? 1.0 : 0.0;
      }
    }

    inputs.view_scores = nn::gather_pixels(fwd.view_probs, seed_qpixels);
    inputs.view_label = view_label;
    inputs.seed_mask = seed_mask;
    inputs.grasp_scores = fwd.grids.scores;
    inputs.grasp_widths = fwd.grids.widths;
    inputs.score_label = score_label;
    inputs.score_mask = score_mask;
    inputs.width_label = width_label;
    inputs.width_mask = width_mask;
  } else {
    // no seeds survived: the seed-dependent components contribute zero
    inputs.view_scores = nn::constant(Tensor({1, v}));
    inputs.view_label = Tensor({1, v});
    inputs.seed_mask = Tensor({1, v});
    inputs.grasp_scores = nn::constant(Tensor({1, cells}));
    inputs.grasp_widths = nn::constant(Tensor({1, cells}));
    inputs.score_label = Tensor({1, cells});
    inputs.score_mask = Tensor({1, cells});
    inputs.width_label = Tensor({1, cells});
    inputs.width_mask = Tensor({1, cells});
  }

  return losses::multitask_loss(inputs, config.loss_alpha, config.loss_beta,
                                config.loss_lambda, config.ce_floor);
}

// -------------------------------------------------------------------------
// training
// -------------------------------------------------------------------------

TrainResult train_tiny(Model& model, const std::vector<SampleInputs>& samples,
                       const PipelineConfig& config, int steps) {
  require(!samples.empty(), errc::precondition, "need at least one sample");
  for (const auto& s : samples)
    require(s.has_labels, errc::precondition, "training samples need labels");

  nn::AdamOptimizer optimizer(config.learning_rate, config.adam_beta1,
                              config.adam_beta2, config.adam_eps);
  TrainResult result;
  int per_epoch = static_cast<int>(samples.size());
  for (int step = 0; step < steps; ++step) {
    const SampleInputs& sample =
        samples[static_cast<std::size_t>(step % per_epoch)];
    int epoch = step / per_epoch;
    double lr_scale = std::pow(config.lr_decay, static_cast<double>(epoch));

    model.store.zero_grads();
    ForwardResult fwd = forward(model, sample, config, SpikeMode::hard);
    losses::LossResult loss = build_loss(model, sample, fwd, config);
    if (!std::isfinite(loss.breakdown.total))
      fail(errc::divergence, "training loss became non-finite");
    nn::backward(loss.total);
    optimizer.step(model.store, lr_scale);
    result.curve.push_back(loss.breakdown);
  }
  return result;
}

void write_loss_curve(const std::vector<losses::LossBreakdown>& curve,
                      const std::string& path) {
  std::ostringstream os;
  os << "step,objectness,pointwise,viewwise,score,width,total\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& b = curve[i];
    os << i << "," << format_f64(b.objectness) << "," << format_f64(b.pointwise)
       << "," << format_f64(b.viewwise) << "," << format_f64(b.score) << ","
       << format_f64(b.width) << "," << format_f64(b.total) << "\n";
  }
  write_text_file(path, os.str());
}

// -------------------------------------------------------------------------
// inference
// -------------------------------------------------------------------------

InferOutputs run_infer(const Model& model,
                       const scene::SceneDescription& scenery,
                       const PipelineConfig& config,
                       const std::string& out_dir,
                       const std::string& frame_id) {
  SampleInputs sample =
      prepare_inputs(scenery, config, /*with_labels=*/false, frame_id);
  cost::CostTrace trace;
  ForwardResult fwd = forward(model, sample, config, SpikeMode::hard, &trace);

  InferOutputs out;
  out.maps = fwd.map_values;
  out.counts = cost::count_ops(trace);
  out.activity = fwd.mean_activity;
  if (fwd.have_seeds) {
    out.grasps = grasp::select_best(fwd.grids.scores->val,
                                    fwd.grids.widths->val, fwd.seeds,
                                    model.views, config.inplane_bins,
                                    config.depth_bins, config.depth_step);
    for (const auto& g : out.grasps)
      require(grasp::pose_valid(g, config.width_max), errc::domain,
              "pipeline emitted an invalid grasp pose");
  }

  if (!out_dir.empty()) {
    std::uint64_t hash = config.hash();
    grasp::save_grasps(out.grasps, out_dir + "/" + frame_id + "_grasps.txt",
                       frame_id, hash);
    write_pgm(out_dir + "/" + frame_id + "_objectness.pgm",
              out.maps.objectness, out.maps.height, out.maps.width, 1.0);
    write_pgm(out_dir + "/" + frame_id + "_graspness.pgm", out.maps.graspness,
              out.maps.height, out.maps.width, 1.0);
    write_f32_grid(out_dir + "/" + frame_id + "_objectness.grid",
                   out.maps.objectness, out.maps.height, out.maps.width, hash);
    write_f32_grid(out_dir + "/" + frame_id + "_graspness.grid",
                   out.maps.graspness, out.maps.height, out.maps.width, hash);
    cost::save_trace(trace, out_dir + "/" + frame_id + "_trace.csv");
  }
  return out;
}

}  // namespace spikegrasp::pipeline
