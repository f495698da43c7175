#pragma once

#include <string>
#include <vector>

#include "spikegrasp/config.hpp"
#include "spikegrasp/costmeter.hpp"
#include "spikegrasp/evaluator.hpp"
#include "spikegrasp/graspable.hpp"
#include "spikegrasp/grasp.hpp"
#include "spikegrasp/labeler.hpp"
#include "spikegrasp/losses.hpp"
#include "spikegrasp/pathway.hpp"
#include "spikegrasp/rsnn.hpp"
#include "spikegrasp/scene.hpp"
#include "spikegrasp/spike.hpp"

namespace spikegrasp::pipeline {

using nn::SpikeMode;
using nn::Tensor;
using nn::Var;

// All trainable parameters plus their architecture constants.
struct Model {
  nn::ParamStore store;
  pathway::ConvStack extractor;
  rsnn::UpdateModule update;
  graspable::Decoder decoder;
  graspable::ViewHead viewhead;
  grasp::SetEncoder set_encoder;
  grasp::GraspHead head;
  std::vector<Vec3> views;
  std::uint64_t init_seed = 0;

  int input_channels = 0;   // 3 * window_frames
  int hidden_total = 0;     // 1 + hidden_channels (disparity + learned)

  static Model init(const PipelineConfig& config, std::uint64_t seed);
};

void save_checkpoint(const Model& model, const std::string& path,
                     std::uint64_t config_hash);
// Shapes must match the constructed model; returns the stored config hash.
std::uint64_t load_checkpoint(Model& model, const std::string& path);

// Stereo spike tensors plus ground-truth labels for one scene.
struct SampleInputs {
  scene::SceneDescription scenery;
  std::string id;
  Tensor left, right;  // (3N, H, W)
  scene::ObjectMask mask;
  labeler::SceneLabels labels;  // filled when with_labels
  bool has_labels = false;
};

SampleInputs prepare_inputs(const scene::SceneDescription& scenery,
                            const PipelineConfig& config, bool with_labels,
                            const std::string& id = "frame");

// Deterministic initialization of the hidden disparity channel: spike-count
// playback images of both streams are block-matched at full resolution
// (normalized correlation, parabolic sub-pixel refinement) and pooled to
// quarter resolution weighted by patch energy. Training-independent.
Tensor bootstrap_disparity(const Tensor& left_stream, const Tensor& right_stream,
                           double min_disparity_q, double max_disparity_q);

struct ForwardResult {
  graspable::MapsVar maps;
  graspable::GraspableMaps map_values;
  Var view_probs;     // (V, H/4, W/4)
  Var h_final;
  Tensor disparity;   // quarter-res field
  graspable::SeedSet seeds;
  bool have_seeds = false;
  std::vector<Var> seed_features;
  grasp::GraspGrid grids;  // valid when have_seeds
  double mean_activity = 0.0;
};

// `frozen_seeds` bypasses seed selection; the gradient check uses it to stay
// on one smooth branch of the piecewise-constant selection while probing.
ForwardResult forward(const Model& model, const SampleInputs& sample,
                      const PipelineConfig& config, SpikeMode mode,
                      cost::CostTrace* trace = nullptr,
                      const graspable::SeedSet* frozen_seeds = nullptr);

// Ground-truth targets for the prediction heads, computed at the seeds the
// network actually selected (scene geometry queried on the fly).
losses::LossResult build_loss(const Model& model, const SampleInputs& sample,
                              const ForwardResult& fwd,
                              const PipelineConfig& config);

struct TrainResult {
  std::vector<losses::LossBreakdown> curve;
};

// Deterministic single-threaded training loop (adaptive-moment updates,
// multiplicative per-epoch decay). Epoch = one pass over the sample list.
TrainResult train_tiny(Model& model, const std::vector<SampleInputs>& samples,
                       const PipelineConfig& config, int steps);

void write_loss_curve(const std::vector<losses::LossBreakdown>& curve,
                      const std::string& path);

struct InferOutputs {
  std::vector<grasp::GraspPose> grasps;
  graspable::GraspableMaps maps;
  cost::OpCounts counts;
  double activity = 0.0;
};

// Full inference: simulate, window, extract, correlate, iterate, decode,
// maps, seeds, grasps. Writes grasp list, map images and the op-count trace
// when out_dir is nonempty.
InferOutputs run_infer(const Model& model,
                       const scene::SceneDescription& scenery,
                       const PipelineConfig& config,
                       const std::string& out_dir,
                       const std::string& frame_id = "frame");

}  // namespace spikegrasp::pipeline
