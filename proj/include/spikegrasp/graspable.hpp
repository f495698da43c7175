#pragma once

#include <vector>

#include "spikegrasp/geometry.hpp"
#include "spikegrasp/pathway.hpp"
#include "spikegrasp/scene.hpp"

namespace spikegrasp::graspable {

using nn::ParamStore;
using nn::Tensor;
using nn::Var;

// Encoder-decoder with skip connections from the 1/4-resolution hidden state
// up to full resolution; a final 1x1 convolution and sigmoid yield the
// two-channel probability map (objectness, graspness).
struct Decoder {
  int in_channels = 0;
  int width = 0;  // feature width F

  pathway::Conv2d enc1_a, enc1_b, down1;
  pathway::Conv2d enc2_a, enc2_b, down2;
  pathway::Conv2d enc3_a, enc3_b;
  pathway::Conv2d dec2, dec1;       // after skip concat
  pathway::Conv2d up_half, up_full; // 1/4 -> 1/2 -> full
  pathway::Conv2d head;             // 1x1 -> 2 channels

  Decoder() = default;
  Decoder(int in_channels, int width, std::uint64_t seed, ParamStore& store);
};

struct MapsVar {
  Var objectness;  // (1,H,W) probabilities
  Var graspness;   // (1,H,W) probabilities
};

// Full-resolution probability maps from the hidden state (values in [0,1]).
MapsVar predict_maps(const Var& h_final, const Decoder& weights, int out_h,
                     int out_w);

struct GraspableMaps {
  int height = 0, width = 0;
  std::vector<double> objectness;
  std::vector<double> graspness;
};

GraspableMaps maps_values(const MapsVar& maps);

// Per-pixel view scores at 1/4 resolution (V channels, sigmoid-bounded).
struct ViewHead {
  int in_channels = 0;
  int views = 0;
  pathway::Conv2d conv_a;  // 3x3
  pathway::Conv2d conv_b;  // 1x1 -> V

  ViewHead() = default;
  ViewHead(int in_channels, int views, std::uint64_t seed, ParamStore& store);

  Var forward(const Var& h) const {
    return conv_b.forward(nn::relu(conv_a.forward(h)));  // logits
  }
};

// Back-projection source: reads the dedicated disparity channel of the
// hidden field (quarter-resolution units) and lifts pixels into the left
// camera frame.
struct BackprojectionField {
  Tensor disparity;  // (H/4, W/4), quarter-res disparity
  scene::StereoRig rig;
  double min_disparity = 0.25;  // quarter-res clamp against divide-by-zero

  Vec3 point_for_pixel(int px, int py) const;
};

struct Seed {
  int px = 0, py = 0;   // full-resolution pixel
  int view = 0;         // approach-view index
  Vec3 point;           // back-projected 3D point, camera frame
};

struct SeedSet {
  std::vector<Seed> seeds;
};

// Keeps pixels with objectness above the threshold, ranks by graspness
// (ties broken by row-major pixel order), assigns each seed its top-scoring
// approach view and back-projects it.
SeedSet select_seeds(const GraspableMaps& maps,
                     const Tensor& view_scores,  // (V, H/4, W/4)
                     const BackprojectionField& backprojection,
                     double objectness_threshold, int top_m);

}  // namespace spikegrasp::graspable
