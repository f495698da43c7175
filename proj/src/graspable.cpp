#include "spikegrasp/graspable.hpp"

#include <algorithm>

#include "spikegrasp/error.hpp"

namespace spikegrasp::graspable {

Decoder::Decoder(int in_channels_, int width_, std::uint64_t seed,
                 ParamStore& store)
    : in_channels(in_channels_), width(width_) {
  Rng rng(seed, /*stream=*/0xdec0de);
  int f = width;
  enc1_a = pathway::Conv2d(in_channels, f, 3, 1, 1, rng, store, "decoder.enc1_a");
  enc1_b = pathway::Conv2d(f, f, 3, 1, 1, rng, store, "decoder.enc1_b");
  down1 = pathway::Conv2d(f, f, 3, 2, 1, rng, store, "decoder.down1");
  enc2_a = pathway::Conv2d(f, f, 3, 1, 1, rng, store, "decoder.enc2_a");
  enc2_b = pathway::Conv2d(f, f, 3, 1, 1, rng, store, "decoder.enc2_b");
  down2 = pathway::Conv2d(f, f, 3, 2, 1, rng, store, "decoder.down2");
  enc3_a = pathway::Conv2d(f, f, 3, 1, 1, rng, store, "decoder.enc3_a");
  enc3_b = pathway::Conv2d(f, f, 3, 1, 1, rng, store, "decoder.enc3_b");
  dec2 = pathway::Conv2d(2 * f, f, 3, 1, 1, rng, store, "decoder.dec2");
  dec1 = pathway::Conv2d(2 * f, f, 3, 1, 1, rng, store, "decoder.dec1");
  up_half = pathway::Conv2d(f, f, 3, 1, 1, rng, store, "decoder.up_half");
  up_full = pathway::Conv2d(f, f, 3, 1, 1, rng, store, "decoder.up_full");
  head = pathway::Conv2d(f, 2, 1, 1, 0, rng, store, "decoder.head");
}

MapsVar predict_maps(const Var& h_final, const Decoder& weights, int out_h,
                     int out_w) {
  require(h_final->val.ndim() == 3, errc::shape_mismatch,
          "hidden state must be (C,H,W)");
  require(h_final->val.dim(0) == weights.in_channels, errc::shape_mismatch,
          "decoder built for a different hidden width");
  int h4 = h_final->val.dim(1), w4 = h_final->val.dim(2);
  require(h4 * 4 == out_h && w4 * 4 == out_w, errc::shape_mismatch,
          "hidden state is not at 1/4 resolution");

  auto stage = [](const Var& x, const pathway::Conv2d& a,
                  const pathway::Conv2d& b) {
    return nn::relu(b.forward(nn::relu(a.forward(x))));
  };

  Var e1 = stage(h_final, weights.enc1_a, weights.enc1_b);          // 1/4
  Var e2 = stage(nn::relu(weights.down1.forward(e1)), weights.enc2_a,
                 weights.enc2_b);                                   // 1/8
  Var e3 = stage(nn::relu(weights.down2.forward(e2)), weights.enc3_a,
                 weights.enc3_b);                                   // 1/16

  Var u2 = nn::relu(weights.dec2.forward(nn::concat_channels(
      {nn::bilinear_resize(e3, e2->val.dim(1), e2->val.dim(2)), e2})));
  Var u1 = nn::relu(weights.dec1.forward(nn::concat_channels(
      {nn::bilinear_resize(u2, e1->val.dim(1), e1->val.dim(2)), e1})));

  Var half = nn::relu(
      weights.up_half.forward(nn::bilinear_resize(u1, out_h / 2, out_w / 2)));
  Var full = nn::relu(
      weights.up_full.forward(nn::bilinear_resize(half, out_h, out_w)));
  Var logits = weights.head.forward(full);
  Var probs = nn::sigmoid(logits);

  MapsVar maps;
  maps.objectness = nn::slice_channels(probs, 0, 1);
  maps.graspness = nn::slice_channels(probs, 1, 2);
  return maps;
}

GraspableMaps maps_values(const MapsVar& maps) {
  GraspableMaps out;
  out.height = maps.objectness->val.dim(1);
  out.width = maps.objectness->val.dim(2);
  std::size_t n = static_cast<std::size_t>(out.height) * out.width;
  out.objectness.assign(maps.objectness->val.data(),
                        maps.objectness->val.data() + n);
  out.graspness.assign(maps.graspness->val.data(),
                       maps.graspness->val.data() + n);
  return out;
}

ViewHead::ViewHead(int in_channels_, int views_, std::uint64_t seed,
                   ParamStore& store)
    : in_channels(in_channels_), views(views_) {
  Rng rng(seed, /*stream=*/0x71e35);
  conv_a =
      pathway::Conv2d(in_channels, in_channels, 3, 1, 1, rng, store,
                      "viewhead.conv_a");
  conv_b = pathway::Conv2d(in_channels, views, 1, 1, 0, rng, store,
                           "viewhead.conv_b");
}

Vec3 BackprojectionField::point_for_pixel(int px, int py) const {
  int qx = std::min(px / 4, disparity.dim(1) - 1);
  int qy = std::min(py / 4, disparity.dim(0) - 1);
  double d_quarter = std::max(min_disparity, disparity.at2(qy, qx));
  double d_full = 4.0 * d_quarter;
  double z = rig.focal_px * rig.baseline / d_full;
  return rig.backproject(px, py, z);
}

SeedSet select_seeds(const GraspableMaps& maps, const Tensor& view_scores,
                     const BackprojectionField& backprojection,
                     double objectness_threshold, int top_m) {
  require(objectness_threshold > 0.0 && objectness_threshold < 1.0,
          errc::precondition, "objectness threshold must lie in (0,1)");
  require(top_m >= 1, errc::precondition, "top_m must be >= 1");
  require(view_scores.ndim() == 3, errc::shape_mismatch,
          "view scores must be (V,H/4,W/4)");

  struct Ranked {
    double graspness;
    int index;  // row-major pixel
  };
  std::vector<Ranked> passing;
  std::size_t n = maps.objectness.size();
  for (std::size_t i = 0; i < n; ++i)
    if (maps.objectness[i] > objectness_threshold)
      passing.push_back({maps.graspness[i], static_cast<int>(i)});
  if (passing.empty())
    fail(errc::empty_seeds, "no pixel passes the objectness threshold");

  std::stable_sort(passing.begin(), passing.end(),
                   [](const Ranked& a, const Ranked& b) {
                     if (a.graspness != b.graspness)
                       return a.graspness > b.graspness;
                     return a.index < b.index;
                   });
  if (static_cast<int>(passing.size()) > top_m) passing.resize(top_m);

  int views = view_scores.dim(0);
  SeedSet set;
  for (const auto& r : passing) {
    Seed seed;
    seed.py = r.index / maps.width;
    seed.px = r.index % maps.width;
    int qy = std::min(seed.py / 4, view_scores.dim(1) - 1);
    int qx = std::min(seed.px / 4, view_scores.dim(2) - 1);
    int best_view = 0;
    double best = view_scores.at3(0, qy, qx);
    for (int v = 1; v < views; ++v)
      if (view_scores.at3(v, qy, qx) > best) {
        best = view_scores.at3(v, qy, qx);
        best_view = v;
      }
    seed.view = best_view;
    seed.point = backprojection.point_for_pixel(seed.px, seed.py);
    set.seeds.push_back(seed);
  }
  return set;
}

}  // namespace spikegrasp::graspable
