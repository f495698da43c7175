#pragma once

#include <vector>

#include "spikegrasp/nn.hpp"
#include "spikegrasp/rng.hpp"
#include "spikegrasp/spike.hpp"

namespace spikegrasp::pathway {

using nn::ParamStore;
using nn::Tensor;
using nn::Var;

// 2D convolution module: weights + bias + geometry.
struct Conv2d {
  Var w, b;
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kernel, int stride_, int pad_, Rng& rng,
         ParamStore& store, const std::string& name);

  Var forward(const Var& x) const { return nn::conv2d(x, w, b, stride, pad); }
};

// Feature extractor: 7x7 stride-2 entry, residual blocks, a second
// downsampler to 1/4 resolution, then per-scale heads at 1/4, 1/8, 1/16.
struct ConvStack {
  int in_channels = 0;
  int channels = 0;
  std::uint64_t init_seed = 0;  // recorded for reproducibility

  Conv2d entry;          // in -> C, 7x7 s2
  Conv2d res1_a, res1_b; // residual at 1/2
  Conv2d res2_a, res2_b;
  Conv2d down4;          // C -> C, 3x3 s2
  Conv2d res3_a, res3_b; // residual at 1/4
  Conv2d head4;          // C -> C at 1/4
  Conv2d down8;          // 1/4 -> 1/8
  Conv2d down16;         // 1/8 -> 1/16

  ConvStack() = default;
  ConvStack(int in_channels, int channels, std::uint64_t seed,
            ParamStore& store);
};

struct FeaturePyramid {
  Var f4, f8, f16;  // 1/4, 1/8, 1/16 resolution
};

// Stacks the three sub-streams channel-wise into a (3N,H,W) tensor of
// binary values; the network input.
Tensor substreams_to_tensor(const spike::SpikeStream& t0,
                            const spike::SpikeStream& t1,
                            const spike::SpikeStream& t2);

FeaturePyramid extract_features(const Var& input, const ConvStack& weights);

// Eq.-style all-pairs correlation over 1/4-resolution features.
Var correlate(const Var& f_left, const Var& f_right);

// Four-level pyramid by 1D average pooling (kernel 2, stride 2) along the
// last (matching) dimension.
std::vector<Var> build_pyramid(const Var& volume);

// Multi-level interpolated sampling around a per-pixel fractional disparity.
Var lookup(const std::vector<Var>& pyramid, const Var& disparity, int radius);

}  // namespace spikegrasp::pathway
