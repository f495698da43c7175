#include "spikegrasp/pathway.hpp"

#include "spikegrasp/error.hpp"

namespace spikegrasp::pathway {

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride_, int pad_,
               Rng& rng, ParamStore& store, const std::string& name)
    : stride(stride_), pad(pad_) {
  int fan_in = in_ch * kernel * kernel;
  w = store.add(Tensor::uniform_fan_in({out_ch, in_ch, kernel, kernel}, fan_in,
                                       rng),
                name + ".w");
  // biases share the fan-in-scaled init: with sparse binary inputs a zero
  // bias parks whole activation planes exactly on the rectifier kink
  b = store.add(Tensor::uniform_fan_in({out_ch}, fan_in, rng), name + ".b");
}

ConvStack::ConvStack(int in_channels_, int channels_, std::uint64_t seed,
                     ParamStore& store)
    : in_channels(in_channels_), channels(channels_), init_seed(seed) {
  Rng rng(seed, /*stream=*/0xfea7);
  int c = channels;
  entry = Conv2d(in_channels, c, 7, 2, 3, rng, store, "extractor.entry");
  res1_a = Conv2d(c, c, 3, 1, 1, rng, store, "extractor.res1_a");
  res1_b = Conv2d(c, c, 3, 1, 1, rng, store, "extractor.res1_b");
  res2_a = Conv2d(c, c, 3, 1, 1, rng, store, "extractor.res2_a");
  res2_b = Conv2d(c, c, 3, 1, 1, rng, store, "extractor.res2_b");
  down4 = Conv2d(c, c, 3, 2, 1, rng, store, "extractor.down4");
  res3_a = Conv2d(c, c, 3, 1, 1, rng, store, "extractor.res3_a");
  res3_b = Conv2d(c, c, 3, 1, 1, rng, store, "extractor.res3_b");
  head4 = Conv2d(c, c, 3, 1, 1, rng, store, "extractor.head4");
  down8 = Conv2d(c, c, 3, 2, 1, rng, store, "extractor.down8");
  down16 = Conv2d(c, c, 3, 2, 1, rng, store, "extractor.down16");
}

Tensor substreams_to_tensor(const spike::SpikeStream& t0,
                            const spike::SpikeStream& t1,
                            const spike::SpikeStream& t2) {
  int h = t1.height(), w = t1.width();
  require(t0.height() == h && t0.width() == w && t2.height() == h &&
              t2.width() == w,
          errc::shape_mismatch, "sub-streams differ in resolution");
  int n0 = t0.frames(), n1 = t1.frames(), n2 = t2.frames();
  Tensor out({n0 + n1 + n2, h, w});
  int c = 0;
  for (const auto* s : {&t0, &t1, &t2}) {
    for (int k = 0; k < s->frames(); ++k, ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out.at3(c, y, x) = s->get(k, y, x) ? 1.0 : 0.0;
  }
  return out;
}

static Var residual(const Var& x, const Conv2d& a, const Conv2d& b) {
  return nn::relu(nn::add(x, b.forward(nn::relu(a.forward(x)))));
}

FeaturePyramid extract_features(const Var& input, const ConvStack& weights) {
  require(input->val.ndim() == 3, errc::shape_mismatch,
          "extractor expects (C,H,W)");
  int h = input->val.dim(1), w = input->val.dim(2);
  require(h % 16 == 0 && w % 16 == 0, errc::shape_mismatch,
          "resolution must be divisible by 16");
  require(input->val.dim(0) == weights.in_channels, errc::shape_mismatch,
          "input channels do not match the extractor");

  Var x = nn::relu(weights.entry.forward(input));  // 1/2
  x = residual(x, weights.res1_a, weights.res1_b);
  x = residual(x, weights.res2_a, weights.res2_b);
  x = nn::relu(weights.down4.forward(x));          // 1/4
  x = residual(x, weights.res3_a, weights.res3_b);

  FeaturePyramid pyr;
  pyr.f4 = nn::relu(weights.head4.forward(x));
  pyr.f8 = nn::relu(weights.down8.forward(pyr.f4));
  pyr.f16 = nn::relu(weights.down16.forward(pyr.f8));
  return pyr;
}

Var correlate(const Var& f_left, const Var& f_right) {
  return nn::correlate(f_left, f_right);
}

std::vector<Var> build_pyramid(const Var& volume) {
  require(volume->val.ndim() == 3, errc::shape_mismatch,
          "volume must be (H,W,D)");
  require(volume->val.dim(2) >= 8, errc::shape_mismatch,
          "matching dimension too small for a four-level pyramid");
  std::vector<Var> levels;
  levels.push_back(volume);
  for (int l = 1; l < 4; ++l)
    levels.push_back(nn::avgpool_last(levels.back()));
  return levels;
}

Var lookup(const std::vector<Var>& pyramid, const Var& disparity, int radius) {
  require(radius >= 0, errc::precondition, "radius must be >= 0");
  for (std::size_t i = 0; i < disparity->val.numel(); ++i)
    require(std::isfinite(disparity->val[i]), errc::precondition,
            "disparity field must be finite");
  return nn::lookup(pyramid, disparity, radius);
}

}  // namespace spikegrasp::pathway
