#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikegrasp/scene.hpp"

namespace spikegrasp::spike {

using scene::CameraSide;
using scene::LuminanceField;

// Bit-packed binary K x H x W spike tensor. Packing is frame-major then
// row-major, MSB-first within each byte.
class SpikeStream {
 public:
  SpikeStream() = default;
  SpikeStream(int frames, int height, int width, double readout_rate,
              double threshold, double t0, CameraSide camera);

  int frames() const { return frames_; }
  int height() const { return height_; }
  int width() const { return width_; }
  double readout_rate() const { return readout_rate_; }
  double threshold() const { return threshold_; }
  double t0() const { return t0_; }
  CameraSide camera() const { return camera_; }
  double dt() const { return 1.0 / readout_rate_; }

  bool get(int k, int y, int x) const {
    std::size_t bit = bit_index(k, y, x);
    return (bits_[bit >> 3] >> (7 - (bit & 7))) & 1u;
  }
  void set(int k, int y, int x, bool v) {
    std::size_t bit = bit_index(k, y, x);
    std::uint8_t m = static_cast<std::uint8_t>(1u << (7 - (bit & 7)));
    if (v)
      bits_[bit >> 3] |= m;
    else
      bits_[bit >> 3] &= static_cast<std::uint8_t>(~m);
  }

  std::int64_t count_spikes() const;
  int count_window(int y, int x, int first_frame, int n_frames) const;

  const std::vector<std::uint8_t>& packed() const { return bits_; }
  std::vector<std::uint8_t>& packed() { return bits_; }

  // Unpacked view (one byte per bit) and its inverse; the round-trip is
  // exercised by property tests.
  std::vector<std::uint8_t> unpack() const;
  static SpikeStream pack(const std::vector<std::uint8_t>& flat, int frames,
                          int height, int width, double readout_rate,
                          double threshold, double t0, CameraSide camera);

 private:
  std::size_t bit_index(int k, int y, int x) const {
    return (static_cast<std::size_t>(k) * height_ + y) * width_ + x;
  }

  int frames_ = 0, height_ = 0, width_ = 0;
  double readout_rate_ = 1.0;
  double threshold_ = 1.0;
  double t0_ = 0.0;
  CameraSide camera_ = CameraSide::left;
  std::vector<std::uint8_t> bits_;
};

// Integrate-and-fire simulation. Irradiance is held constant within each
// readout interval; the per-interval increment must stay below the threshold
// so at most one spike per interval can occur (the modulo form and the
// subtract-threshold reset then coincide).
SpikeStream simulate(const std::vector<const LuminanceField*>& luminance_seq,
                     double threshold, double readout_rate,
                     CameraSide camera = CameraSide::left,
                     std::vector<double>* final_residual = nullptr);

SpikeStream simulate(const std::vector<LuminanceField>& luminance_seq,
                     double threshold, double readout_rate,
                     CameraSide camera = CameraSide::left,
                     std::vector<double>* final_residual = nullptr);

// Static-scene shortcut: one field repeated for every interval.
SpikeStream simulate_static(const LuminanceField& field, int frames,
                            double threshold, double readout_rate,
                            CameraSide camera = CameraSide::left,
                            std::vector<double>* final_residual = nullptr);

// Contiguous N-frame sub-stream centred on t_center.
SpikeStream window(const SpikeStream& stream, double t_center, int n_frames);

int window_start_frame(const SpikeStream& stream, double t_center,
                       int n_frames);

// Spike-count playback reconstruction over the trailing `window_frames`
// frames: irradiance estimate count * theta / (window * dt).
LuminanceField reconstruct_tfp(const SpikeStream& stream, int window_frames);

// Binary stream file (magic SPKG).
void save_stream(const SpikeStream& stream, const std::string& path);
SpikeStream load_stream(const std::string& path);

}  // namespace spikegrasp::spike
