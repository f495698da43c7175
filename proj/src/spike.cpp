#include "spikegrasp/spike.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "spikegrasp/error.hpp"
#include "spikegrasp/io.hpp"

namespace spikegrasp::spike {

SpikeStream::SpikeStream(int frames, int height, int width,
                         double readout_rate, double threshold, double t0,
                         CameraSide camera)
    : frames_(frames),
      height_(height),
      width_(width),
      readout_rate_(readout_rate),
      threshold_(threshold),
      t0_(t0),
      camera_(camera) {
  require(frames > 0 && height > 0 && width > 0, errc::precondition,
          "stream dimensions must be positive");
  require(readout_rate > 0, errc::precondition, "readout rate must be > 0");
  require(threshold > 0, errc::precondition, "threshold must be > 0");
  std::size_t nbits =
      static_cast<std::size_t>(frames) * height * width;
  bits_.assign((nbits + 7) / 8, 0);
}

std::int64_t SpikeStream::count_spikes() const {
  std::int64_t n = 0;
  for (std::uint8_t b : bits_) {
    n += (b & 1) + ((b >> 1) & 1) + ((b >> 2) & 1) + ((b >> 3) & 1) +
         ((b >> 4) & 1) + ((b >> 5) & 1) + ((b >> 6) & 1) + ((b >> 7) & 1);
  }
  return n;
}

int SpikeStream::count_window(int y, int x, int first_frame,
                              int n_frames) const {
  int n = 0;
  for (int k = first_frame; k < first_frame + n_frames; ++k)
    n += get(k, y, x) ? 1 : 0;
  return n;
}

std::vector<std::uint8_t> SpikeStream::unpack() const {
  std::size_t nbits = static_cast<std::size_t>(frames_) * height_ * width_;
  std::vector<std::uint8_t> flat(nbits);
  for (std::size_t i = 0; i < nbits; ++i)
    flat[i] = (bits_[i >> 3] >> (7 - (i & 7))) & 1u;
  return flat;
}

SpikeStream SpikeStream::pack(const std::vector<std::uint8_t>& flat,
                              int frames, int height, int width,
                              double readout_rate, double threshold, double t0,
                              CameraSide camera) {
  SpikeStream s(frames, height, width, readout_rate, threshold, t0, camera);
  std::size_t nbits = static_cast<std::size_t>(frames) * height * width;
  require(flat.size() == nbits, errc::shape_mismatch,
          "flat spike array has wrong length");
  for (std::size_t i = 0; i < nbits; ++i)
    if (flat[i]) s.bits_[i >> 3] |= static_cast<std::uint8_t>(1u << (7 - (i & 7)));
  return s;
}

// -------------------------------------------------------------------------
// simulation
// -------------------------------------------------------------------------

SpikeStream simulate(const std::vector<const LuminanceField*>& luminance_seq,
                     double threshold, double readout_rate, CameraSide camera,
                     std::vector<double>* final_residual) {
  require(!luminance_seq.empty(), errc::precondition,
          "luminance sequence is empty");
  require(threshold > 0, errc::precondition, "threshold must be > 0");
  require(readout_rate > 0, errc::precondition, "readout rate must be > 0");

  int h = luminance_seq[0]->height;
  int w = luminance_seq[0]->width;
  for (const auto* f : luminance_seq)
    require(f->height == h && f->width == w, errc::shape_mismatch,
            "luminance fields differ in resolution");

  int frames = static_cast<int>(luminance_seq.size());
  double dt = 1.0 / readout_rate;
  SpikeStream stream(frames, h, w, readout_rate, threshold,
                     luminance_seq[0]->timestamp, camera);

  std::size_t npx = static_cast<std::size_t>(h) * w;
  std::vector<double> residual(npx, 0.0);

  for (int k = 0; k < frames; ++k) {
    const std::vector<double>& lum = luminance_seq[k]->values;
    for (std::size_t i = 0; i < npx; ++i) {
      double inc = lum[i] * dt;
      if (inc >= threshold)
        fail(errc::saturation,
             "irradiance * dt >= threshold: more than one spike per readout "
             "interval would be required");
      if (inc < 0.0 || !std::isfinite(inc))
        fail(errc::precondition, "irradiance must be finite and >= 0");
      double acc = residual[i] + inc;
      if (acc >= threshold) {
        acc -= threshold;
        stream.set(k, static_cast<int>(i / w), static_cast<int>(i % w), true);
      }
      residual[i] = acc;
    }
  }
  if (final_residual) *final_residual = std::move(residual);
  return stream;
}

SpikeStream simulate(const std::vector<LuminanceField>& luminance_seq,
                     double threshold, double readout_rate, CameraSide camera,
                     std::vector<double>* final_residual) {
  std::vector<const LuminanceField*> ptrs;
  ptrs.reserve(luminance_seq.size());
  for (const auto& f : luminance_seq) ptrs.push_back(&f);
  return simulate(ptrs, threshold, readout_rate, camera, final_residual);
}

SpikeStream simulate_static(const LuminanceField& field, int frames,
                            double threshold, double readout_rate,
                            CameraSide camera,
                            std::vector<double>* final_residual) {
  require(frames >= 1, errc::precondition, "need at least one frame");
  std::vector<const LuminanceField*> ptrs(static_cast<std::size_t>(frames),
                                          &field);
  return simulate(ptrs, threshold, readout_rate, camera, final_residual);
}

// -------------------------------------------------------------------------
// windowing
// -------------------------------------------------------------------------

int window_start_frame(const SpikeStream& stream, double t_center,
                       int n_frames) {
  require(n_frames > 0, errc::precondition, "window must be positive");
  double dt = stream.dt();
  // frame index whose interval midpoint is nearest to t_center
  double center = (t_center - stream.t0()) / dt;
  int start = static_cast<int>(std::llround(center)) - n_frames / 2;
  if (start < 0 || start + n_frames > stream.frames())
    fail(errc::out_of_range, "window exceeds stream bounds");
  return start;
}

SpikeStream window(const SpikeStream& stream, double t_center, int n_frames) {
  int start = window_start_frame(stream, t_center, n_frames);
  SpikeStream out(n_frames, stream.height(), stream.width(),
                  stream.readout_rate(), stream.threshold(),
                  stream.t0() + start * stream.dt(), stream.camera());
  for (int k = 0; k < n_frames; ++k)
    for (int y = 0; y < stream.height(); ++y)
      for (int x = 0; x < stream.width(); ++x)
        if (stream.get(start + k, y, x)) out.set(k, y, x, true);
  return out;
}

// -------------------------------------------------------------------------
// reconstruction
// -------------------------------------------------------------------------

LuminanceField reconstruct_tfp(const SpikeStream& stream, int window_frames) {
  require(window_frames >= 1 && window_frames <= stream.frames(),
          errc::precondition, "window must lie within the stream");
  LuminanceField field;
  field.height = stream.height();
  field.width = stream.width();
  field.timestamp = stream.t0() + stream.frames() * stream.dt();
  field.values.assign(
      static_cast<std::size_t>(field.height) * field.width, 0.0);
  int first = stream.frames() - window_frames;
  double scale = stream.threshold() / (window_frames * stream.dt());
  for (int y = 0; y < field.height; ++y)
    for (int x = 0; x < field.width; ++x)
      field.values[static_cast<std::size_t>(y) * field.width + x] =
          stream.count_window(y, x, first, window_frames) * scale;
  return field;
}

// -------------------------------------------------------------------------
// stream file
// -------------------------------------------------------------------------

void save_stream(const SpikeStream& stream, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, "cannot open " + path);
  os.write("SPKG", 4);
  write_u16(os, 1);
  write_u32(os, static_cast<std::uint32_t>(stream.frames()));
  write_u32(os, static_cast<std::uint32_t>(stream.height()));
  write_u32(os, static_cast<std::uint32_t>(stream.width()));
  write_f64(os, stream.readout_rate());
  write_f64(os, stream.threshold());
  write_f64(os, stream.t0());
  write_u8(os, stream.camera() == CameraSide::left ? 0 : 1);
  os.write(reinterpret_cast<const char*>(stream.packed().data()),
           static_cast<std::streamsize>(stream.packed().size()));
}

SpikeStream load_stream(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "SPKG", 4) != 0)
    fail(errc::io, "not a spike stream file: " + path);
  std::uint16_t version = read_u16(is);
  if (version != 1) fail(errc::io, "unsupported stream version");
  int frames = static_cast<int>(read_u32(is));
  int height = static_cast<int>(read_u32(is));
  int width = static_cast<int>(read_u32(is));
  double rate = read_f64(is);
  double theta = read_f64(is);
  double t0 = read_f64(is);
  CameraSide cam = read_u8(is) == 0 ? CameraSide::left : CameraSide::right;
  SpikeStream stream(frames, height, width, rate, theta, t0, cam);
  is.read(reinterpret_cast<char*>(stream.packed().data()),
          static_cast<std::streamsize>(stream.packed().size()));
  if (static_cast<std::size_t>(is.gcount()) != stream.packed().size())
    fail(errc::io, "truncated spike stream file");
  return stream;
}

}  // namespace spikegrasp::spike
