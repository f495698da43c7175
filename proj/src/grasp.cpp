#include "spikegrasp/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spikegrasp/error.hpp"
#include "spikegrasp/io.hpp"

namespace spikegrasp::grasp {

bool pose_valid(const GraspPose& pose, double width_max) {
  const Mat3& r = pose.rotation;
  Mat3 rtr = r.transposed() * r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double expect = i == j ? 1.0 : 0.0;
      if (std::fabs(rtr.m[3 * i + j] - expect) > 1e-6) return false;
    }
  if (std::fabs(r.det() - 1.0) > 1e-6) return false;
  if (!(pose.width >= 0.0 && pose.width <= width_max)) return false;
  if (!(pose.score >= 0.0 && pose.score <= 1.0)) return false;
  for (double v : {pose.translation.x, pose.translation.y, pose.translation.z})
    if (!std::isfinite(v)) return false;
  return true;
}

std::vector<Vec3> fibonacci_sphere_views(int count) {
  require(count >= 1, errc::precondition, "need at least one view");
  std::vector<Vec3> views;
  views.reserve(static_cast<std::size_t>(count));
  double golden = 2.399963229728653;
  for (int i = 0; i < count; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / count;
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    double a = golden * i;
    views.push_back(Vec3{rho * std::cos(a), rho * std::sin(a), z});
  }
  return views;
}

Mat3 rotation_from_params(const Vec3& approach, double angle) {
  Vec3 a = normalized(approach);
  // closing axis: horizontal relative to +z when possible
  Vec3 b = cross(a, Vec3{0, 0, 1});
  double bn = norm(b);
  if (bn < 1e-9)
    b = Vec3{1, 0, 0};
  else
    b = b / bn;
  Vec3 c = cross(a, b);
  Mat3 r_view = Mat3::from_columns(b, c, a);
  return r_view * rotation_z(angle);
}

Mat3 rotation_from_params(int view_index, double angle,
                          const std::vector<Vec3>& views) {
  require(view_index >= 0 &&
              view_index < static_cast<int>(views.size()),
          errc::out_of_range, "view index out of range");
  require(angle >= 0.0 && angle < 3.14159265358979323846 + 1e-12,
          errc::precondition, "in-plane angle must lie in [0, pi)");
  return rotation_from_params(views[static_cast<std::size_t>(view_index)],
                              angle);
}

CandidateTensor crop_cylinder(const Vec3& seed_point, const Vec3& approach,
                              const SampleSource& source, double height,
                              double radius, int k_samples) {
  require(height > 0 && radius > 0, errc::precondition,
          "cylinder dimensions must be positive");
  require(k_samples >= 1, errc::precondition, "need at least one sample");
  require(source.points.size() == source.feat_pixels.size(),
          errc::shape_mismatch, "sample source arrays disagree");

  Mat3 frame = rotation_from_params(approach, 0.0);
  Mat3 to_local = frame.transposed();

  struct Member {
    Vec3 local;
    std::size_t source_index;
    double dist2;
  };
  std::vector<Member> inside;
  for (std::size_t i = 0; i < source.points.size(); ++i) {
    Vec3 local = to_local * (source.points[i] - seed_point);
    if (std::fabs(local.z) > 0.5 * height) continue;
    if (local.x * local.x + local.y * local.y > radius * radius) continue;
    inside.push_back({local, i, dot(local, local)});
  }
  if (inside.empty())
    fail(errc::empty_region, "no samples fall inside the crop cylinder");

  // nearest member pads short crops
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < inside.size(); ++i)
    if (inside[i].dist2 < inside[nearest].dist2) nearest = i;

  CandidateTensor tensor;
  tensor.coords = Tensor({k_samples, 3});
  tensor.feat_pixels.resize(static_cast<std::size_t>(k_samples));
  for (int k = 0; k < k_samples; ++k) {
    const Member& m = k < static_cast<int>(inside.size())
                          ? inside[static_cast<std::size_t>(k)]
                          : inside[nearest];
    tensor.coords.at2(k, 0) = m.local.x / radius;
    tensor.coords.at2(k, 1) = m.local.y / radius;
    tensor.coords.at2(k, 2) = m.local.z / radius;
    tensor.feat_pixels[static_cast<std::size_t>(k)] =
        source.feat_pixels[m.source_index];
  }
  return tensor;
}

SetEncoder::SetEncoder(int feat_channels_, int hidden_, std::uint64_t seed,
                       ParamStore& store)
    : feat_channels(feat_channels_), hidden(hidden_) {
  Rng rng(seed, /*stream=*/0x5e7e9c);
  int in = 3 + feat_channels;
  w1 = store.add(Tensor::uniform_fan_in({hidden, in}, in, rng),
                 "set_encoder.w1");
  b1 = store.add(Tensor::uniform_fan_in({hidden}, in, rng), "set_encoder.b1");
  w2 = store.add(Tensor::uniform_fan_in({hidden, hidden}, hidden, rng),
                 "set_encoder.w2");
  b2 = store.add(Tensor::uniform_fan_in({hidden}, hidden, rng),
                 "set_encoder.b2");
}

Var encode_candidates(const CandidateTensor& tensor, const Var& feature_field,
                      const SetEncoder& encoder) {
  require(feature_field->val.ndim() == 3 &&
              feature_field->val.dim(0) == encoder.feat_channels,
          errc::shape_mismatch, "feature field width mismatch");
  Var feats = nn::gather_pixels(feature_field, tensor.feat_pixels);
  Var rows = nn::concat_cols(nn::constant(tensor.coords), feats);
  Var h1 = nn::relu(nn::linear(rows, encoder.w1, encoder.b1));
  Var h2 = nn::relu(nn::linear(h1, encoder.w2, encoder.b2));
  return nn::max_rows(h2);
}

GraspHead::GraspHead(int in_channels_, int inplane_bins_, int depth_bins_,
                     double width_max_, std::uint64_t seed, ParamStore& store)
    : in_channels(in_channels_),
      inplane_bins(inplane_bins_),
      depth_bins(depth_bins_),
      width_max(width_max_) {
  Rng rng(seed, /*stream=*/0x6ea9);
  int out = inplane_bins * depth_bins * 2;
  w = store.add(Tensor::uniform_fan_in({out, in_channels}, in_channels, rng),
                "grasp_head.w");
  b = store.add(Tensor::uniform_fan_in({out}, in_channels, rng),
                "grasp_head.b");
}

GraspGrid predict_grasps(const std::vector<Var>& seed_features,
                         const GraspHead& head) {
  require(!seed_features.empty(), errc::precondition, "no seed features");
  Var stacked = nn::stack_rows(seed_features);  // (S, C')
  Var raw = nn::linear(stacked, head.w, head.b); // (S, A*D*2)
  int cells = head.inplane_bins * head.depth_bins;
  GraspGrid grid;
  grid.scores = nn::sigmoid(nn::slice_cols(raw, 0, cells));
  grid.widths =
      nn::clamp(nn::slice_cols(raw, cells, 2 * cells), 0.0, head.width_max);
  return grid;
}

std::vector<GraspPose> select_best(const Tensor& scores, const Tensor& widths,
                                   const graspable::SeedSet& seeds,
                                   const std::vector<Vec3>& views,
                                   int inplane_bins, int depth_bins,
                                   double depth_step) {
  require(scores.ndim() == 2 && scores.same_shape(widths), errc::shape_mismatch,
          "score/width grids disagree");
  require(scores.dim(0) == static_cast<int>(seeds.seeds.size()),
          errc::shape_mismatch, "grid rows must match seed count");
  require(scores.dim(1) == inplane_bins * depth_bins, errc::shape_mismatch,
          "grid columns must be A*D");
  require(scores.numel() > 0, errc::precondition, "empty grids");

  struct Pick {
    double score;
    int seed_index;
    int cell;
  };
  std::vector<Pick> picks;
  for (int s = 0; s < scores.dim(0); ++s) {
    int best_cell = 0;
    double best = scores.at2(s, 0);
    for (int c = 1; c < scores.dim(1); ++c)
      if (scores.at2(s, c) > best) {  // strict: ties keep the lower index
        best = scores.at2(s, c);
        best_cell = c;
      }
    picks.push_back({best, s, best_cell});
  }
  std::stable_sort(picks.begin(), picks.end(),
                   [](const Pick& a, const Pick& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.seed_index < b.seed_index;
                   });

  std::vector<GraspPose> out;
  double pi = 3.14159265358979323846;
  for (const Pick& p : picks) {
    const graspable::Seed& seed =
        seeds.seeds[static_cast<std::size_t>(p.seed_index)];
    int a_idx = p.cell / depth_bins;
    int d_idx = p.cell % depth_bins;
    double angle = a_idx * pi / inplane_bins;
    GraspPose pose;
    pose.rotation = rotation_from_params(seed.view, angle, views);
    Vec3 approach = pose.rotation.col(2);
    pose.translation = seed.point + approach * ((d_idx + 1) * depth_step);
    pose.width = widths.at2(p.seed_index, p.cell);
    pose.score = p.score;
    out.push_back(pose);
  }
  return out;
}

double score_from_friction(double u, double u_min, double u_max,
                           bool positive) {
  require(u_min > 0 && u_min < u_max, errc::precondition,
          "need 0 < u_min < u_max");
  if (!positive) return 0.0;
  require(u >= u_min && u <= u_max, errc::domain,
          "friction coefficient outside [u_min, u_max] for a positive grasp");
  return std::log(u_max / u) / std::log(u_max / u_min);
}

void save_grasps(const std::vector<GraspPose>& grasps, const std::string& path,
                 const std::string& frame_id, std::uint64_t config_hash) {
  KvFile header;
  header.set_i64("format_version", 1);
  header.set("frame_id", frame_id);
  header.set_u64_hex("config_hash", config_hash);
  header.set_i64("count", static_cast<std::int64_t>(grasps.size()));
  std::ostringstream os;
  os << header.serialize();
  os << "# r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz width score\n";
  for (const auto& g : grasps) {
    for (int i = 0; i < 9; ++i) os << format_f64(g.rotation.m[i]) << " ";
    os << format_f64(g.translation.x) << " " << format_f64(g.translation.y)
       << " " << format_f64(g.translation.z) << " " << format_f64(g.width)
       << " " << format_f64(g.score) << "\n";
  }
  write_text_file(path, os.str());
}

std::vector<GraspPose> load_grasps(const std::string& path,
                                   std::string* frame_id,
                                   std::uint64_t* config_hash) {
  std::istringstream is(read_text_file(path));
  std::string line;
  std::string header_text;
  std::vector<GraspPose> grasps;
  int expected = -1;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.find('=') != std::string::npos) {
      header_text += line + "\n";
      continue;
    }
    std::istringstream ls(line);
    GraspPose g;
    for (int i = 0; i < 9; ++i) ls >> g.rotation.m[i];
    ls >> g.translation.x >> g.translation.y >> g.translation.z >> g.width >>
        g.score;
    if (!ls) fail(errc::io, "bad grasp record in " + path);
    grasps.push_back(g);
  }
  KvFile header = KvFile::parse(header_text);
  if (header.get_i64("format_version") != 1)
    fail(errc::io, "unsupported grasp file version");
  expected = static_cast<int>(header.get_i64("count"));
  if (expected != static_cast<int>(grasps.size()))
    fail(errc::io, "grasp count mismatch in " + path);
  if (frame_id) *frame_id = header.get("frame_id");
  if (config_hash) *config_hash = header.get_u64_hex("config_hash");
  return grasps;
}

}  // namespace spikegrasp::grasp
