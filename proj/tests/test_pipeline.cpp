#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "spikegrasp/pipeline.hpp"

using namespace spikegrasp;

namespace {

// One sphere centred on the optical axis region; deterministic fixture used
// across the pipeline tests.
scene::SceneDescription one_sphere_scene(double radius = 0.018) {
  PipelineConfig config = PipelineConfig::toy();
  scene::SceneConfig scfg(config);
  scene::SceneDescription scn = scene::generate_scene(1, 1, scfg);
  scn.objects.clear();
  scene::Primitive sphere;
  sphere.kind = scene::ShapeKind::sphere;
  sphere.size = Vec3{radius, radius, radius};
  sphere.pose.t = Vec3{0.0, 0.0, scfg.table_height + radius};
  sphere.albedo = 0.85;
  scn.objects.push_back(sphere);
  return scn;
}

}  // namespace

TEST_CASE("wta disparity tracks true disparity on object pixels") {
  PipelineConfig config = PipelineConfig::toy();
  scene::SceneDescription scn = one_sphere_scene();
  pipeline::Model model = pipeline::Model::init(config, 42);
  pipeline::SampleInputs sample =
      pipeline::prepare_inputs(scn, config, /*with_labels=*/false);

  pipeline::ForwardResult fwd =
      pipeline::forward(model, sample, config, nn::SpikeMode::hard);

  std::vector<double> depth = scene::render_depth(scn, scene::CameraSide::left);
  scene::ObjectMask mask = scene::render_mask(scn, scene::CameraSide::left);

  int w = mask.width;
  int checked = 0;
  double err_sum = 0.0, err_max = 0.0;
  for (int qy = 0; qy < fwd.disparity.dim(0); ++qy)
    for (int qx = 0; qx < fwd.disparity.dim(1); ++qx) {
      // quarter cells fully covered by the object
      bool covered = true;
      double z_mean = 0.0;
      for (int dy = 0; dy < 4 && covered; ++dy)
        for (int dx = 0; dx < 4; ++dx) {
          std::size_t i =
              static_cast<std::size_t>(qy * 4 + dy) * w + (qx * 4 + dx);
          if (mask.labels[i] == 0) {
            covered = false;
            break;
          }
          z_mean += depth[i];
        }
      if (!covered) continue;
      z_mean /= 16.0;
      double true_quarter = scn.rig.disparity_for_depth(z_mean) / 4.0;
      double got = fwd.disparity.at2(qy, qx);
      double err = std::fabs(got - true_quarter);
      err_sum += err;
      err_max = std::max(err_max, err);
      ++checked;
    }
  CAPTURE(checked);
  CAPTURE(err_sum / std::max(1, checked));
  CAPTURE(err_max);
  CHECK(checked >= 1);
  // quarter-resolution bin error below ~0.5 keeps the back-projected depth
  // within the association budget of the smoke criterion
  CHECK(err_sum / std::max(1, checked) < 0.5);
}

TEST_CASE("forward pass is deterministic") {
  PipelineConfig config = PipelineConfig::toy();
  scene::SceneDescription scn = one_sphere_scene();
  pipeline::Model model = pipeline::Model::init(config, 7);
  pipeline::SampleInputs sample =
      pipeline::prepare_inputs(scn, config, /*with_labels=*/false);

  pipeline::ForwardResult a =
      pipeline::forward(model, sample, config, nn::SpikeMode::hard);
  pipeline::ForwardResult b =
      pipeline::forward(model, sample, config, nn::SpikeMode::hard);
  REQUIRE(a.map_values.objectness.size() == b.map_values.objectness.size());
  bool same = true;
  for (std::size_t i = 0; i < a.map_values.objectness.size(); ++i) {
    same = same && a.map_values.objectness[i] == b.map_values.objectness[i];
    same = same && a.map_values.graspness[i] == b.map_values.graspness[i];
  }
  CHECK(same);
}

TEST_CASE("checkpoint round-trip restores parameters") {
  PipelineConfig config = PipelineConfig::toy();
  pipeline::Model model = pipeline::Model::init(config, 3);
  // truncate through f32 so the round-trip is exact afterwards
  for (auto& p : model.store.params)
    for (std::size_t i = 0; i < p->val.numel(); ++i)
      p->val[i] = static_cast<double>(static_cast<float>(p->val[i]));

  std::string path = "/tmp/spikegrasp_test_ckpt.bin";
  pipeline::save_checkpoint(model, path, config.hash());

  pipeline::Model restored = pipeline::Model::init(config, 99);
  std::uint64_t hash = pipeline::load_checkpoint(restored, path);
  CHECK(hash == config.hash());
  REQUIRE(restored.store.params.size() == model.store.params.size());
  bool same = true;
  for (std::size_t k = 0; k < model.store.params.size(); ++k)
    for (std::size_t i = 0; i < model.store.params[k]->val.numel(); ++i)
      same = same &&
             restored.store.params[k]->val[i] == model.store.params[k]->val[i];
  CHECK(same);
}
