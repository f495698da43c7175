#include <doctest.h>

#include <cmath>

#include "spikegrasp/evaluator.hpp"
#include "spikegrasp/rng.hpp"

using namespace spikegrasp;
using namespace spikegrasp::eval;

namespace {

grasp::GraspPose make_grasp(Rng& rng, double score) {
  auto views = grasp::fibonacci_sphere_views(16);
  grasp::GraspPose g;
  g.rotation = grasp::rotation_from_params(
      static_cast<int>(rng.uniform_int(16)), rng.uniform(0.0, 3.1), views);
  g.translation = Vec3{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                       rng.uniform(0.2, 0.4)};
  g.width = rng.uniform(0.0, 0.1);
  g.score = score;
  return g;
}

// independent O(n^2) greedy reference
std::vector<grasp::GraspPose> nms_reference(
    const std::vector<grasp::GraspPose>& sorted, double dt, double dr) {
  std::vector<grasp::GraspPose> kept;
  for (const auto& g : sorted) {
    bool keep = true;
    for (const auto& k : kept)
      if (norm(g.translation - k.translation) < dt &&
          rotation_geodesic(g.rotation, k.rotation) < dr)
        keep = false;
    if (keep) kept.push_back(g);
  }
  return kept;
}

scene::SceneDescription sphere_scene(double radius, const Vec3& world_pos) {
  PipelineConfig config = PipelineConfig::toy();
  scene::SceneConfig scfg(config);
  scene::SceneDescription scn = scene::generate_scene(1, 1, scfg);
  scn.objects.clear();
  scene::Primitive s;
  s.kind = scene::ShapeKind::sphere;
  s.size = Vec3{radius, radius, radius};
  s.pose.t = world_pos;
  scn.objects.push_back(s);
  return scn;
}

}  // namespace

TEST_CASE("nms: single grasp passes through unchanged") {
  Rng rng(1);
  std::vector<grasp::GraspPose> one{make_grasp(rng, 0.9)};
  auto out = nms_se3(one, 0.03, 0.5);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.9);
}

TEST_CASE("nms: duplicate grasps keep the higher-scoring one") {
  Rng rng(2);
  grasp::GraspPose a = make_grasp(rng, 0.9);
  grasp::GraspPose b = a;
  b.score = 0.5;
  auto out = nms_se3({a, b}, 0.03, 0.5);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.9);
}

TEST_CASE("nms requires score-sorted input") {
  Rng rng(3);
  grasp::GraspPose a = make_grasp(rng, 0.2);
  grasp::GraspPose b = make_grasp(rng, 0.9);
  CHECK_THROWS_AS(nms_se3({a, b}, 0.03, 0.5), error);
}

TEST_CASE("nms matches the O(n^2) reference and is idempotent") {
  Rng rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<grasp::GraspPose> grasps;
    int n = 5 + static_cast<int>(rng.uniform_int(40));
    for (int i = 0; i < n; ++i) grasps.push_back(make_grasp(rng, 0.0));
    // cluster some of them
    for (int i = 1; i < n; i += 3) {
      grasps[static_cast<std::size_t>(i)] = grasps[static_cast<std::size_t>(i - 1)];
      grasps[static_cast<std::size_t>(i)].translation.x += rng.uniform(0, 0.02);
    }
    for (int i = 0; i < n; ++i)
      grasps[static_cast<std::size_t>(i)].score = 1.0 - 0.01 * i;

    double dt = 0.03, dr = 0.5;
    auto ours = nms_se3(grasps, dt, dr);
    auto ref = nms_reference(grasps, dt, dr);
    REQUIRE(ours.size() == ref.size());
    for (std::size_t i = 0; i < ours.size(); ++i)
      CHECK(ours[i].score == ref[i].score);

    auto twice = nms_se3(ours, dt, dr);
    REQUIRE(twice.size() == ours.size());
    for (std::size_t i = 0; i < ours.size(); ++i)
      CHECK(twice[i].score == ours[i].score);
  }
}

TEST_CASE("ap_frame: worked and boundary cases") {
  CHECK(ap_frame({1, 1, 1, 1, 1}, 5) == doctest::Approx(1.0));
  CHECK(ap_frame({0, 0, 0}, 3) == doctest::Approx(0.0));
  CHECK(ap_frame({1, 0, 1}, 3) == doctest::Approx(13.0 / 18.0));
  CHECK(ap_frame({}, 0) == 0.0);  // empty predictions score zero
}

TEST_CASE("true positive: free-space grasp fails, diameter grasp passes") {
  scene::SceneDescription scn = sphere_scene(0.02, Vec3{0, 0, 0.02});
  PipelineConfig config = PipelineConfig::toy();
  EvalConfig ecfg(config);
  const Pose& cam = scn.rig.left_pose;

  grasp::GraspPose free_space;
  free_space.rotation = Mat3::identity();
  free_space.translation = cam.apply_inverse(Vec3{0.3, 0.3, 0.3});
  free_space.width = 0.08;
  free_space.score = 0.9;
  CHECK(true_positive(free_space, scn, 1.2, ecfg) == 0);

  grasp::GraspPose diameter;
  // approach downward so the fingers stay above the table
  diameter.rotation =
      cam.R.transposed() * grasp::rotation_from_params(Vec3{0, 0, -1}, 0.0);
  diameter.translation = cam.apply_inverse(scn.objects[0].pose.t);
  diameter.width = 0.09;
  diameter.score = 0.9;
  for (double mu : ecfg.friction_set)
    CHECK(true_positive(diameter, scn, mu, ecfg) == 1);
}

TEST_CASE("true positive: chord grasp flips exactly at u = tan(phi)") {
  scene::SceneDescription scn = sphere_scene(0.025, Vec3{0, 0, 0.1});
  PipelineConfig config = PipelineConfig::toy();
  EvalConfig ecfg(config);
  const Pose& cam = scn.rig.left_pose;
  double phi = std::atan(0.5);  // u = 0.5
  Vec3 chord_mid = scn.objects[0].pose.t + Vec3{0, 0, 0.025 * std::sin(phi)};
  grasp::GraspPose g;
  g.rotation =
      cam.R.transposed() * grasp::rotation_from_params(Vec3{0, 0, -1}, 0.0);
  g.translation = cam.apply_inverse(chord_mid);
  g.width = 0.09;
  g.score = 0.9;
  CHECK(true_positive(g, scn, 0.2, ecfg) == 0);
  CHECK(true_positive(g, scn, 0.4, ecfg) == 0);
  CHECK(true_positive(g, scn, 0.6, ecfg) == 1);
  CHECK(true_positive(g, scn, 1.2, ecfg) == 1);
}

TEST_CASE("per-object cap bounds grasps per assigned object") {
  scene::SceneDescription scn = sphere_scene(0.025, Vec3{0, 0, 0.1});
  PipelineConfig config = PipelineConfig::toy();
  const Pose& cam = scn.rig.left_pose;
  std::vector<grasp::GraspPose> grasps;
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    grasp::GraspPose g;
    g.rotation = cam.R.transposed() * rotation_z(0.1 * i);
    g.translation = cam.apply_inverse(scn.objects[0].pose.t +
                                      Vec3{0, 0, rng.uniform(-0.01, 0.01)});
    g.width = 0.08;
    g.score = 1.0 - 0.01 * i;
    grasps.push_back(g);
  }
  auto capped = cap_per_object(grasps, scn, 0.05, 4);
  CHECK(capped.size() == 4);
}

TEST_CASE("ap monotone in mu over randomized scenes") {
  PipelineConfig config = PipelineConfig::toy();
  EvalConfig ecfg(config);
  Rng rng(6);
  scene::SceneConfig scfg(config);
  for (int trial = 0; trial < 8; ++trial) {
    scene::SceneDescription scn =
        scene::generate_scene(100 + static_cast<std::uint64_t>(trial), 2, scfg);
    const Pose& cam = scn.rig.left_pose;
    std::vector<grasp::GraspPose> grasps;
    for (int i = 0; i < 12; ++i) {
      const auto& obj =
          scn.objects[rng.uniform_int(static_cast<std::uint32_t>(
              scn.objects.size()))];
      grasp::GraspPose g;
      g.rotation =
          cam.R.transposed() *
          rotation_about(Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1),
                              rng.uniform(-1, 1)},
                         rng.uniform(0, 3.0));
      g.translation = cam.apply_inverse(
          obj.pose.t + Vec3{rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                            rng.uniform(-0.02, 0.02)});
      g.width = 0.09;
      g.score = rng.uniform();
      grasps.push_back(g);
    }
    FrameReport report = evaluate_frame(grasps, scn, "t", ecfg);
    for (std::size_t i = 1; i < report.ap_per_mu.size(); ++i)
      CHECK(report.ap_per_mu[i] >= report.ap_per_mu[i - 1] - 1e-12);
    for (double ap : report.ap_per_mu) {
      CHECK(ap >= 0.0);
      CHECK(ap <= 1.0);
    }
  }
}

TEST_CASE("dataset aggregation: means, extraction, exact overall mean") {
  std::vector<double> frictions{0.2, 0.4, 0.6, 0.8, 1.0, 1.2};
  FrameReport a{"a", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}};
  FrameReport b{"b", {0.3, 0.6, 0.5, 0.8, 0.7, 1.0}};
  EvalReport report = ap_overall({a, b}, frictions);
  CHECK(report.dataset_ap_per_mu[0] == doctest::Approx(0.2));
  CHECK(report.dataset_ap_per_mu[1] == doctest::Approx(0.4));
  CHECK(report.ap_04 == doctest::Approx(0.4));
  CHECK(report.ap_08 == doctest::Approx(0.6));
  double mean = 0.0;
  for (double v : report.dataset_ap_per_mu) mean += v;
  mean /= 6.0;
  CHECK(report.ap_overall == doctest::Approx(mean).epsilon(1e-15));

  // single frame: dataset values equal frame values
  EvalReport single = ap_overall({a}, frictions);
  for (std::size_t i = 0; i < frictions.size(); ++i)
    CHECK(single.dataset_ap_per_mu[i] == a.ap_per_mu[i]);
}

TEST_CASE("ap_frame equals a brute-force double loop on random flags") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform_int(60));
    std::vector<int> flags(static_cast<std::size_t>(n));
    for (auto& f : flags) f = rng.uniform() < 0.5 ? 1 : 0;
    int k_t = std::min(50, n);
    double got = ap_frame(flags, k_t);
    double expect = 0.0;
    for (int k = 1; k <= k_t; ++k) {
      double prec = 0.0;
      for (int i = 1; i <= k; ++i) prec += flags[static_cast<std::size_t>(i - 1)];
      expect += prec / k;
    }
    expect /= k_t;
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  }
}
