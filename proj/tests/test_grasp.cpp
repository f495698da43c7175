#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spikegrasp/grasp.hpp"
#include "spikegrasp/rng.hpp"

using namespace spikegrasp;
using namespace spikegrasp::grasp;

namespace {

const double kPi = 3.14159265358979323846;

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("fibonacci views are unit length and well spread") {
  auto views = fibonacci_sphere_views(60);
  REQUIRE(views.size() == 60);
  for (const auto& v : views) CHECK(norm(v) == doctest::Approx(1.0));
  // no two views coincide
  for (std::size_t i = 0; i < views.size(); ++i)
    for (std::size_t j = i + 1; j < views.size(); ++j)
      CHECK(norm(views[i] - views[j]) > 1e-3);
}

TEST_CASE("rotation_from_params: canonical downward frame at angle 0") {
  Mat3 r = rotation_from_params(Vec3{0, 0, -1}, 0.0);
  // documented canonical frame: closing +x, third -y, approach -z
  CHECK(norm(r.col(0) - Vec3{1, 0, 0}) < 1e-12);
  CHECK(norm(r.col(1) - Vec3{0, -1, 0}) < 1e-12);
  CHECK(norm(r.col(2) - Vec3{0, 0, -1}) < 1e-12);
}

TEST_CASE("rotation_from_params is orthonormal with unit determinant") {
  Rng rng(1);
  auto views = fibonacci_sphere_views(40);
  for (int trial = 0; trial < 100; ++trial) {
    int j = static_cast<int>(rng.uniform_int(40));
    double angle = rng.uniform(0.0, kPi - 1e-9);
    Mat3 r = rotation_from_params(j, angle, views);
    Mat3 rtr = r.transposed() * r;
    for (int i = 0; i < 9; ++i)
      CHECK(std::fabs(rtr.m[i] - (i % 4 == 0 ? 1.0 : 0.0)) < 1e-10);
    CHECK(std::fabs(r.det() - 1.0) < 1e-10);
    // approach column equals the view direction
    CHECK(norm(r.col(2) - views[static_cast<std::size_t>(j)]) < 1e-10);
  }
}

TEST_CASE("angle and angle+pi give frames related by a 180-degree roll") {
  Rng rng(2);
  auto views = fibonacci_sphere_views(20);
  for (int trial = 0; trial < 50; ++trial) {
    int j = static_cast<int>(rng.uniform_int(20));
    double angle = rng.uniform(0.0, kPi - 1e-9);
    Mat3 a = rotation_from_params(views[static_cast<std::size_t>(j)], angle);
    Mat3 b =
        rotation_from_params(views[static_cast<std::size_t>(j)], angle + kPi);
    Mat3 roll = a.transposed() * b;  // should equal RotZ(pi)
    Mat3 expected = rotation_z(kPi);
    for (int i = 0; i < 9; ++i)
      CHECK(std::fabs(roll.m[i] - expected.m[i]) < 1e-9);
  }
}

TEST_CASE("rotation_from_params rejects bad view indices") {
  auto views = fibonacci_sphere_views(4);
  CHECK_THROWS_AS(rotation_from_params(4, 0.0, views), error);
  CHECK_THROWS_AS(rotation_from_params(-1, 0.0, views), error);
}

TEST_CASE("crop: samples at the seed point map to zero coordinates") {
  SampleSource source;
  Vec3 p{0.05, -0.02, 0.3};
  for (int i = 0; i < 4; ++i) {
    source.points.push_back(p);
    source.feat_pixels.push_back({0, i});
  }
  CandidateTensor t = crop_cylinder(p, Vec3{0, 0, 1}, source, 0.04, 0.05, 4);
  for (std::size_t i = 0; i < t.coords.numel(); ++i)
    CHECK(t.coords[i] == 0.0);
}

TEST_CASE("crop: lateral unit offset normalizes to exactly 1") {
  Vec3 approach{0, 0, -1};
  Mat3 frame = rotation_from_params(approach, 0.0);
  Vec3 lateral = frame.col(0);
  double radius = 0.05;
  SampleSource source;
  Vec3 p{0, 0, 0.3};
  source.points.push_back(p + lateral * radius * 0.999);  // just inside
  source.feat_pixels.push_back({0, 0});
  CandidateTensor t = crop_cylinder(p, approach, source, 0.04, radius, 1);
  CHECK(t.coords.at2(0, 0) == doctest::Approx(0.999).epsilon(1e-9));
  CHECK(std::fabs(t.coords.at2(0, 1)) < 1e-9);
  CHECK(std::fabs(t.coords.at2(0, 2)) < 1e-9);
}

TEST_CASE("crop membership equals the brute-force point-in-cylinder test") {
  Rng rng(3);
  Vec3 p{0.02, 0.01, 0.25};
  Vec3 view = normalized(Vec3{0.3, -0.2, 0.9});
  double d = 0.04, r = 0.05;
  SampleSource source;
  for (int i = 0; i < 200; ++i) {
    source.points.push_back(p + Vec3{rng.uniform(-0.08, 0.08),
                                     rng.uniform(-0.08, 0.08),
                                     rng.uniform(-0.08, 0.08)});
    source.feat_pixels.push_back({0, i % 7});
  }
  // oracle membership
  Mat3 to_local = rotation_from_params(view, 0.0).transposed();
  std::vector<int> inside_oracle;
  for (int i = 0; i < 200; ++i) {
    Vec3 local = to_local * (source.points[static_cast<std::size_t>(i)] - p);
    if (std::fabs(local.z) <= d / 2 &&
        local.x * local.x + local.y * local.y <= r * r)
      inside_oracle.push_back(i);
  }
  REQUIRE(!inside_oracle.empty());
  int k = static_cast<int>(inside_oracle.size());
  CandidateTensor t = crop_cylinder(p, view, source, d, r, k);
  // the k gathered samples are exactly the oracle's members, in order
  for (int i = 0; i < k; ++i) {
    Vec3 expect = to_local * (source.points[static_cast<std::size_t>(
                                  inside_oracle[static_cast<std::size_t>(i)])] -
                              p) /
                  r;
    CHECK(t.coords.at2(i, 0) == doctest::Approx(expect.x).epsilon(1e-12));
    CHECK(t.coords.at2(i, 1) == doctest::Approx(expect.y).epsilon(1e-12));
    CHECK(t.coords.at2(i, 2) == doctest::Approx(expect.z).epsilon(1e-12));
  }
  // coordinate bound from the spec invariant
  double bound = std::max(d / r, 1.0) + 1e-12;
  for (std::size_t i = 0; i < t.coords.numel(); ++i)
    CHECK(std::fabs(t.coords[i]) <= bound);
}

TEST_CASE("crop: empty region raises, short crops pad with the nearest") {
  SampleSource source;
  source.points.push_back(Vec3{10, 10, 10});
  source.feat_pixels.push_back({0, 0});
  CHECK_THROWS_AS(
      crop_cylinder(Vec3{0, 0, 0.3}, Vec3{0, 0, 1}, source, 0.04, 0.05, 4),
      error);

  // two inside, request four: both kept, nearest duplicated
  Vec3 p{0, 0, 0.3};
  source.points = {p + Vec3{0.01, 0, 0}, p + Vec3{0.03, 0, 0}};
  source.feat_pixels = {{0, 1}, {0, 2}};
  CandidateTensor t = crop_cylinder(p, Vec3{0, 0, 1}, source, 0.04, 0.05, 4);
  CHECK(t.feat_pixels[0] == std::pair<int, int>{0, 1});
  CHECK(t.feat_pixels[1] == std::pair<int, int>{0, 2});
  CHECK(t.feat_pixels[2] == std::pair<int, int>{0, 1});  // nearest repeated
  CHECK(t.feat_pixels[3] == std::pair<int, int>{0, 1});
}

TEST_CASE("set encoder is permutation invariant and duplication idempotent") {
  nn::ParamStore store;
  SetEncoder encoder(4, 8, 17, store);
  Rng rng(5);
  Tensor field = random_tensor({4, 4, 4}, rng);
  nn::Var field_var = nn::constant(field);

  CandidateTensor t;
  t.coords = random_tensor({6, 3}, rng);
  t.feat_pixels = {{0, 0}, {1, 1}, {2, 2}, {3, 3}, {0, 3}, {3, 0}};
  nn::Var base = encode_candidates(t, field_var, encoder);

  // permute rows
  CandidateTensor perm;
  perm.coords = Tensor({6, 3});
  std::vector<int> order{5, 2, 0, 4, 1, 3};
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 3; ++j)
      perm.coords.at2(i, j) = t.coords.at2(order[static_cast<std::size_t>(i)], j);
    perm.feat_pixels.push_back(
        t.feat_pixels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  nn::Var permuted = encode_candidates(perm, field_var, encoder);
  for (std::size_t i = 0; i < base->val.numel(); ++i)
    CHECK(permuted->val[i] == base->val[i]);

  // duplicate every sample
  CandidateTensor dup;
  dup.coords = Tensor({12, 3});
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 3; ++j) dup.coords.at2(i, j) = t.coords.at2(i / 2, j);
    dup.feat_pixels.push_back(t.feat_pixels[static_cast<std::size_t>(i) / 2]);
  }
  nn::Var doubled = encode_candidates(dup, field_var, encoder);
  for (std::size_t i = 0; i < base->val.numel(); ++i)
    CHECK(doubled->val[i] == base->val[i]);
}

TEST_CASE("set encoder matches a per-sample loop oracle") {
  nn::ParamStore store;
  SetEncoder encoder(3, 5, 23, store);
  Rng rng(7);
  Tensor field = random_tensor({3, 2, 2}, rng);
  CandidateTensor t;
  t.coords = random_tensor({4, 3}, rng);
  t.feat_pixels = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  nn::Var out = encode_candidates(t, nn::constant(field), encoder);

  // oracle: per-sample MLP then explicit coordinate-wise max
  std::vector<double> best(5, -1e30);
  for (int s = 0; s < 4; ++s) {
    std::vector<double> row;
    for (int j = 0; j < 3; ++j) row.push_back(t.coords.at2(s, j));
    for (int c = 0; c < 3; ++c)
      row.push_back(field.at3(c, t.feat_pixels[static_cast<std::size_t>(s)].first,
                              t.feat_pixels[static_cast<std::size_t>(s)].second));
    std::vector<double> h1(5, 0.0);
    for (int o = 0; o < 5; ++o) {
      double acc = encoder.b1->val[static_cast<std::size_t>(o)];
      for (int i = 0; i < 6; ++i) acc += encoder.w1->val.at2(o, i) * row[static_cast<std::size_t>(i)];
      h1[static_cast<std::size_t>(o)] = std::max(0.0, acc);
    }
    for (int o = 0; o < 5; ++o) {
      double acc = encoder.b2->val[static_cast<std::size_t>(o)];
      for (int i = 0; i < 5; ++i) acc += encoder.w2->val.at2(o, i) * h1[static_cast<std::size_t>(i)];
      best[static_cast<std::size_t>(o)] =
          std::max(best[static_cast<std::size_t>(o)], std::max(0.0, acc));
    }
  }
  for (int o = 0; o < 5; ++o)
    CHECK(out->val[static_cast<std::size_t>(o)] ==
          doctest::Approx(best[static_cast<std::size_t>(o)]).epsilon(1e-12));
}

TEST_CASE("prediction head: zero weights tie scores, widths = clamped bias") {
  nn::ParamStore store;
  GraspHead head(6, 3, 2, 0.1, 31, store);
  for (auto& p : store.params) p->val.fill(0.0);
  std::vector<nn::Var> feats{nn::constant(Tensor({6})),
                             nn::constant(Tensor({6}))};
  GraspGrid grid = predict_grasps(feats, head);
  CHECK(grid.scores->val.shape() == std::vector<int>{2, 6});
  for (std::size_t i = 0; i < grid.scores->val.numel(); ++i) {
    CHECK(grid.scores->val[i] == 0.5);  // sigmoid(0): all tied
    CHECK(grid.widths->val[i] == 0.0);  // bias 0 clamped into [0, w_max]
  }
}

TEST_CASE("prediction head output count is seeds x A x D x 2") {
  nn::ParamStore store;
  GraspHead head(4, 5, 3, 0.1, 37, store);
  Rng rng(11);
  std::vector<nn::Var> feats;
  for (int i = 0; i < 7; ++i)
    feats.push_back(nn::constant(random_tensor({4}, rng)));
  GraspGrid grid = predict_grasps(feats, head);
  CHECK(grid.scores->val.numel() + grid.widths->val.numel() ==
        static_cast<std::size_t>(7 * 5 * 3 * 2));
  for (std::size_t i = 0; i < grid.widths->val.numel(); ++i) {
    CHECK(grid.widths->val[i] >= 0.0);
    CHECK(grid.widths->val[i] <= 0.1);
  }
}

TEST_CASE("select_best: single cell returns that grasp") {
  graspable::SeedSet seeds;
  seeds.seeds.push_back({8, 8, 0, Vec3{0, 0, 0.3}});
  Tensor scores({1, 1}), widths({1, 1});
  scores[0] = 0.7;
  widths[0] = 0.04;
  auto views = fibonacci_sphere_views(4);
  auto out = select_best(scores, widths, seeds, views, 1, 1, 0.01);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.7);
  CHECK(out[0].width == 0.04);
  // depth bin 0 offsets one step along the approach column
  Vec3 expected = Vec3{0, 0, 0.3} + out[0].rotation.col(2) * 0.01;
  CHECK(norm(out[0].translation - expected) < 1e-12);
}

TEST_CASE("select_best: equal scores pick the lower flat index") {
  graspable::SeedSet seeds;
  seeds.seeds.push_back({0, 0, 0, Vec3{0, 0, 0.3}});
  Tensor scores({1, 6}), widths({1, 6});
  scores.fill(0.5);
  widths.fill(0.02);
  widths[2] = 0.07;
  auto views = fibonacci_sphere_views(4);
  auto out = select_best(scores, widths, seeds, views, 3, 2, 0.01);
  REQUIRE(out.size() == 1);
  CHECK(out[0].width == 0.02);  // cell 0, not cell 2
}

TEST_CASE("select_best matches an exhaustive scan oracle and sorts") {
  Rng rng(13);
  auto views = fibonacci_sphere_views(6);
  for (int trial = 0; trial < 20; ++trial) {
    int s_count = 1 + static_cast<int>(rng.uniform_int(5));
    graspable::SeedSet seeds;
    for (int s = 0; s < s_count; ++s)
      seeds.seeds.push_back(
          {s, s, static_cast<int>(rng.uniform_int(6)),
           Vec3{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                rng.uniform(0.2, 0.4)}});
    Tensor scores({s_count, 8}), widths({s_count, 8});
    for (std::size_t i = 0; i < scores.numel(); ++i) {
      scores[i] = rng.uniform_int(5) / 5.0;  // ties likely
      widths[i] = rng.uniform(0, 0.1);
    }
    auto out = select_best(scores, widths, seeds, views, 4, 2, 0.01);
    REQUIRE(out.size() == static_cast<std::size_t>(s_count));
    // descending order
    for (std::size_t i = 1; i < out.size(); ++i)
      CHECK(out[i - 1].score >= out[i].score);
    // per-seed argmax oracle
    std::vector<double> best(static_cast<std::size_t>(s_count), -1.0);
    for (int s = 0; s < s_count; ++s)
      for (int c = 0; c < 8; ++c)
        best[static_cast<std::size_t>(s)] =
            std::max(best[static_cast<std::size_t>(s)], scores.at2(s, c));
    std::sort(best.rbegin(), best.rend());
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out[i].score == best[i]);
  }
}

TEST_CASE("score_from_friction: endpoints, midpoint, monotonicity, domain") {
  double u_min = 0.2, u_max = 1.2;
  CHECK(score_from_friction(u_min, u_min, u_max, true) == doctest::Approx(1.0));
  CHECK(score_from_friction(u_max, u_min, u_max, true) == doctest::Approx(0.0));
  CHECK(score_from_friction(0.7, u_min, u_max, false) == 0.0);
  double mid = std::sqrt(u_min * u_max);
  CHECK(score_from_friction(mid, u_min, u_max, true) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // strict decrease over a fine grid
  double prev = score_from_friction(u_min, u_min, u_max, true);
  for (int i = 1; i <= 1000; ++i) {
    double u = u_min + (u_max - u_min) * i / 1000.0;
    double q = score_from_friction(u, u_min, u_max, true);
    CHECK(q < prev);
    prev = q;
  }
  CHECK_THROWS_AS(score_from_friction(0.1, u_min, u_max, true), error);
  CHECK_THROWS_AS(score_from_friction(1.3, u_min, u_max, true), error);
}

TEST_CASE("grasp file round trip preserves every record") {
  Rng rng(17);
  auto views = fibonacci_sphere_views(8);
  std::vector<GraspPose> grasps;
  for (int i = 0; i < 5; ++i) {
    GraspPose g;
    g.rotation = rotation_from_params(static_cast<int>(rng.uniform_int(8)),
                                      rng.uniform(0, kPi - 1e-9), views);
    g.translation = Vec3{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                         rng.uniform(0.2, 0.4)};
    g.width = rng.uniform(0, 0.1);
    g.score = rng.uniform();
    grasps.push_back(g);
  }
  save_grasps(grasps, "/tmp/sg_test_grasps.txt", "frame7", 0xfeedULL);
  std::string frame;
  std::uint64_t hash = 0;
  auto back = load_grasps("/tmp/sg_test_grasps.txt", &frame, &hash);
  CHECK(frame == "frame7");
  CHECK(hash == 0xfeedULL);
  REQUIRE(back.size() == grasps.size());
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    for (int j = 0; j < 9; ++j)
      CHECK(back[i].rotation.m[j] == grasps[i].rotation.m[j]);
    CHECK(back[i].translation.x == grasps[i].translation.x);
    CHECK(back[i].width == grasps[i].width);
    CHECK(back[i].score == grasps[i].score);
    CHECK(pose_valid(back[i], 0.1));
  }
}
