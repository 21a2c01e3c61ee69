#include <doctest.h>

#include "fixtures.hpp"
#include "modist/motion.hpp"
#include "modist/rng.hpp"
#include "oracles.hpp"

using namespace modist;

namespace {

MotionMap magnitude_map(const TensorF& v) { return MotionMap{v, MotionKind::flow_magnitude, 0.0F}; }

TensorF step_map(int H, int W, int col, float lo, float hi) {
  TensorF m({H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) m.at(y, x) = x < col ? lo : hi;
  return m;
}

SceneSpec translating_disk(int canvas, Vec2 vel, int frames = 12) {
  SceneSpec s;
  s.canvas_size = canvas;
  s.num_frames = frames;
  ShapeSpec d;
  d.size = canvas / 3.0;
  d.origin = {canvas / 3.0, canvas / 2.0};
  d.velocity = vel;
  s.shapes.push_back(d);
  s.background.texture_id = 5;
  return s;
}

}  // namespace

TEST_CASE("frame difference") {
  TensorF frames({3, 4, 4, 3}, 0.3F);
  MotionMap same = frame_difference(frames, 1);
  for (float v : same.values.vec()) CHECK(v == 0.0F);

  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) frames.at(2, y, x, c) = 0.5F;
  MotionMap shifted = frame_difference(frames, 2);
  for (float v : shifted.values.vec()) CHECK(v == doctest::Approx(0.2).epsilon(1e-6));
  CHECK_THROWS_AS(frame_difference(frames, 0), OutOfRangeError);
}

TEST_CASE("flow magnitude") {
  FlowField f{TensorF({3, 3, 2})};
  const TensorF zero = flow_magnitude(f).values;
  for (float v : zero.vec()) CHECK(v == 0.0F);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      f.values.at(y, x, 0) = 3.0F;
      f.values.at(y, x, 1) = 4.0F;
    }
  const TensorF five = flow_magnitude(f).values;
  for (float v : five.vec()) CHECK(v == doctest::Approx(5.0));
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      f.values.at(y, x, 0) = -2.0F;
      f.values.at(y, x, 1) = 0.0F;
    }
  const TensorF two = flow_magnitude(f).values;
  for (float v : two.vec()) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("sobel edges") {
  SUBCASE("constant map has no edges") {
    const TensorF e = sobel_edge_map(magnitude_map(TensorF({8, 8}, 3.7F))).values;
    for (float v : e.vec()) CHECK(v == 0.0F);
  }
  SUBCASE("step 0 to 4 saturates the clamp at the boundary columns") {
    const MotionMap e = sobel_edge_map(magnitude_map(step_map(8, 8, 4, 0.0F, 4.0F)));
    CHECK(e.clamp_max == kFlowEdgeClamp);
    for (int y = 0; y < 8; ++y) {
      CHECK(e.values.at(y, 3) == 10.0F);
      CHECK(e.values.at(y, 4) == 10.0F);
      CHECK(e.values.at(y, 1) == 0.0F);
      CHECK(e.values.at(y, 6) == 0.0F);
    }
  }
  SUBCASE("step 0 to 0.5 stays unclamped") {
    const MotionMap e = sobel_edge_map(magnitude_map(step_map(8, 8, 4, 0.0F, 0.5F)));
    for (int y = 0; y < 8; ++y) {
      CHECK(e.values.at(y, 3) == doctest::Approx(2.0));
      CHECK(e.values.at(y, 4) == doctest::Approx(2.0));
    }
  }
  SUBCASE("matches the brute-force oracle and stays in range") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
      TensorF m({9, 11});
      const double scale = trial % 2 ? 0.3 : 20.0;
      for (auto& v : m.vec()) v = static_cast<float>(std::abs(rng.normal(0.0, scale)));
      const MotionMap e = sobel_edge_map(magnitude_map(m));
      const TensorF ref = oracle::sobel(m, 10.0);
      for (std::size_t k = 0; k < m.size(); ++k) {
        CHECK(e.values[k] == doctest::Approx(ref[k]).epsilon(1e-5));
        CHECK(e.values[k] >= 0.0F);
        CHECK(e.values[k] <= 10.0F);
      }
    }
  }
  SUBCASE("translation equivariant in the interior") {
    Rng rng(9);
    TensorF m({12, 12}), shifted({12, 12});
    for (auto& v : m.vec()) v = static_cast<float>(rng.uniform(0.0, 1.0));
    for (int y = 0; y < 12; ++y)
      for (int x = 1; x < 12; ++x) shifted.at(y, x) = m.at(y, x - 1);
    const auto a = sobel_edge_map(magnitude_map(m)).values;
    const auto b = sobel_edge_map(magnitude_map(shifted)).values;
    for (int y = 1; y < 11; ++y)
      for (int x = 2; x < 11; ++x) CHECK(b.at(y, x) == doctest::Approx(a.at(y, x - 1)));
  }
  SUBCASE("requires a magnitude map") {
    CHECK_THROWS_AS(sobel_edge_map(MotionMap{TensorF({4, 4}), MotionKind::frame_diff, 0.0F}), ConfigError);
  }
}

TEST_CASE("motion energy") {
  CHECK(motion_energy(magnitude_map(TensorF({4, 4}))) == 0.0);
  CHECK(motion_energy(magnitude_map(TensorF({4, 4}, 0.25F))) == doctest::Approx(0.25));
  CHECK(motion_energy(magnitude_map(TensorF({2, 2}, std::vector<float>{0, 0, 4, 8}))) == 3.0);
}

TEST_CASE("flow edge clips") {
  SUBCASE("static video gives an all-zero clip") {
    const auto v = render_video(translating_disk(16, {0, 0}));
    const auto c = flow_edge_clip(v, 5, 4, 1, 5);
    for (float x : c.maps.vec()) CHECK(x == 0.0F);
  }
  SUBCASE("translating disk lights up its boundary ring only") {
    const SceneSpec s = translating_disk(16, {1, 0});
    const auto v = render_video(s);
    const auto c = flow_edge_clip(v, 6, 3, 2, 5);
    for (int k = 0; k < 3; ++k) {
      const int t = 6 + 2 * k;
      // brute force: per-pixel displacement, magnitude, Sobel
      const FlowField f = ground_truth_flow(s, t, 5);
      TensorF mag({16, 16});
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) mag.at(y, x) = std::hypot(f.values.at(y, x, 0), f.values.at(y, x, 1));
      const TensorF ref = oracle::sobel(mag, 10.0);
      const Vec2 p = shape_position(s.shapes[0], t, s.num_frames);
      const double r = s.shapes[0].size / 2.0;
      int ring = 0;
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
          CHECK(c.maps.at(k, y, x) == doctest::Approx(ref.at(y, x)).epsilon(1e-5));
          const double d = std::hypot(x - p.x, y - p.y);
          if (d < r - 1.5 || d > r + 1.5) CHECK(c.maps.at(k, y, x) == 0.0F);
          ring += c.maps.at(k, y, x) > 0.0F;
        }
      CHECK(ring > 8);
    }
  }
  SUBCASE("window must leave room for the lag") {
    const auto v = render_video(translating_disk(16, {1, 0}));
    CHECK_THROWS_AS(flow_edge_clip(v, 2, 4, 1, 5), OutOfRangeError);
    CHECK_THROWS_AS(flow_edge_clip(v, 6, 8, 1, 5), OutOfRangeError);
  }
  SUBCASE("illumination does not reach flow edges") {
    SceneSpec s = translating_disk(16, {1, 0});
    const auto a = flow_edge_clip(render_video(s), 5, 4, 1, 5);
    s.illumination_drift = 0.02;
    const auto b = flow_edge_clip(render_video(s), 5, 4, 1, 5);
    CHECK(a.maps == b.maps);
  }
}

TEST_CASE("frame difference ignores a constant added to both frames") {
  const auto v = render_video(translating_disk(16, {1, 0}));
  TensorF brighter = v.frames;
  for (auto& x : brighter.vec()) x = x * 0.5F + 0.25F;
  TensorF base = v.frames;
  for (auto& x : base.vec()) x = x * 0.5F;
  const auto a = frame_difference(base, 4);
  const auto b = frame_difference(brighter, 4);
  for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(a.values[k] == doctest::Approx(b.values[k]).epsilon(1e-5));
}

TEST_CASE("lag-1 chaining agrees with the analytic flow for pure translation") {
  auto v = render_video(translating_disk(24, {1, 0}));
  const FlowField analytic = video_flow(v, 8, 5);
  v.scene.reset();
  const FlowField chained = video_flow(v, 8, 5);
  int agree = 0, total = 0;
  for (std::size_t k = 0; k < analytic.values.size(); ++k) {
    ++total;
    agree += std::abs(analytic.values[k] - chained.values[k]) < 1e-5;
  }
  CHECK(agree > 0.9 * total);
}

TEST_CASE("block matching") {
  Rng rng(21);
  TensorF tex({24, 24});
  for (auto& v : tex.vec()) v = static_cast<float>(rng.uniform());

  SUBCASE("identical frames give zero flow") {
    const TensorF f = block_match_flow(tex, tex).values;
    for (float v : f.vec()) CHECK(v == 0.0F);
  }
  SUBCASE("uniform frames give zero flow by tie-breaking") {
    const TensorF u({24, 24}, 0.4F);
    const TensorF f = block_match_flow(u, u).values;
    for (float v : f.vec()) CHECK(v == 0.0F);
  }
  SUBCASE("a shift of (2, 0) is recovered on textured blocks") {
    TensorF moved({24, 24});
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) moved.at(y, x) = tex.at(y, std::max(0, x - 2));
    const FlowField f = block_match_flow(moved, tex, 4, 5);
    for (int y = 0; y < 24; ++y)
      for (int x = 4; x < 24; ++x) {
        CHECK(f.values.at(y, x, 0) == 2.0F);
        CHECK(f.values.at(y, x, 1) == 0.0F);
      }
  }
  SUBCASE("agrees with ground truth on a textured translating scene") {
    SceneSpec s;
    s.canvas_size = 32;
    s.num_frames = 8;
    s.background.texture_id = 6;
    s.background.frequency = 0.37;
    s.background.drift = {1, -1};
    const auto v = render_video(s);
    const FlowField est = block_match_flow(luma(v.frames, 5), luma(v.frames, 3), 4, 5);
    const FlowField gt = ground_truth_flow(s, 5, 2);
    int agree = 0;
    for (int y = 8; y < 24; ++y)
      for (int x = 8; x < 24; ++x)
        agree += est.values.at(y, x, 0) == gt.values.at(y, x, 0) && est.values.at(y, x, 1) == gt.values.at(y, x, 1);
    CHECK(agree >= 0.9 * 16 * 16);
  }
}

TEST_CASE("motion series round-trip and energies") {
  const auto v = render_video(translating_disk(16, {1, 0}), 2, 9);
  for (MotionKind k : {MotionKind::frame_diff, MotionKind::flow_magnitude, MotionKind::flow_edges}) {
    const MotionSeries s = compute_motion_series(v, k, 5);
    CHECK(s.first_valid == (k == MotionKind::frame_diff ? 1 : 5));
    for (int t = 0; t < s.num_frames(); ++t) {
      if (t < s.first_valid) CHECK(s.energy[t] == 0.0);
    }
    const auto dir = fixtures::temp_dir("motion_io");
    write_motion_series(dir / "s.mot", s);
    const MotionSeries back = read_motion_series(dir / "s.mot");
    CHECK(back.maps == s.maps);
    CHECK(back.energy == s.energy);
    CHECK(back.kind == k);
    CHECK(back.video_index == 9);
    CHECK(back.label == 2);
    CHECK_THROWS_AS(s.clip(s.first_valid - 1, 2, 1), OutOfRangeError);
  }
}
