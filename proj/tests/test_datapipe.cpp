#include <doctest.h>

#include "modist/datapipe.hpp"
#include "modist/motion.hpp"

using namespace modist;

namespace {

LabeledVideo moving_video(std::int64_t index = 3) {
  SceneSpec s;
  s.canvas_size = 16;
  s.num_frames = 24;
  ShapeSpec d;
  d.size = 5;
  d.origin = {3, 8};
  d.velocity = {0.5, 0};
  d.active_begin = 10;
  s.shapes.push_back(d);
  s.background.texture_id = 2;
  return render_video(s, 1, index);
}

MotionSeries series_with_energy(const std::vector<double>& energy, int first_valid) {
  MotionSeries s;
  s.maps = TensorF({static_cast<int>(energy.size()), 2, 2});
  s.energy = energy;
  s.first_valid = first_valid;
  return s;
}

}  // namespace

TEST_CASE("visual clips gather strided frames") {
  const auto v = moving_video();
  SamplerConfig cfg;
  CHECK(cfg.visual_span() == 7);
  CHECK(cfg.motion_span() == 8);
  const VisualClip c = extract_visual_clip(v, 5, cfg);
  CHECK(c.data.shape() == Shape{3, 4, 16, 16});
  for (int k = 0; k < 4; ++k)
    for (int c3 = 0; c3 < 3; ++c3) CHECK(c.data.at(c3, k, 7, 9) == v.frames.at(5 + 2 * k, 7, 9, c3));
  CHECK(center_visual_clip(v, cfg).start_frame == 8);
  CHECK_THROWS(extract_visual_clip(v, 18, cfg));

  SamplerConfig long_cfg;
  long_cfg.visual_length = 13;
  CHECK_THROWS_AS(center_visual_clip(v, long_cfg), IneligibleVideoError);
  Rng rng(1);
  CHECK_THROWS_AS(sample_visual_clip(v, rng, long_cfg), IneligibleVideoError);
}

TEST_CASE("eligible motion windows follow mean energy") {
  std::vector<double> e(20, 0.0);
  for (int t = 10; t < 20; ++t) e[t] = 0.05;
  const auto s = series_with_energy(e, 5);
  SamplerConfig cfg;
  cfg.motion_length = 4;
  cfg.motion_stride = 2;
  cfg.gamma = 0.02;
  // brute force: mean of e[s], e[s+2], e[s+4], e[s+6] > 0.02 means at least two frames >= 10
  std::vector<int> expect;
  for (int st = 5; st + 6 < 20; ++st) {
    int hot = 0;
    for (int k = 0; k < 4; ++k) hot += st + 2 * k >= 10;
    if (hot * 0.05 / 4 > 0.02) expect.push_back(st);
  }
  CHECK(eligible_motion_starts(s, cfg) == expect);
  CHECK(expect.front() == 6);

  cfg.gamma = 0.05;
  CHECK(eligible_motion_starts(s, cfg).empty());
  Rng rng(0);
  CHECK_THROWS_AS(sample_motion_clip(s, rng, cfg), NoEligibleClipError);

  // gamma = 0 keeps every valid window, even motionless ones
  cfg.gamma = 0.0;
  const auto all = eligible_motion_starts(series_with_energy(std::vector<double>(20, 0.0), 5), cfg);
  REQUIRE(all.size() == 9);
  CHECK(all.front() == 5);
  CHECK(all.back() == 13);
}

TEST_CASE("sampled motion clips never fall below gamma") {
  const auto v = moving_video();
  const auto series = compute_motion_series(v, MotionKind::flow_edges, 5);
  SamplerConfig cfg;
  Rng rng(17);
  const auto starts = eligible_motion_starts(series, cfg);
  REQUIRE(!starts.empty());
  CHECK(starts.front() >= series.first_valid);
  for (int i = 0; i < 500; ++i) {
    const MotionClip c = sample_motion_clip(series, rng, cfg);
    double sum = 0.0;
    for (int k = 0; k < cfg.motion_length; ++k) sum += series.energy[c.start_frame + k * cfg.motion_stride];
    CHECK(sum / cfg.motion_length > cfg.gamma);
    CHECK(c.length() == cfg.motion_length);
  }
}

TEST_CASE("augmentation") {
  const auto v = moving_video();
  SamplerConfig cfg;
  const VisualClip clip = extract_visual_clip(v, 4, cfg);

  SUBCASE("disabled is the identity") {
    AugConfig aug;
    aug.enabled = false;
    Rng rng(2);
    CHECK(augment_visual(clip, rng, aug).data == clip.data);
  }
  SUBCASE("shape and range are preserved") {
    AugConfig aug;
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const auto out = augment_visual(clip, rng, aug);
      CHECK(out.data.shape() == clip.data.shape());
      for (float x : out.data.vec()) {
        CHECK(x >= 0.0F);
        CHECK(x <= 1.0F + 1e-6F);
      }
    }
  }
  SUBCASE("one transform per clip") {
    VisualClip still = clip;
    for (int k = 1; k < 4; ++k)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) still.data.at(c, k, y, x) = still.data.at(c, 0, y, x);
    AugConfig aug;
    aug.p_gray = aug.p_blur = aug.p_color = aug.p_flip = 0.5;
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
      const auto out = augment_visual(still, rng, aug);
      for (int k = 1; k < 4; ++k)
        for (int c = 0; c < 3; ++c)
          for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) CHECK(out.data.at(c, k, y, x) == out.data.at(c, 0, y, x));
    }
  }
  SUBCASE("crop size sets the output side") {
    AugConfig aug;
    aug.crop_size = 8;
    Rng rng(5);
    CHECK(augment_visual(clip, rng, aug).data.shape() == Shape{3, 4, 8, 8});
  }
  SUBCASE("invalid probabilities are rejected") {
    AugConfig aug;
    aug.p_flip = 1.5;
    Rng rng(6);
    CHECK_THROWS_AS(augment_visual(clip, rng, aug), ConfigError);
  }
}

TEST_CASE("image primitives") {
  TensorF d({1, 1, 3, 4}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  TensorF f = d;
  flip_horizontal(f);
  CHECK(f.at(0, 0, 1, 0) == 7.0F);
  flip_horizontal(f);
  CHECK(f == d);

  CHECK(crop_resize(d, 0, 0, 4, 3, 4).shape() == Shape{1, 1, 4, 4});
  TensorF sq({1, 1, 4, 4});
  for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = static_cast<float>(k);
  CHECK(crop_resize(sq, 0, 0, 4, 4, 4) == sq);
  const TensorF half = crop_resize(sq, 0, 0, 4, 4, 2);
  CHECK(half.at(0, 0, 0, 0) == doctest::Approx(2.5));

  TensorF flat({2, 5, 5}, 0.7F);
  gaussian_blur(flat, 1.3);
  for (float x : flat.vec()) CHECK(x == doctest::Approx(0.7));
  TensorF spike({1, 7, 7});
  spike.at(0, 3, 3) = 1.0F;
  gaussian_blur(spike, 1.0);
  double sum = 0.0;
  for (float x : spike.vec()) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(spike.at(0, 3, 2) == doctest::Approx(spike.at(0, 2, 3)));
}

TEST_CASE("clip pairs") {
  const auto v = moving_video(9);
  const auto series = compute_motion_series(v, MotionKind::flow_edges, 5);
  SamplerConfig cfg;
  AugConfig aug;

  SUBCASE("pairs come from one video and are seed-deterministic") {
    Rng a(8), b(8);
    const ClipPair p = make_pair(v, series, a, cfg, aug);
    const ClipPair q = make_pair(v, series, b, cfg, aug);
    CHECK(p.video_index == 9);
    CHECK(p.v_query.data == q.v_query.data);
    CHECK(p.m_key.maps == q.m_key.maps);
    CHECK(p.m_query.video_index == 9);
  }
  SUBCASE("sync mode crosses visual and motion starts") {
    Rng rng(10);
    for (int i = 0; i < 50; ++i) {
      const ClipPair p = make_pair(v, series, rng, cfg, aug, true);
      CHECK(p.m_key.start_frame == p.v_query.start_frame);
      CHECK(p.m_query.start_frame == p.v_key.start_frame);
    }
  }
  SUBCASE("series of another video is a contract violation") {
    Rng rng(11);
    const auto other = compute_motion_series(moving_video(10), MotionKind::flow_edges, 5);
    CHECK_THROWS_AS(make_pair(v, other, rng, cfg, aug), ContractError);
  }
}
