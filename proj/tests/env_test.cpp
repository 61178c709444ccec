#include <doctest.h>

#include <cmath>

#include "girl/errors.hpp"
#include "girl/search_env.hpp"

using namespace girl;

namespace {

ImageF32 noise_image(int w = kCanvasW, int h = kCanvasH, uint64_t seed = 11) {
  Rng rng(seed);
  ImageF32 im = ImageF32::blank(w, h);
  for (auto& p : im.pixels) p = rng.uniformf();
  return im;
}

struct Rig {
  Rng rng;
  FeatureExtractor fx;
  EnvConfig cfg;
  SearchEnv env;

  static EnvConfig make_cfg(int ncat) {
    EnvConfig c;
    c.num_categories = ncat;
    return c;
  }

  explicit Rig(uint64_t seed = 7, int ncat = 2)
      : rng(seed),
        fx(FeatureExtractor::make(32, rng)),
        cfg(make_cfg(ncat)),
        env(cfg, &fx) {}
};

}  // namespace

TEST_CASE("reset starts at the canvas center with one visited cell") {
  Rig rig;
  EpisodeState ep = rig.env.reset(noise_image(), 0);
  REQUIRE(ep.fixations.size() == 1);
  CHECK(ep.fixations[0].x == 256.f);
  CHECK(ep.fixations[0].y == 160.f);
  CHECK(ep.steps == 0);
  CHECK_FALSE(ep.done);

  NdArray hist = rig.env.history_plane(ep.visited);
  CHECK(hist.data.sum() == 1.f);
  CHECK(hist.data[kCenterAction] == 1.f);
  // Center cell is row 5, col 8.
  CHECK(hist.at3(0, 5, 8) == 1.f);
}

TEST_CASE("observation tensor has feature, category, and history planes") {
  Rig rig;
  EpisodeState ep = rig.env.reset(noise_image(), 1);
  State s = rig.env.observe(ep);
  REQUIRE(s.tensor.shape == std::vector<int>{32 + 2 + 1, kGridRows, kGridCols});
  CHECK(s.step == 0);
  CHECK(rig.env.state_channels() == 35);

  // Category one-hot: plane 32 is category 0, plane 33 category 1.
  for (int r = 0; r < kGridRows; ++r)
    for (int c = 0; c < kGridCols; ++c) {
      CHECK(s.tensor.at3(32, r, c) == 0.f);
      CHECK(s.tensor.at3(33, r, c) == 1.f);
    }
  // History plane is the last channel.
  CHECK(s.tensor.at3(34, 5, 8) == 1.f);
}

TEST_CASE("constant image yields spatially uniform features") {
  Rig rig;
  ImageF32 gray = ImageF32::blank(kCanvasW, kCanvasH, 0.37f);
  NdArray feat = rig.env.extract_features(gray, 0);
  for (int ch = 0; ch < 32; ++ch) {
    float v0 = feat.at3(ch, 0, 0);
    for (int r = 0; r < kGridRows; ++r)
      for (int c = 0; c < kGridCols; ++c) CHECK(feat.at3(ch, r, c) == v0);
  }
}

TEST_CASE("reset is deterministic") {
  Rig rig;
  ImageF32 im = noise_image();
  EpisodeState a = rig.env.reset(im, 1);
  EpisodeState b = rig.env.reset(im, 1);
  State sa = rig.env.observe(a);
  State sb = rig.env.observe(b);
  REQUIRE(sa.tensor.same_shape(sb.tensor));
  CHECK((sa.tensor.data == sb.tensor.data));
}

TEST_CASE("episode ends on exactly the sixth step") {
  Rig rig;
  EpisodeState ep = rig.env.reset(noise_image(), 0);
  for (int i = 0; i < 6; ++i) {
    REQUIRE_FALSE(ep.done);
    auto r = rig.env.step(ep, 10 + i);
    CHECK(r.done == (i == 5));
  }
  CHECK(ep.done);
  CHECK(ep.fixations.size() == 7);
  CHECK(ep.steps == 6);
  CHECK_THROWS_AS(rig.env.step(ep, 0), LogicError);
}

TEST_CASE("each step can only sharpen the cumulative view") {
  Rig rig;
  EpisodeState ep = rig.env.reset(noise_image(kCanvasW, kCanvasH, 3), 0);
  std::vector<uint8_t> prev = ep.ret.level_map;
  Rng rng(99);
  for (int i = 0; i < 6; ++i) {
    rig.env.step(ep, rng.uniform_int(kNumActions));
    for (size_t p = 0; p < prev.size(); ++p) CHECK(ep.ret.level_map[p] <= prev[p]);
    prev = ep.ret.level_map;
  }
}

TEST_CASE("action_to_pixel maps cells to their centers") {
  Rig rig;
  CHECK(rig.env.action_to_pixel(0).x == 16.f);
  CHECK(rig.env.action_to_pixel(0).y == 16.f);
  CHECK(rig.env.action_to_pixel(159).x == 496.f);
  CHECK(rig.env.action_to_pixel(159).y == 304.f);
  CHECK_THROWS_AS(rig.env.action_to_pixel(-1), ValidationError);
  CHECK_THROWS_AS(rig.env.action_to_pixel(160), ValidationError);

  for (int a = 0; a < kNumActions; ++a) {
    PixelPoint p = rig.env.action_to_pixel(a);
    CHECK(discretize_fixation(p.x, p.y, kCanvasW, kCanvasH) == a);
  }
}

TEST_CASE("feature cells depend only on their own 32x32 window") {
  Rig rig;
  ImageF32 a = noise_image();
  ImageF32 b = a;
  // Perturb strictly inside cell (row 3, col 5): x in [160,192), y in [96,128).
  for (int y = 96; y < 128; ++y)
    for (int x = 160; x < 192; ++x) b.at(x, y) = 1.f - b.at(x, y);

  NdArray fa = rig.env.extract_features(a, 0);
  NdArray fb = rig.env.extract_features(b, 0);
  bool changed_inside = false;
  for (int ch = 0; ch < 32; ++ch) {
    for (int r = 0; r < kGridRows; ++r)
      for (int c = 0; c < kGridCols; ++c) {
        if (r == 3 && c == 5) {
          if (fa.at3(ch, r, c) != fb.at3(ch, r, c)) changed_inside = true;
        } else {
          CHECK(fa.at3(ch, r, c) == fb.at3(ch, r, c));
        }
      }
  }
  CHECK(changed_inside);
}

TEST_CASE("category swap changes only the category planes") {
  Rig rig;
  ImageF32 im = noise_image();
  EpisodeState e0 = rig.env.reset(im, 0);
  EpisodeState e1 = rig.env.reset(im, 1);
  State s0 = rig.env.observe(e0);
  State s1 = rig.env.observe(e1);
  const int plane = kGridRows * kGridCols;
  // Feature channels identical.
  CHECK((s0.tensor.data.head(32 * plane) == s1.tensor.data.head(32 * plane)));
  // History identical.
  CHECK((s0.tensor.data.tail(plane) == s1.tensor.data.tail(plane)));
  // Category planes swapped.
  CHECK(s0.tensor.at3(32, 0, 0) == 1.f);
  CHECK(s0.tensor.at3(33, 0, 0) == 0.f);
  CHECK(s1.tensor.at3(32, 0, 0) == 0.f);
  CHECK(s1.tensor.at3(33, 0, 0) == 1.f);
}

TEST_CASE("target_hit fires only when the fixation lands in the box") {
  Rig rig;
  // Action (row 2, col 2) has center (80, 80).
  Box box{72, 72, 16, 16};
  EpisodeState ep = rig.env.reset(noise_image(), 0, box);
  auto miss = rig.env.step(ep, 2 * kGridCols + 3);  // center (112, 80)
  CHECK_FALSE(miss.target_hit);
  auto hit = rig.env.step(ep, 2 * kGridCols + 2);
  CHECK(hit.target_hit);

  // Without a box nothing ever registers as a hit.
  EpisodeState free_ep = rig.env.reset(noise_image(), 0);
  CHECK_FALSE(rig.env.step(free_ep, 2 * kGridCols + 2).target_hit);
}

TEST_CASE("history marks visited cells as a set") {
  Rig rig;
  EpisodeState ep = rig.env.reset(noise_image(), 0);
  rig.env.step(ep, 3);
  rig.env.step(ep, 7);
  rig.env.step(ep, 3);  // refixation keeps one mark
  NdArray hist = rig.env.history_plane(ep.visited);
  CHECK(hist.data.sum() == 3.f);
  CHECK(hist.data[3] == 1.f);
  CHECK(hist.data[7] == 1.f);
  CHECK(hist.data[kCenterAction] == 1.f);
}

TEST_CASE("history gains one mark per step without refixation") {
  Rig rig;
  EpisodeState ep = rig.env.reset(noise_image(), 0);
  int actions[6] = {0, 20, 40, 60, 80, 100};
  for (int i = 0; i < 6; ++i) {
    rig.env.step(ep, actions[i]);
    NdArray hist = rig.env.history_plane(ep.visited);
    CHECK(hist.data.sum() == static_cast<float>(ep.steps + 1));
  }
}

TEST_CASE("training-path state assembly matches the environment bit for bit") {
  Rig rig;
  EpisodeState ep = rig.env.reset(noise_image(), 1);
  rig.env.step(ep, 45);
  rig.env.step(ep, 120);
  State s = rig.env.observe(ep);

  Tape t(true);
  FeatureExtractor::Bound fxb = rig.fx.bind(t, true);
  Var sv = state_on_tape(t, fxb, SearchEnv::image_tensor(ep.ret.pixels),
                         rig.env.category_planes(ep.category),
                         rig.env.history_plane(ep.visited));
  REQUIRE(t.val(sv).same_shape(s.tensor));
  CHECK((t.val(sv).data == s.tensor.data));
}

TEST_CASE("oversized images are resized onto the canvas") {
  Rig rig;
  ImageF32 big = noise_image(1024, 640, 21);
  EpisodeState ep = rig.env.reset(big, 0);
  CHECK(ep.image.width == kCanvasW);
  CHECK(ep.image.height == kCanvasH);
  CHECK(ep.ret.width == kCanvasW);
  rig.env.step(ep, 0);  // runs end to end on the resized canvas
}

TEST_CASE("reset rejects bad inputs") {
  Rig rig;
  ImageF32 im = noise_image();
  CHECK_THROWS_AS(rig.env.reset(im, -1), ValidationError);
  CHECK_THROWS_AS(rig.env.reset(im, 2), ValidationError);
  CHECK_THROWS_AS(rig.env.reset(ImageF32{}, 0), ValidationError);
  CHECK_THROWS_AS(rig.env.reset(im, 0, Box{500, 300, 40, 40}), ValidationError);
  CHECK_THROWS_AS(rig.env.reset(im, 0, Box{-4, 0, 40, 40}), ValidationError);
  CHECK_THROWS_AS(rig.env.reset(im, 0, Box{10, 10, 0, 5}), ValidationError);
}

TEST_CASE("environment config is validated") {
  FeatureExtractor fx = [] {
    Rng rng(1);
    return FeatureExtractor::make(32, rng);
  }();
  EnvConfig bad;
  bad.num_categories = 0;
  CHECK_THROWS_AS(SearchEnv(bad, &fx), ValidationError);
  EnvConfig wrong_canvas;
  wrong_canvas.fov.width = 256;
  CHECK_THROWS_AS(SearchEnv(wrong_canvas, &fx), ValidationError);
  EnvConfig ok;
  CHECK_THROWS_AS(SearchEnv(ok, nullptr), ValidationError);
}
