#include "girl/synth.hpp"

#include <algorithm>
#include <cmath>

#include "girl/errors.hpp"
#include "girl/grid.hpp"

namespace girl {

namespace {

constexpr int kSceneW = 512;
constexpr int kSceneH = 320;
// Every patch type mixes kBright and kDark over equal areas, so all patches
// share the mean kPatchMean. The background sits at kBgMean with low-contrast
// value noise: under heavy peripheral blur a patch collapses to a faint
// uniform blob — present, but of indeterminate category.
constexpr float kBright = 0.9f;
constexpr float kDark = 0.3f;
constexpr float kPatchMean = 0.6f;
constexpr float kBgMean = 0.5f;
constexpr double kEdgeMargin = 4;
constexpr double kSeparation = 8;
// Central region targets must avoid: the canvas-center cell padded to the
// paper-style center block.
constexpr double kCenterX0 = 204, kCenterX1 = 308;
constexpr double kCenterY0 = 128, kCenterY1 = 192;

bool overlaps(const Box& a, const Box& b, double pad) {
  return !(a.x + a.w + pad <= b.x || b.x + b.w + pad <= a.x ||
           a.y + a.h + pad <= b.y || b.y + b.h + pad <= a.y);
}

bool in_center_region(const Box& b) {
  return !(b.x + b.w <= kCenterX0 || b.x >= kCenterX1 || b.y + b.h <= kCenterY0 ||
           b.y >= kCenterY1);
}

Box place_patch(Rng& rng, const std::vector<Box>& taken, bool avoid_center) {
  const int margin = static_cast<int>(kEdgeMargin);
  const int nx = kSceneW - kPatchPx - 2 * margin + 1;  // count of valid x offsets
  const int ny = kSceneH - kPatchPx - 2 * margin + 1;
  for (int attempt = 0; attempt < 200; ++attempt) {
    Box b{static_cast<double>(margin + rng.uniform_int(nx)),
          static_cast<double>(margin + rng.uniform_int(ny)),
          static_cast<double>(kPatchPx), static_cast<double>(kPatchPx)};
    if (avoid_center && in_center_region(b)) continue;
    bool clear = true;
    for (const Box& t : taken)
      if (overlaps(b, t, kSeparation)) clear = false;
    if (clear) return b;
  }
  throw ValidationError("gen_scene: patch placement failed after 200 attempts");
}

ImageF32 textured_background(Rng& rng) {
  ImageF32 coarse = ImageF32::blank(16, 10);
  for (auto& p : coarse.pixels) p = kBgMean + 0.08f * (rng.uniformf() - 0.5f);
  return resize_bilinear(coarse, kSceneW, kSceneH);
}

void paint_checker(ImageF32& im, const Box& b) {
  const int x0 = static_cast<int>(b.x), y0 = static_cast<int>(b.y);
  const int half = kPatchPx / 2;
  for (int y = 0; y < kPatchPx; ++y)
    for (int x = 0; x < kPatchPx; ++x) {
      const bool odd = (x / half + y / half) % 2 == 1;
      im.at(x0 + x, y0 + y) = odd ? kDark : kBright;
    }
}

void paint_rings(ImageF32& im, const Box& b) {
  const int x0 = static_cast<int>(b.x), y0 = static_cast<int>(b.y);
  const double c = kPatchPx / 2.0 - 0.5;
  // Radii 12 : 12*sqrt(3) : 24 split the disc into equal bright and dark
  // areas; the corners take the patch mean so the whole square averages to it.
  const double r1 = 12.0, r2 = 12.0 * std::sqrt(3.0), r3 = 24.0;
  for (int y = 0; y < kPatchPx; ++y)
    for (int x = 0; x < kPatchPx; ++x) {
      const double r = std::hypot(x - c, y - c);
      float v = kPatchMean;
      if (r <= r1)
        v = kBright;
      else if (r <= r2)
        v = kDark;
      else if (r <= r3)
        v = kBright;
      im.at(x0 + x, y0 + y) = v;
    }
}

void paint_bands(ImageF32& im, const Box& b, bool horizontal) {
  const int x0 = static_cast<int>(b.x), y0 = static_cast<int>(b.y);
  for (int y = 0; y < kPatchPx; ++y)
    for (int x = 0; x < kPatchPx; ++x) {
      const int band = (horizontal ? y : x) / 12;
      im.at(x0 + x, y0 + y) = band % 2 == 0 ? kBright : kDark;
    }
}

void paint_category(ImageF32& im, const Box& b, int category) {
  if (category == 0)
    paint_checker(im, b);
  else
    paint_rings(im, b);
}

}  // namespace

SyntheticScene gen_scene(uint64_t seed, int category, bool target_present) {
  if (category < 0 || category >= kSynthCategories)
    throw ValidationError("gen_scene: category " + std::to_string(category) +
                          " out of range [0, " +
                          std::to_string(kSynthCategories) + ")");
  Rng rng(seed);
  SyntheticScene scene;
  scene.seed = seed;
  scene.category = category;
  scene.target_present = target_present;
  scene.image = textured_background(rng);

  std::vector<Box> taken;
  if (target_present) {
    Box t = place_patch(rng, taken, /*avoid_center=*/true);
    taken.push_back(t);
    scene.target_box = t;
    paint_category(scene.image, t, category);
  }
  Box sibling = place_patch(rng, taken, /*avoid_center=*/false);
  taken.push_back(sibling);
  scene.sibling_box = sibling;
  paint_category(scene.image, sibling, 1 - category);
  scene.distractor_boxes.push_back(sibling);

  for (int d = 0; d < 2; ++d) {
    Box b = place_patch(rng, taken, /*avoid_center=*/false);
    taken.push_back(b);
    paint_bands(scene.image, b, d == 0);
    scene.distractor_boxes.push_back(b);
  }
  return scene;
}

std::string scene_ref(const SyntheticScene& scene) {
  return "syn:" + std::to_string(scene.seed) + ":" +
         std::to_string(scene.category) + ":" +
         (scene.target_present ? "tp" : "ta");
}

SyntheticScene scene_from_ref(const std::string& ref) {
  const auto bad = [&] {
    return ValidationError("not a synthetic scene reference: " + ref);
  };
  if (ref.rfind("syn:", 0) != 0) throw bad();
  const size_t p1 = ref.find(':', 4);
  const size_t p2 = p1 == std::string::npos ? p1 : ref.find(':', p1 + 1);
  if (p2 == std::string::npos) throw bad();
  uint64_t seed = 0;
  int category = 0;
  try {
    seed = std::stoull(ref.substr(4, p1 - 4));
    category = std::stoi(ref.substr(p1 + 1, p2 - p1 - 1));
  } catch (const std::exception&) {
    throw bad();
  }
  const std::string cond = ref.substr(p2 + 1);
  if (cond != "tp" && cond != "ta") throw bad();
  return gen_scene(seed, category, cond == "tp");
}

void OracleConfig::validate() const {
  if (noise_sigma_px < 0)
    throw ValidationError("oracle: noise sigma must be non-negative");
  if (p_distractor_first < 0 || p_distractor_first > 1)
    throw ValidationError("oracle: distractor probability must be in [0, 1]");
  if (max_saccades < 1)
    throw ValidationError("oracle: need at least one saccade");
}

namespace {

Fixation jitter_around(const Box& b, double sigma, Rng& rng) {
  const double cx = b.x + b.w / 2, cy = b.y + b.h / 2;
  Fixation f;
  f.x = std::clamp(cx + rng.normal(0, sigma), 0.0, kSceneW - 1.0);
  f.y = std::clamp(cy + rng.normal(0, sigma), 0.0, kSceneH - 1.0);
  f.duration_ms = 200;
  return f;
}

}  // namespace

SearchTrial oracle_scanpath(const SyntheticScene& scene, const OracleConfig& cfg,
                            Rng& rng) {
  cfg.validate();
  if (!scene.target_present || !scene.target_box)
    throw ValidationError("oracle_scanpath: needs a target-present scene");

  SearchTrial t;
  t.trial_id = scene_ref(scene);
  t.subject_id = "oracle";
  t.image_ref = scene_ref(scene);
  t.native_w = kSceneW;
  t.native_h = kSceneH;
  t.category_id = scene.category + 1;
  t.target_present = true;
  t.correct = true;
  t.target_box = scene.target_box;
  t.sibling_box = scene.sibling_box;
  t.deg_per_px = 54.0 / 512.0;

  t.fixations.push_back({kSceneW / 2.0, kSceneH / 2.0, 200.0});
  int k = 0;
  if (!scene.distractor_boxes.empty() &&
      rng.uniform() < cfg.p_distractor_first) {
    const Box& d = scene.distractor_boxes[rng.uniform_int(
        static_cast<int>(scene.distractor_boxes.size()))];
    t.fixations.push_back(jitter_around(d, cfg.noise_sigma_px, rng));
    ++k;
  }
  for (; k < cfg.max_saccades; ++k)
    t.fixations.push_back(jitter_around(*scene.target_box, cfg.noise_sigma_px, rng));
  return t;
}

std::pair<DatasetManifest, DatasetManifest> gen_dataset(
    int n_train, int n_test, int categories, uint64_t root_seed,
    const OracleConfig& oracle) {
  if (n_train < 1 || n_test < 0)
    throw ValidationError("gen_dataset: need at least one training trial");
  if (categories < 1 || categories > kSynthCategories)
    throw ValidationError("gen_dataset: supported category counts are 1.." +
                          std::to_string(kSynthCategories));

  auto build = [&](const char* split, int first, int count) {
    DatasetManifest m;
    m.split = split;
    for (int c = 0; c < categories; ++c)
      m.categories.push_back({c + 1, c == 0 ? "checker" : "rings"});
    for (int i = 0; i < count; ++i) {
      const int index = first + i;
      const uint64_t seed = fnv1a64("scene:" + std::to_string(index), root_seed);
      SyntheticScene scene = gen_scene(seed, index % categories, true);
      Rng trial_rng(fnv1a64("trial:" + std::to_string(index), root_seed));
      SearchTrial t = oracle_scanpath(scene, oracle, trial_rng);
      t.trial_id = std::string(split) + "-" + std::to_string(index);
      t.subject_id = "o" + std::to_string(index % 5 + 1);
      m.trials.push_back(std::move(t));
    }
    return m;
  };

  return {build("train", 0, n_train), build("test", n_train, n_test)};
}

ImageF32 load_trial_image(const SearchTrial& trial) {
  if (trial.image_ref.rfind("syn:", 0) == 0)
    return scene_from_ref(trial.image_ref).image;
  return to_f32(read_pgm(trial.image_ref));
}

}  // namespace girl
