#pragma once

#include <optional>
#include <vector>

#include "girl/dataset.hpp"
#include "girl/grid.hpp"
#include "girl/image.hpp"
#include "girl/ndarray.hpp"
#include "girl/nets.hpp"
#include "girl/retina.hpp"

namespace girl {

struct EnvConfig {
  FoveationConfig fov;      // canvas geometry + retina parameters
  int num_categories = 2;   // one-hot planes appended to the state
  int episode_length = 6;   // new fixations per episode (7 total with start)

  void validate() const;
};

// Observation handed to the policy: a [C + num_categories + 1, 10, 16]
// tensor (features, category one-hots, fixation-history plane) plus the
// number of saccades taken so far.
struct State {
  NdArray tensor;
  int step = 0;
};

// Everything an in-flight episode carries. `ret` is the cumulative
// foveated view after all fixations so far; `visited` marks grid cells
// that have been fixated (refixations keep a single mark).
struct EpisodeState {
  ImageF32 image;
  BlurPyramid pyramid;
  std::vector<PixelPoint> fixations;
  std::vector<bool> visited;
  RetImage ret;
  int category = 0;
  std::optional<Box> target_box;  // canvas coordinates
  int steps = 0;
  bool done = false;
};

class SearchEnv {
 public:
  // The extractor is borrowed, not owned: training updates it in place and
  // the env always encodes with the current weights.
  SearchEnv(EnvConfig cfg, const FeatureExtractor* fx);

  // `image` is resized to the canvas if needed; `target_box` (canvas
  // coordinates) is only consulted for the target_hit signal.
  EpisodeState reset(const ImageF32& image, int category,
                     std::optional<Box> target_box = std::nullopt) const;

  struct StepResult {
    bool target_hit = false;
    bool done = false;
  };
  // Fixates the center of the action's cell, extends the cumulative
  // foveation, and ends the episode after episode_length steps.
  StepResult step(EpisodeState& ep, int action) const;

  PixelPoint action_to_pixel(int action) const;

  // Feature map with category one-hot planes appended: [C+ncat, 10, 16].
  NdArray extract_features(const ImageF32& ret, int category) const;
  // Full observation for the current episode.
  State observe(const EpisodeState& ep) const;

  NdArray category_planes(int category) const;
  NdArray history_plane(const std::vector<bool>& visited) const;
  static NdArray image_tensor(const ImageF32& ret);  // [1, H, W]

  int state_channels() const;
  const EnvConfig& config() const { return cfg_; }
  const FeatureExtractor& extractor() const { return *fx_; }

 private:
  EnvConfig cfg_;
  const FeatureExtractor* fx_;
};

// Inference-path state assembly from raw parts; the single source of truth
// for the state layout (features, category planes, history plane).
NdArray assemble_state(const FeatureExtractor& fx, const ImageF32& ret,
                       const NdArray& cat_planes, const NdArray& history);

// Training-path state assembly on a tape: identical layout to
// assemble_state but with the extractor bound for gradients.
Var state_on_tape(Tape& t, const FeatureExtractor::Bound& fxb,
                  const NdArray& image_tensor, const NdArray& cat_planes,
                  const NdArray& history);

}  // namespace girl
