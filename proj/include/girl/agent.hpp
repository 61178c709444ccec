#pragma once

#include <string>
#include <vector>

#include "girl/image.hpp"
#include "girl/ndarray.hpp"
#include "girl/nets.hpp"
#include "girl/rng.hpp"

namespace girl {

struct PolicyOutput {
  NdArray logits;  // [160]
  float value = 0.f;
};

struct ActionSample {
  int action = 0;
  float log_prob = 0.f;
};

// Inference-mode policy evaluation on one state tensor.
PolicyOutput policy_forward(const ActorCritic& ac, const NdArray& state);

// Log-probabilities of the (optionally restricted) action distribution.
// forbidden[i] == true removes cell i; the rest renormalize. Masked cells
// get a log-probability low enough that exp() underflows to exactly 0.
NdArray masked_log_probs(const NdArray& logits,
                         const std::vector<bool>* forbidden = nullptr);

ActionSample sample_action(const PolicyOutput& out, Rng& rng,
                           const std::vector<bool>* forbidden = nullptr);
int greedy_action(const PolicyOutput& out,
                  const std::vector<bool>* forbidden = nullptr);

// Policy probabilities laid out on the fixation grid: [10, 16], sums to 1.
NdArray saccade_map(const PolicyOutput& out);

void write_saccade_map_csv(const std::string& path, const NdArray& map);
// Nearest-cell upsample to the canvas, scaled so the peak is white.
ImageU8 saccade_map_raster(const NdArray& map);

// P(expert | state, action), clamped to [1e-6, 1 - 1e-6].
float discriminator_score(const Discriminator& disc, const NdArray& state,
                          int action);

inline constexpr float kScoreClampLo = 1e-6f;

// Whole-agent checkpoints (extractor + actor-critic + discriminator).
void save_agent(const std::string& path, FeatureExtractor& fx, ActorCritic& ac,
                Discriminator& disc);
void load_agent(const std::string& path, FeatureExtractor& fx, ActorCritic& ac,
                Discriminator& disc);

}  // namespace girl
