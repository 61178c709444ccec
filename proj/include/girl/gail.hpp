#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "girl/agent.hpp"
#include "girl/dataset.hpp"
#include "girl/optim.hpp"
#include "girl/search_env.hpp"

namespace girl {

struct PPOConfig {
  float clip = 0.2f;
  int epochs = 4;
  int minibatch = 48;
  float lr_policy = 3e-4f;
  float lr_value = 1e-3f;
  float lr_disc = 3e-4f;
  float gamma = 1.0f;
  float lambda = 0.95f;
  float entropy_coef = 0.01f;
  float value_coef = 0.5f;
  int episodes_per_iter = 24;
  int iterations = 120;
  int jobs = 1;
  bool ior = false;              // mask already-visited cells during rollouts
  bool reward_neglog1md = false; // -ln(1-D) reward instead of ln(D)

  void validate() const;
};

// One decision point of a generated episode: enough to rebuild the exact
// state through the current extractor, plus everything recorded at
// collection time that PPO needs.
struct StepRecord {
  ImageF32 ret;        // cumulative foveated view the action was chosen from
  NdArray cat_planes;  // [ncat, H, W]
  NdArray history;     // [1, H, W]
  int action = 0;
  float log_prob = 0.f;
  float value = 0.f;
  float reward = 0.f;
  bool target_hit = false;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  std::vector<PixelPoint> fixations;  // full scanpath including the start
  int category = 0;
  bool hit = false;  // any step landed in the target box
  std::string ref;   // image provenance for reports
};

// Supplies one episode's inputs; must be deterministic in the passed rng.
struct EpisodeSpec {
  ImageF32 image;
  int category = 0;
  std::optional<Box> target_box;  // canvas coordinates
  std::string ref;
};
using EpisodeSource = std::function<EpisodeSpec(Rng&)>;

std::vector<Trajectory> collect_rollouts(const SearchEnv& env,
                                         const ActorCritic& ac,
                                         const EpisodeSource& source,
                                         int episodes, const Rng& rng,
                                         int jobs = 1, bool ior = false);

// ln(D) by default, -ln(1-D) behind the variant flag; D comes in already
// clamped so rewards live in [ln 1e-6, -ln 1e-6].
double gail_reward(double score, bool neglog1md = false);

// Batch-wide normalization to zero mean and unit population deviation;
// degenerate batches (constant advantages) normalize to zeros.
std::vector<float> normalize_advantages(const std::vector<float>& advs);

// Generalized advantage estimation for one episode that terminates on its
// last step (the value after the terminal step is zero).
struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};
GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values, double gamma,
                      double lambda);

// A (state, action) pair ready for the discriminator.
struct DiscSample {
  NdArray state;
  int action = 0;
};

// Scores every step with the current discriminator and writes rewards into
// the records; returns the assembled states aligned with the flattened
// step order, so the discriminator update can reuse them.
struct ScoredRollouts {
  std::vector<DiscSample> samples;
  double mean_reward = 0;
  double mean_score = 0;
};
ScoredRollouts score_rollouts(const Discriminator& disc,
                              const FeatureExtractor& fx,
                              std::vector<Trajectory>& trajs,
                              bool neglog1md = false);

// Binary cross-entropy update on balanced expert/generated batches
// (equal sizes enforced). Accuracy is measured before the update.
struct DiscStats {
  double loss = 0;
  double accuracy = 0;
};
DiscStats discriminator_update(Discriminator& disc,
                               const std::vector<DiscSample>& expert,
                               const std::vector<DiscSample>& generated,
                               const PPOConfig& cfg, OptimState& opt);

// Clipped-surrogate PPO over the collected trajectories. Advantages are
// normalized batch-wide; the extractor, trunk and logit head step with the
// policy learning rate, the value head with the value learning rate.
struct PPOStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  // max |ratio - 1| over the first minibatch of the first epoch, before
  // any optimizer step has run.
  double first_batch_ratio_dev = 0;
};
PPOStats ppo_update(FeatureExtractor& fx, ActorCritic& ac,
                    const std::vector<Trajectory>& trajs, const PPOConfig& cfg,
                    OptimState& opt_policy, OptimState& opt_value, Rng& rng);

// Expert supervision: (trial prefix -> next action) pairs regenerated into
// states on demand with the current extractor. Fixations map onto the
// canvas with the episode's vocabulary: the trial's first fixation becomes
// the canvas center and later ones snap to their cell centers.
struct ExpertDataset {
  const DatasetManifest* manifest = nullptr;
  std::vector<ExpertPair> pairs;
  // Resolves a trial's image at native resolution.
  std::function<ImageF32(const SearchTrial&)> load_image;
};

std::vector<DiscSample> sample_expert_states(const ExpertDataset& ds, int n,
                                             Rng& rng, const SearchEnv& env);

struct IterationStats {
  int iteration = 0;
  double disc_loss = 0;
  double disc_accuracy = 0;
  double mean_reward = 0;
  double mean_score = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double first_batch_ratio_dev = 0;
  double hit_rate = 0;  // fraction of collected episodes that found the target
};

struct TrainReport {
  std::vector<IterationStats> iterations;
  bool halted = false;
  std::string halt_reason;
  uint64_t seed = 0;
};

// Full adversarial loop: collect, score with ln(D), update discriminator on
// balanced batches, PPO-update the policy. Halts with a diagnostic if
// losses go non-finite or the mean |policy loss| explodes.
TrainReport train(FeatureExtractor& fx, ActorCritic& ac, Discriminator& disc,
                  const SearchEnv& env, const ExpertDataset& experts,
                  const EpisodeSource& source, const PPOConfig& cfg,
                  uint64_t seed, std::ostream* log = nullptr);

void write_train_report_csv(const std::string& path, const TrainReport& report);
void write_train_summary_json(const std::string& path, const TrainReport& report,
                              const PPOConfig& cfg);

}  // namespace girl
