#include "girl/agent.hpp"

#include <cmath>
#include <fstream>

#include "girl/checkpoint.hpp"
#include "girl/errors.hpp"
#include "girl/grid.hpp"

namespace girl {

namespace {
constexpr float kMaskedLogit = -1e30f;

float sigmoid(float z) {
  if (z >= 0.f) return 1.f / (1.f + std::exp(-z));
  float e = std::exp(z);
  return e / (1.f + e);
}
}  // namespace

PolicyOutput policy_forward(const ActorCritic& ac, const NdArray& state) {
  Tape t(false);
  ActorCritic::Bound b = ac.bind(t, false);
  ActorCritic::Heads heads = ActorCritic::apply(t, b, t.leaf(state));
  return {t.val(heads.logits), t.scalar(heads.value)};
}

NdArray masked_log_probs(const NdArray& logits,
                         const std::vector<bool>* forbidden) {
  if (logits.rank() != 1 || logits.shape[0] < 1)
    throw ShapeError("masked_log_probs: expected a non-empty vector, got " +
                     logits.shape_str());
  const int n = logits.shape[0];
  NdArray masked = logits;
  if (forbidden) {
    if (static_cast<int>(forbidden->size()) != n)
      throw ValidationError("masked_log_probs: mask size mismatch");
    bool any_allowed = false;
    for (int i = 0; i < n; ++i) {
      if ((*forbidden)[i])
        masked.data[i] = kMaskedLogit;
      else
        any_allowed = true;
    }
    if (!any_allowed)
      throw ValidationError("masked_log_probs: every action is masked");
  }
  return log_softmax(masked);
}

ActionSample sample_action(const PolicyOutput& out, Rng& rng,
                           const std::vector<bool>* forbidden) {
  NdArray logp = masked_log_probs(out.logits, forbidden);
  NdArray probs = logp;
  for (int i = 0; i < probs.size(); ++i) probs.data[i] = std::exp(probs.data[i]);
  int a = rng.categorical(probs.data.data(), probs.size());
  return {a, logp.data[a]};
}

int greedy_action(const PolicyOutput& out, const std::vector<bool>* forbidden) {
  NdArray logp = masked_log_probs(out.logits, forbidden);
  int best = 0;
  for (int i = 1; i < logp.size(); ++i)
    if (logp.data[i] > logp.data[best]) best = i;
  return best;
}

NdArray saccade_map(const PolicyOutput& out) {
  if (out.logits.rank() != 1 || out.logits.shape[0] != kNumActions)
    throw ShapeError("saccade_map: expected [" + std::to_string(kNumActions) +
                     "] logits, got " + out.logits.shape_str());
  NdArray probs = masked_log_probs(out.logits, nullptr);
  for (int i = 0; i < probs.size(); ++i) probs.data[i] = std::exp(probs.data[i]);
  probs.shape = {kGridRows, kGridCols};
  return probs;
}

void write_saccade_map_csv(const std::string& path, const NdArray& map) {
  if (map.rank() != 2)
    throw ShapeError("write_saccade_map_csv: expected rank 2, got " +
                     map.shape_str());
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (int r = 0; r < map.shape[0]; ++r) {
    for (int c = 0; c < map.shape[1]; ++c) {
      if (c) f << ',';
      f << map.at2(r, c);
    }
    f << '\n';
  }
  if (!f.good()) throw IoError("write failed: " + path);
}

ImageU8 saccade_map_raster(const NdArray& map) {
  if (map.rank() != 2 || map.shape[0] != kGridRows || map.shape[1] != kGridCols)
    throw ShapeError("saccade_map_raster: expected [" +
                     std::to_string(kGridRows) + "x" +
                     std::to_string(kGridCols) + "], got " + map.shape_str());
  float peak = map.data.maxCoeff();
  ImageU8 im = ImageU8::blank(kCanvasW, kCanvasH);
  for (int y = 0; y < kCanvasH; ++y)
    for (int x = 0; x < kCanvasW; ++x) {
      float v = map.at2(y / kCellPx, x / kCellPx);
      float scaled = peak > 0.f ? v / peak : 0.f;
      im.at(x, y) = static_cast<uint8_t>(std::lround(scaled * 255.f));
    }
  return im;
}

float discriminator_score(const Discriminator& disc, const NdArray& state,
                          int action) {
  Tape t(false);
  Discriminator::Bound b = disc.bind(t, false);
  Var logit = Discriminator::apply(t, b, t.leaf(state), t.leaf(action_plane(action)));
  const float raw = t.scalar(logit);
  if (!std::isfinite(raw))
    throw DivergenceError("discriminator produced a non-finite logit");
  float s = sigmoid(raw);
  return std::min(std::max(s, kScoreClampLo), 1.f - kScoreClampLo);
}

void save_agent(const std::string& path, FeatureExtractor& fx, ActorCritic& ac,
                Discriminator& disc) {
  std::vector<std::pair<std::string, const NdArray*>> tensors;
  for (auto& [name, p] : named_tensors(fx, ac, disc)) tensors.emplace_back(name, p);
  save_checkpoint(path, tensors);
}

void load_agent(const std::string& path, FeatureExtractor& fx, ActorCritic& ac,
                Discriminator& disc) {
  restore_tensors(load_checkpoint(path), named_tensors(fx, ac, disc));
}

}  // namespace girl
