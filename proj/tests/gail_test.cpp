#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "girl/agent.hpp"
#include "girl/dataset.hpp"
#include "girl/gail.hpp"
#include "girl/layers.hpp"
#include "girl/search_env.hpp"

using namespace girl;

namespace {

std::string fixture_path() {
  const char* dir = std::getenv("GIRL_TEST_DATA");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/mcs_fixture.json";
}

ImageF32 noise_image(int w, int h, Rng& rng) {
  ImageF32 im = ImageF32::blank(w, h);
  for (auto& p : im.pixels) p = rng.uniformf();
  return im;
}

// Full-canvas rig: extractor, heads and env built from one root seed.
struct Rig {
  Rng rng;
  FeatureExtractor fx;
  ActorCritic ac;
  Discriminator disc;
  EnvConfig cfg;
  SearchEnv env;

  static EnvConfig make_cfg() {
    EnvConfig c;
    c.num_categories = 2;
    return c;
  }

  explicit Rig(uint64_t seed)
      : rng(seed),
        fx(FeatureExtractor::make(32, rng)),
        ac(ActorCritic::make(32 + 2 + 1, rng)),
        disc(Discriminator::make(32 + 2 + 1, rng)),
        cfg(make_cfg()),
        env(cfg, &fx) {}
};

EpisodeSpec noise_spec(Rng& r) {
  EpisodeSpec s;
  s.image = noise_image(kCanvasW, kCanvasH, r);
  s.category = r.uniform_int(2);
  if (r.uniformf() < 0.5f) {
    s.target_box = Box{32.0 * r.uniform_int(14), 32.0 * r.uniform_int(8), 48, 48};
  }
  s.ref = "noise";
  return s;
}

// Small-canvas rig for cheap PPO behavior tests: 64x64 retinal images feed
// the extractor into a 2x2 grid of four actions.
struct TinyRig {
  Rng rng;
  FeatureExtractor fx;
  ActorCritic ac;
  ImageF32 ret;
  NdArray cat;
  NdArray hist;

  explicit TinyRig(uint64_t seed)
      : rng(seed), fx(FeatureExtractor::make(8, rng)), ac(ActorCritic::make(10, rng)) {
    Rng imrng = rng.sub("image");
    ret = noise_image(64, 64, imrng);
    cat = NdArray::full({1, 2, 2}, 1.f);
    hist = NdArray::zeros({1, 2, 2});
    hist.data[0] = 1.f;
  }

  NdArray state() const { return assemble_state(fx, ret, cat, hist); }

  Trajectory one_step(int action, float log_prob, float value, float reward) const {
    StepRecord rec;
    rec.ret = ret;
    rec.cat_planes = cat;
    rec.history = hist;
    rec.action = action;
    rec.log_prob = log_prob;
    rec.value = value;
    rec.reward = reward;
    Trajectory tr;
    tr.steps.push_back(std::move(rec));
    return tr;
  }
};

std::vector<NdArray> snapshot_params(FeatureExtractor& fx, ActorCritic& ac,
                                     Discriminator& disc) {
  std::vector<NdArray> out;
  for (auto& [name, tensor] : named_tensors(fx, ac, disc)) out.push_back(*tensor);
  return out;
}

bool params_equal(const std::vector<NdArray>& snap, FeatureExtractor& fx,
                  ActorCritic& ac, Discriminator& disc) {
  auto now = named_tensors(fx, ac, disc);
  if (now.size() != snap.size()) return false;
  for (size_t i = 0; i < now.size(); ++i)
    if (!(now[i].second->data.array() == snap[i].data.array()).all()) return false;
  return true;
}

// Exhaustive discounted double sum, the definition the recursion must match.
GaeResult gae_oracle(const std::vector<double>& rewards,
                     const std::vector<double>& values, double gamma,
                     double lambda) {
  const int T = static_cast<int>(rewards.size());
  GaeResult out;
  out.advantages.resize(T);
  out.returns.resize(T);
  for (int t = 0; t < T; ++t) {
    double acc = 0, w = 1;
    for (int l = t; l < T; ++l) {
      const double vnext = (l + 1 < T) ? values[l + 1] : 0.0;
      acc += w * (rewards[l] + gamma * vnext - values[l]);
      w *= gamma * lambda;
    }
    out.advantages[t] = acc;
    out.returns[t] = acc + values[t];
  }
  return out;
}

ExpertDataset make_fixture_experts(const DatasetManifest& filtered) {
  ExpertDataset ds;
  ds.manifest = &filtered;
  ds.pairs = export_expert_pairs(filtered);
  ds.load_image = [](const SearchTrial& t) {
    Rng r(fnv1a64(t.image_ref));
    return noise_image(t.native_w, t.native_h, r);
  };
  return ds;
}

}  // namespace

TEST_CASE("gail_reward maps scores to log rewards and guards its domain") {
  CHECK(gail_reward(0.5) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(gail_reward(1e-6) == doctest::Approx(std::log(1e-6)).epsilon(1e-12));
  CHECK(gail_reward(1.0 - 1e-6) < 0.0);
  CHECK(gail_reward(0.5, true) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
  CHECK(gail_reward(0.9, true) == doctest::Approx(-std::log(0.1)).epsilon(1e-9));
  // ln(D) is monotone in D: better fooling of the discriminator pays more.
  CHECK(gail_reward(0.9) > gail_reward(0.1));
  CHECK_THROWS_AS(gail_reward(0.0), ValidationError);
  CHECK_THROWS_AS(gail_reward(1.0), ValidationError);
  CHECK_THROWS_AS(gail_reward(-0.1), ValidationError);
  CHECK_THROWS_AS(gail_reward(std::nan("")), DivergenceError);
}

TEST_CASE("compute_gae matches the exhaustive double-sum oracle") {
  Rng rng(2024);
  const double gammas[] = {0.0, 0.5, 0.9, 1.0};
  const double lambdas[] = {0.0, 0.5, 0.95, 1.0};
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = 1 + rng.uniform_int(8);
    std::vector<double> rewards(T), values(T);
    for (int t = 0; t < T; ++t) {
      rewards[t] = rng.uniformf() * 4.0 - 2.0;
      values[t] = rng.uniformf() * 2.0 - 1.0;
    }
    const double g = gammas[rng.uniform_int(4)];
    const double l = lambdas[rng.uniform_int(4)];
    GaeResult got = compute_gae(rewards, values, g, l);
    GaeResult want = gae_oracle(rewards, values, g, l);
    REQUIRE(got.advantages.size() == static_cast<size_t>(T));
    REQUIRE(got.returns.size() == static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
      CHECK(got.advantages[t] == doctest::Approx(want.advantages[t]).epsilon(1e-9));
      CHECK(got.returns[t] == doctest::Approx(want.returns[t]).epsilon(1e-9));
    }
  }
}

TEST_CASE("compute_gae hand examples and input guards") {
  const std::vector<double> rewards = {1, 1, 0};
  const std::vector<double> values = {0.5, 0.2, 0.1};

  GaeResult mc = compute_gae(rewards, values, 1.0, 1.0);
  // gamma = lambda = 1: advantage collapses to (sum of future rewards) - V.
  CHECK(mc.advantages[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(mc.advantages[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(mc.advantages[2] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(mc.returns[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(mc.returns[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mc.returns[2] == doctest::Approx(0.0).epsilon(1e-12));

  GaeResult td = compute_gae(rewards, values, 0.0, 0.95);
  // gamma = 0: each advantage is just r_t - V_t.
  CHECK(td.advantages[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(td.advantages[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(td.advantages[2] == doctest::Approx(-0.1).epsilon(1e-12));

  CHECK_THROWS_AS(compute_gae({}, {}, 1.0, 0.95), ValidationError);
  CHECK_THROWS_AS(compute_gae({1.0}, {0.5, 0.5}, 1.0, 0.95), ValidationError);
}

TEST_CASE("normalize_advantages centers and scales, degenerates to zeros") {
  Rng rng(7);
  std::vector<float> advs(100);
  for (auto& a : advs) a = rng.uniformf() * 10.f - 5.f;
  std::vector<float> normed = normalize_advantages(advs);
  REQUIRE(normed.size() == advs.size());
  double mean = 0;
  for (float a : normed) mean += a;
  mean /= normed.size();
  double var = 0;
  for (float a : normed) var += (a - mean) * (a - mean);
  var /= normed.size();
  CHECK(std::abs(mean) < 1e-5);
  CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-3);
  // Order statistics survive the affine map.
  CHECK(((advs[3] < advs[4]) == (normed[3] < normed[4])));

  std::vector<float> flat(6, 2.5f);
  for (float a : normalize_advantages(flat)) CHECK(a == 0.f);
  std::vector<float> one = {3.f};
  CHECK(normalize_advantages(one)[0] == 0.f);
  CHECK(normalize_advantages({}).empty());
}

TEST_CASE("collect_rollouts lays out six records per episode") {
  Rig rig(11);
  Rng root(500);
  auto trajs = collect_rollouts(rig.env, rig.ac, noise_spec, 10, root);
  REQUIRE(trajs.size() == 10);
  int total = 0;
  for (const auto& tr : trajs) {
    REQUIRE(tr.steps.size() == 6);
    total += static_cast<int>(tr.steps.size());
    REQUIRE(tr.fixations.size() == 7);
    CHECK(tr.fixations[0].x == 256.f);
    CHECK(tr.fixations[0].y == 160.f);
    CHECK((tr.category == 0 || tr.category == 1));
    bool any_hit = false;
    double prev_marks = 1;
    for (size_t k = 0; k < tr.steps.size(); ++k) {
      const StepRecord& rec = tr.steps[k];
      CHECK(rec.ret.width == kCanvasW);
      CHECK(rec.ret.height == kCanvasH);
      REQUIRE(rec.cat_planes.shape == std::vector<int>{2, kGridRows, kGridCols});
      REQUIRE(rec.history.shape == std::vector<int>{1, kGridRows, kGridCols});
      // History is recorded before acting: start mark plus one mark per
      // distinct earlier saccade.
      const double marks = rec.history.data.sum();
      CHECK(marks >= 1);
      CHECK(marks <= static_cast<double>(k) + 1);
      if (k > 0) {
        CHECK(marks >= prev_marks);
        CHECK(marks - prev_marks <= 1 + 1e-9);
      }
      prev_marks = marks;
      CHECK(rec.action >= 0);
      CHECK(rec.action < kNumActions);
      CHECK(rec.log_prob <= 0.f);
      CHECK(std::isfinite(rec.log_prob));
      CHECK(std::isfinite(rec.value));
      CHECK(rec.reward == 0.f);  // rewards are assigned by the scorer
      any_hit = any_hit || rec.target_hit;
      // The recorded fixation trail matches the action sequence.
      PixelPoint c = rig.env.action_to_pixel(rec.action);
      CHECK(tr.fixations[k + 1].x == c.x);
      CHECK(tr.fixations[k + 1].y == c.y);
    }
    CHECK(tr.hit == any_hit);
  }
  CHECK(total == 60);
}

TEST_CASE("collect_rollouts is reproducible and thread-count invariant") {
  Rig rig(11);
  Rng root(501);
  auto a = collect_rollouts(rig.env, rig.ac, noise_spec, 9, root);
  auto b = collect_rollouts(rig.env, rig.ac, noise_spec, 9, root);
  auto c = collect_rollouts(rig.env, rig.ac, noise_spec, 9, root, /*jobs=*/3);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  for (size_t i = 0; i < a.size(); ++i) {
    for (const auto* other : {&b[i], &c[i]}) {
      REQUIRE(a[i].steps.size() == other->steps.size());
      CHECK(a[i].category == other->category);
      CHECK(a[i].hit == other->hit);
      for (size_t k = 0; k < a[i].steps.size(); ++k) {
        CHECK(a[i].steps[k].action == other->steps[k].action);
        CHECK(a[i].steps[k].log_prob == other->steps[k].log_prob);
        CHECK(a[i].steps[k].value == other->steps[k].value);
        CHECK((a[i].steps[k].history.data.array() ==
               other->steps[k].history.data.array())
                  .all());
      }
    }
  }
}

TEST_CASE("untrained policies fixate approximately uniformly") {
  Rig rig(3);
  Rng root(900);
  auto trajs = collect_rollouts(rig.env, rig.ac, noise_spec, 16, root);
  Rng draw(901);
  std::vector<long> counts(kNumActions, 0);
  long total = 0;
  for (const auto& tr : trajs) {
    for (const auto& rec : tr.steps) {
      NdArray state = assemble_state(rig.fx, rec.ret, rec.cat_planes, rec.history);
      PolicyOutput po = policy_forward(rig.ac, state);
      for (int k = 0; k < 104; ++k) {
        ++counts[sample_action(po, draw).action];
        ++total;
      }
    }
  }
  REQUIRE(total == 16 * 6 * 104);
  const double expected = static_cast<double>(total) / kNumActions;
  double chi2 = 0;
  int missing = 0;
  for (long c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
    if (c == 0) ++missing;
  }
  CHECK(missing == 0);
  // 99th percentile of chi-squared with 159 degrees of freedom.
  CHECK(chi2 < 205.0);
}

TEST_CASE("score_rollouts writes clamped log rewards aligned with steps") {
  Rig rig(21);
  Rng root(77);
  auto trajs = collect_rollouts(rig.env, rig.ac, noise_spec, 4, root);
  ScoredRollouts scored = score_rollouts(rig.disc, rig.fx, trajs);
  REQUIRE(scored.samples.size() == 24);

  const double lo = std::log(1e-6);
  double sum = 0;
  size_t idx = 0;
  for (const auto& tr : trajs) {
    for (const auto& rec : tr.steps) {
      CHECK(rec.reward >= lo);
      CHECK(rec.reward < 0.0);
      sum += rec.reward;
      const DiscSample& s = scored.samples[idx++];
      CHECK(s.action == rec.action);
      REQUIRE(s.state.shape ==
              std::vector<int>{rig.env.state_channels(), kGridRows, kGridCols});
      // The stored state reproduces the reward through the public scorer.
      const float d = discriminator_score(rig.disc, s.state, s.action);
      CHECK(rec.reward == doctest::Approx(std::log(d)).epsilon(1e-6));
    }
  }
  CHECK(scored.mean_reward == doctest::Approx(sum / 24.0).epsilon(1e-9));
  CHECK(scored.mean_score > 0.0);
  CHECK(scored.mean_score < 1.0);
  // Fresh discriminators sit near indifference.
  CHECK(scored.mean_score == doctest::Approx(0.5).epsilon(0.2));

  auto trajs2 = collect_rollouts(rig.env, rig.ac, noise_spec, 2, root);
  ScoredRollouts flipped = score_rollouts(rig.disc, rig.fx, trajs2, true);
  size_t j = 0;
  for (const auto& tr : trajs2)
    for (const auto& rec : tr.steps) {
      const float d = discriminator_score(rig.disc, flipped.samples[j].state,
                                          flipped.samples[j].action);
      ++j;
      CHECK(rec.reward == doctest::Approx(-std::log(1.0 - d)).epsilon(1e-6));
      CHECK(rec.reward > 0.0);  // the variant reward is positive
    }
}

TEST_CASE("discriminator update enforces balance and starts near ln 2") {
  Rng rng(31);
  Discriminator disc = Discriminator::make(2, rng);
  PPOConfig cfg;
  cfg.lr_disc = 1e-3f;
  OptimState opt;

  auto toy = [&](float level, int action, uint64_t seed) {
    Rng r(seed);
    DiscSample s;
    s.state = NdArray::zeros({2, kGridRows, kGridCols});
    for (int i = 0; i < s.state.size(); ++i)
      s.state.data[i] = level + 0.05f * (r.uniformf() - 0.5f);
    s.action = action;
    return s;
  };

  std::vector<DiscSample> expert, gen;
  for (int i = 0; i < 8; ++i) {
    expert.push_back(toy(0.8f, i * 7 % kNumActions, 100 + i));
    gen.push_back(toy(0.2f, i * 11 % kNumActions, 200 + i));
  }

  CHECK_THROWS_AS(
      discriminator_update(disc, expert,
                           std::vector<DiscSample>(gen.begin(), gen.begin() + 3),
                           cfg, opt),
      ValidationError);

  // Identical batches on both sides: every pair scores one side right and
  // one side wrong, so pre-update accuracy is exactly one half.
  DiscStats same = discriminator_update(disc, expert, expert, cfg, opt);
  CHECK(same.accuracy == 0.5);

  Rng rng2(32);
  Discriminator fresh = Discriminator::make(2, rng2);
  OptimState opt2;
  DiscStats first = discriminator_update(fresh, expert, gen, cfg, opt2);
  // Mean-pooled logits start near zero, so the first loss sits near ln 2.
  CHECK(first.loss == doctest::Approx(std::log(2.0)).epsilon(0.08));
}

TEST_CASE("discriminator learns a separable toy problem") {
  Rng rng(33);
  Discriminator disc = Discriminator::make(2, rng);
  PPOConfig cfg;
  cfg.lr_disc = 1e-2f;
  cfg.minibatch = 48;
  OptimState opt;

  auto toy = [](float level, uint64_t seed) {
    Rng r(seed);
    DiscSample s;
    s.state = NdArray::zeros({2, kGridRows, kGridCols});
    for (int i = 0; i < s.state.size(); ++i)
      s.state.data[i] = level + 0.05f * (r.uniformf() - 0.5f);
    s.action = static_cast<int>(seed % kNumActions);
    return s;
  };

  double last_loss = 0;
  for (int round = 0; round < 30; ++round) {
    std::vector<DiscSample> expert, gen;
    for (int i = 0; i < 24; ++i) {
      expert.push_back(toy(0.8f, 1000 + round * 24 + i));
      gen.push_back(toy(0.2f, 9000 + round * 24 + i));
    }
    last_loss = discriminator_update(disc, expert, gen, cfg, opt).loss;
  }

  int correct = 0;
  for (int i = 0; i < 40; ++i) {
    DiscSample e = toy(0.8f, 777000 + i);
    DiscSample g = toy(0.2f, 888000 + i);
    if (discriminator_score(disc, e.state, e.action) > 0.5f) ++correct;
    if (discriminator_score(disc, g.state, g.action) < 0.5f) ++correct;
  }
  CHECK(correct >= 76);  // at least 95% of 80 held-out samples
  CHECK(last_loss < 0.35);
}

TEST_CASE("ppo_update with zero learning rates leaves parameters untouched") {
  TinyRig rig(40);
  Rng dummy(1);
  Discriminator disc = Discriminator::make(10, dummy);  // snapshot convenience

  NdArray state = rig.state();
  PolicyOutput po = policy_forward(rig.ac, state);
  NdArray logp = masked_log_probs(po.logits);

  std::vector<Trajectory> trajs;
  Rng r(41);
  for (int i = 0; i < 8; ++i) {
    const int a = r.uniform_int(4);
    trajs.push_back(rig.one_step(a, logp.data[a], po.value, r.uniformf()));
  }

  PPOConfig cfg;
  cfg.lr_policy = 0.f;
  cfg.lr_value = 0.f;
  cfg.epochs = 2;
  cfg.minibatch = 8;

  auto snap = snapshot_params(rig.fx, rig.ac, disc);
  OptimState op, ov;
  Rng prng(42);
  PPOStats st = ppo_update(rig.fx, rig.ac, trajs, cfg, op, ov, prng);
  CHECK(std::isfinite(st.policy_loss));
  CHECK(params_equal(snap, rig.fx, rig.ac, disc));
}

TEST_CASE("fully clipped surrogates produce exactly zero policy updates") {
  TinyRig rig(44);
  Rng dummy(1);
  Discriminator disc = Discriminator::make(10, dummy);

  NdArray state = rig.state();
  PolicyOutput po = policy_forward(rig.ac, state);
  NdArray logp = masked_log_probs(po.logits);
  const float shift = std::log(1.5f);

  // Eight one-step episodes; advantages normalize to +-1. Positive-advantage
  // steps carry ratio 1.5 (above the clip ceiling), negative ones 1/1.5
  // (below the floor), so min(raw, clipped) picks the constant branch
  // everywhere and the policy gradient vanishes identically.
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 8; ++i) {
    const int a = i % 4;
    const bool positive = (i % 2) == 0;
    const float reward = po.value + (positive ? 1.f : -1.f);
    const float old_lp = positive ? logp.data[a] - shift : logp.data[a] + shift;
    trajs.push_back(rig.one_step(a, old_lp, po.value, reward));
  }

  PPOConfig cfg;
  cfg.epochs = 2;
  cfg.minibatch = 8;
  cfg.entropy_coef = 0.f;
  cfg.value_coef = 0.f;

  auto snap = snapshot_params(rig.fx, rig.ac, disc);
  OptimState op, ov;
  Rng prng(45);
  PPOStats st = ppo_update(rig.fx, rig.ac, trajs, cfg, op, ov, prng);

  CHECK(params_equal(snap, rig.fx, rig.ac, disc));
  // Largest |ratio - 1| in the batch is the 1.5 side.
  CHECK(st.first_batch_ratio_dev == doctest::Approx(0.5).epsilon(1e-4));
  // Every positive step contributes -1.2, every negative one +0.8.
  CHECK(st.policy_loss == doctest::Approx(-0.2).epsilon(2e-3));
}

TEST_CASE("importance ratios are unity on a fresh first minibatch") {
  Rig rig(50);
  Rng root(51);
  auto trajs = collect_rollouts(rig.env, rig.ac, noise_spec, 2, root);
  PPOConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 64;  // one batch covers all twelve steps
  OptimState op, ov;
  Rng prng(52);
  PPOStats st = ppo_update(rig.fx, rig.ac, trajs, cfg, op, ov, prng);
  CHECK(st.first_batch_ratio_dev < 1e-5);
}

TEST_CASE("a bandit reward drives the policy toward the paying action") {
  TinyRig rig(60);
  PPOConfig cfg;
  cfg.lr_policy = 3e-3f;
  cfg.lr_value = 3e-3f;
  cfg.epochs = 2;
  cfg.minibatch = 32;
  cfg.entropy_coef = 0.003f;
  const int target = 3;

  OptimState op, ov;
  Rng sampler(61);
  std::vector<double> mean_reward;
  for (int update = 0; update < 30; ++update) {
    NdArray state = rig.state();
    PolicyOutput po = policy_forward(rig.ac, state);
    NdArray logp = masked_log_probs(po.logits);
    std::vector<Trajectory> trajs;
    double rsum = 0;
    for (int e = 0; e < 32; ++e) {
      ActionSample as = sample_action(po, sampler);
      const float reward = as.action == target ? 1.f : 0.f;
      rsum += reward;
      trajs.push_back(rig.one_step(as.action, as.log_prob, po.value, reward));
    }
    mean_reward.push_back(rsum / 32.0);
    Rng prng(1000 + update);
    ppo_update(rig.fx, rig.ac, trajs, cfg, op, ov, prng);
  }

  PolicyOutput fin = policy_forward(rig.ac, rig.state());
  NdArray probs = softmax(fin.logits);
  MESSAGE("final P(target) = " << probs.data[target]);
  CHECK(probs.data[target] > 0.5f);

  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += mean_reward[i];
    late += mean_reward[20 + i];
  }
  CHECK(late / 10.0 > early / 10.0 + 0.25);
}

TEST_CASE("ppo_update halts with a diagnostic on non-finite rewards") {
  TinyRig rig(70);
  NdArray state = rig.state();
  PolicyOutput po = policy_forward(rig.ac, state);
  NdArray logp = masked_log_probs(po.logits);
  std::vector<Trajectory> trajs;
  trajs.push_back(rig.one_step(0, logp.data[0], po.value,
                               std::numeric_limits<float>::quiet_NaN()));
  trajs.push_back(rig.one_step(1, logp.data[1], po.value, 0.f));
  PPOConfig cfg;
  cfg.minibatch = 2;
  OptimState op, ov;
  Rng prng(71);
  CHECK_THROWS_AS(ppo_update(rig.fx, rig.ac, trajs, cfg, op, ov, prng),
                  DivergenceError);
}

TEST_CASE("sample_expert_states regenerates canvas states from trial prefixes") {
  DatasetManifest manifest = load_manifest(fixture_path());
  DatasetManifest filtered = filter_training(manifest);
  ExpertDataset ds = make_fixture_experts(filtered);
  REQUIRE(ds.pairs.size() == 23);

  Rig rig(80);

  SUBCASE("replaying the prefix through the environment gives the same state") {
    // t01 (native 512x320): fixations (256,160),(100,80),(80,70),(300,200).
    ExpertDataset one = ds;
    one.pairs.clear();
    for (const auto& p : ds.pairs)
      if (p.trial_id == "t01" && p.step == 2) one.pairs.push_back(p);
    REQUIRE(one.pairs.size() == 1);

    Rng r(81);
    auto samples = sample_expert_states(one, 3, r, rig.env);
    REQUIRE(samples.size() == 3);
    // Next fixation (300,200) lands in cell row 6, col 9.
    for (const auto& s : samples) CHECK(s.action == 6 * kGridCols + 9);

    const SearchTrial* trial = nullptr;
    for (const auto& t : filtered.trials)
      if (t.trial_id == "t01") trial = &t;
    REQUIRE(trial != nullptr);
    ImageF32 img = one.load_image(*trial);
    EpisodeState ep = rig.env.reset(img, filtered.category_index(trial->category_id));
    rig.env.step(ep, 2 * kGridCols + 3);  // (100,80) -> cell 35
    rig.env.step(ep, 2 * kGridCols + 2);  // (80,70)  -> cell 34
    State replay = rig.env.observe(ep);
    REQUIRE(samples[0].state.shape == replay.tensor.shape);
    CHECK((samples[0].state.data.array() == replay.tensor.data.array()).all());

    // History channel holds exactly the start cell plus the two prefix cells.
    const int hist_ch = rig.env.state_channels() - 1;
    const NdArray& st = samples[0].state;
    double marks = 0;
    for (int i = 0; i < kNumActions; ++i)
      marks += st.data[hist_ch * kNumActions + i];
    CHECK(marks == 3.0);
    CHECK(st.data[hist_ch * kNumActions + kCenterAction] == 1.f);
    CHECK(st.data[hist_ch * kNumActions + 35] == 1.f);
    CHECK(st.data[hist_ch * kNumActions + 34] == 1.f);
  }

  SUBCASE("sampling is deterministic and category planes match the trial") {
    Rng r1(82), r2(82);
    auto a = sample_expert_states(ds, 12, r1, rig.env);
    auto b = sample_expert_states(ds, 12, r2, rig.env);
    REQUIRE(a.size() == 12);
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].action == b[i].action);
      CHECK((a[i].state.data.array() == b[i].state.data.array()).all());
      // Exactly one category plane is filled with ones.
      const NdArray& st = a[i].state;
      const int base = 32 * kNumActions;
      double c0 = 0, c1 = 0;
      for (int j = 0; j < kNumActions; ++j) {
        c0 += st.data[base + j];
        c1 += st.data[base + kNumActions + j];
      }
      CHECK(c0 + c1 == doctest::Approx(kNumActions).epsilon(1e-9));
      CHECK((c0 == 0.0 || c1 == 0.0));
    }
  }

  SUBCASE("empty pools and non-positive counts are rejected") {
    Rng r(83);
    ExpertDataset empty = ds;
    empty.pairs.clear();
    CHECK_THROWS_AS(sample_expert_states(empty, 4, r, rig.env), ValidationError);
    CHECK_THROWS_AS(sample_expert_states(ds, 0, r, rig.env), ValidationError);
  }
}

TEST_CASE("training loop runs, logs, persists, and halts on divergence") {
  DatasetManifest manifest = load_manifest(fixture_path());
  DatasetManifest filtered = filter_training(manifest);
  ExpertDataset ds = make_fixture_experts(filtered);

  PPOConfig cfg;
  cfg.iterations = 2;
  cfg.episodes_per_iter = 3;
  cfg.epochs = 2;
  cfg.minibatch = 18;

  auto run = [&](TrainReport& out, Rig& rig) {
    out = train(rig.fx, rig.ac, rig.disc, rig.env, ds, noise_spec, cfg, 99);
  };

  SUBCASE("two identically seeded runs agree exactly") {
    Rig r1(90), r2(90);
    TrainReport a, b;
    run(a, r1);
    run(b, r2);
    REQUIRE(a.iterations.size() == 2);
    REQUIRE(b.iterations.size() == 2);
    CHECK_FALSE(a.halted);
    CHECK(a.seed == 99);
    for (size_t i = 0; i < 2; ++i) {
      const IterationStats &x = a.iterations[i], &y = b.iterations[i];
      CHECK(x.iteration == static_cast<int>(i));
      CHECK(x.disc_loss == y.disc_loss);
      CHECK(x.disc_accuracy == y.disc_accuracy);
      CHECK(x.mean_reward == y.mean_reward);
      CHECK(x.mean_score == y.mean_score);
      CHECK(x.policy_loss == y.policy_loss);
      CHECK(x.value_loss == y.value_loss);
      CHECK(x.entropy == y.entropy);
      CHECK(x.hit_rate == y.hit_rate);
      CHECK(std::isfinite(x.disc_loss));
      CHECK(std::isfinite(x.policy_loss));
      CHECK(x.disc_accuracy >= 0.0);
      CHECK(x.disc_accuracy <= 1.0);
      CHECK(x.mean_score > 0.0);
      CHECK(x.mean_score < 1.0);
      CHECK(x.entropy > 0.0);
      // A first fresh minibatch always predates any optimizer step.
      if (i == 0) CHECK(x.first_batch_ratio_dev < 1e-5);
    }
    auto ta = named_tensors(r1.fx, r1.ac, r1.disc);
    auto tb = named_tensors(r2.fx, r2.ac, r2.disc);
    for (size_t i = 0; i < ta.size(); ++i)
      CHECK((ta[i].second->data.array() == tb[i].second->data.array()).all());

    namespace fs = std::filesystem;
    const std::string csv = (fs::temp_directory_path() / "girl_gail_report.csv").string();
    const std::string js = (fs::temp_directory_path() / "girl_gail_summary.json").string();
    write_train_report_csv(csv, a);
    write_train_summary_json(js, a, cfg);
    std::ifstream cin_(csv);
    REQUIRE(cin_.good());
    std::string line;
    int lines = 0;
    bool header = false;
    while (std::getline(cin_, line)) {
      if (lines == 0) header = line.rfind("iteration,", 0) == 0;
      ++lines;
    }
    CHECK(lines == 3);
    CHECK(header);
    std::ifstream jin(js);
    REQUIRE(jin.good());
    nlohmann::json j = nlohmann::json::parse(jin);
    CHECK(j["seed"].get<uint64_t>() == 99);
    CHECK(j["iterations_run"].get<int>() == 2);
    CHECK(j["config"]["episodes_per_iter"].get<int>() == 3);
    CHECK(j["config"]["iterations"].get<int>() == 2);
    CHECK(j.contains("final"));
    fs::remove(csv);
    fs::remove(js);
  }

  SUBCASE("zero iterations is a no-op") {
    Rig rig(91);
    auto snap = snapshot_params(rig.fx, rig.ac, rig.disc);
    PPOConfig none = cfg;
    none.iterations = 0;
    TrainReport rep = train(rig.fx, rig.ac, rig.disc, rig.env, ds, noise_spec,
                            none, 5);
    CHECK(rep.iterations.empty());
    CHECK_FALSE(rep.halted);
    CHECK(params_equal(snap, rig.fx, rig.ac, rig.disc));
  }

  SUBCASE("poisoned discriminator weights halt the loop with a reason") {
    Rig rig(92);
    // Poison the head layer: earlier layers feed ReLUs, which squash NaN.
    rig.disc.l3.weights.data.setConstant(std::numeric_limits<float>::quiet_NaN());
    TrainReport rep = train(rig.fx, rig.ac, rig.disc, rig.env, ds, noise_spec,
                            cfg, 6);
    CHECK(rep.halted);
    CHECK_FALSE(rep.halt_reason.empty());
    CHECK(rep.iterations.empty());
  }
}
