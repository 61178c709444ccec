#include "girl/gail.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include "girl/errors.hpp"
#include "girl/grid.hpp"

namespace girl {

using nlohmann::json;

void PPOConfig::validate() const {
  if (!(clip > 0.f && clip < 1.f))
    throw ValidationError("PPOConfig: clip must be in (0, 1)");
  if (epochs < 1) throw ValidationError("PPOConfig: epochs must be >= 1");
  if (minibatch < 1) throw ValidationError("PPOConfig: minibatch must be >= 1");
  if (lr_policy < 0.f || lr_value < 0.f || lr_disc < 0.f)
    throw ValidationError("PPOConfig: learning rates must be >= 0");
  if (!(gamma >= 0.f && gamma <= 1.f))
    throw ValidationError("PPOConfig: gamma must be in [0, 1]");
  if (!(lambda >= 0.f && lambda <= 1.f))
    throw ValidationError("PPOConfig: lambda must be in [0, 1]");
  if (entropy_coef < 0.f)
    throw ValidationError("PPOConfig: entropy_coef must be >= 0");
  if (value_coef < 0.f)
    throw ValidationError("PPOConfig: value_coef must be >= 0");
  if (episodes_per_iter < 1)
    throw ValidationError("PPOConfig: episodes_per_iter must be >= 1");
  if (iterations < 0) throw ValidationError("PPOConfig: iterations must be >= 0");
  if (jobs < 1) throw ValidationError("PPOConfig: jobs must be >= 1");
}

// ------------------------------------------------------------------ rollout

std::vector<Trajectory> collect_rollouts(const SearchEnv& env,
                                         const ActorCritic& ac,
                                         const EpisodeSource& source,
                                         int episodes, const Rng& rng, int jobs,
                                         bool ior) {
  if (episodes < 0) throw ValidationError("collect_rollouts: episodes < 0");
  if (jobs < 1) throw ValidationError("collect_rollouts: jobs < 1");
  if (!source) throw ValidationError("collect_rollouts: empty episode source");

  std::vector<Trajectory> out(episodes);
  auto run_episode = [&](int i) {
    Rng scene_rng = rng.sub("scene", i);
    EpisodeSpec spec = source(scene_rng);
    Rng action_rng = rng.sub("actions", i);

    EpisodeState ep = env.reset(spec.image, spec.category, spec.target_box);
    Trajectory traj;
    traj.category = spec.category;
    traj.ref = spec.ref;
    while (!ep.done) {
      StepRecord rec;
      rec.ret = ep.ret.pixels;
      rec.cat_planes = env.category_planes(ep.category);
      rec.history = env.history_plane(ep.visited);

      State s = env.observe(ep);
      PolicyOutput po = policy_forward(ac, s.tensor);
      ActionSample as = ior ? sample_action(po, action_rng, &ep.visited)
                            : sample_action(po, action_rng);
      rec.action = as.action;
      rec.log_prob = as.log_prob;
      rec.value = po.value;

      auto sr = env.step(ep, as.action);
      rec.target_hit = sr.target_hit;
      traj.hit = traj.hit || sr.target_hit;
      traj.steps.push_back(std::move(rec));
    }
    traj.fixations = ep.fixations;
    out[i] = std::move(traj);
  };

  if (jobs == 1 || episodes <= 1) {
    for (int i = 0; i < episodes; ++i) run_episode(i);
  } else {
    // Episodes use index-keyed substreams, so the split across threads
    // cannot change the result.
    int workers = std::min(jobs, episodes);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int i = w; i < episodes; i += workers) run_episode(i);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

// ------------------------------------------------------------------- reward

double gail_reward(double score, bool neglog1md) {
  if (!std::isfinite(score))
    throw DivergenceError("gail_reward: non-finite discriminator score");
  if (!(score > 0.0 && score < 1.0))
    throw ValidationError("gail_reward: score must lie strictly inside (0, 1)");
  return neglog1md ? -std::log(1.0 - score) : std::log(score);
}

std::vector<float> normalize_advantages(const std::vector<float>& advs) {
  std::vector<float> out(advs.size(), 0.f);
  if (advs.empty()) return out;
  double mean = 0;
  for (float a : advs) mean += a;
  mean /= advs.size();
  double var = 0;
  for (float a : advs) var += (a - mean) * (a - mean);
  double sd = std::sqrt(var / advs.size());
  if (sd == 0.0) return out;  // constant batch: no preference signal
  for (size_t i = 0; i < advs.size(); ++i)
    out[i] = static_cast<float>((advs[i] - mean) / (sd + 1e-8));
  return out;
}

GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values, double gamma,
                      double lambda) {
  if (rewards.empty() || rewards.size() != values.size())
    throw ValidationError("compute_gae: rewards/values must be equal-length and non-empty");
  const int n = static_cast<int>(rewards.size());
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double adv = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    double next_value = (t == n - 1) ? 0.0 : values[t + 1];
    double delta = rewards[t] + gamma * next_value - values[t];
    adv = delta + gamma * lambda * adv;
    out.advantages[t] = adv;
    out.returns[t] = adv + values[t];
  }
  return out;
}

ScoredRollouts score_rollouts(const Discriminator& disc,
                              const FeatureExtractor& fx,
                              std::vector<Trajectory>& trajs, bool neglog1md) {
  ScoredRollouts out;
  double reward_sum = 0, score_sum = 0;
  int n = 0;
  for (auto& traj : trajs)
    for (auto& rec : traj.steps) {
      NdArray state = assemble_state(fx, rec.ret, rec.cat_planes, rec.history);
      float score = discriminator_score(disc, state, rec.action);
      rec.reward = static_cast<float>(gail_reward(score, neglog1md));
      reward_sum += rec.reward;
      score_sum += score;
      out.samples.push_back({std::move(state), rec.action});
      ++n;
    }
  if (n > 0) {
    out.mean_reward = reward_sum / n;
    out.mean_score = score_sum / n;
  }
  return out;
}

// ------------------------------------------------------------ discriminator

namespace {

void scale_grads(std::vector<std::pair<std::string, LayerParams*>> layers,
                 float factor) {
  for (auto& [name, p] : layers) {
    (void)name;
    p->grad_w.data *= factor;
    p->grad_b.data *= factor;
  }
}

}  // namespace

DiscStats discriminator_update(Discriminator& disc,
                               const std::vector<DiscSample>& expert,
                               const std::vector<DiscSample>& generated,
                               const PPOConfig& cfg, OptimState& opt) {
  if (expert.empty() || expert.size() != generated.size())
    throw ValidationError(
        "discriminator_update: expert and generated batches must be "
        "non-empty and balanced 1:1");
  opt.lr = cfg.lr_disc;
  const int pairs_per_batch = std::max(1, cfg.minibatch / 2);

  disc.zero_grads();
  double loss_sum = 0;
  int correct = 0, total = 0, in_batch = 0;

  auto flush = [&]() {
    if (in_batch == 0) return;
    scale_grads(disc.layers(), 1.f / static_cast<float>(2 * in_batch));
    opt.begin_step();
    for (auto& [name, layer] : disc.layers()) optim_step(opt, name, *layer);
    disc.zero_grads();
    in_batch = 0;
  };

  for (size_t i = 0; i < expert.size(); ++i) {
    for (int which = 0; which < 2; ++which) {
      const DiscSample& s = which == 0 ? expert[i] : generated[i];
      const float target = which == 0 ? 1.f : 0.f;
      Tape t;
      Discriminator::Bound b = disc.bind(t, true);
      Var logit = Discriminator::apply(t, b, t.leaf(s.state),
                                       t.leaf(action_plane(s.action)));
      Var loss = t.bce_with_logits(logit, target);
      t.backward(loss);
      disc.harvest(t, b);
      loss_sum += t.scalar(loss);
      correct += (t.scalar(logit) > 0.f) == (target == 1.f);
      ++total;
    }
    if (++in_batch == pairs_per_batch) flush();
  }
  flush();
  return {loss_sum / total, static_cast<double>(correct) / total};
}

// -------------------------------------------------------------------- PPO

PPOStats ppo_update(FeatureExtractor& fx, ActorCritic& ac,
                    const std::vector<Trajectory>& trajs, const PPOConfig& cfg,
                    OptimState& opt_policy, OptimState& opt_value, Rng& rng) {
  cfg.validate();
  struct Flat {
    const StepRecord* rec;
    float adv = 0;
    float ret = 0;
  };
  std::vector<Flat> flat;
  for (const auto& traj : trajs) {
    if (traj.steps.empty()) continue;
    std::vector<double> rewards, values;
    for (const auto& rec : traj.steps) {
      rewards.push_back(rec.reward);
      values.push_back(rec.value);
    }
    GaeResult gae = compute_gae(rewards, values, cfg.gamma, cfg.lambda);
    for (size_t t = 0; t < traj.steps.size(); ++t)
      flat.push_back({&traj.steps[t], static_cast<float>(gae.advantages[t]),
                      static_cast<float>(gae.returns[t])});
  }
  if (flat.empty()) throw ValidationError("ppo_update: no steps to learn from");

  std::vector<float> raw;
  raw.reserve(flat.size());
  for (const auto& f : flat) raw.push_back(f.adv);
  std::vector<float> normed = normalize_advantages(raw);
  for (size_t i = 0; i < flat.size(); ++i) flat[i].adv = normed[i];

  opt_policy.lr = cfg.lr_policy;
  opt_value.lr = cfg.lr_value;
  fx.zero_grads();
  ac.zero_grads();

  PPOStats stats;
  double ploss_sum = 0, vloss_sum = 0, ent_sum = 0;
  long samples_seen = 0;
  bool first_batch = true;

  const int n = static_cast<int>(flat.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = rng.permutation(n);
    for (int start = 0; start < n; start += cfg.minibatch) {
      const int batch_n = std::min(cfg.minibatch, n - start);
      for (int k = 0; k < batch_n; ++k) {
        const Flat& f = flat[order[start + k]];
        const StepRecord& rec = *f.rec;

        Tape t;
        FeatureExtractor::Bound fxb = fx.bind(t, true);
        ActorCritic::Bound acb = ac.bind(t, true);
        Var state = state_on_tape(t, fxb, SearchEnv::image_tensor(rec.ret),
                                  rec.cat_planes, rec.history);
        ActorCritic::Heads heads = ActorCritic::apply(t, acb, state);
        Var logits = heads.logits;
        if (cfg.ior) {
          // Re-impose the collection-time revisit mask so the recomputed
          // distribution matches the one the action was sampled from.
          NdArray mask = NdArray::zeros({static_cast<int>(rec.history.size())});
          for (int i = 0; i < mask.size(); ++i)
            if (rec.history.data[i] > 0.f) mask.data[i] = -1e30f;
          logits = t.add(logits, t.leaf(mask, false));
        }
        Var logp_all = t.log_softmax(logits);
        Var lp = t.pick(logp_all, rec.action);

        Var ratio = t.exp_(t.add_const(lp, -rec.log_prob));
        Var surr_raw = t.mul_const(ratio, f.adv);
        Var surr_clip =
            t.mul_const(t.clamp(ratio, 1.f - cfg.clip, 1.f + cfg.clip), f.adv);
        Var policy_loss = t.neg(t.min2(surr_raw, surr_clip));

        Var probs = t.exp_(logp_all);
        Var entropy = t.neg(t.sum(t.mul(probs, logp_all)));

        Var vdiff = t.add_const(heads.value, -f.ret);
        Var vloss = t.square(vdiff);

        Var total = t.add(policy_loss, t.add(t.mul_const(entropy, -cfg.entropy_coef),
                                             t.mul_const(vloss, cfg.value_coef)));
        float total_v = t.scalar(total);
        if (!std::isfinite(total_v))
          throw DivergenceError("ppo_update: non-finite loss at sample " +
                                std::to_string(samples_seen));
        t.backward(total);
        fx.harvest(t, fxb);
        ac.harvest(t, acb);

        ploss_sum += t.scalar(policy_loss);
        vloss_sum += t.scalar(vloss);
        ent_sum += t.scalar(entropy);
        ++samples_seen;
        if (first_batch) {
          double dev = std::abs(static_cast<double>(t.scalar(ratio)) - 1.0);
          stats.first_batch_ratio_dev = std::max(stats.first_batch_ratio_dev, dev);
        }
      }
      first_batch = false;

      const float inv = 1.f / static_cast<float>(batch_n);
      scale_grads(fx.layers(), inv);
      scale_grads(ac.layers(), inv);

      opt_policy.begin_step();
      for (auto& [name, layer] : fx.layers()) optim_step(opt_policy, name, *layer);
      optim_step(opt_policy, "ac.trunk", ac.trunk);
      optim_step(opt_policy, "ac.logit_head", ac.logit_head);
      opt_value.begin_step();
      optim_step(opt_value, "ac.value1", ac.value1);
      optim_step(opt_value, "ac.value2", ac.value2);

      fx.zero_grads();
      ac.zero_grads();
    }
  }

  stats.policy_loss = ploss_sum / samples_seen;
  stats.value_loss = vloss_sum / samples_seen;
  stats.entropy = ent_sum / samples_seen;
  if (!std::isfinite(stats.policy_loss) || std::abs(stats.policy_loss) > 1e3)
    throw DivergenceError("ppo_update: mean policy loss diverged (" +
                          std::to_string(stats.policy_loss) + ")");
  return stats;
}

// ------------------------------------------------------------------ experts

std::vector<DiscSample> sample_expert_states(const ExpertDataset& ds, int n,
                                             Rng& rng, const SearchEnv& env) {
  if (!ds.manifest) throw ValidationError("sample_expert_states: no manifest");
  if (ds.pairs.empty())
    throw ValidationError("sample_expert_states: no expert pairs");
  if (!ds.load_image)
    throw ValidationError("sample_expert_states: no image loader");
  if (n < 1) throw ValidationError("sample_expert_states: n must be >= 1");

  const FoveationConfig& fov = env.config().fov;

  // Pyramids are rebuilt per call (weights change between iterations make
  // cached states stale anyway) but shared between pairs of one trial.
  std::map<int, BlurPyramid> pyramids;
  auto pyramid_for = [&](int trial_index) -> const BlurPyramid& {
    auto it = pyramids.find(trial_index);
    if (it != pyramids.end()) return it->second;
    const SearchTrial& trial = ds.manifest->trials[trial_index];
    ImageF32 img = ds.load_image(trial);
    if (img.width != kCanvasW || img.height != kCanvasH)
      img = resize_bilinear(img, kCanvasW, kCanvasH);
    return pyramids.emplace(trial_index, build_pyramid(img, fov)).first->second;
  };

  std::vector<DiscSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const ExpertPair& pair =
        ds.pairs[rng.uniform_int(static_cast<int>(ds.pairs.size()))];
    const SearchTrial& trial = ds.manifest->trials[pair.trial_index];
    int cat = ds.manifest->category_index(pair.category_id);
    if (cat < 0 || cat >= env.config().num_categories)
      throw ValidationError("sample_expert_states: category outside the env");

    // Map the prefix onto the episode vocabulary: start at the canvas
    // center, later fixations at their cell centers.
    std::vector<PixelPoint> fixs;
    std::vector<bool> visited(kNumActions, false);
    fixs.reserve(pair.prefix.size());
    for (size_t j = 0; j < pair.prefix.size(); ++j) {
      if (j == 0) {
        fixs.push_back({kCanvasW / 2.f, kCanvasH / 2.f});
        visited[kCenterAction] = true;
      } else {
        int cell = discretize_fixation(pair.prefix[j].x, pair.prefix[j].y,
                                       trial.native_w, trial.native_h);
        fixs.push_back(action_center(cell));
        visited[cell] = true;
      }
    }
    RetImage ret = cumulative_foveate(pyramid_for(pair.trial_index), fixs, fov);
    NdArray state =
        assemble_state(env.extractor(), ret.pixels, env.category_planes(cat),
                       env.history_plane(visited));
    out.push_back({std::move(state), pair.action});
  }
  return out;
}

// ------------------------------------------------------------------- train

TrainReport train(FeatureExtractor& fx, ActorCritic& ac, Discriminator& disc,
                  const SearchEnv& env, const ExpertDataset& experts,
                  const EpisodeSource& source, const PPOConfig& cfg,
                  uint64_t seed, std::ostream* log) {
  cfg.validate();
  TrainReport report;
  report.seed = seed;
  Rng root(seed);

  OptimState opt_policy, opt_value, opt_disc;
  opt_policy.lr = cfg.lr_policy;
  opt_value.lr = cfg.lr_value;
  opt_disc.lr = cfg.lr_disc;

  for (int it = 0; it < cfg.iterations; ++it) {
    IterationStats is;
    is.iteration = it;
    try {
      std::vector<Trajectory> trajs =
          collect_rollouts(env, ac, source, cfg.episodes_per_iter,
                           root.sub("collect", it), cfg.jobs, cfg.ior);

      ScoredRollouts scored =
          score_rollouts(disc, fx, trajs, cfg.reward_neglog1md);
      is.mean_reward = scored.mean_reward;
      is.mean_score = scored.mean_score;

      int hits = 0;
      for (const auto& tr : trajs) hits += tr.hit ? 1 : 0;
      is.hit_rate = trajs.empty() ? 0.0
                                  : static_cast<double>(hits) / trajs.size();

      Rng expert_rng = root.sub("expert", it);
      std::vector<DiscSample> expert_batch = sample_expert_states(
          experts, static_cast<int>(scored.samples.size()), expert_rng, env);
      DiscStats ds =
          discriminator_update(disc, expert_batch, scored.samples, cfg, opt_disc);
      is.disc_loss = ds.loss;
      is.disc_accuracy = ds.accuracy;

      Rng ppo_rng = root.sub("ppo", it);
      PPOStats ps = ppo_update(fx, ac, trajs, cfg, opt_policy, opt_value, ppo_rng);
      is.policy_loss = ps.policy_loss;
      is.value_loss = ps.value_loss;
      is.entropy = ps.entropy;
      is.first_batch_ratio_dev = ps.first_batch_ratio_dev;
    } catch (const DivergenceError& e) {
      report.halted = true;
      report.halt_reason = e.what();
      if (log)
        *log << "iteration " << it << " halted: " << e.what() << std::endl;
      break;
    }
    report.iterations.push_back(is);
    if (log)
      *log << "iter " << it << " reward " << is.mean_reward << " disc_acc "
           << is.disc_accuracy << " hit " << is.hit_rate << " entropy "
           << is.entropy << std::endl;
  }
  return report;
}

void write_train_report_csv(const std::string& path, const TrainReport& report) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "iteration,disc_loss,disc_accuracy,mean_reward,mean_score,policy_loss,"
       "value_loss,entropy,first_batch_ratio_dev,hit_rate\n";
  for (const auto& is : report.iterations)
    f << is.iteration << ',' << is.disc_loss << ',' << is.disc_accuracy << ','
      << is.mean_reward << ',' << is.mean_score << ',' << is.policy_loss << ','
      << is.value_loss << ',' << is.entropy << ',' << is.first_batch_ratio_dev
      << ',' << is.hit_rate << '\n';
  if (!f.good()) throw IoError("write failed: " + path);
}

void write_train_summary_json(const std::string& path, const TrainReport& report,
                              const PPOConfig& cfg) {
  json j;
  j["seed"] = report.seed;
  j["iterations_run"] = report.iterations.size();
  j["halted"] = report.halted;
  if (report.halted) j["halt_reason"] = report.halt_reason;
  j["config"] = {{"clip", cfg.clip},
                 {"epochs", cfg.epochs},
                 {"minibatch", cfg.minibatch},
                 {"lr_policy", cfg.lr_policy},
                 {"lr_value", cfg.lr_value},
                 {"lr_disc", cfg.lr_disc},
                 {"gamma", cfg.gamma},
                 {"lambda", cfg.lambda},
                 {"entropy_coef", cfg.entropy_coef},
                 {"value_coef", cfg.value_coef},
                 {"episodes_per_iter", cfg.episodes_per_iter},
                 {"iterations", cfg.iterations},
                 {"jobs", cfg.jobs},
                 {"ior", cfg.ior},
                 {"reward_neglog1md", cfg.reward_neglog1md}};
  if (!report.iterations.empty()) {
    const auto& last = report.iterations.back();
    j["final"] = {{"mean_reward", last.mean_reward},
                  {"disc_accuracy", last.disc_accuracy},
                  {"hit_rate", last.hit_rate},
                  {"entropy", last.entropy}};
    double acc10 = 0, rew10 = 0, hit10 = 0;
    int n10 = std::min<int>(10, static_cast<int>(report.iterations.size()));
    for (int i = 0; i < n10; ++i) {
      const auto& is = report.iterations[report.iterations.size() - 1 - i];
      acc10 += is.disc_accuracy;
      rew10 += is.mean_reward;
      hit10 += is.hit_rate;
    }
    j["last10"] = {{"disc_accuracy", acc10 / n10},
                   {"mean_reward", rew10 / n10},
                   {"hit_rate", hit10 / n10}};
  }
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
  if (!f.good()) throw IoError("write failed: " + path);
}

}  // namespace girl
