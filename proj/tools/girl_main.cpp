// girl — one binary wiring the search-imitation engine into reproducible
// runs: scene synthesis, foveation rendering, adversarial training, metric
// evaluation, and dataset reporting. Every run drops its resolved settings
// and seed next to its outputs so it can be replayed bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "girl/agent.hpp"
#include "girl/config.hpp"
#include "girl/dataset.hpp"
#include "girl/errors.hpp"
#include "girl/gail.hpp"
#include "girl/grid.hpp"
#include "girl/image.hpp"
#include "girl/metrics.hpp"
#include "girl/nets.hpp"
#include "girl/retina.hpp"
#include "girl/rng.hpp"
#include "girl/search_env.hpp"
#include "girl/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace girl;

namespace {

constexpr int kFeatureChannels = 32;

// ---------------------------------------------------------------- plumbing

struct SeedPlan {
  uint64_t root = 0;
  uint64_t env = 0;
  uint64_t policy_init = 0;
  uint64_t eval = 0;
};

SeedPlan seed_plan(uint64_t root) {
  return {root, fnv1a64("env", root), fnv1a64("policy-init", root),
          fnv1a64("eval", root)};
}

json seeds_json(const SeedPlan& p) {
  return {{"root", p.root},
          {"substreams",
           {{"env", p.env}, {"policy-init", p.policy_init}, {"eval", p.eval}}}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  if (!f.good()) throw IoError("write failed: " + path);
}

// The replay record: command name, seed derivation, and all resolved options.
void write_run_json(const std::string& dir, const std::string& command,
                    const std::optional<SeedPlan>& seeds, json options) {
  json j;
  j["command"] = command;
  if (seeds) {
    j["seed"] = seeds->root;
    j["seeds"] = seeds_json(*seeds);
  } else {
    j["seed"] = nullptr;  // deterministic command, no randomness consumed
  }
  j["options"] = std::move(options);
  write_text(dir + "/run.json", j.dump(2) + "\n");
}

std::string pad2(size_t k) {
  std::ostringstream s;
  s << std::setw(2) << std::setfill('0') << k;
  return s.str();
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
  return out;
}

// ----------------------------------------------------------- trial helpers

ImageF32 resolve_trial_image(const SearchTrial& t, const std::string& base_dir) {
  if (t.image_ref.rfind("syn:", 0) == 0) return load_trial_image(t);
  fs::path p = t.image_ref;
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  SearchTrial resolved = t;
  resolved.image_ref = p.string();
  return load_trial_image(resolved);
}

ImageF32 canvas_image(ImageF32 im) {
  if (im.width == kCanvasW && im.height == kCanvasH) return im;
  return resize_bilinear(im, kCanvasW, kCanvasH);
}

Box to_canvas(const Box& b, int native_w, int native_h) {
  const double sx = static_cast<double>(kCanvasW) / native_w;
  const double sy = static_cast<double>(kCanvasH) / native_h;
  return {b.x * sx, b.y * sy, b.w * sx, b.h * sy};
}

PixelPoint to_canvas_pt(const Fixation& f, int native_w, int native_h) {
  return {static_cast<float>(f.x * kCanvasW / native_w),
          static_cast<float>(f.y * kCanvasH / native_h)};
}

std::string manifest_dir(const std::string& manifest_path) {
  return fs::path(manifest_path).parent_path().string();
}

// ----------------------------------------------------------------- foveate

struct FoveateOpts {
  std::string image, fixations, out;
  int fovea_radius = 16;
  int levels = 5;
  float deg_per_px = 54.f / 512.f;
  bool level_maps = false;
};

std::vector<PixelPoint> parse_fixation_list(const std::string& text, int w,
                                            int h) {
  std::vector<PixelPoint> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    float x = 0, y = 0;
    char comma = 0;
    std::istringstream pt(item);
    if (!(pt >> x >> comma >> y) || comma != ',')
      throw ValidationError("bad fixation '" + item + "', expected x,y");
    std::string rest;
    if (pt >> rest)
      throw ValidationError("trailing junk in fixation '" + item + "'");
    if (x < 0 || x >= w || y < 0 || y >= h)
      throw ValidationError("fixation out of bounds: " + item);
    out.push_back({x, y});
  }
  if (out.empty()) throw ValidationError("need at least one fixation");
  return out;
}

int cmd_foveate(const FoveateOpts& o) {
  ImageF32 im = to_f32(read_pgm(o.image));
  FoveationConfig cfg;
  cfg.width = im.width;
  cfg.height = im.height;
  cfg.fovea_radius_px = o.fovea_radius;
  cfg.levels = o.levels;
  cfg.deg_per_px = o.deg_per_px;
  cfg.validate();
  std::vector<PixelPoint> fixs = parse_fixation_list(o.fixations, im.width, im.height);

  ensure_dir(o.out);
  BlurPyramid pyr = build_pyramid(im, cfg);
  for (size_t k = 1; k <= fixs.size(); ++k) {
    std::vector<PixelPoint> prefix(fixs.begin(), fixs.begin() + k);
    RetImage ret = cumulative_foveate(pyr, prefix, cfg);
    write_pgm(o.out + "/ret_" + pad2(k) + ".pgm", to_u8(ret.pixels));
    if (o.level_maps)
      write_pgm(o.out + "/levels_" + pad2(k) + ".pgm", level_map_raster(ret, cfg));
  }

  json fix_json = json::array();
  for (const PixelPoint& p : fixs) fix_json.push_back({p.x, p.y});
  write_run_json(o.out, "foveate", std::nullopt,
                 {{"image", o.image},
                  {"fixations", fix_json},
                  {"fovea_radius_px", cfg.fovea_radius_px},
                  {"levels", cfg.levels},
                  {"deg_per_px", cfg.deg_per_px},
                  {"level_maps", o.level_maps}});
  std::cout << "wrote " << fixs.size() << " cumulative rasters to " << o.out
            << "\n";
  return 0;
}

// ------------------------------------------------------------------- synth

struct SynthOpts {
  std::string out;
  uint64_t seed = 1;
  int train = 100;
  int test = 20;
  int categories = 2;
  double oracle_sigma = 4.0;
  double oracle_explore = 0.3;
  int saccades = 6;
};

int cmd_synth(const SynthOpts& o) {
  OracleConfig oracle;
  oracle.noise_sigma_px = o.oracle_sigma;
  oracle.p_distractor_first = o.oracle_explore;
  oracle.max_saccades = o.saccades;
  auto [train, test] = gen_dataset(o.train, o.test, o.categories, o.seed, oracle);

  ensure_dir(o.out);
  save_manifest(o.out + "/train_manifest.json", train);
  save_manifest(o.out + "/test_manifest.json", test);
  SeedPlan seeds = seed_plan(o.seed);
  write_run_json(o.out, "synth", seeds,
                 {{"train", o.train},
                  {"test", o.test},
                  {"categories", o.categories},
                  {"oracle_sigma_px", o.oracle_sigma},
                  {"oracle_explore", o.oracle_explore},
                  {"saccades", o.saccades}});
  std::cout << "wrote " << train.trials.size() << " train + "
            << test.trials.size() << " test trials to " << o.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- validate

struct ValidateOpts {
  std::string manifest;
  double margin_deg = 0.0;
};

int cmd_validate(const ValidateOpts& o) {
  DatasetManifest m = load_manifest(o.manifest);
  int tp = 0, correct = 0;
  for (const SearchTrial& t : m.trials) {
    tp += t.target_present;
    correct += t.correct;
  }
  std::cout << "manifest:  " << o.manifest << "\n"
            << "split:     " << m.split << " (version " << m.version << ")\n"
            << "trials:    " << m.trials.size() << " (" << tp << " tp, "
            << m.trials.size() - tp << " ta, " << correct << " correct)\n"
            << "categories:";
  for (const CategoryInfo& c : m.categories)
    std::cout << " " << c.id << ":" << c.name;
  std::cout << "\n";
  for (const std::string& w : m.warnings) std::cout << "warning:   " << w << "\n";

  DatasetManifest kept = filter_training(m, o.margin_deg);
  std::vector<ExpertPair> pairs = export_expert_pairs(kept);
  std::cout << "training-eligible trials: " << kept.trials.size() << "\n"
            << "expert pairs:             " << pairs.size() << "\n";
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainOpts {
  std::string manifest, out, config, checkpoint;
  uint64_t seed = 1;
  int iterations = -1;   // -1: keep config value
  int episodes = -1;
  int jobs = -1;
  double margin_deg = 0.0;
  bool ior = false;
  bool neglog1md = false;
  bool quiet = false;
};

struct TrialSlot {
  int index = 0;
  int category = 0;
  std::optional<Box> box;
};

int cmd_train(const TrainOpts& o) {
  PPOConfig cfg;
  if (!o.config.empty()) cfg = load_ppo_config(o.config, cfg);
  if (o.iterations >= 0) cfg.iterations = o.iterations;
  if (o.episodes > 0) cfg.episodes_per_iter = o.episodes;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  if (o.ior) cfg.ior = true;
  if (o.neglog1md) cfg.reward_neglog1md = true;
  cfg.validate();

  DatasetManifest full = load_manifest(o.manifest);
  DatasetManifest kept = filter_training(full, o.margin_deg);
  if (kept.trials.empty())
    throw ValidationError("no trials eligible for training after filtering");
  const std::string mdir = manifest_dir(o.manifest);

  ExpertDataset experts;
  experts.manifest = &kept;
  experts.pairs = export_expert_pairs(kept);
  if (experts.pairs.empty())
    throw ValidationError("no expert pairs: every eligible trial is too short");
  experts.load_image = [mdir](const SearchTrial& t) {
    return resolve_trial_image(t, mdir);
  };

  EnvConfig ec;
  ec.num_categories = static_cast<int>(kept.categories.size());
  ec.validate();

  SeedPlan seeds = seed_plan(o.seed);
  Rng init_rng(seeds.policy_init);
  FeatureExtractor fx = FeatureExtractor::make(kFeatureChannels, init_rng);
  SearchEnv env(ec, &fx);
  ActorCritic ac = ActorCritic::make(env.state_channels(), init_rng);
  Discriminator disc = Discriminator::make(env.state_channels(), init_rng);
  if (!o.checkpoint.empty()) load_agent(o.checkpoint, fx, ac, disc);

  // Episode distribution: uniform over eligible trials. Images are rebuilt
  // per draw from the manifest reference — pure, so parallel rollout
  // workers can share the source without coordination.
  std::vector<TrialSlot> slots;
  slots.reserve(kept.trials.size());
  for (size_t i = 0; i < kept.trials.size(); ++i) {
    const SearchTrial& t = kept.trials[i];
    TrialSlot slot;
    slot.index = static_cast<int>(i);
    slot.category = kept.category_index(t.category_id);
    if (t.target_box && t.native_w > 0 && t.native_h > 0)
      slot.box = to_canvas(*t.target_box, t.native_w, t.native_h);
    slots.push_back(slot);
  }
  EpisodeSource source = [&](Rng& r) {
    const TrialSlot& slot = slots[r.uniform_int(static_cast<int>(slots.size()))];
    const SearchTrial& t = kept.trials[slot.index];
    EpisodeSpec spec;
    spec.image = canvas_image(resolve_trial_image(t, mdir));
    spec.category = slot.category;
    spec.target_box = slot.box;
    spec.ref = t.image_ref;
    return spec;
  };

  ensure_dir(o.out);
  TrainReport report = train(fx, ac, disc, env, experts, source, cfg, seeds.env,
                             o.quiet ? nullptr : &std::cout);

  write_train_report_csv(o.out + "/train_report.csv", report);
  write_train_summary_json(o.out + "/train_summary.json", report, cfg);
  save_agent(o.out + "/checkpoint.girl", fx, ac, disc);
  write_text(o.out + "/config.txt", ppo_config_to_text(cfg));
  write_run_json(o.out, "train", seeds,
                 {{"manifest", o.manifest},
                  {"margin_deg", o.margin_deg},
                  {"init_checkpoint", o.checkpoint},
                  {"eligible_trials", kept.trials.size()},
                  {"expert_pairs", experts.pairs.size()},
                  {"categories", kept.categories.size()}});

  if (report.halted) {
    std::cerr << "training halted: " << report.halt_reason << "\n";
    return 3;
  }
  if (!report.iterations.empty()) {
    const IterationStats& last = report.iterations.back();
    std::cout << "trained " << report.iterations.size() << " iterations; final"
              << " reward " << last.mean_reward << ", disc_acc "
              << last.disc_accuracy << ", hit_rate " << last.hit_rate << "\n";
  }
  std::cout << "artifacts in " << o.out << "\n";
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
  std::string manifest, checkpoint, out;
  uint64_t seed = 1;
  double fdm_sigma = 1.0;
  int negatives = 10000;
  std::string auc_variant = "uniform";
  int permutations = 100;
  int maps = 4;
};

struct CategoryEval {
  int id = 0;
  std::string name;
  std::vector<SearchTrial> model_tp;
  std::vector<SearchTrial> expert_tp;  // native coordinates
};

int first_hit_saccade(const SearchTrial& t) {
  if (!t.target_box) return 0;
  const int last = std::min<int>(6, static_cast<int>(t.fixations.size()) - 1);
  for (int k = 1; k <= last; ++k)
    if (t.target_box->contains(t.fixations[k].x, t.fixations[k].y)) return k;
  return 0;
}

void append_curve_rows(std::ostream& f, const std::string& category,
                       const std::string& which, const GuidanceCurve& c) {
  for (int k = 0; k < 6; ++k)
    f << category << ',' << which << ',' << c.trials << ',' << k + 1 << ','
      << c.cumulative[k] << '\n';
}

void write_fdm_raster(const std::string& path, const FixationDensityMap& m) {
  ImageF32 im = ImageF32::blank(m.raster.width, m.raster.height);
  double peak = 0;
  for (int i = 0; i < m.grid.size(); ++i) peak = std::max(peak, m.grid.data[i]);
  if (peak <= 0) peak = 1;
  for (int y = 0; y < m.raster.height; ++y)
    for (int x = 0; x < m.raster.width; ++x)
      im.at(x, y) =
          static_cast<float>(m.grid.data[y * m.raster.width + x] / peak);
  write_pgm(path, to_u8(im));
}

int cmd_eval(const EvalOpts& o) {
  DatasetManifest src = load_manifest(o.manifest);
  const std::string mdir = manifest_dir(o.manifest);
  const AucVariant variant = o.auc_variant == "thresholds"
                                 ? AucVariant::kPixelThresholds
                                 : AucVariant::kUniformNegatives;
  SeedPlan seeds = seed_plan(o.seed);
  ensure_dir(o.out);

  const std::string trials_csv_header =
      "trial_id,category,condition,hit,first_hit_saccade,mm_shape,"
      "mm_direction,mm_length,mm_position,mm_mean\n";
  const std::string curves_csv_header = "category,curve,trials,k,value\n";

  json options = {{"manifest", o.manifest},
                  {"checkpoint", o.checkpoint},
                  {"fdm_sigma_deg", o.fdm_sigma},
                  {"auc_negatives", o.negatives},
                  {"auc_variant", o.auc_variant},
                  {"permutations", o.permutations},
                  {"saccade_maps", o.maps}};

  if (src.trials.empty()) {
    std::cerr << "warning: manifest has no trials; writing empty tables\n";
    write_text(o.out + "/eval_trials.csv", trials_csv_header);
    write_text(o.out + "/curves.csv", curves_csv_header);
    json empty;
    empty["trials"] = {{"total", 0}, {"tp", 0}, {"ta", 0}};
    empty["overall"] = nullptr;
    empty["per_category"] = json::array();
    write_text(o.out + "/eval_summary.json", empty.dump(2) + "\n");
    DatasetManifest model = src;
    model.split = src.split;
    save_manifest(o.out + "/model_trials.json", model);
    write_run_json(o.out, "eval", seeds, options);
    return 0;
  }

  // Rebuild the agent at this manifest's category count and restore weights.
  EnvConfig ec;
  ec.num_categories = static_cast<int>(src.categories.size());
  ec.validate();
  Rng dummy(0);
  FeatureExtractor fx = FeatureExtractor::make(kFeatureChannels, dummy);
  SearchEnv env(ec, &fx);
  ActorCritic ac = ActorCritic::make(env.state_channels(), dummy);
  Discriminator disc = Discriminator::make(env.state_channels(), dummy);
  load_agent(o.checkpoint, fx, ac, disc);

  // One sampled scanpath per trial slot, each from its own substream.
  Rng eval_root(seeds.eval);
  DatasetManifest model;
  model.split = src.split;
  model.categories = src.categories;
  for (size_t i = 0; i < src.trials.size(); ++i) {
    const SearchTrial& t = src.trials[i];
    if (t.native_w <= 0 || t.native_h <= 0)
      throw ValidationError("trial " + t.trial_id + " lacks native extents");
    const int cat = src.category_index(t.category_id);
    std::optional<Box> box;
    if (t.target_box) box = to_canvas(*t.target_box, t.native_w, t.native_h);

    Rng trial_rng = eval_root.sub("trial", static_cast<uint64_t>(i));
    EpisodeState ep =
        env.reset(canvas_image(resolve_trial_image(t, mdir)), cat, box);
    while (!ep.done) {
      State s = env.observe(ep);
      PolicyOutput po = policy_forward(ac, s.tensor);
      ActionSample as = sample_action(po, trial_rng);
      env.step(ep, as.action);
    }

    SearchTrial mt;
    mt.trial_id = t.trial_id;
    mt.subject_id = "model";
    mt.image_ref = t.image_ref;
    mt.native_w = kCanvasW;
    mt.native_h = kCanvasH;
    mt.category_id = t.category_id;
    mt.target_present = t.target_present;
    mt.correct = true;
    mt.target_box = box;
    if (t.sibling_box)
      mt.sibling_box = to_canvas(*t.sibling_box, t.native_w, t.native_h);
    mt.deg_per_px = 54.0 / 512.0;
    for (const PixelPoint& p : ep.fixations) mt.fixations.push_back({p.x, p.y, 200.0});
    model.trials.push_back(std::move(mt));
  }
  save_manifest(o.out + "/model_trials.json", model);

  // Group the comparison sets per category.
  std::vector<CategoryEval> cats;
  for (const CategoryInfo& c : src.categories) cats.push_back({c.id, c.name, {}, {}});
  auto cat_slot = [&](int id) -> CategoryEval& {
    for (CategoryEval& c : cats)
      if (c.id == id) return c;
    throw LogicError("category id vanished");
  };
  for (const SearchTrial& mt : model.trials)
    if (mt.target_present && mt.target_box) cat_slot(mt.category_id).model_tp.push_back(mt);
  for (const SearchTrial& t : src.trials)
    if (t.target_present && t.correct && t.target_box && t.native_w > 0)
      cat_slot(t.category_id).expert_tp.push_back(t);

  std::ofstream trials_csv(o.out + "/eval_trials.csv");
  if (!trials_csv) throw IoError("cannot open eval_trials.csv for writing");
  trials_csv << trials_csv_header << std::setprecision(9);
  std::ofstream curves_csv(o.out + "/curves.csv");
  if (!curves_csv) throw IoError("cannot open curves.csv for writing");
  curves_csv << curves_csv_header << std::setprecision(9);

  // Per-trial rows, with scanpath similarity against the matching source trial.
  std::map<std::string, const SearchTrial*> src_by_id;
  for (const SearchTrial& t : src.trials) src_by_id[t.trial_id] = &t;
  const AnalysisRaster raster;
  for (const SearchTrial& mt : model.trials) {
    const SearchTrial& st = *src_by_id.at(mt.trial_id);
    std::optional<MultiMatch> mm;
    if (st.fixations.size() >= 2 && mt.fixations.size() >= 2 &&
        st.native_w > 0 && st.native_h > 0) {
      Scanpath expert_path, model_path;
      const size_t n_exp = std::min<size_t>(st.fixations.size(), 7);
      for (size_t k = 0; k < n_exp; ++k)
        expert_path.push_back(to_canvas_pt(st.fixations[k], st.native_w, st.native_h));
      for (const Fixation& f : mt.fixations)
        model_path.push_back({static_cast<float>(f.x), static_cast<float>(f.y)});
      mm = multimatch(model_path, expert_path, raster);
    }
    trials_csv << mt.trial_id << ',' << mt.category_id << ','
               << (mt.target_present ? "tp" : "ta") << ','
               << (first_hit_saccade(mt) > 0 ? 1 : 0) << ','
               << first_hit_saccade(mt) << ',';
    if (mm)
      trials_csv << mm->shape << ',' << mm->direction << ',' << mm->length
                 << ',' << mm->position << ',' << mm->mean << '\n';
    else
      trials_csv << ",,,,\n";
  }
  trials_csv.close();
  if (!trials_csv.good()) throw IoError("write failed: eval_trials.csv");

  // Category-level metrics.
  json per_category = json::array();
  std::vector<SearchTrial> all_model_tp;
  int tp_count = 0;
  for (const SearchTrial& t : src.trials) tp_count += t.target_present;
  for (CategoryEval& c : cats) {
    json jc;
    jc["id"] = c.id;
    jc["name"] = c.name;
    jc["model_tp_trials"] = c.model_tp.size();
    jc["expert_tp_trials"] = c.expert_tp.size();
    if (c.model_tp.empty()) {
      jc["metrics"] = nullptr;
      per_category.push_back(std::move(jc));
      continue;
    }
    all_model_tp.insert(all_model_tp.end(), c.model_tp.begin(), c.model_tp.end());

    GuidanceCurve target = guidance_curve(c.model_tp);
    Rng chance_rng = eval_root.sub("chance", static_cast<uint64_t>(c.id));
    GuidanceCurve chance =
        shuffled_chance_curve(c.model_tp, chance_rng, o.permutations);
    Rng stats_rng = eval_root.sub("stats", static_cast<uint64_t>(c.id));
    SearchStats stats = search_stats(c.model_tp, stats_rng, o.permutations);
    append_curve_rows(curves_csv, c.name, "model_target", target);
    append_curve_rows(curves_csv, c.name, "model_chance", chance);

    jc["metrics"]["fixated_in_6"] = stats.fixated_in_6;
    jc["metrics"]["avg_saccades_to_target"] = stats.avg_saccades_to_target;
    jc["metrics"]["shuffled_chance"] = stats.shuffled_chance;
    jc["metrics"]["target_slope"] = fit_slope(target);
    jc["metrics"]["chance_slope"] = fit_slope(chance);

    bool all_siblings = true;
    std::vector<std::optional<Box>> others;
    for (const SearchTrial& mt : c.model_tp) {
      others.push_back(mt.sibling_box);
      all_siblings = all_siblings && mt.sibling_box.has_value();
    }
    if (all_siblings) {
      GuidanceCurve baseline = object_baseline_curve(c.model_tp, others);
      append_curve_rows(curves_csv, c.name, "model_other_object", baseline);
      jc["metrics"]["baseline_slope"] = fit_slope(baseline);
      jc["metrics"]["other_object_fixated_in_6"] = baseline.cumulative[5];
    } else {
      jc["metrics"]["baseline_slope"] = nullptr;
      jc["metrics"]["other_object_fixated_in_6"] = nullptr;
    }

    // Model fixation-density map of search fixations (start excluded),
    // scored against the source trials' fixations on the canvas raster.
    Scanpath model_fixs;
    for (const SearchTrial& mt : c.model_tp)
      for (size_t k = 1; k < mt.fixations.size(); ++k)
        model_fixs.push_back({static_cast<float>(mt.fixations[k].x),
                              static_cast<float>(mt.fixations[k].y)});
    FixationDensityMap model_fdm = fdm(model_fixs, o.fdm_sigma, raster);
    write_fdm_raster(o.out + "/fdm_" + sanitize(c.name) + ".pgm", model_fdm);

    if (!c.expert_tp.empty()) {
      Scanpath expert_fixs;
      std::map<std::string, Scanpath> by_subject;
      for (const SearchTrial& t : c.expert_tp)
        for (size_t k = 1; k < t.fixations.size(); ++k) {
          PixelPoint p = to_canvas_pt(t.fixations[k], t.native_w, t.native_h);
          expert_fixs.push_back(p);
          by_subject[t.subject_id].push_back(p);
        }
      if (!expert_fixs.empty()) {
        Rng auc_rng = eval_root.sub("auc", static_cast<uint64_t>(c.id));
        jc["metrics"]["auc_model_vs_expert"] =
            auc(model_fdm, expert_fixs, auc_rng, o.negatives, variant);
      } else {
        jc["metrics"]["auc_model_vs_expert"] = nullptr;
      }
      if (by_subject.size() >= 2) {
        std::vector<Scanpath> per_subject;
        for (const auto& kv : by_subject) per_subject.push_back(kv.second);
        Rng ceil_rng = eval_root.sub("ceiling", static_cast<uint64_t>(c.id));
        jc["metrics"]["subject_model_auc"] = subject_model_auc(
            per_subject, o.fdm_sigma, raster, ceil_rng, o.negatives);
      } else {
        jc["metrics"]["subject_model_auc"] = nullptr;
      }
      GuidanceCurve expert_curve = guidance_curve(c.expert_tp);
      append_curve_rows(curves_csv, c.name, "expert_target", expert_curve);
      jc["metrics"]["expert_fixated_in_6"] = expert_curve.cumulative[5];
      jc["metrics"]["expert_target_slope"] = fit_slope(expert_curve);
    } else {
      jc["metrics"]["auc_model_vs_expert"] = nullptr;
      jc["metrics"]["subject_model_auc"] = nullptr;
    }

    // Mean scanpath similarity over paired trials of this category.
    double mm_sum = 0;
    int mm_n = 0;
    for (const SearchTrial& mt : c.model_tp) {
      const SearchTrial& st = *src_by_id.at(mt.trial_id);
      if (st.fixations.size() < 2 || mt.fixations.size() < 2) continue;
      Scanpath ep, mp;
      const size_t n_exp = std::min<size_t>(st.fixations.size(), 7);
      for (size_t k = 0; k < n_exp; ++k)
        ep.push_back(to_canvas_pt(st.fixations[k], st.native_w, st.native_h));
      for (const Fixation& f : mt.fixations)
        mp.push_back({static_cast<float>(f.x), static_cast<float>(f.y)});
      mm_sum += multimatch(mp, ep, raster).mean;
      ++mm_n;
    }
    if (mm_n > 0)
      jc["metrics"]["multimatch_mean_vs_expert"] = mm_sum / mm_n;
    else
      jc["metrics"]["multimatch_mean_vs_expert"] = nullptr;

    per_category.push_back(std::move(jc));
  }

  // Pooled over categories.
  json overall;
  if (!all_model_tp.empty()) {
    GuidanceCurve target = guidance_curve(all_model_tp);
    Rng chance_rng = eval_root.sub("chance-all");
    GuidanceCurve chance =
        shuffled_chance_curve(all_model_tp, chance_rng, o.permutations);
    Rng stats_rng = eval_root.sub("stats-all");
    SearchStats stats = search_stats(all_model_tp, stats_rng, o.permutations);
    append_curve_rows(curves_csv, "all", "model_target", target);
    append_curve_rows(curves_csv, "all", "model_chance", chance);
    overall = {{"fixated_in_6", stats.fixated_in_6},
               {"avg_saccades_to_target", stats.avg_saccades_to_target},
               {"shuffled_chance", stats.shuffled_chance},
               {"target_slope", fit_slope(target)},
               {"chance_slope", fit_slope(chance)},
               {"tp_trials", all_model_tp.size()}};
  } else {
    overall = nullptr;
  }
  curves_csv.close();
  if (!curves_csv.good()) throw IoError("write failed: curves.csv");

  // Saccade-priority maps from the initial state of the first few images.
  json maps_json = json::array();
  std::set<std::string> seen;
  for (size_t i = 0; i < src.trials.size() && static_cast<int>(seen.size()) < o.maps; ++i) {
    const SearchTrial& t = src.trials[i];
    if (!seen.insert(t.image_ref).second) continue;
    const int cat = src.category_index(t.category_id);
    EpisodeState ep = env.reset(canvas_image(resolve_trial_image(t, mdir)), cat,
                                std::nullopt);
    State s = env.observe(ep);
    PolicyOutput po = policy_forward(ac, s.tensor);
    NdArray map = saccade_map(po);
    const std::string stem = "saccade_map_" + pad2(seen.size());
    write_saccade_map_csv(o.out + "/" + stem + ".csv", map);
    write_pgm(o.out + "/" + stem + ".pgm", saccade_map_raster(map));
    maps_json.push_back({{"file", stem + ".csv"},
                         {"image_ref", t.image_ref},
                         {"category_id", t.category_id}});
  }

  json summary;
  summary["raster"] = {{"width", raster.width},
                       {"height", raster.height},
                       {"deg_per_px", raster.deg_per_px}};
  summary["fdm_sigma_deg"] = o.fdm_sigma;
  summary["auc"] = {{"variant", o.auc_variant}, {"negatives", o.negatives}};
  summary["permutations"] = o.permutations;
  summary["trials"] = {{"total", src.trials.size()},
                       {"tp", tp_count},
                       {"ta", src.trials.size() - tp_count}};
  summary["overall"] = overall;
  summary["per_category"] = per_category;
  summary["saccade_maps"] = maps_json;
  write_text(o.out + "/eval_summary.json", summary.dump(2) + "\n");
  write_run_json(o.out, "eval", seeds, options);

  if (!overall.is_null())
    std::cout << "fixated-in-6 " << overall["fixated_in_6"] << " (chance "
              << overall["shuffled_chance"] << ") over "
              << all_model_tp.size() << " tp trials\n";
  std::cout << "evaluation artifacts in " << o.out << "\n";
  return 0;
}

// ------------------------------------------------------------------ report

struct ReportOpts {
  std::string manifest, out;
};

struct ReportRow {
  std::string condition, category;
  int trials = 0;
  double error_pct = 0;
  double fix_mean = 0;
  double fix_sd = 0;
};

ReportRow summarize(const std::string& condition, const std::string& category,
                    const std::vector<const SearchTrial*>& group) {
  ReportRow row;
  row.condition = condition;
  row.category = category;
  row.trials = static_cast<int>(group.size());
  if (group.empty()) return row;
  int errors = 0;
  double sum = 0;
  for (const SearchTrial* t : group) {
    errors += t->correct ? 0 : 1;
    sum += std::max<int>(0, static_cast<int>(t->fixations.size()) - 1);
  }
  row.error_pct = 100.0 * errors / group.size();
  row.fix_mean = sum / group.size();
  double ss = 0;
  for (const SearchTrial* t : group) {
    const double n = std::max<int>(0, static_cast<int>(t->fixations.size()) - 1);
    ss += (n - row.fix_mean) * (n - row.fix_mean);
  }
  row.fix_sd = group.size() > 1 ? std::sqrt(ss / (group.size() - 1)) : 0.0;
  return row;
}

int cmd_report(const ReportOpts& o) {
  DatasetManifest m = load_manifest(o.manifest);

  std::vector<ReportRow> rows;
  for (const char* cond : {"tp", "ta"}) {
    const bool want_tp = std::string(cond) == "tp";
    std::vector<const SearchTrial*> cond_all;
    for (const CategoryInfo& c : m.categories) {
      std::vector<const SearchTrial*> group;
      for (const SearchTrial& t : m.trials)
        if (t.target_present == want_tp && t.category_id == c.id)
          group.push_back(&t);
      if (!group.empty()) rows.push_back(summarize(cond, c.name, group));
      cond_all.insert(cond_all.end(), group.begin(), group.end());
    }
    if (!cond_all.empty()) rows.push_back(summarize(cond, "(all)", cond_all));
  }

  std::ostringstream table;
  table << std::left << std::setw(10) << "condition" << std::setw(14)
        << "category" << std::right << std::setw(8) << "trials" << std::setw(10)
        << "error%" << std::setw(12) << "fix mean" << std::setw(10) << "fix sd"
        << "\n";
  table << std::string(64, '-') << "\n";
  table << std::fixed << std::setprecision(2);
  for (const ReportRow& r : rows)
    table << std::left << std::setw(10) << r.condition << std::setw(14)
          << r.category << std::right << std::setw(8) << r.trials
          << std::setw(10) << r.error_pct << std::setw(12) << r.fix_mean
          << std::setw(10) << r.fix_sd << "\n";
  if (rows.empty()) table << "(no trials)\n";
  std::cout << table.str();

  if (!o.out.empty()) {
    ensure_dir(o.out);
    std::ostringstream csv;
    csv << "condition,category,trials,error_pct,fixations_mean,fixations_sd\n"
        << std::setprecision(9);
    for (const ReportRow& r : rows)
      csv << r.condition << ',' << r.category << ',' << r.trials << ','
          << r.error_pct << ',' << r.fix_mean << ',' << r.fix_sd << '\n';
    write_text(o.out + "/report.csv", csv.str());
    write_text(o.out + "/report.txt", table.str());
    write_run_json(o.out, "report", std::nullopt, {{"manifest", o.manifest}});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"goal-directed visual search: imitation learning engine"};
  app.require_subcommand(1);

  FoveateOpts fov;
  CLI::App* c_fov = app.add_subcommand(
      "foveate", "render cumulative retina-transformed rasters");
  c_fov->add_option("--image", fov.image, "source PGM image")->required();
  c_fov->add_option("--fixations", fov.fixations,
                    "fixation list 'x,y;x,y;...' in image pixels")
      ->required();
  c_fov->add_option("--out", fov.out, "output directory")->required();
  c_fov->add_option("--fovea-radius", fov.fovea_radius, "full-acuity radius, px");
  c_fov->add_option("--levels", fov.levels, "pyramid levels");
  c_fov->add_option("--deg-per-px", fov.deg_per_px, "degrees per pixel");
  c_fov->add_flag("--level-maps", fov.level_maps, "also write blur-level maps");

  SynthOpts syn;
  CLI::App* c_syn = app.add_subcommand(
      "synth", "generate synthetic scenes with oracle searcher trials");
  c_syn->add_option("--out", syn.out, "output directory")->required();
  c_syn->add_option("--seed", syn.seed, "root seed");
  c_syn->add_option("--train", syn.train, "training trials");
  c_syn->add_option("--test", syn.test, "held-out trials");
  c_syn->add_option("--categories", syn.categories, "number of categories");
  c_syn->add_option("--oracle-sigma", syn.oracle_sigma,
                    "oracle fixation jitter, px");
  c_syn->add_option("--oracle-explore", syn.oracle_explore,
                    "chance the oracle's first saccade explores a distractor");
  c_syn->add_option("--saccades", syn.saccades, "saccades per trial");

  ValidateOpts val;
  CLI::App* c_val =
      app.add_subcommand("validate", "check a dataset manifest and summarize");
  c_val->add_option("--manifest", val.manifest, "manifest JSON")->required();
  c_val->add_option("--margin-deg", val.margin_deg,
                    "target margin (degrees) for the fixated filter");

  TrainOpts trn;
  CLI::App* c_trn =
      app.add_subcommand("train", "adversarial imitation training");
  c_trn->add_option("--manifest", trn.manifest, "training manifest")->required();
  c_trn->add_option("--out", trn.out, "output directory")->required();
  c_trn->add_option("--config", trn.config, "flat key=value training config");
  c_trn->add_option("--seed", trn.seed, "root seed");
  c_trn->add_option("--iterations", trn.iterations, "override iterations");
  c_trn->add_option("--episodes", trn.episodes, "override episodes per iteration");
  c_trn->add_option("--jobs", trn.jobs, "override rollout worker threads");
  c_trn->add_option("--checkpoint", trn.checkpoint, "warm-start checkpoint");
  c_trn->add_option("--margin-deg", trn.margin_deg,
                    "target margin (degrees) for the fixated filter");
  c_trn->add_flag("--ior", trn.ior, "mask revisits during rollouts");
  c_trn->add_flag("--neglog1md", trn.neglog1md, "use -ln(1-D) reward");
  c_trn->add_flag("--quiet", trn.quiet, "suppress per-iteration log lines");

  EvalOpts evl;
  CLI::App* c_evl = app.add_subcommand(
      "eval", "evaluate a checkpoint: curves, AUC, MultiMatch, saccade maps");
  c_evl->add_option("--manifest", evl.manifest, "test manifest")->required();
  c_evl->add_option("--checkpoint", evl.checkpoint, "agent checkpoint")
      ->required();
  c_evl->add_option("--out", evl.out, "output directory")->required();
  c_evl->add_option("--seed", evl.seed, "root seed");
  c_evl->add_option("--fdm-sigma", evl.fdm_sigma, "FDM smoothing, degrees");
  c_evl->add_option("--negatives", evl.negatives, "AUC negative samples");
  c_evl->add_option("--auc-variant", evl.auc_variant, "AUC negative scheme")
      ->check(CLI::IsMember({"uniform", "thresholds"}));
  c_evl->add_option("--permutations", evl.permutations,
                    "shuffled-chance permutations");
  c_evl->add_option("--maps", evl.maps, "saccade maps to export");

  ReportOpts rep;
  CLI::App* c_rep = app.add_subcommand(
      "report", "summary table: error % and fixation counts by category × condition");
  c_rep->add_option("--manifest", rep.manifest, "manifest JSON")->required();
  c_rep->add_option("--out", rep.out, "also write CSV/text report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;  // usage error
  }

  try {
    if (c_fov->parsed()) return cmd_foveate(fov);
    if (c_syn->parsed()) return cmd_synth(syn);
    if (c_val->parsed()) return cmd_validate(val);
    if (c_trn->parsed()) return cmd_train(trn);
    if (c_evl->parsed()) return cmd_eval(evl);
    if (c_rep->parsed()) return cmd_report(rep);
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
  return 1;
}
