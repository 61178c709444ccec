// End-to-end checks of the girl binary: exit codes, artifact layout, and
// byte-identical reruns. The binary path arrives via GIRL_CLI. Also covers
// the flat key=value training-config parser the train command uses.

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "girl/config.hpp"
#include "girl/errors.hpp"
#include "girl/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace girl;

namespace {

const std::string& cli_path() {
  static const std::string path = [] {
    const char* p = std::getenv("GIRL_CLI");
    REQUIRE_MESSAGE(p != nullptr, "GIRL_CLI must point at the girl binary");
    return std::string(p);
  }();
  return path;
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / "girl_cli_test" / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string operator/(const std::string& rel) const { return (dir / rel).string(); }
};

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

RunResult run_cli(const Scratch& s, const std::string& args) {
  const std::string log = s / "_last_run.log";
  const std::string cmd = cli_path() + " " + args + " >" + log + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream buf;
  buf << f.rdbuf();
  r.output = buf.str();
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE_MESSAGE(f.good(), "missing file: " << path);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

json slurp_json(const std::string& path) { return json::parse(slurp(path)); }

size_t line_count(const std::string& text) {
  size_t n = 0;
  for (char c : text) n += (c == '\n');
  return n;
}

void write_gradient_pgm(const std::string& path, int w, int h) {
  ImageU8 im = ImageU8::blank(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      im.at(x, y) = static_cast<uint8_t>((x * 4 + y) % 256);
  write_pgm(path, im);
}

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  Scratch s("usage");
  CHECK(run_cli(s, "").exit_code == 1);
  CHECK(run_cli(s, "frobnicate").exit_code == 1);
  CHECK(run_cli(s, "train --bogus-flag x").exit_code == 1);
  CHECK(run_cli(s, "synth").exit_code == 1);  // missing required --out
  RunResult r = run_cli(s, "eval --manifest m --checkpoint c --out o --auc-variant nope");
  CHECK(r.exit_code == 1);
  CHECK(run_cli(s, "--help").exit_code == 0);
  CHECK(run_cli(s, "foveate --help").exit_code == 0);
}

TEST_CASE("cli: missing or invalid inputs exit 2") {
  Scratch s("badinput");
  CHECK(run_cli(s, "validate --manifest " + (s / "absent.json")).exit_code == 2);
  CHECK(run_cli(s, "report --manifest " + (s / "absent.json")).exit_code == 2);
  CHECK(run_cli(s, "foveate --image " + (s / "absent.pgm") +
                       " --fixations 1,1 --out " + (s / "f")).exit_code == 2);

  REQUIRE(run_cli(s, "synth --out " + (s / "d") + " --train 4 --test 2 --seed 9")
              .exit_code == 0);
  CHECK(run_cli(s, "train --manifest " + (s / "d/train_manifest.json") +
                       " --out " + (s / "t") + " --checkpoint " +
                       (s / "absent.girl") + " --iterations 0").exit_code == 2);
  CHECK(run_cli(s, "eval --manifest " + (s / "d/test_manifest.json") +
                       " --checkpoint " + (s / "absent.girl") + " --out " +
                       (s / "e")).exit_code == 2);

  // Malformed fixation strings are data errors, not usage errors.
  write_gradient_pgm(s / "img.pgm", 96, 64);
  CHECK(run_cli(s, "foveate --image " + (s / "img.pgm") +
                       " --fixations 10,zz --out " + (s / "f")).exit_code == 2);
  CHECK(run_cli(s, "foveate --image " + (s / "img.pgm") +
                       " --fixations 500,10 --out " + (s / "f")).exit_code == 2);
}

TEST_CASE("cli: synth writes manifests that validate") {
  Scratch s("synth");
  RunResult r = run_cli(s, "synth --out " + (s / "d") +
                               " --train 6 --test 3 --seed 5 --categories 2");
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(s / "d/train_manifest.json"));
  CHECK(fs::exists(s / "d/test_manifest.json"));

  json run = slurp_json(s / "d/run.json");
  CHECK(run["command"] == "synth");
  CHECK(run["seed"] == 5);
  CHECK(run["seeds"]["substreams"].contains("env"));
  CHECK(run["options"]["train"] == 6);

  RunResult v = run_cli(s, "validate --manifest " + (s / "d/train_manifest.json"));
  CHECK(v.exit_code == 0);
  CHECK(v.output.find("training-eligible trials: 6") != std::string::npos);
  CHECK(run_cli(s, "validate --manifest " + (s / "d/test_manifest.json")).exit_code == 0);
}

TEST_CASE("cli: foveate renders one raster per fixation prefix, fovea exact") {
  Scratch s("foveate");
  write_gradient_pgm(s / "img.pgm", 96, 64);
  RunResult r = run_cli(s, "foveate --image " + (s / "img.pgm") +
                               " --fixations \"48,32;10,10;80,50\" --out " +
                               (s / "f") + " --level-maps");
  REQUIRE(r.exit_code == 0);
  for (const char* name : {"ret_01.pgm", "ret_02.pgm", "ret_03.pgm",
                           "levels_01.pgm", "levels_02.pgm", "levels_03.pgm"})
    CHECK(fs::exists(s / ("f/" + std::string(name))));
  CHECK(!fs::exists(s / "f/ret_04.pgm"));
  CHECK(slurp_json(s / "f/run.json")["seed"].is_null());

  // Around the fixation the first raster must reproduce the source exactly.
  ImageU8 src = read_pgm(s / "img.pgm");
  ImageU8 ret = read_pgm(s / "f/ret_01.pgm");
  REQUIRE(ret.width == src.width);
  REQUIRE(ret.height == src.height);
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx)
      CHECK(ret.at(48 + dx, 32 + dy) == src.at(48 + dx, 32 + dy));

  // Far corner of the third raster is still blurred: level map nonzero there.
  ImageU8 lv = read_pgm(s / "f/levels_03.pgm");
  CHECK(lv.at(0, 63) > 0);

  RunResult r2 = run_cli(s, "foveate --image " + (s / "img.pgm") +
                                " --fixations \"48,32;10,10;80,50\" --out " +
                                (s / "f2") + " --level-maps");
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(s / "f/ret_03.pgm") == slurp(s / "f2/ret_03.pgm"));
  CHECK(slurp(s / "f/run.json") == slurp(s / "f2/run.json"));
}

TEST_CASE("cli: config file drives training and flags win over it") {
  Scratch s("config");
  REQUIRE(run_cli(s, "synth --out " + (s / "d") + " --train 4 --test 0 --seed 2")
              .exit_code == 0);
  {
    std::ofstream f(s / "good.cfg");
    f << "# tiny run\niterations = 1\nepisodes_per_iter = 4\nminibatch = 16\n";
  }
  REQUIRE(run_cli(s, "train --manifest " + (s / "d/train_manifest.json") +
                         " --out " + (s / "t1") + " --config " + (s / "good.cfg") +
                         " --quiet").exit_code == 0);
  json sum = slurp_json(s / "t1/train_summary.json");
  CHECK(sum["config"]["iterations"] == 1);
  CHECK(sum["config"]["episodes_per_iter"] == 4);
  CHECK(sum["config"]["minibatch"] == 16);
  CHECK(sum["iterations_run"] == 1);

  // A flag passed on top of the config file overrides that key only.
  REQUIRE(run_cli(s, "train --manifest " + (s / "d/train_manifest.json") +
                         " --out " + (s / "t2") + " --config " + (s / "good.cfg") +
                         " --iterations 0 --quiet").exit_code == 0);
  json sum2 = slurp_json(s / "t2/train_summary.json");
  CHECK(sum2["config"]["iterations"] == 0);
  CHECK(sum2["config"]["episodes_per_iter"] == 4);
  CHECK(sum2["iterations_run"] == 0);

  {
    std::ofstream f(s / "bad.cfg");
    f << "iterations = 1\nlearning_rate = 3e-4\n";
  }
  RunResult bad = run_cli(s, "train --manifest " + (s / "d/train_manifest.json") +
                                 " --out " + (s / "t3") + " --config " +
                                 (s / "bad.cfg"));
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("learning_rate") != std::string::npos);
}

TEST_CASE("cli: train writes the full artifact set") {
  Scratch s("train");
  REQUIRE(run_cli(s, "synth --out " + (s / "d") + " --train 6 --test 2 --seed 4")
              .exit_code == 0);
  RunResult r = run_cli(s, "train --manifest " + (s / "d/train_manifest.json") +
                               " --out " + (s / "t") +
                               " --seed 3 --iterations 2 --episodes 4");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("iter 0 ") != std::string::npos);
  CHECK(r.output.find("iter 1 ") != std::string::npos);

  std::string csv = slurp(s / "t/train_report.csv");
  CHECK(line_count(csv) == 3);  // header + two iterations
  CHECK(csv.rfind("iteration,disc_loss,disc_accuracy,mean_reward,", 0) == 0);

  json sum = slurp_json(s / "t/train_summary.json");
  CHECK(sum["iterations_run"] == 2);
  CHECK(sum["halted"] == false);
  CHECK(sum["final"].contains("hit_rate"));

  // config.txt reparses to exactly the resolved configuration.
  PPOConfig cfg = load_ppo_config(s / "t/config.txt");
  CHECK(cfg.iterations == 2);
  CHECK(cfg.episodes_per_iter == 4);

  json run = slurp_json(s / "t/run.json");
  CHECK(run["command"] == "train");
  CHECK(run["seed"] == 3);
  CHECK(run["options"]["eligible_trials"] == 6);
  // The summary names the training substream derived from the root seed.
  CHECK(sum["seed"] == run["seeds"]["substreams"]["env"]);
  CHECK(fs::exists(s / "t/checkpoint.girl"));

  // Zero iterations still produces a loadable (untrained) checkpoint.
  REQUIRE(run_cli(s, "train --manifest " + (s / "d/train_manifest.json") +
                         " --out " + (s / "t0") +
                         " --seed 3 --iterations 0 --quiet").exit_code == 0);
  CHECK(line_count(slurp(s / "t0/train_report.csv")) == 1);
  CHECK(fs::exists(s / "t0/checkpoint.girl"));
}

TEST_CASE("cli: eval writes curves, per-trial rows, maps, and summary") {
  Scratch s("eval");
  REQUIRE(run_cli(s, "synth --out " + (s / "d") + " --train 6 --test 4 --seed 8")
              .exit_code == 0);
  REQUIRE(run_cli(s, "train --manifest " + (s / "d/train_manifest.json") +
                         " --out " + (s / "t") +
                         " --seed 3 --iterations 1 --episodes 4 --quiet")
              .exit_code == 0);
  RunResult r = run_cli(s, "eval --manifest " + (s / "d/test_manifest.json") +
                               " --checkpoint " + (s / "t/checkpoint.girl") +
                               " --out " + (s / "e") +
                               " --seed 11 --negatives 500 --permutations 10 --maps 2");
  REQUIRE(r.exit_code == 0);

  std::string trials = slurp(s / "e/eval_trials.csv");
  CHECK(line_count(trials) == 5);  // header + 4 test trials
  CHECK(trials.rfind("trial_id,category,condition,hit,first_hit_saccade,", 0) == 0);

  std::string curves = slurp(s / "e/curves.csv");
  CHECK(curves.find("model_target") != std::string::npos);
  CHECK(curves.find("model_chance") != std::string::npos);
  CHECK(curves.find("expert_target") != std::string::npos);
  CHECK(curves.find(",6,") != std::string::npos);

  json sum = slurp_json(s / "e/eval_summary.json");
  CHECK(sum["trials"]["total"] == 4);
  CHECK(sum["per_category"].size() == 2);
  for (const json& c : sum["per_category"]) {
    REQUIRE(!c["metrics"].is_null());
    CHECK(c["metrics"].contains("fixated_in_6"));
    CHECK(c["metrics"].contains("auc_model_vs_expert"));
    CHECK(c["metrics"].contains("multimatch_mean_vs_expert"));
  }
  CHECK(sum["overall"]["tp_trials"] == 4);
  CHECK(sum["saccade_maps"].size() == 2);
  CHECK(fs::exists(s / "e/saccade_map_01.csv"));
  CHECK(fs::exists(s / "e/saccade_map_02.pgm"));
  CHECK(fs::exists(s / "e/fdm_checker.pgm"));
  CHECK(fs::exists(s / "e/fdm_rings.pgm"));

  // The model manifest round-trips through validate and report.
  CHECK(run_cli(s, "validate --manifest " + (s / "e/model_trials.json")).exit_code == 0);
  RunResult rep = run_cli(s, "report --manifest " + (s / "e/model_trials.json"));
  CHECK(rep.exit_code == 0);
  CHECK(rep.output.find("(all)") != std::string::npos);
}

TEST_CASE("cli: eval on an empty manifest writes empty tables and exits 0") {
  Scratch s("evalempty");
  {
    std::ofstream f(s / "empty.json");
    f << R"({"version":1,"split":"test","categories":[{"id":1,"name":"checker"}],)"
      << R"("trials":[]})";
  }
  RunResult r = run_cli(s, "eval --manifest " + (s / "empty.json") +
                               " --checkpoint " + (s / "absent.girl") +
                               " --out " + (s / "e"));
  CHECK(r.exit_code == 0);  // no trials: the checkpoint is never touched
  CHECK(r.output.find("no trials") != std::string::npos);
  CHECK(line_count(slurp(s / "e/eval_trials.csv")) == 1);
  CHECK(line_count(slurp(s / "e/curves.csv")) == 1);
  CHECK(slurp_json(s / "e/eval_summary.json")["overall"].is_null());
}

TEST_CASE("cli: report prints per-condition tables and optional CSV") {
  Scratch s("report");
  REQUIRE(run_cli(s, "synth --out " + (s / "d") + " --train 8 --test 0 --seed 6")
              .exit_code == 0);
  RunResult r = run_cli(s, "report --manifest " + (s / "d/train_manifest.json") +
                               " --out " + (s / "rep"));
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("condition") != std::string::npos);
  CHECK(r.output.find("checker") != std::string::npos);
  CHECK(r.output.find("rings") != std::string::npos);
  CHECK(r.output.find("(all)") != std::string::npos);

  std::string csv = slurp(s / "rep/report.csv");
  CHECK(csv.rfind("condition,category,trials,error_pct,", 0) == 0);
  CHECK(line_count(csv) == 4);  // header + checker + rings + (all), tp only
  CHECK(slurp_json(s / "rep/run.json")["command"] == "report");
}

TEST_CASE("cli: reruns with one seed are byte-identical") {
  Scratch s("determinism");
  REQUIRE(run_cli(s, "synth --out " + (s / "d1") + " --train 5 --test 3 --seed 21")
              .exit_code == 0);
  REQUIRE(run_cli(s, "synth --out " + (s / "d2") + " --train 5 --test 3 --seed 21")
              .exit_code == 0);
  CHECK(slurp(s / "d1/train_manifest.json") == slurp(s / "d2/train_manifest.json"));
  CHECK(slurp(s / "d1/test_manifest.json") == slurp(s / "d2/test_manifest.json"));

  const std::string train_tail = " --seed 13 --iterations 2 --episodes 4 --quiet";
  REQUIRE(run_cli(s, "train --manifest " + (s / "d1/train_manifest.json") +
                         " --out " + (s / "t1") + train_tail).exit_code == 0);
  REQUIRE(run_cli(s, "train --manifest " + (s / "d1/train_manifest.json") +
                         " --out " + (s / "t2") + train_tail + " --jobs 2")
              .exit_code == 0);
  CHECK(slurp(s / "t1/checkpoint.girl") == slurp(s / "t2/checkpoint.girl"));
  CHECK(slurp(s / "t1/train_report.csv") == slurp(s / "t2/train_report.csv"));
  // Summaries record the jobs setting, so compare the result fields.
  json sum1 = slurp_json(s / "t1/train_summary.json");
  json sum2 = slurp_json(s / "t2/train_summary.json");
  CHECK(sum1["final"] == sum2["final"]);
  CHECK(sum1["seed"] == sum2["seed"]);

  const std::string eval_tail = " --seed 17 --negatives 400 --permutations 8";
  REQUIRE(run_cli(s, "eval --manifest " + (s / "d1/test_manifest.json") +
                         " --checkpoint " + (s / "t1/checkpoint.girl") +
                         " --out " + (s / "e1") + eval_tail).exit_code == 0);
  REQUIRE(run_cli(s, "eval --manifest " + (s / "d1/test_manifest.json") +
                         " --checkpoint " + (s / "t1/checkpoint.girl") +
                         " --out " + (s / "e2") + eval_tail).exit_code == 0);
  for (const char* f : {"eval_summary.json", "eval_trials.csv", "curves.csv",
                        "model_trials.json", "fdm_checker.pgm", "run.json"})
    CHECK(slurp(s / ("e1/" + std::string(f))) == slurp(s / ("e2/" + std::string(f))));
}

// ----------------------------------------------------------- config parser

TEST_CASE("config: canonical text round-trips bit for bit") {
  PPOConfig cfg;
  cfg.clip = 0.17f;
  cfg.lr_policy = 3.3e-5f;
  cfg.gamma = 0.987654321f;
  cfg.episodes_per_iter = 7;
  cfg.ior = true;
  std::string text = ppo_config_to_text(cfg);
  PPOConfig back = parse_ppo_config(text, "roundtrip");
  CHECK(ppo_config_to_text(back) == text);
  CHECK(back.clip == cfg.clip);
  CHECK(back.lr_policy == cfg.lr_policy);
  CHECK(back.gamma == cfg.gamma);
  CHECK(back.episodes_per_iter == 7);
  CHECK(back.ior == true);
}

TEST_CASE("config: comments, blanks, repeats, and bool spellings") {
  PPOConfig cfg = parse_ppo_config(
      "# leading comment\n"
      "\n"
      "iterations = 5   # trailing comment\n"
      "iterations = 9\n"
      "ior = 1\n"
      "reward_neglog1md = false\n"
      "  clip=0.3  \n",
      "inline");
  CHECK(cfg.iterations == 9);  // later line wins
  CHECK(cfg.ior == true);
  CHECK(cfg.reward_neglog1md == false);
  CHECK(cfg.clip == 0.3f);
  // Untouched keys keep their defaults.
  CHECK(cfg.epochs == PPOConfig{}.epochs);
}

TEST_CASE("config: base values survive unless overridden") {
  PPOConfig base;
  base.iterations = 77;
  base.lr_disc = 1e-2f;
  PPOConfig cfg = parse_ppo_config("lr_disc = 5e-3\n", "inline", base);
  CHECK(cfg.iterations == 77);
  CHECK(cfg.lr_disc == 5e-3f);
}

TEST_CASE("config: malformed input is rejected with location") {
  CHECK_THROWS_AS(parse_ppo_config("bogus_key = 1\n", "f"), ValidationError);
  CHECK_THROWS_AS(parse_ppo_config("iterations\n", "f"), ValidationError);
  CHECK_THROWS_AS(parse_ppo_config("iterations =\n", "f"), ValidationError);
  CHECK_THROWS_AS(parse_ppo_config("= 3\n", "f"), ValidationError);
  CHECK_THROWS_AS(parse_ppo_config("iterations = 3x\n", "f"), ValidationError);
  CHECK_THROWS_AS(parse_ppo_config("clip = fast\n", "f"), ValidationError);
  CHECK_THROWS_AS(parse_ppo_config("ior = yes\n", "f"), ValidationError);
  try {
    parse_ppo_config("\n\nminibatch = ?\n", "conf.txt");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("conf.txt:3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_ppo_config("/nonexistent/girl.cfg"), IoError);
}
