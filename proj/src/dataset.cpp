#include "girl/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace girl {

using nlohmann::json;

int DatasetManifest::category_index(int category_id) const {
  for (size_t i = 0; i < categories.size(); ++i)
    if (categories[i].id == category_id) return static_cast<int>(i);
  throw ValidationError("unknown category id " + std::to_string(category_id));
}

namespace {

Box parse_box(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError(what + " must be [x, y, w, h]");
  Box b;
  b.x = j[0].get<double>();
  b.y = j[1].get<double>();
  b.w = j[2].get<double>();
  b.h = j[3].get<double>();
  return b;
}

}  // namespace

DatasetManifest parse_manifest_json(const std::string& text,
                                    const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + origin + ": " + e.what());
  }
  std::vector<std::string> errors;
  auto fail = [&errors](const std::string& msg) { errors.push_back(msg); };

  DatasetManifest m;
  if (!root.is_object()) throw ValidationError(origin + ": not a JSON object");
  m.version = root.value("version", 0);
  if (m.version != 1)
    throw ValidationError(origin + ": unsupported manifest version " +
                          std::to_string(m.version));
  m.split = root.value("split", "");
  if (m.split != "train" && m.split != "test")
    fail("split must be \"train\" or \"test\"");

  std::set<int> category_ids;
  for (const json& jc : root.value("categories", json::array())) {
    CategoryInfo c;
    c.id = jc.value("id", -1);
    c.name = jc.value("name", "");
    if (c.id < 0 || c.name.empty()) fail("category entries need id and name");
    if (!category_ids.insert(c.id).second)
      fail("duplicate category id " + std::to_string(c.id));
    m.categories.push_back(std::move(c));
  }

  std::set<std::string> trial_ids;
  for (const json& jt : root.value("trials", json::array())) {
    SearchTrial t;
    t.trial_id = jt.value("trial_id", "");
    t.subject_id = jt.value("subject_id", "");
    const std::string tag = t.trial_id.empty() ? "<missing id>" : t.trial_id;
    if (t.trial_id.empty()) fail("trial without trial_id");
    if (!trial_ids.insert(t.trial_id).second)
      fail("duplicate trial id " + tag);
    if (jt.contains("image") && jt["image"].is_object()) {
      t.image_ref = jt["image"].value("ref", "");
      t.native_w = jt["image"].value("width", 0);
      t.native_h = jt["image"].value("height", 0);
    }
    if (t.image_ref.empty() || t.native_w <= 0 || t.native_h <= 0)
      fail("trial " + tag + ": image needs ref, width, height");
    t.category_id = jt.value("category_id", -1);
    if (!category_ids.count(t.category_id))
      fail("trial " + tag + ": unknown category_id " +
           std::to_string(t.category_id));
    const std::string cond = jt.value("condition", "");
    if (cond != "tp" && cond != "ta")
      fail("trial " + tag + ": condition must be \"tp\" or \"ta\"");
    t.target_present = cond == "tp";
    if (!jt.contains("correct") || !jt["correct"].is_boolean())
      fail("trial " + tag + ": correct flag missing");
    else
      t.correct = jt["correct"].get<bool>();
    try {
      if (jt.contains("target_box"))
        t.target_box = parse_box(jt["target_box"], "trial " + tag + " target_box");
      if (jt.contains("sibling_box"))
        t.sibling_box =
            parse_box(jt["sibling_box"], "trial " + tag + " sibling_box");
    } catch (const ValidationError& e) {
      fail(e.what());
    }
    if (jt.contains("deg_per_px")) t.deg_per_px = jt["deg_per_px"].get<double>();
    if (t.target_present && !t.target_box)
      fail("trial " + tag + ": target-present trial without target_box");
    if (!t.target_present && t.target_box)
      fail("trial " + tag + ": target-absent trial carries a target_box");
    for (const json& jf : jt.value("fixations", json::array())) {
      if (!jf.is_array() || jf.size() != 3) {
        fail("trial " + tag + ": fixations must be [x, y, duration_ms]");
        break;
      }
      Fixation f{jf[0].get<double>(), jf[1].get<double>(),
                 jf[2].get<double>()};
      if (f.x < 0 || f.x >= t.native_w || f.y < 0 || f.y >= t.native_h)
        fail("trial " + tag + ": fixation out of image bounds");
      t.fixations.push_back(f);
    }
    // Soft criteria: warn, do not reject.
    if (t.target_present && t.target_box &&
        t.target_box->area() >=
            0.1 * static_cast<double>(t.native_w) * t.native_h)
      m.warnings.push_back("trial " + tag +
                           ": target area is not under 10% of the image");
    m.trials.push_back(std::move(t));
  }

  if (!errors.empty()) {
    std::ostringstream os;
    os << "manifest " << origin << ": " << errors.size() << " violation(s):";
    for (const std::string& e : errors) os << "\n  - " << e;
    throw ValidationError(os.str());
  }
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest_json(buf.str(), path);
}

DatasetManifest filter_training(const DatasetManifest& manifest,
                                double target_margin_deg,
                                double canvas_deg_per_px) {
  DatasetManifest out;
  out.version = manifest.version;
  out.split = manifest.split;
  out.categories = manifest.categories;
  for (const SearchTrial& t : manifest.trials) {
    if (!t.correct) continue;
    if (t.target_present) {
      // Margin is given in degrees; convert to native pixels through the
      // trial's own scale when known, else through the canonical canvas.
      double deg_per_native_px =
          t.deg_per_px ? *t.deg_per_px
                       : canvas_deg_per_px * kCanvasW / t.native_w;
      double margin_px =
          target_margin_deg > 0 ? target_margin_deg / deg_per_native_px : 0.0;
      if (!t.target_fixated(margin_px)) continue;
    }
    out.trials.push_back(t);
  }
  return out;
}

std::vector<ExpertPair> export_expert_pairs(const DatasetManifest& manifest) {
  std::vector<ExpertPair> pairs;
  for (size_t ti = 0; ti < manifest.trials.size(); ++ti) {
    const SearchTrial& t = manifest.trials[ti];
    const int n = static_cast<int>(t.fixations.size());
    if (n < 2) continue;  // nothing to imitate
    const int last_k = std::min(5, n - 2);
    for (int k = 0; k <= last_k; ++k) {
      ExpertPair p;
      p.trial_id = t.trial_id;
      p.trial_index = static_cast<int>(ti);
      p.step = k;
      p.image_ref = t.image_ref;
      p.category_id = t.category_id;
      p.prefix.assign(t.fixations.begin(), t.fixations.begin() + k + 1);
      const Fixation& next = t.fixations[k + 1];
      p.action = discretize_fixation(next.x, next.y, t.native_w, t.native_h);
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json root;
  root["version"] = manifest.version;
  root["split"] = manifest.split;
  json cats = json::array();
  for (const CategoryInfo& c : manifest.categories)
    cats.push_back({{"id", c.id}, {"name", c.name}});
  root["categories"] = std::move(cats);
  json trials = json::array();
  for (const SearchTrial& t : manifest.trials) {
    json jt;
    jt["trial_id"] = t.trial_id;
    jt["subject_id"] = t.subject_id;
    jt["image"] = {{"ref", t.image_ref},
                   {"width", t.native_w},
                   {"height", t.native_h}};
    jt["category_id"] = t.category_id;
    jt["condition"] = t.target_present ? "tp" : "ta";
    jt["correct"] = t.correct;
    if (t.target_box)
      jt["target_box"] = {t.target_box->x, t.target_box->y, t.target_box->w,
                          t.target_box->h};
    if (t.sibling_box)
      jt["sibling_box"] = {t.sibling_box->x, t.sibling_box->y,
                           t.sibling_box->w, t.sibling_box->h};
    if (t.deg_per_px) jt["deg_per_px"] = *t.deg_per_px;
    json fx = json::array();
    for (const Fixation& f : t.fixations)
      fx.push_back({f.x, f.y, f.duration_ms});
    jt["fixations"] = std::move(fx);
    trials.push_back(std::move(jt));
  }
  root["trials"] = std::move(trials);
  return root.dump(2) + "\n";
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  out << manifest_to_json(manifest);
  if (!out) throw IoError("manifest write failed for " + path);
}

}  // namespace girl
