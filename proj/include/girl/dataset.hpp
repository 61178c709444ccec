#pragma once

#include <optional>
#include <string>
#include <vector>

#include "girl/grid.hpp"

namespace girl {

struct Fixation {
  double x = 0;
  double y = 0;
  double duration_ms = 0;
};

struct Box {
  double x = 0, y = 0, w = 0, h = 0;
  bool contains(double px, double py, double margin = 0) const {
    return px >= x - margin && px < x + w + margin && py >= y - margin &&
           py < y + h + margin;
  }
  double area() const { return w * h; }
};

// One search trial: behavioral or generated.
struct SearchTrial {
  std::string trial_id;
  std::string subject_id;
  std::string image_ref;
  int native_w = 0;
  int native_h = 0;
  int category_id = 0;
  bool target_present = false;  // condition: tp vs ta
  bool correct = false;
  std::optional<Box> target_box;   // required for tp
  std::optional<Box> sibling_box;  // optional annotation for object baselines
  std::optional<double> deg_per_px;  // degrees per native pixel, if known
  std::vector<Fixation> fixations;

  bool target_fixated(double margin_px = 0) const {
    if (!target_box) return false;
    for (const Fixation& f : fixations)
      if (target_box->contains(f.x, f.y, margin_px)) return true;
    return false;
  }
};

struct CategoryInfo {
  int id = 0;
  std::string name;
};

struct DatasetManifest {
  int version = 1;
  std::string split;  // "train" or "test"
  std::vector<CategoryInfo> categories;
  std::vector<SearchTrial> trials;
  std::vector<std::string> warnings;  // soft validation findings

  int category_index(int category_id) const;  // position in the table
};

// One expert state-action pair: the state is the trial context after the
// first step+1 fixations, the action is fixation step+1 discretized.
struct ExpertPair {
  std::string trial_id;
  int trial_index = -1;  // into the source manifest's trial list
  int step = 0;          // 0..5
  std::string image_ref;
  int category_id = 0;
  std::vector<Fixation> prefix;  // fixations 0..step, native coordinates
  int action = 0;                // 0..159
};

// Parses and validates a manifest JSON file. Hard schema violations throw
// ValidationError listing every offending trial; soft findings land in
// manifest.warnings.
DatasetManifest load_manifest(const std::string& path);
DatasetManifest parse_manifest_json(const std::string& text,
                                    const std::string& origin);

// Keeps correct trials, and among correct target-present trials only those
// whose target was fixated (box containment, optionally inflated by a
// margin given in degrees). Target-absent correct trials always survive.
DatasetManifest filter_training(const DatasetManifest& manifest,
                                double target_margin_deg = 0.0,
                                double canvas_deg_per_px = 54.0 / 512.0);

// Emits (prefix -> next fixation cell) pairs, k = 0..min(5, n-2) per trial.
// Trials with fewer than two fixations contribute nothing.
std::vector<ExpertPair> export_expert_pairs(const DatasetManifest& manifest);

std::string manifest_to_json(const DatasetManifest& manifest);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

}  // namespace girl
