#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "girl/dataset.hpp"
#include "girl/image.hpp"
#include "girl/rng.hpp"

namespace girl {

// A procedurally generated 512x320 search scene: smooth textured background,
// two high-frequency band distractors, one object of the other category (the
// sibling), and — when target_present — one target patch of the requested
// category. All patch types share the same mean luminance, slightly above the
// background, so peripheral blur reveals where objects sit but erases the
// fine structure that says which is which.
struct SyntheticScene {
  ImageF32 image;
  int category = 0;  // index: 0 = checker, 1 = rings
  bool target_present = false;
  std::optional<Box> target_box;
  std::optional<Box> sibling_box;     // the other category's object
  std::vector<Box> distractor_boxes;  // bands + sibling, oracle fixation pool
  uint64_t seed = 0;
};

constexpr int kSynthCategories = 2;
constexpr int kPatchPx = 48;

// Deterministic scene construction from a bare seed. Placement respects the
// canvas margins, a minimum separation between patches, and — for targets —
// exclusion from the central region.
SyntheticScene gen_scene(uint64_t seed, int category, bool target_present);

// Compact provenance string ("syn:<seed>:<category>:<tp|ta>") from which the
// identical scene can be rebuilt without touching disk.
std::string scene_ref(const SyntheticScene& scene);
SyntheticScene scene_from_ref(const std::string& ref);

// A scripted expert searcher standing in for human behavior.
struct OracleConfig {
  double noise_sigma_px = 4.0;     // fixation jitter around patch centers
  double p_distractor_first = 0.3; // chance the first saccade explores
  int max_saccades = 6;

  void validate() const;
};

// Emits a full (1 + max_saccades)-fixation trial: start at the canvas
// center, optionally glance at one distractor, then home onto the target
// and hover there. Coordinates are canvas pixels.
SearchTrial oracle_scanpath(const SyntheticScene& scene,
                            const OracleConfig& cfg, Rng& rng);

// Target-present train/test manifests over `categories` alternating
// categories, scene seeds derived from the root seed with disjoint index
// ranges, subjects rotating o1..o5. Both manifests pass dataset validation.
std::pair<DatasetManifest, DatasetManifest> gen_dataset(
    int n_train, int n_test, int categories, uint64_t root_seed,
    const OracleConfig& oracle = {});

// Resolves a trial image: "syn:" refs regenerate the scene, anything else
// is read from disk as a PGM.
ImageF32 load_trial_image(const SearchTrial& trial);

}  // namespace girl
