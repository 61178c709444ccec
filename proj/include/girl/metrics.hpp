#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "girl/dataset.hpp"
#include "girl/ndarray.hpp"
#include "girl/retina.hpp"
#include "girl/rng.hpp"

namespace girl {

// Pixel grid the gaze metrics are computed on, plus the angular scale used
// to convert smoothing bandwidths given in degrees.
struct AnalysisRaster {
  int width = 512;
  int height = 320;
  double deg_per_px = 54.0 / 512.0;
};

// An ordered gaze trace in raster pixels. Durations are deliberately not
// carried: no metric here uses them.
using Scanpath = std::vector<PixelPoint>;

// Gaussian-smoothed spatial distribution of fixations, normalized to sum 1.
struct FixationDensityMap {
  NdArrayD grid;  // [height, width]
  double sigma_deg = 0;
  AnalysisRaster raster;
};

// Sum of isotropic Gaussian bumps (sigma in degrees, truncated at 4 sigma)
// at the fixation points, normalized to total mass 1.
FixationDensityMap fdm(const Scanpath& fixations, double sigma_deg,
                       const AnalysisRaster& raster = {});

enum class AucVariant {
  kUniformNegatives,  // positives vs uniformly sampled non-fixated pixels
  kPixelThresholds,   // ROC over thresholds at each positive's map value
};

// ROC area of the map's values at fixated pixels against chance. The default
// variant draws `negatives` uniform non-fixated pixels and ranks both sets
// with midrank ties, so a flat map scores exactly 0.5.
double auc(const FixationDensityMap& map, const Scanpath& positives,
           const Rng& rng, int negatives = 10000,
           AucVariant variant = AucVariant::kUniformNegatives);

// Leave-one-subject-out noise ceiling: each subject's fixations are scored
// against the density map built from everyone else's; the mean AUC is
// returned. Negative sampling derives from rng substream "auc"/subject.
double subject_model_auc(const std::vector<Scanpath>& per_subject,
                         double sigma_deg, const AnalysisRaster& raster,
                         const Rng& rng, int negatives = 10000);

// The four spatial scanpath-similarity components plus their mean, each in
// [0, 1] with 1 = identical. Saccade vectors are aligned by dynamic
// programming minimizing the vector-difference cost; the duration component
// is intentionally absent.
struct MultiMatch {
  double shape = 0;
  double direction = 0;
  double length = 0;
  double position = 0;
  double mean = 0;
};
MultiMatch multimatch(const Scanpath& a, const Scanpath& b,
                      const AnalysisRaster& raster = {});

// Cumulative probability that the target has been fixated by saccade k,
// k = 1..6 (the starting fixation is not a saccade). Trials that end before
// saccade k simply cannot hit at k: absent saccades count as misses.
struct GuidanceCurve {
  std::array<double, 6> cumulative{};
  int trials = 0;
};

// Over target-present trials with target boxes; other trials are ignored.
GuidanceCurve guidance_curve(const std::vector<SearchTrial>& trials);

// Same cumulative computation against a different object's box (aligned
// with `trials`); entries must be present for every trial the curve uses.
GuidanceCurve object_baseline_curve(
    const std::vector<SearchTrial>& trials,
    const std::vector<std::optional<Box>>& other_boxes);

// Ordinary least-squares slope of value against index 1..n.
double fit_slope(const std::vector<double>& values);
double fit_slope(const GuidanceCurve& curve);

// Headline search statistics over target-present trials. Chance comes from
// re-pairing scanpaths with images: within each subject the scanpaths are
// permuted across trials (coordinates rescaled between native resolutions),
// accuracy is recomputed, and the mean over `permutations` draws reported.
struct SearchStats {
  double fixated_in_6 = 0;          // target fixated within six saccades
  double avg_saccades_to_target = 0;  // on hit trials: first hitting index
  double shuffled_chance = 0;
  int trials = 0;
};
SearchStats search_stats(const std::vector<SearchTrial>& trials,
                         const Rng& rng, int permutations = 100);

// Guidance curve averaged over the same within-subject shuffles; the
// baseline the trained curve's slope is compared against.
GuidanceCurve shuffled_chance_curve(const std::vector<SearchTrial>& trials,
                                    const Rng& rng, int permutations = 100);

}  // namespace girl
