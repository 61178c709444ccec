#include "girl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_set>

#include "girl/errors.hpp"

namespace girl {

namespace {

void check_in_raster(const Scanpath& path, const AnalysisRaster& r,
                     const char* who) {
  if (path.empty()) throw ValidationError(std::string(who) + ": no fixations");
  for (const PixelPoint& p : path)
    if (!(p.x >= 0 && p.x <= r.width && p.y >= 0 && p.y <= r.height))
      throw ValidationError(std::string(who) + ": fixation (" +
                            std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") outside the " + std::to_string(r.width) + "x" +
                            std::to_string(r.height) + " raster");
}

int clamp_px(double v, int n) {
  return std::clamp(static_cast<int>(std::lround(v)), 0, n - 1);
}

}  // namespace

FixationDensityMap fdm(const Scanpath& fixations, double sigma_deg,
                       const AnalysisRaster& raster) {
  if (sigma_deg <= 0) throw ValidationError("fdm: sigma must be positive");
  if (raster.width <= 0 || raster.height <= 0 || raster.deg_per_px <= 0)
    throw ValidationError("fdm: bad raster");
  check_in_raster(fixations, raster, "fdm");

  FixationDensityMap out;
  out.sigma_deg = sigma_deg;
  out.raster = raster;
  out.grid = NdArrayD::zeros({raster.height, raster.width});

  const double sigma_px = sigma_deg / raster.deg_per_px;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_px));
  const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);

  for (const PixelPoint& f : fixations) {
    const int cx = static_cast<int>(std::lround(f.x));
    const int cy = static_cast<int>(std::lround(f.y));
    const int x0 = std::max(0, cx - radius), x1 = std::min(raster.width - 1, cx + radius);
    const int y0 = std::max(0, cy - radius), y1 = std::min(raster.height - 1, cy + radius);
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - static_cast<double>(f.y);
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - static_cast<double>(f.x);
        out.grid.at2(y, x) += std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    }
  }

  const double total = out.grid.data.sum();
  if (!(total > 0)) throw ValidationError("fdm: zero total mass");
  out.grid.data /= total;
  return out;
}

namespace {

double midrank_auc(std::vector<std::pair<double, bool>>& scored, long n_pos,
                   long n_neg) {
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_pos = 0;
  size_t i = 0;
  while (i < scored.size()) {
    size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k)
      if (scored[k].second) rank_pos += mid;
    i = j;
  }
  return (rank_pos - 0.5 * n_pos * (n_pos + 1)) /
         (static_cast<double>(n_pos) * n_neg);
}

double thresholds_auc(const FixationDensityMap& map,
                      const std::vector<double>& pos_values) {
  std::vector<double> all(map.grid.data.begin(), map.grid.data.end());
  std::sort(all.begin(), all.end());
  std::vector<double> pos = pos_values;
  std::sort(pos.begin(), pos.end(), std::greater<>());
  const double n_pix = static_cast<double>(all.size());
  const double n_pos = static_cast<double>(pos.size());

  // ROC points from (0,0) through one point per distinct threshold to (1,1).
  std::vector<std::pair<double, double>> roc{{0, 0}};
  size_t i = 0;
  while (i < pos.size()) {
    size_t j = i;
    while (j < pos.size() && pos[j] == pos[i]) ++j;
    const double v = pos[i];
    const double ge =
        static_cast<double>(all.end() - std::lower_bound(all.begin(), all.end(), v));
    roc.emplace_back(ge / n_pix, static_cast<double>(j) / n_pos);
    i = j;
  }
  roc.emplace_back(1, 1);
  double area = 0;
  for (size_t k = 1; k < roc.size(); ++k)
    area += (roc[k].first - roc[k - 1].first) * 0.5 *
            (roc[k].second + roc[k - 1].second);
  return area;
}

}  // namespace

double auc(const FixationDensityMap& map, const Scanpath& positives,
           const Rng& rng, int negatives, AucVariant variant) {
  const AnalysisRaster& r = map.raster;
  if (map.grid.shape != std::vector<int>{r.height, r.width})
    throw ShapeError("auc: map grid does not match its raster");
  if (std::abs(map.grid.data.sum() - 1.0) > 1e-3)
    throw ValidationError("auc: prediction map is not normalized");
  check_in_raster(positives, r, "auc");
  if (negatives <= 0) throw ValidationError("auc: need a positive sample count");

  std::vector<double> pos_values;
  std::unordered_set<int> pos_pixels;
  for (const PixelPoint& p : positives) {
    const int x = clamp_px(p.x, r.width), y = clamp_px(p.y, r.height);
    pos_values.push_back(map.grid.at2(y, x));
    pos_pixels.insert(y * r.width + x);
  }

  if (variant == AucVariant::kPixelThresholds)
    return thresholds_auc(map, pos_values);

  if (static_cast<int>(pos_pixels.size()) >= r.width * r.height)
    throw ValidationError("auc: every pixel is fixated, no negatives exist");

  Rng draw = rng;
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(pos_values.size() + negatives);
  for (double v : pos_values) scored.emplace_back(v, true);
  int sampled = 0;
  while (sampled < negatives) {
    const int x = draw.uniform_int(r.width), y = draw.uniform_int(r.height);
    if (pos_pixels.count(y * r.width + x)) continue;
    scored.emplace_back(map.grid.at2(y, x), false);
    ++sampled;
  }
  return midrank_auc(scored, static_cast<long>(pos_values.size()), negatives);
}

double subject_model_auc(const std::vector<Scanpath>& per_subject,
                         double sigma_deg, const AnalysisRaster& raster,
                         const Rng& rng, int negatives) {
  if (per_subject.size() < 2)
    throw ValidationError("subject_model_auc: need at least two subjects");
  for (const Scanpath& s : per_subject)
    if (s.empty())
      throw ValidationError("subject_model_auc: a subject has no fixations");

  double total = 0;
  for (size_t i = 0; i < per_subject.size(); ++i) {
    Scanpath others;
    for (size_t j = 0; j < per_subject.size(); ++j)
      if (j != i) others.insert(others.end(), per_subject[j].begin(),
                                per_subject[j].end());
    const FixationDensityMap m = fdm(others, sigma_deg, raster);
    total += auc(m, per_subject[i], rng.sub("auc", i), negatives);
  }
  return total / static_cast<double>(per_subject.size());
}

// ------------------------------------------------------------- multimatch

namespace {

struct Vec2 {
  double x = 0, y = 0;
};

double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

// Angle between two saccade vectors in [0, pi]; degenerate (zero-length)
// vectors contribute no angular difference.
double angle_between(const Vec2& u, const Vec2& v) {
  const double cross = u.x * v.y - u.y * v.x;
  const double dot = u.x * v.x + u.y * v.y;
  return std::atan2(std::abs(cross), dot);
}

}  // namespace

MultiMatch multimatch(const Scanpath& a, const Scanpath& b,
                      const AnalysisRaster& raster) {
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError("multimatch: scanpaths need at least two fixations");
  check_in_raster(a, raster, "multimatch");
  check_in_raster(b, raster, "multimatch");

  const int n = static_cast<int>(a.size()) - 1;
  const int m = static_cast<int>(b.size()) - 1;
  std::vector<Vec2> u(n), v(m);
  for (int i = 0; i < n; ++i)
    u[i] = {static_cast<double>(a[i + 1].x) - a[i].x,
            static_cast<double>(a[i + 1].y) - a[i].y};
  for (int j = 0; j < m; ++j)
    v[j] = {static_cast<double>(b[j + 1].x) - b[j].x,
            static_cast<double>(b[j + 1].y) - b[j].y};

  auto cost = [&](int i, int j) {
    return std::hypot(u[i].x - v[j].x, u[i].y - v[j].y);
  };

  // Monotone alignment minimizing total vector difference.
  std::vector<std::vector<double>> D(n, std::vector<double>(m));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double best = 0;
      if (i > 0 && j > 0)
        best = std::min({D[i - 1][j - 1], D[i - 1][j], D[i][j - 1]});
      else if (i > 0)
        best = D[i - 1][j];
      else if (j > 0)
        best = D[i][j - 1];
      D[i][j] = best + cost(i, j);
    }

  // Backtrack, preferring diagonal steps; on an up/left tie the side with
  // more remaining saccades gives, keeping the alignment symmetric under
  // argument swap.
  std::vector<std::pair<int, int>> matched;
  int i = n - 1, j = m - 1;
  matched.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = D[i - 1][j - 1], up = D[i - 1][j], left = D[i][j - 1];
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up < left || (up == left && i > j)) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    matched.emplace_back(i, j);
  }

  const double diag_len = std::hypot(static_cast<double>(raster.width),
                                     static_cast<double>(raster.height));
  double d_shape = 0, d_dir = 0, d_len = 0, d_pos = 0;
  for (const auto& [pi, pj] : matched) {
    d_shape += cost(pi, pj) / (2.0 * diag_len);
    d_dir += angle_between(u[pi], v[pj]) / M_PI;
    d_len += std::abs(norm(u[pi]) - norm(v[pj])) / diag_len;
    d_pos += std::hypot(static_cast<double>(a[pi].x) - b[pj].x,
                        static_cast<double>(a[pi].y) - b[pj].y) /
             diag_len;
  }
  const double k = static_cast<double>(matched.size());
  MultiMatch out;
  out.shape = 1.0 - d_shape / k;
  out.direction = 1.0 - d_dir / k;
  out.length = 1.0 - d_len / k;
  out.position = 1.0 - d_pos / k;
  out.mean = (out.shape + out.direction + out.length + out.position) / 4.0;
  return out;
}

// --------------------------------------------------------- guidance curves

namespace {

// First saccade index (1-based) in 1..max_k whose fixation lands in the box;
// 0 if none. Saccades the trial never made count as misses.
int first_hit(const SearchTrial& t, const Box& box, int max_k) {
  const int last = std::min<int>(max_k, static_cast<int>(t.fixations.size()) - 1);
  for (int k = 1; k <= last; ++k)
    if (box.contains(t.fixations[k].x, t.fixations[k].y)) return k;
  return 0;
}

std::vector<int> included_trials(const std::vector<SearchTrial>& trials) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(trials.size()); ++i)
    if (trials[i].target_present && trials[i].target_box) idx.push_back(i);
  if (idx.empty())
    throw ValidationError("no target-present trials with target boxes");
  return idx;
}

}  // namespace

GuidanceCurve guidance_curve(const std::vector<SearchTrial>& trials) {
  const std::vector<int> idx = included_trials(trials);
  GuidanceCurve out;
  out.trials = static_cast<int>(idx.size());
  for (int i : idx) {
    const int hit = first_hit(trials[i], *trials[i].target_box, 6);
    if (hit > 0)
      for (int k = hit; k <= 6; ++k) out.cumulative[k - 1] += 1.0;
  }
  for (double& c : out.cumulative) c /= out.trials;
  return out;
}

GuidanceCurve object_baseline_curve(
    const std::vector<SearchTrial>& trials,
    const std::vector<std::optional<Box>>& other_boxes) {
  if (other_boxes.size() != trials.size())
    throw ValidationError("object_baseline_curve: one box entry per trial required");
  const std::vector<int> idx = included_trials(trials);
  GuidanceCurve out;
  out.trials = static_cast<int>(idx.size());
  for (int i : idx) {
    if (!other_boxes[i])
      throw ValidationError("object_baseline_curve: trial " +
                            trials[i].trial_id + " lacks the other object's box");
    const int hit = first_hit(trials[i], *other_boxes[i], 6);
    if (hit > 0)
      for (int k = hit; k <= 6; ++k) out.cumulative[k - 1] += 1.0;
  }
  for (double& c : out.cumulative) c /= out.trials;
  return out;
}

double fit_slope(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw ValidationError("fit_slope: need at least two points");
  const double xbar = 0.5 * (n + 1);
  double ybar = 0;
  for (double v : values) ybar += v;
  ybar /= n;
  double num = 0, den = 0;
  for (int k = 1; k <= n; ++k) {
    num += (k - xbar) * (values[k - 1] - ybar);
    den += (k - xbar) * (k - xbar);
  }
  return num / den;
}

double fit_slope(const GuidanceCurve& curve) {
  return fit_slope(std::vector<double>(curve.cumulative.begin(),
                                       curve.cumulative.end()));
}

// ------------------------------------------------------------ search stats

namespace {

// Average cumulative hit curve under within-subject re-pairings of
// scanpaths and images; coordinates are rescaled between native rasters.
std::array<double, 6> shuffled_curve_impl(const std::vector<SearchTrial>& trials,
                                          const std::vector<int>& idx,
                                          const Rng& rng, int permutations) {
  if (permutations <= 0)
    throw ValidationError("shuffle: need a positive permutation count");
  std::map<std::string, std::vector<int>> by_subject;
  for (int i : idx) by_subject[trials[i].subject_id].push_back(i);

  std::array<double, 6> acc{};
  for (int p = 0; p < permutations; ++p) {
    Rng pr = rng.sub("perm", static_cast<uint64_t>(p));
    for (auto& kv : by_subject) {
      const std::vector<int>& group = kv.second;
      std::vector<int> perm = pr.permutation(static_cast<int>(group.size()));
      for (size_t g = 0; g < group.size(); ++g) {
        const SearchTrial& dst = trials[group[g]];
        const SearchTrial& src = trials[group[perm[g]]];
        const double sx =
            src.native_w > 0 ? static_cast<double>(dst.native_w) / src.native_w : 1.0;
        const double sy =
            src.native_h > 0 ? static_cast<double>(dst.native_h) / src.native_h : 1.0;
        const Box& box = *dst.target_box;
        const int last = std::min<int>(6, static_cast<int>(src.fixations.size()) - 1);
        int hit = 0;
        for (int k = 1; k <= last && hit == 0; ++k)
          if (box.contains(src.fixations[k].x * sx, src.fixations[k].y * sy))
            hit = k;
        if (hit > 0)
          for (int k = hit; k <= 6; ++k) acc[k - 1] += 1.0;
      }
    }
  }
  for (double& a : acc) a /= static_cast<double>(permutations) * idx.size();
  return acc;
}

}  // namespace

SearchStats search_stats(const std::vector<SearchTrial>& trials, const Rng& rng,
                         int permutations) {
  const std::vector<int> idx = included_trials(trials);
  SearchStats out;
  out.trials = static_cast<int>(idx.size());
  long hits = 0, saccade_sum = 0;
  for (int i : idx) {
    const int hit = first_hit(trials[i], *trials[i].target_box, 6);
    if (hit > 0) {
      ++hits;
      saccade_sum += hit;
    }
  }
  out.fixated_in_6 = static_cast<double>(hits) / idx.size();
  out.avg_saccades_to_target =
      hits > 0 ? static_cast<double>(saccade_sum) / hits : 0.0;
  out.shuffled_chance = shuffled_curve_impl(trials, idx, rng, permutations)[5];
  return out;
}

GuidanceCurve shuffled_chance_curve(const std::vector<SearchTrial>& trials,
                                    const Rng& rng, int permutations) {
  const std::vector<int> idx = included_trials(trials);
  GuidanceCurve out;
  out.trials = static_cast<int>(idx.size());
  out.cumulative = shuffled_curve_impl(trials, idx, rng, permutations);
  return out;
}

}  // namespace girl
