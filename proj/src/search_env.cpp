#include "girl/search_env.hpp"

#include <cmath>
#include <string>

#include "girl/errors.hpp"

namespace girl {

void EnvConfig::validate() const {
  fov.validate();
  if (fov.width != kCanvasW || fov.height != kCanvasH)
    throw ValidationError("EnvConfig: canvas must be " + std::to_string(kCanvasW) +
                          "x" + std::to_string(kCanvasH));
  if (num_categories < 1)
    throw ValidationError("EnvConfig: num_categories must be >= 1");
  if (episode_length < 1)
    throw ValidationError("EnvConfig: episode_length must be >= 1");
}

SearchEnv::SearchEnv(EnvConfig cfg, const FeatureExtractor* fx)
    : cfg_(cfg), fx_(fx) {
  cfg_.validate();
  if (fx_ == nullptr) throw ValidationError("SearchEnv: null feature extractor");
}

EpisodeState SearchEnv::reset(const ImageF32& image, int category,
                              std::optional<Box> target_box) const {
  if (category < 0 || category >= cfg_.num_categories)
    throw ValidationError("reset: category " + std::to_string(category) +
                          " outside [0, " + std::to_string(cfg_.num_categories) +
                          ")");
  if (image.width <= 0 || image.height <= 0)
    throw ValidationError("reset: empty image");
  if (target_box) {
    const Box& b = *target_box;
    if (b.w <= 0 || b.h <= 0 || b.x < 0 || b.y < 0 || b.x + b.w > kCanvasW ||
        b.y + b.h > kCanvasH)
      throw ValidationError("reset: target box outside the canvas");
  }

  EpisodeState ep;
  ep.image = (image.width == kCanvasW && image.height == kCanvasH)
                 ? image
                 : resize_bilinear(image, kCanvasW, kCanvasH);
  ep.pyramid = build_pyramid(ep.image, cfg_.fov);
  ep.fixations = {PixelPoint{kCanvasW / 2.f, kCanvasH / 2.f}};
  ep.visited.assign(kNumActions, false);
  ep.visited[kCenterAction] = true;
  ep.ret = cumulative_foveate(ep.pyramid, ep.fixations, cfg_.fov);
  ep.category = category;
  ep.target_box = target_box;
  return ep;
}

SearchEnv::StepResult SearchEnv::step(EpisodeState& ep, int action) const {
  if (ep.done) throw LogicError("step: episode already finished");
  PixelPoint p = action_to_pixel(action);
  ep.fixations.push_back(p);
  ep.visited[action] = true;
  ep.steps += 1;
  ep.ret = cumulative_foveate(ep.pyramid, ep.fixations, cfg_.fov);

  StepResult r;
  r.target_hit = ep.target_box && ep.target_box->contains(p.x, p.y);
  if (ep.steps >= cfg_.episode_length) ep.done = true;
  r.done = ep.done;
  return r;
}

PixelPoint SearchEnv::action_to_pixel(int action) const {
  if (action < 0 || action >= kNumActions)
    throw ValidationError("action_to_pixel: action " + std::to_string(action) +
                          " outside [0, " + std::to_string(kNumActions) + ")");
  return action_center(action);
}

NdArray SearchEnv::image_tensor(const ImageF32& ret) {
  NdArray t = NdArray::zeros({1, ret.height, ret.width});
  for (int i = 0; i < ret.width * ret.height; ++i) t.data[i] = ret.pixels[i];
  return t;
}

NdArray SearchEnv::category_planes(int category) const {
  if (category < 0 || category >= cfg_.num_categories)
    throw ValidationError("category_planes: category out of range");
  NdArray planes = NdArray::zeros({cfg_.num_categories, kGridRows, kGridCols});
  planes.data.segment(category * kNumActions, kNumActions).setOnes();
  return planes;
}

NdArray SearchEnv::history_plane(const std::vector<bool>& visited) const {
  if (static_cast<int>(visited.size()) != kNumActions)
    throw ValidationError("history_plane: expected " +
                          std::to_string(kNumActions) + " cells");
  NdArray plane = NdArray::zeros({1, kGridRows, kGridCols});
  for (int i = 0; i < kNumActions; ++i)
    if (visited[i]) plane.data[i] = 1.f;
  return plane;
}

NdArray SearchEnv::extract_features(const ImageF32& ret, int category) const {
  if (ret.width != kCanvasW || ret.height != kCanvasH)
    throw ValidationError("extract_features: image must be canvas-sized");
  NdArray feat = fx_->infer(image_tensor(ret));
  NdArray cats = category_planes(category);
  NdArray out = NdArray::zeros(
      {feat.shape[0] + cfg_.num_categories, kGridRows, kGridCols});
  out.data.head(feat.size()) = feat.data;
  out.data.tail(cats.size()) = cats.data;
  return out;
}

State SearchEnv::observe(const EpisodeState& ep) const {
  State s;
  s.tensor = assemble_state(*fx_, ep.ret.pixels, category_planes(ep.category),
                            history_plane(ep.visited));
  s.step = ep.steps;
  return s;
}

int SearchEnv::state_channels() const {
  return fx_->out_channels() + cfg_.num_categories + 1;
}

NdArray assemble_state(const FeatureExtractor& fx, const ImageF32& ret,
                       const NdArray& cat_planes, const NdArray& history) {
  NdArray feat = fx.infer(SearchEnv::image_tensor(ret));
  if (feat.rank() != 3 || cat_planes.rank() != 3 || history.rank() != 3 ||
      feat.shape[1] != cat_planes.shape[1] || feat.shape[2] != cat_planes.shape[2] ||
      feat.shape[1] != history.shape[1] || feat.shape[2] != history.shape[2])
    throw ShapeError("assemble_state: plane extents disagree");
  NdArray out = NdArray::zeros(
      {feat.shape[0] + cat_planes.shape[0] + history.shape[0], feat.shape[1],
       feat.shape[2]});
  out.data.head(feat.size()) = feat.data;
  out.data.segment(feat.size(), cat_planes.size()) = cat_planes.data;
  out.data.tail(history.size()) = history.data;
  return out;
}

Var state_on_tape(Tape& t, const FeatureExtractor::Bound& fxb,
                  const NdArray& image_tensor, const NdArray& cat_planes,
                  const NdArray& history) {
  Var feat = FeatureExtractor::apply(t, fxb, t.leaf(image_tensor));
  return t.concat_ch({feat, t.leaf(cat_planes), t.leaf(history)});
}

}  // namespace girl
