#include "girl/nets.hpp"

#include "girl/errors.hpp"
#include "girl/grid.hpp"

namespace girl {

BoundLayer bind_layer(Tape& t, const LayerParams& p, bool needs_grad) {
  return {t.leaf(p.weights, needs_grad), t.leaf(p.bias, needs_grad), p.kind,
          p.conv};
}

Var apply_layer(Tape& t, const BoundLayer& bl, Var x) {
  if (bl.kind == LayerKind::Dense) return t.dense(x, bl.w, bl.b);
  return t.conv2d(x, bl.w, bl.b, bl.conv);
}

void harvest_layer(Tape& t, const BoundLayer& bl, LayerParams& into) {
  into.grad_w.data += t.grad(bl.w).data;
  into.grad_b.data += t.grad(bl.b).data;
}

// ---------------------------------------------------------------- extractor

FeatureExtractor FeatureExtractor::make(int out_ch, Rng& rng) {
  if (out_ch < 1) throw ValidationError("FeatureExtractor: out_ch must be >= 1");
  FeatureExtractor fx;
  fx.conv1 = make_conv(1, 16, 8, 8, 0, 1.f, rng);
  fx.conv2 = make_conv(16, 32, 2, 2, 0, 1.f, rng);
  fx.conv3 = make_conv(32, out_ch, 2, 2, 0, 1.f, rng);
  return fx;
}

FeatureExtractor::Bound FeatureExtractor::bind(Tape& t, bool needs_grad) const {
  return {bind_layer(t, conv1, needs_grad), bind_layer(t, conv2, needs_grad),
          bind_layer(t, conv3, needs_grad)};
}

Var FeatureExtractor::apply(Tape& t, const Bound& b, Var image) {
  Var h1 = t.relu(apply_layer(t, b.c1, image));
  Var h2 = t.relu(apply_layer(t, b.c2, h1));
  return t.relu(apply_layer(t, b.c3, h2));
}

void FeatureExtractor::harvest(Tape& t, const Bound& b) {
  harvest_layer(t, b.c1, conv1);
  harvest_layer(t, b.c2, conv2);
  harvest_layer(t, b.c3, conv3);
}

NdArray FeatureExtractor::infer(const NdArray& image) const {
  NdArray h1 = forward(conv1, image);
  h1.data = h1.data.cwiseMax(0.f);
  NdArray h2 = forward(conv2, h1);
  h2.data = h2.data.cwiseMax(0.f);
  NdArray h3 = forward(conv3, h2);
  h3.data = h3.data.cwiseMax(0.f);
  return h3;
}

void FeatureExtractor::zero_grads() {
  conv1.zero_grads();
  conv2.zero_grads();
  conv3.zero_grads();
}

std::vector<std::pair<std::string, LayerParams*>> FeatureExtractor::layers() {
  return {{"fx.conv1", &conv1}, {"fx.conv2", &conv2}, {"fx.conv3", &conv3}};
}

// -------------------------------------------------------------- actor-critic

ActorCritic ActorCritic::make(int state_ch, Rng& rng) {
  if (state_ch < 1) throw ValidationError("ActorCritic: state_ch must be >= 1");
  ActorCritic ac;
  ac.trunk = make_conv(state_ch, 16, 3, 1, 1, 1.f, rng);
  ac.logit_head = make_conv(16, 1, 1, 1, 0, 0.01f, rng);
  ac.value1 = make_dense(16, 32, 1.f, rng);
  ac.value2 = make_dense(32, 1, 1.f, rng);
  return ac;
}

ActorCritic::Bound ActorCritic::bind(Tape& t, bool needs_grad) const {
  return {bind_layer(t, trunk, needs_grad), bind_layer(t, logit_head, needs_grad),
          bind_layer(t, value1, needs_grad), bind_layer(t, value2, needs_grad)};
}

ActorCritic::Heads ActorCritic::apply(Tape& t, const Bound& b, Var state) {
  Var h = t.relu(apply_layer(t, b.trunk, state));
  Var logit_plane = apply_layer(t, b.logit_head, h);  // [1, H, W]
  const NdArray& lp = t.val(logit_plane);
  Var logits = t.reshape(logit_plane, {lp.shape[1] * lp.shape[2]});
  Var pooled = t.spatial_mean(h);  // [16]
  Var v = t.relu(apply_layer(t, b.value1, pooled));
  Var value = apply_layer(t, b.value2, v);  // [1]
  return {logits, value};
}

void ActorCritic::harvest(Tape& t, const Bound& b) {
  harvest_layer(t, b.trunk, trunk);
  harvest_layer(t, b.logit_head, logit_head);
  harvest_layer(t, b.value1, value1);
  harvest_layer(t, b.value2, value2);
}

void ActorCritic::zero_grads() {
  trunk.zero_grads();
  logit_head.zero_grads();
  value1.zero_grads();
  value2.zero_grads();
}

std::vector<std::pair<std::string, LayerParams*>> ActorCritic::layers() {
  return {{"ac.trunk", &trunk},
          {"ac.logit_head", &logit_head},
          {"ac.value1", &value1},
          {"ac.value2", &value2}};
}

// ------------------------------------------------------------- discriminator

Discriminator Discriminator::make(int state_ch, Rng& rng) {
  if (state_ch < 1) throw ValidationError("Discriminator: state_ch must be >= 1");
  Discriminator d;
  d.l1 = make_conv(state_ch + 1, 32, 1, 1, 0, 1.f, rng);
  d.l2 = make_conv(32, 16, 1, 1, 0, 1.f, rng);
  d.l3 = make_conv(16, 1, 1, 1, 0, 0.01f, rng);
  return d;
}

Discriminator::Bound Discriminator::bind(Tape& t, bool needs_grad) const {
  return {bind_layer(t, l1, needs_grad), bind_layer(t, l2, needs_grad),
          bind_layer(t, l3, needs_grad)};
}

Var Discriminator::apply(Tape& t, const Bound& b, Var state, Var action_plane) {
  Var x = t.concat_ch({state, action_plane});
  Var h1 = t.relu(apply_layer(t, b.l1, x));
  Var h2 = t.relu(apply_layer(t, b.l2, h1));
  Var cell_logits = apply_layer(t, b.l3, h2);  // [1,10,16]
  // The pair's score is the judgement at the chosen cell; the one-hot plane
  // doubles as the gather mask. Mean-pooling instead would dilute the
  // action's influence on the logit by the cell count and stall training.
  return t.sum(t.mul(cell_logits, action_plane));  // [1]
}

void Discriminator::harvest(Tape& t, const Bound& b) {
  harvest_layer(t, b.l1, l1);
  harvest_layer(t, b.l2, l2);
  harvest_layer(t, b.l3, l3);
}

void Discriminator::zero_grads() {
  l1.zero_grads();
  l2.zero_grads();
  l3.zero_grads();
}

std::vector<std::pair<std::string, LayerParams*>> Discriminator::layers() {
  return {{"disc.l1", &l1}, {"disc.l2", &l2}, {"disc.l3", &l3}};
}

// ----------------------------------------------------------------- plumbing

NdArray action_plane(int action) {
  if (action < 0 || action >= kNumActions)
    throw ValidationError("action_plane: action " + std::to_string(action) +
                          " outside [0, " + std::to_string(kNumActions) + ")");
  NdArray plane = NdArray::zeros({1, kGridRows, kGridCols});
  plane.data[action] = 1.f;
  return plane;
}

std::vector<std::pair<std::string, NdArray*>> named_tensors(
    FeatureExtractor& fx, ActorCritic& ac, Discriminator& disc) {
  std::vector<std::pair<std::string, NdArray*>> out;
  auto add = [&out](std::vector<std::pair<std::string, LayerParams*>> ls) {
    for (auto& [name, p] : ls) {
      out.emplace_back(name + ".w", &p->weights);
      out.emplace_back(name + ".b", &p->bias);
    }
  };
  add(fx.layers());
  add(ac.layers());
  add(disc.layers());
  return out;
}

}  // namespace girl
