#pragma once

#include <string>
#include <utility>
#include <vector>

#include "girl/layers.hpp"
#include "girl/ndarray.hpp"
#include "girl/rng.hpp"
#include "girl/tape.hpp"

namespace girl {

// A layer bound onto a tape: parameter leaves plus enough metadata to apply
// the op. Gradients flow back into a LayerParams via harvest_layer.
struct BoundLayer {
  Var w;
  Var b;
  LayerKind kind = LayerKind::Dense;
  ConvMeta conv;
};

BoundLayer bind_layer(Tape& t, const LayerParams& p, bool needs_grad);
Var apply_layer(Tape& t, const BoundLayer& bl, Var x);
// Adds the tape's parameter gradients into layer.grad_w / grad_b.
void harvest_layer(Tape& t, const BoundLayer& bl, LayerParams& into);

// Maps a 1 x 320 x 512 grayscale canvas to an out_ch x 10 x 16 feature map.
// Strides multiply to 32 with no padding, so each output cell sees exactly
// the 32x32 pixel window of the matching action cell.
struct FeatureExtractor {
  LayerParams conv1;  // 1 -> 16, k8 s8
  LayerParams conv2;  // 16 -> 32, k2 s2
  LayerParams conv3;  // 32 -> out_ch, k2 s2

  static FeatureExtractor make(int out_ch, Rng& rng);
  int out_channels() const { return conv3.weights.shape[0]; }

  struct Bound {
    BoundLayer c1, c2, c3;
  };
  Bound bind(Tape& t, bool needs_grad) const;
  static Var apply(Tape& t, const Bound& b, Var image);
  void harvest(Tape& t, const Bound& b);

  NdArray infer(const NdArray& image) const;  // recording-off forward

  void zero_grads();
  std::vector<std::pair<std::string, LayerParams*>> layers();
};

// Policy + value network over a state tensor [state_ch, 10, 16].
//   trunk: 3x3 pad-1 conv -> 16 ch, ReLU (lets a cell's priority see its
//          neighborhood); logits: 1x1 conv -> 1 ch, read as 160 logits;
//   value: spatial mean -> 16 -> 32 -> 1 dense head.
struct ActorCritic {
  LayerParams trunk;
  LayerParams logit_head;  // small init so the untrained policy is near-uniform
  LayerParams value1;
  LayerParams value2;

  static ActorCritic make(int state_ch, Rng& rng);
  int state_channels() const { return trunk.weights.shape[1]; }

  struct Bound {
    BoundLayer trunk, logit_head, value1, value2;
  };
  struct Heads {
    Var logits;  // [160]
    Var value;   // [1]
  };
  Bound bind(Tape& t, bool needs_grad) const;
  static Heads apply(Tape& t, const Bound& b, Var state);
  void harvest(Tape& t, const Bound& b);

  void zero_grads();
  std::vector<std::pair<std::string, LayerParams*>> layers();
};

// Scores (state, action) pairs. The action joins the state as one extra
// one-hot plane; 1x1 convs keep the judgement per-cell and the score is
// the judgement at the action's cell, so an untrained score stays near 0.5.
struct Discriminator {
  LayerParams l1;  // state_ch+1 -> 32, 1x1
  LayerParams l2;  // 32 -> 16, 1x1
  LayerParams l3;  // 16 -> 1, 1x1, small init

  static Discriminator make(int state_ch, Rng& rng);
  int state_channels() const { return l1.weights.shape[1] - 1; }

  struct Bound {
    BoundLayer l1, l2, l3;
  };
  Bound bind(Tape& t, bool needs_grad) const;
  // state: [state_ch,10,16]; action_plane: [1,10,16]. Returns scalar logit.
  static Var apply(Tape& t, const Bound& b, Var state, Var action_plane);
  void harvest(Tape& t, const Bound& b);

  void zero_grads();
  std::vector<std::pair<std::string, LayerParams*>> layers();
};

// One-hot action plane [1,10,16] with a 1 at the action's grid cell.
NdArray action_plane(int action);

// Flat named views over every trainable tensor, for checkpoints.
std::vector<std::pair<std::string, NdArray*>> named_tensors(
    FeatureExtractor& fx, ActorCritic& ac, Discriminator& disc);

}  // namespace girl
