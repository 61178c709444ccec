#pragma once

#include <map>
#include <string>

#include "girl/layers.hpp"
#include "girl/ndarray.hpp"

namespace girl {

// Adaptive-moment optimizer state. Moments are keyed by tensor name and
// created lazily on the first update; the step counter advances once per
// batch via begin_step() and drives bias correction.
struct OptimState {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  long step = 0;

  struct Moments {
    NdArray m;
    NdArray v;
  };
  std::map<std::string, Moments> moments;

  void begin_step() { ++step; }
};

// One bias-corrected adaptive-moment update of a single tensor.
void optim_step(OptimState& state, const std::string& name, NdArray& param,
                const NdArray& grad);

// Updates a layer's weights and bias from its accumulated gradients.
void optim_step(OptimState& state, const std::string& name, LayerParams& layer);

}  // namespace girl
