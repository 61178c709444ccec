#include "girl/optim.hpp"

#include <cmath>

namespace girl {

void optim_step(OptimState& state, const std::string& name, NdArray& param,
                const NdArray& grad) {
  require_same_shape(param, grad, "optim_step");
  if (!grad.all_finite())
    throw DivergenceError("optim_step: non-finite gradient for " + name);
  if (state.step < 1)
    throw LogicError("optim_step: begin_step() was never called");
  auto it = state.moments.find(name);
  if (it == state.moments.end()) {
    it = state.moments
             .emplace(name, OptimState::Moments{NdArray::zeros(param.shape),
                                                NdArray::zeros(param.shape)})
             .first;
  }
  NdArray& m = it->second.m;
  NdArray& v = it->second.v;
  require_same_shape(m, param, "optim_step moments");
  const float b1 = state.beta1, b2 = state.beta2;
  m.data = b1 * m.data + (1.f - b1) * grad.data;
  v.data.array() =
      b2 * v.data.array() + (1.f - b2) * grad.data.array().square();
  const float c1 = 1.f - std::pow(b1, static_cast<float>(state.step));
  const float c2 = 1.f - std::pow(b2, static_cast<float>(state.step));
  param.data.array() -= state.lr * (m.data.array() / c1) /
                        ((v.data.array() / c2).sqrt() + state.eps);
}

void optim_step(OptimState& state, const std::string& name,
                LayerParams& layer) {
  optim_step(state, name + ".w", layer.weights, layer.grad_w);
  optim_step(state, name + ".b", layer.bias, layer.grad_b);
}

}  // namespace girl
