#pragma once

#include <string>

#include "girl/ndarray.hpp"
#include "girl/rng.hpp"

namespace girl {

enum class LayerKind { Dense, Conv2d };

struct ConvMeta {
  int kernel = 1;
  int stride = 1;
  int pad = 0;
};

// One dense or conv2d layer. Gradient accumulators live alongside the
// parameters so batched updates can sum per-sample contributions in order.
//   dense : weights [out, in], bias [out], input [in]
//   conv2d: weights [out_ch, in_ch, k, k], bias [out_ch], input [C, H, W]
struct LayerParams {
  LayerKind kind = LayerKind::Dense;
  NdArray weights;
  NdArray bias;
  NdArray grad_w;
  NdArray grad_b;
  ConvMeta conv;

  void zero_grads() {
    grad_w.data.setZero();
    grad_b.data.setZero();
  }
};

// Centered-uniform init scaled by fan-in: U(-g*sqrt(3/fan_in), +g*sqrt(3/fan_in)).
LayerParams make_dense(int in, int out, float gain, Rng& rng);
LayerParams make_conv(int in_ch, int out_ch, int kernel, int stride, int pad,
                      float gain, Rng& rng);

int conv_out_extent(int in, int kernel, int stride, int pad);

// Inference-path application (no gradient recording).
NdArray forward(const LayerParams& params, const NdArray& input);

// Shared kernels used by both forward() and the autodiff tape.
NdArray dense_forward(const NdArray& x, const NdArray& w, const NdArray& b);
void dense_backward(const NdArray& x, const NdArray& w, const NdArray& d_out,
                    NdArray* d_x, NdArray* d_w, NdArray* d_b);

NdArray conv2d_forward(const NdArray& x, const NdArray& w, const NdArray& b,
                       ConvMeta m);
void conv2d_backward(const NdArray& x, const NdArray& w, ConvMeta m,
                     const NdArray& d_out, NdArray* d_x, NdArray* d_w,
                     NdArray* d_b);

// 1-D softmax; stabilized by max-shift. Outputs are positive and sum to 1.
NdArray softmax(const NdArray& logits);
NdArray log_softmax(const NdArray& logits);

}  // namespace girl
