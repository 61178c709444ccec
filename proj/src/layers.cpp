#include "girl/layers.hpp"

#include <cmath>

namespace girl {

namespace {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void init_uniform(NdArray& a, float bound, Rng& rng) {
  for (int i = 0; i < a.size(); ++i)
    a.data[i] = static_cast<float>(rng.uniform(-bound, bound));
}

// Unrolls conv input patches to a [OH*OW, C*k*k] matrix. Out-of-image taps
// (padding) contribute zero.
RowMat im2col(const NdArray& x, ConvMeta m, int oh, int ow) {
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  const int k = m.kernel;
  RowMat cols = RowMat::Zero(oh * ow, C * k * k);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      const int row = r * ow + c;
      const int y0 = r * m.stride - m.pad;
      const int x0 = c * m.stride - m.pad;
      for (int ch = 0; ch < C; ++ch)
        for (int ky = 0; ky < k; ++ky) {
          const int y = y0 + ky;
          if (y < 0 || y >= H) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int xx = x0 + kx;
            if (xx < 0 || xx >= W) continue;
            cols(row, (ch * k + ky) * k + kx) = x.at3(ch, y, xx);
          }
        }
    }
  }
  return cols;
}

// Scatter-adds patch gradients back onto the input layout.
void col2im(const RowMat& dcols, ConvMeta m, int oh, int ow, NdArray& dx) {
  const int C = dx.shape[0], H = dx.shape[1], W = dx.shape[2];
  const int k = m.kernel;
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      const int row = r * ow + c;
      const int y0 = r * m.stride - m.pad;
      const int x0 = c * m.stride - m.pad;
      for (int ch = 0; ch < C; ++ch)
        for (int ky = 0; ky < k; ++ky) {
          const int y = y0 + ky;
          if (y < 0 || y >= H) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int xx = x0 + kx;
            if (xx < 0 || xx >= W) continue;
            dx.at3(ch, y, xx) += dcols(row, (ch * k + ky) * k + kx);
          }
        }
    }
  }
}

}  // namespace

LayerParams make_dense(int in, int out, float gain, Rng& rng) {
  LayerParams p;
  p.kind = LayerKind::Dense;
  p.weights = NdArray::zeros({out, in});
  p.bias = NdArray::zeros({out});
  p.grad_w = NdArray::zeros({out, in});
  p.grad_b = NdArray::zeros({out});
  init_uniform(p.weights, gain * std::sqrt(3.f / in), rng);
  return p;
}

LayerParams make_conv(int in_ch, int out_ch, int kernel, int stride, int pad,
                      float gain, Rng& rng) {
  LayerParams p;
  p.kind = LayerKind::Conv2d;
  p.conv = {kernel, stride, pad};
  p.weights = NdArray::zeros({out_ch, in_ch, kernel, kernel});
  p.bias = NdArray::zeros({out_ch});
  p.grad_w = NdArray::zeros(p.weights.shape);
  p.grad_b = NdArray::zeros({out_ch});
  init_uniform(p.weights, gain * std::sqrt(3.f / (in_ch * kernel * kernel)),
               rng);
  return p;
}

int conv_out_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

NdArray dense_forward(const NdArray& x, const NdArray& w, const NdArray& b) {
  if (x.rank() != 1 || w.rank() != 2 || w.shape[1] != x.shape[0])
    throw ShapeError("dense: input " + x.shape_str() + " vs weights " +
                     w.shape_str());
  const int out = w.shape[0], in = w.shape[1];
  NdArray y = NdArray::zeros({out});
  y.data = w.mat(out, in) * x.data + b.data;
  return y;
}

void dense_backward(const NdArray& x, const NdArray& w, const NdArray& d_out,
                    NdArray* d_x, NdArray* d_w, NdArray* d_b) {
  const int out = w.shape[0], in = w.shape[1];
  if (d_x) d_x->data += w.mat(out, in).transpose() * d_out.data;
  if (d_w) d_w->mat(out, in) += d_out.data * x.data.transpose();
  if (d_b) d_b->data += d_out.data;
}

NdArray conv2d_forward(const NdArray& x, const NdArray& w, const NdArray& b,
                       ConvMeta m) {
  if (x.rank() != 3 || w.rank() != 4 || w.shape[1] != x.shape[0])
    throw ShapeError("conv2d: input " + x.shape_str() + " vs weights " +
                     w.shape_str());
  const int O = w.shape[0];
  const int K = w.shape[1] * w.shape[2] * w.shape[3];
  const int oh = conv_out_extent(x.shape[1], m.kernel, m.stride, m.pad);
  const int ow = conv_out_extent(x.shape[2], m.kernel, m.stride, m.pad);
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: empty output grid");
  RowMat cols = im2col(x, m, oh, ow);
  NdArray y = NdArray::zeros({O, oh, ow});
  // [O, K] x [K, P] -> [O, P], which is exactly the channel-major output.
  y.mat(O, oh * ow) = w.mat(O, K) * cols.transpose();
  for (int o = 0; o < O; ++o)
    y.mat(O, oh * ow).row(o).array() += b.data[o];
  return y;
}

void conv2d_backward(const NdArray& x, const NdArray& w, ConvMeta m,
                     const NdArray& d_out, NdArray* d_x, NdArray* d_w,
                     NdArray* d_b) {
  const int O = w.shape[0];
  const int K = w.shape[1] * w.shape[2] * w.shape[3];
  const int oh = d_out.shape[1], ow = d_out.shape[2];
  const int P = oh * ow;
  RowMat cols = im2col(x, m, oh, ow);
  auto dmat = d_out.mat(O, P);
  if (d_w) d_w->mat(O, K) += dmat * cols;
  if (d_b)
    for (int o = 0; o < O; ++o) d_b->data[o] += dmat.row(o).sum();
  if (d_x) {
    RowMat dcols = dmat.transpose() * w.mat(O, K);
    col2im(dcols, m, oh, ow, *d_x);
  }
}

NdArray forward(const LayerParams& params, const NdArray& input) {
  NdArray y = params.kind == LayerKind::Dense
                  ? dense_forward(input, params.weights, params.bias)
                  : conv2d_forward(input, params.weights, params.bias,
                                   params.conv);
  if (!y.all_finite()) throw DivergenceError("layer output is not finite");
  return y;
}

NdArray log_softmax(const NdArray& logits) {
  if (logits.rank() != 1 || logits.size() < 1)
    throw ShapeError("softmax expects a non-empty 1-D input");
  if (!logits.all_finite()) throw DivergenceError("softmax: non-finite logits");
  const float mx = logits.data.maxCoeff();
  NdArray out = NdArray::zeros(logits.shape);
  out.data = logits.data.array() - mx;
  float s = 0.f;
  for (int i = 0; i < out.size(); ++i) s += std::exp(out.data[i]);
  const float lse = std::log(s);
  out.data.array() -= lse;
  return out;
}

NdArray softmax(const NdArray& logits) {
  NdArray lsm = log_softmax(logits);
  for (int i = 0; i < lsm.size(); ++i) lsm.data[i] = std::exp(lsm.data[i]);
  return lsm;
}

}  // namespace girl
