#include "girl/tape.hpp"

#include <cmath>

namespace girl {

int Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw LogicError("tape: use of an invalid node handle");
  return v.id;
}

const NdArray& Tape::grad(Var v) const {
  const Node& n = nodes_[check(v)];
  if (!ran_backward_) throw LogicError("tape: gradient read before backward");
  if (!n.needs_grad) throw LogicError("tape: node does not carry a gradient");
  return n.grad;
}

float Tape::scalar(Var v) const {
  const NdArray& a = val(v);
  if (a.size() != 1) throw ShapeError("tape: scalar() on " + a.shape_str());
  return a.data[0];
}

Var Tape::push(NdArray value, bool needs_grad, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = recording_ && needs_grad;
  if (n.needs_grad) {
    n.grad = NdArray::zeros(n.value.shape);
    n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const NdArray& v, bool needs_grad) {
  return push(v, needs_grad, nullptr);
}

Var Tape::dense(Var x, Var w, Var b) {
  NdArray y = dense_forward(val(x), val(w), val(b));
  bool ng = wants(x) || wants(w) || wants(b);
  return push(std::move(y), ng,
              [x, w, b](Tape& t, const NdArray&, const NdArray& dy) {
                dense_backward(t.val(x), t.val(w), dy,
                               t.wants(x) ? &t.grad_mut(x) : nullptr,
                               t.wants(w) ? &t.grad_mut(w) : nullptr,
                               t.wants(b) ? &t.grad_mut(b) : nullptr);
              });
}

Var Tape::conv2d(Var x, Var w, Var b, ConvMeta m) {
  NdArray y = conv2d_forward(val(x), val(w), val(b), m);
  bool ng = wants(x) || wants(w) || wants(b);
  return push(std::move(y), ng,
              [x, w, b, m](Tape& t, const NdArray&, const NdArray& dy) {
                conv2d_backward(t.val(x), t.val(w), m, dy,
                                t.wants(x) ? &t.grad_mut(x) : nullptr,
                                t.wants(w) ? &t.grad_mut(w) : nullptr,
                                t.wants(b) ? &t.grad_mut(b) : nullptr);
              });
}

Var Tape::relu(Var x) {
  NdArray y = val(x);
  for (int i = 0; i < y.size(); ++i) y.data[i] = std::max(0.f, y.data[i]);
  return push(std::move(y), wants(x),
              [x](Tape& t, const NdArray&, const NdArray& dy) {
                const NdArray& xv = t.val(x);
                NdArray& dx = t.grad_mut(x);
                for (int i = 0; i < xv.size(); ++i)
                  if (xv.data[i] > 0.f) dx.data[i] += dy.data[i];
              });
}

Var Tape::concat_ch(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_ch: no inputs");
  const NdArray& first = val(xs[0]);
  if (first.rank() != 3) throw ShapeError("concat_ch: expects rank-3 inputs");
  const int h = first.shape[1], w = first.shape[2];
  int ctot = 0;
  bool ng = false;
  for (Var v : xs) {
    const NdArray& a = val(v);
    if (a.rank() != 3 || a.shape[1] != h || a.shape[2] != w)
      throw ShapeError("concat_ch: spatial extents differ");
    ctot += a.shape[0];
    ng = ng || wants(v);
  }
  NdArray y = NdArray::zeros({ctot, h, w});
  int off = 0;
  for (Var v : xs) {
    const NdArray& a = val(v);
    y.data.segment(off, a.size()) = a.data;
    off += a.size();
  }
  auto parts = xs;
  return push(std::move(y), ng,
              [parts](Tape& t, const NdArray&, const NdArray& dy) {
                int off = 0;
                for (Var v : parts) {
                  const int n = t.val(v).size();
                  if (t.wants(v)) t.grad_mut(v).data += dy.data.segment(off, n);
                  off += n;
                }
              });
}

Var Tape::log_softmax(Var x) {
  NdArray y = girl::log_softmax(val(x));
  return push(std::move(y), wants(x),
              [x](Tape& t, const NdArray& y, const NdArray& dy) {
                const float total = dy.data.sum();
                NdArray& dx = t.grad_mut(x);
                for (int i = 0; i < y.size(); ++i)
                  dx.data[i] += dy.data[i] - std::exp(y.data[i]) * total;
              });
}

Var Tape::pick(Var x, int index) {
  const NdArray& xv = val(x);
  if (xv.rank() != 1 || index < 0 || index >= xv.size())
    throw ShapeError("pick: index out of range");
  NdArray y = NdArray::zeros({1});
  y.data[0] = xv.data[index];
  return push(std::move(y), wants(x),
              [x, index](Tape& t, const NdArray&, const NdArray& dy) {
                t.grad_mut(x).data[index] += dy.data[0];
              });
}

Var Tape::sum(Var x) {
  NdArray y = NdArray::zeros({1});
  y.data[0] = val(x).data.sum();
  return push(std::move(y), wants(x),
              [x](Tape& t, const NdArray&, const NdArray& dy) {
                t.grad_mut(x).data.array() += dy.data[0];
              });
}

Var Tape::mean(Var x) {
  const int n = val(x).size();
  NdArray y = NdArray::zeros({1});
  y.data[0] = val(x).data.sum() / n;
  return push(std::move(y), wants(x),
              [x, n](Tape& t, const NdArray&, const NdArray& dy) {
                t.grad_mut(x).data.array() += dy.data[0] / n;
              });
}

Var Tape::spatial_mean(Var x) {
  const NdArray& xv = val(x);
  if (xv.rank() != 3) throw ShapeError("spatial_mean: expects rank 3");
  const int C = xv.shape[0], P = xv.shape[1] * xv.shape[2];
  NdArray y = NdArray::zeros({C});
  for (int c = 0; c < C; ++c) y.data[c] = xv.data.segment(c * P, P).sum() / P;
  return push(std::move(y), wants(x),
              [x, C, P](Tape& t, const NdArray&, const NdArray& dy) {
                NdArray& dx = t.grad_mut(x);
                for (int c = 0; c < C; ++c)
                  dx.data.segment(c * P, P).array() += dy.data[c] / P;
              });
}

Var Tape::reshape(Var x, std::vector<int> shape) {
  const NdArray& xv = val(x);
  NdArray y = NdArray::zeros(shape);
  if (y.size() != xv.size())
    throw ShapeError("reshape: " + xv.shape_str() + " has " + std::to_string(xv.size()) +
                     " elements, target " + y.shape_str() + " has " + std::to_string(y.size()));
  y.data = xv.data;
  return push(std::move(y), wants(x),
              [x](Tape& t, const NdArray&, const NdArray& dy) {
                t.grad_mut(x).data += dy.data;
              });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(val(a), val(b), "add");
  NdArray y = val(a);
  y.data += val(b).data;
  return push(std::move(y), wants(a) || wants(b),
              [a, b](Tape& t, const NdArray&, const NdArray& dy) {
                if (t.wants(a)) t.grad_mut(a).data += dy.data;
                if (t.wants(b)) t.grad_mut(b).data += dy.data;
              });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(val(a), val(b), "sub");
  NdArray y = val(a);
  y.data -= val(b).data;
  return push(std::move(y), wants(a) || wants(b),
              [a, b](Tape& t, const NdArray&, const NdArray& dy) {
                if (t.wants(a)) t.grad_mut(a).data += dy.data;
                if (t.wants(b)) t.grad_mut(b).data -= dy.data;
              });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(val(a), val(b), "mul");
  NdArray y = val(a);
  y.data.array() *= val(b).data.array();
  return push(std::move(y), wants(a) || wants(b),
              [a, b](Tape& t, const NdArray&, const NdArray& dy) {
                if (t.wants(a))
                  t.grad_mut(a).data.array() +=
                      dy.data.array() * t.val(b).data.array();
                if (t.wants(b))
                  t.grad_mut(b).data.array() +=
                      dy.data.array() * t.val(a).data.array();
              });
}

Var Tape::add_const(Var x, float c) {
  NdArray y = val(x);
  y.data.array() += c;
  return push(std::move(y), wants(x),
              [x](Tape& t, const NdArray&, const NdArray& dy) {
                t.grad_mut(x).data += dy.data;
              });
}

Var Tape::mul_const(Var x, float c) {
  NdArray y = val(x);
  y.data *= c;
  return push(std::move(y), wants(x),
              [x, c](Tape& t, const NdArray&, const NdArray& dy) {
                t.grad_mut(x).data += c * dy.data;
              });
}

Var Tape::exp_(Var x) {
  NdArray y = val(x);
  for (int i = 0; i < y.size(); ++i) y.data[i] = std::exp(y.data[i]);
  return push(std::move(y), wants(x),
              [x](Tape& t, const NdArray& y, const NdArray& dy) {
                t.grad_mut(x).data.array() += dy.data.array() * y.data.array();
              });
}

Var Tape::square(Var x) {
  NdArray y = val(x);
  y.data.array() *= y.data.array();
  return push(std::move(y), wants(x),
              [x](Tape& t, const NdArray&, const NdArray& dy) {
                t.grad_mut(x).data.array() +=
                    2.f * dy.data.array() * t.val(x).data.array();
              });
}

Var Tape::clamp(Var x, float lo, float hi) {
  NdArray y = val(x);
  for (int i = 0; i < y.size(); ++i)
    y.data[i] = std::min(hi, std::max(lo, y.data[i]));
  return push(std::move(y), wants(x),
              [x, lo, hi](Tape& t, const NdArray&, const NdArray& dy) {
                const NdArray& xv = t.val(x);
                NdArray& dx = t.grad_mut(x);
                for (int i = 0; i < xv.size(); ++i)
                  if (xv.data[i] >= lo && xv.data[i] <= hi)
                    dx.data[i] += dy.data[i];
              });
}

Var Tape::min2(Var a, Var b) {
  require_same_shape(val(a), val(b), "min2");
  NdArray y = val(a);
  for (int i = 0; i < y.size(); ++i)
    y.data[i] = std::min(y.data[i], val(b).data[i]);
  return push(std::move(y), wants(a) || wants(b),
              [a, b](Tape& t, const NdArray&, const NdArray& dy) {
                const NdArray& av = t.val(a);
                const NdArray& bv = t.val(b);
                for (int i = 0; i < av.size(); ++i) {
                  if (av.data[i] <= bv.data[i]) {
                    if (t.wants(a)) t.grad_mut(a).data[i] += dy.data[i];
                  } else if (t.wants(b)) {
                    t.grad_mut(b).data[i] += dy.data[i];
                  }
                }
              });
}

Var Tape::bce_with_logits(Var logit, float target) {
  const NdArray& zv = val(logit);
  if (zv.size() != 1) throw ShapeError("bce_with_logits: scalar logit only");
  const float z = zv.data[0];
  NdArray y = NdArray::zeros({1});
  y.data[0] =
      std::max(z, 0.f) - target * z + std::log1p(std::exp(-std::abs(z)));
  return push(std::move(y), wants(logit),
              [logit, target](Tape& t, const NdArray&, const NdArray& dy) {
                const float z = t.val(logit).data[0];
                const float sig = 1.f / (1.f + std::exp(-z));
                t.grad_mut(logit).data[0] += (sig - target) * dy.data[0];
              });
}

void Tape::backward(Var loss) {
  Node& root = nodes_[check(loss)];
  if (root.value.size() != 1)
    throw LogicError("tape: backward requires a scalar loss");
  if (!recording_) throw LogicError("tape: backward on a non-recording tape");
  if (!root.needs_grad)
    throw LogicError("tape: loss does not depend on any gradient leaf");
  if (ran_backward_) throw LogicError("tape: backward ran twice");
  ran_backward_ = true;
  root.grad.data[0] = 1.f;
  for (int i = check(loss); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.back) n.back(*this, n.value, n.grad);
  }
}

}  // namespace girl
