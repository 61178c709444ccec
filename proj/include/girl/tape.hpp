#pragma once

#include <functional>
#include <vector>

#include "girl/layers.hpp"
#include "girl/ndarray.hpp"

namespace girl {

// Handle to a value node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode gradient tape scoped to one forward pass. Ops append nodes;
// backward() walks them in reverse. With recording off the same ops produce
// bit-identical values but skip gradient bookkeeping (inference mode).
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Var leaf(const NdArray& v, bool needs_grad = false);

  Var dense(Var x, Var w, Var b);
  Var conv2d(Var x, Var w, Var b, ConvMeta m);
  Var relu(Var x);
  Var concat_ch(const std::vector<Var>& xs);  // rank-3, shared H and W
  Var log_softmax(Var x);                     // 1-D
  Var pick(Var x, int index);                 // 1-D -> scalar {1}

  Var sum(Var x);           // -> scalar {1}
  Var mean(Var x);          // -> scalar {1}
  Var spatial_mean(Var x);  // [C,H,W] -> [C]
  Var reshape(Var x, std::vector<int> shape);  // same element count

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var add_const(Var x, float c);
  Var mul_const(Var x, float c);
  Var neg(Var x) { return mul_const(x, -1.f); }
  Var exp_(Var x);
  Var square(Var x);
  Var clamp(Var x, float lo, float hi);
  Var min2(Var a, Var b);  // elementwise minimum; ties route gradient to a

  // Numerically stable binary cross-entropy on a scalar logit with a
  // constant target in {0,1}; returns scalar loss.
  Var bce_with_logits(Var logit, float target);

  void backward(Var loss);

  const NdArray& val(Var v) const { return nodes_[check(v)].value; }
  const NdArray& grad(Var v) const;
  float scalar(Var v) const;
  bool recording() const { return recording_; }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  // Backward closure: receives this node's forward value and output gradient
  // and accumulates into the parents' gradients.
  using BackFn = std::function<void(Tape&, const NdArray&, const NdArray&)>;

  struct Node {
    NdArray value;
    NdArray grad;  // allocated only while recording and needs_grad
    bool needs_grad = false;
    BackFn back;
  };

  int check(Var v) const;
  bool wants(Var v) const { return nodes_[check(v)].needs_grad; }
  Var push(NdArray value, bool needs_grad, BackFn back);
  NdArray& grad_mut(Var v) { return nodes_[check(v)].grad; }

  std::vector<Node> nodes_;
  bool recording_;
  bool ran_backward_ = false;
};

}  // namespace girl
