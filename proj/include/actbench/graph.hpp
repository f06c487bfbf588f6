#pragma once

#include "actbench/tensor.hpp"

#include <string>
#include <vector>

namespace actbench {

// Reverse-mode tape. Primitives append nodes in topological order; backward()
// is a single reverse sweep that visits each node at most once. Every forward
// result is checked for finiteness and a NumericError names the offending op.
//
// Broadcasting is restricted to the trailing-dimension bias form of add():
// (..., n) + (n). Everything else requires exact shape agreement.

enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kMul,
  kRelu,
  kSoftmax,
  kLayerNorm,
  kConv2d,
  kMean,
  kSum,
  kConcat,
  kReshape,
  kSlice,
  kTranspose,
  kExp,
  kScale,
  kL1Loss,
  kGaussianKl,
};

const char* op_name(OpKind k);

class Graph;

struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. value() is a constant; param() participates in backward().
  Var value(Tensor t);
  Var param(Tensor t);

  const Tensor& val(Var v) const { return node(v.id).value; }
  // Zero tensor until backward() reaches the node (detached graphs included).
  const Tensor& grad(Var v);

  // loss must hold exactly one element.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op = OpKind::kLeaf;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;  // allocated on demand during backward
    bool requires_grad = false;
    bool grad_ready = false;
    // op attributes
    int axis = 0;
    int i0 = 0;  // slice start / conv stride
    int i1 = 0;  // slice length / conv padding
    double c = 0.0;
  };

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Var record(OpKind op, std::vector<int> inputs, Tensor value);
  Tensor& grad_buffer(int id);
  void backward_node(int id);

  std::vector<Node> nodes_;

  friend Var matmul(Var, Var);
  friend Var add(Var, Var);
  friend Var mul(Var, Var);
  friend Var relu(Var);
  friend Var softmax(Var, int);
  friend Var layer_norm(Var, Var, Var, int);
  friend Var conv2d(Var, Var, Var, int, int);
  friend Var mean(Var);
  friend Var sum(Var);
  friend Var concat(const std::vector<Var>&, int);
  friend Var reshape(Var, Shape);
  friend Var slice(Var, int, int, int);
  friend Var transpose(Var);
  friend Var exp(Var);
  friend Var scale(Var, double);
  friend Var l1_loss(Var, Var);
  friend Var gaussian_kl(Var, Var);
};

// Primitives. All are pure with respect to their input tensors.
Var matmul(Var a, Var b);                              // (m,k) x (k,n)
Var add(Var a, Var b);                                 // same shape, or (...,n)+(n)
Var mul(Var a, Var b);                                 // elementwise, same shape
Var relu(Var x);
Var softmax(Var x, int axis);                          // sums to 1 along axis
Var layer_norm(Var x, Var gamma, Var beta, int axis);  // gamma/beta rank-1 of dim(axis)
Var conv2d(Var x, Var w, Var b, int stride, int pad);  // x (C,H,W), w (F,C,k,k), b (F)
Var mean(Var x);                                       // full reduction to scalar
Var sum(Var x);
Var concat(const std::vector<Var>& xs, int axis);
Var reshape(Var x, Shape target);
Var slice(Var x, int axis, int start, int len);
Var transpose(Var x);                                  // rank 2
Var exp(Var x);
Var scale(Var x, double c);
Var l1_loss(Var pred, Var target);                     // mean |pred - target|
Var gaussian_kl(Var mu, Var logvar);                   // sum KL(N(mu,sigma^2) || N(0,I))

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace actbench
