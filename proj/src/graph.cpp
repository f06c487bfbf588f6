#include "actbench/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace actbench {

namespace {

// Decomposition of a row-major shape around one axis: element (o, j, i) of a
// line lives at flat index (o * len + j) * inner + i.
struct AxisView {
  std::int64_t outer;
  std::int64_t len;
  std::int64_t inner;
};

AxisView axis_view(const Shape& shape, int axis) {
  AxisView v{1, 1, 1};
  const int rank = static_cast<int>(shape.size());
  if (axis < 0 || axis >= rank)
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  for (int d = 0; d < axis; ++d) v.outer *= shape[static_cast<std::size_t>(d)];
  v.len = shape[static_cast<std::size_t>(axis)];
  for (int d = axis + 1; d < rank; ++d) v.inner *= shape[static_cast<std::size_t>(d)];
  return v;
}

void require_same_graph(Var a, Var b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
}

struct ConvDims {
  int channels, height, width;
  int filters, ksize;
  int out_h, out_w;
};

ConvDims conv_dims(const Shape& x, const Shape& w, const Shape& b, int stride, int pad) {
  if (x.size() != 3 || w.size() != 4 || b.size() != 1)
    throw ShapeError("conv2d: want x rank 3, w rank 4, b rank 1; got x " + shape_str(x) +
                     " w " + shape_str(w) + " b " + shape_str(b));
  if (w[2] != w[3]) throw ShapeError("conv2d: kernel must be square, got " + shape_str(w));
  if (w[1] != x[0])
    throw ShapeError("conv2d: input channels " + std::to_string(x[0]) +
                     " != kernel channels " + std::to_string(w[1]));
  if (b[0] != w[0])
    throw ShapeError("conv2d: bias dim " + std::to_string(b[0]) + " != filters " +
                     std::to_string(w[0]));
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (pad < 0) throw ShapeError("conv2d: padding must be >= 0");
  ConvDims d;
  d.channels = x[0];
  d.height = x[1];
  d.width = x[2];
  d.filters = w[0];
  d.ksize = w[2];
  d.out_h = (d.height + 2 * pad - d.ksize) / stride + 1;
  d.out_w = (d.width + 2 * pad - d.ksize) / stride + 1;
  if (d.height + 2 * pad < d.ksize || d.width + 2 * pad < d.ksize)
    throw ShapeError("conv2d: kernel " + std::to_string(d.ksize) + " larger than padded input");
  return d;
}

// col is (C*k*k, out_h*out_w); padding contributes zeros.
void im2col(const Tensor& x, const ConvDims& d, int stride, int pad, MatRM& col) {
  col.setZero(static_cast<Eigen::Index>(d.channels) * d.ksize * d.ksize,
              static_cast<Eigen::Index>(d.out_h) * d.out_w);
  const double* px = x.data.data();
  for (int c = 0; c < d.channels; ++c) {
    for (int i = 0; i < d.ksize; ++i) {
      for (int j = 0; j < d.ksize; ++j) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * d.ksize + i) * d.ksize + j;
        for (int oy = 0; oy < d.out_h; ++oy) {
          const int iy = oy * stride + i - pad;
          if (iy < 0 || iy >= d.height) continue;
          for (int ox = 0; ox < d.out_w; ++ox) {
            const int ix = ox * stride + j - pad;
            if (ix < 0 || ix >= d.width) continue;
            col(row, static_cast<Eigen::Index>(oy) * d.out_w + ox) =
                px[(static_cast<Eigen::Index>(c) * d.height + iy) * d.width + ix];
          }
        }
      }
    }
  }
}

void col2im_accumulate(const MatRM& dcol, const ConvDims& d, int stride, int pad, Tensor& dx) {
  double* px = dx.data.data();
  for (int c = 0; c < d.channels; ++c) {
    for (int i = 0; i < d.ksize; ++i) {
      for (int j = 0; j < d.ksize; ++j) {
        const Eigen::Index row = (static_cast<Eigen::Index>(c) * d.ksize + i) * d.ksize + j;
        for (int oy = 0; oy < d.out_h; ++oy) {
          const int iy = oy * stride + i - pad;
          if (iy < 0 || iy >= d.height) continue;
          for (int ox = 0; ox < d.out_w; ++ox) {
            const int ix = ox * stride + j - pad;
            if (ix < 0 || ix >= d.width) continue;
            px[(static_cast<Eigen::Index>(c) * d.height + iy) * d.width + ix] +=
                dcol(row, static_cast<Eigen::Index>(oy) * d.out_w + ox);
          }
        }
      }
    }
  }
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kRelu: return "relu";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kConcat: return "concat";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSlice: return "slice";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kExp: return "exp";
    case OpKind::kScale: return "scale";
    case OpKind::kL1Loss: return "l1_loss";
    case OpKind::kGaussianKl: return "gaussian_kl";
  }
  return "?";
}

Var Graph::value(Tensor t) {
  t.requires_grad = false;
  return record(OpKind::kLeaf, {}, std::move(t));
}

Var Graph::param(Tensor t) {
  t.requires_grad = true;
  return record(OpKind::kLeaf, {}, std::move(t));
}

Var Graph::record(OpKind op, std::vector<int> inputs, Tensor value) {
  if (!value.all_finite())
    throw NumericError(std::string(op_name(op)) + ": non-finite output " +
                       shape_str(value.shape));
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.requires_grad = value.requires_grad;
  for (int in : n.inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  value.requires_grad = n.requires_grad;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::grad(Var v) {
  Node& n = node(v.id);
  if (!n.grad_ready) return grad_buffer(v.id);
  return n.grad;
}

Tensor& Graph::grad_buffer(int id) {
  Node& n = node(id);
  if (!n.grad_ready) {
    n.grad = Tensor::zeros(n.value.shape);
    n.grad_ready = true;
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  if (!loss.valid() || loss.graph != this)
    throw std::invalid_argument("backward: loss is not a node of this graph");
  const Node& l = node(loss.id);
  if (!l.value.is_scalar())
    throw ShapeError("backward: loss must be scalar, got " + shape_str(l.value.shape));
  grad_buffer(loss.id).data.setConstant(1.0);
  for (int id = loss.id; id >= 0; --id) {
    const Node& n = node(id);
    if (n.op == OpKind::kLeaf || !n.requires_grad || !n.grad_ready) continue;
    backward_node(id);
  }
}

void Graph::backward_node(int id) {
  Node& n = node(id);
  const Tensor& g = n.grad;
  const auto in_val = [&](int i) -> const Tensor& { return node(n.inputs[static_cast<std::size_t>(i)]).value; };
  const auto wants = [&](int i) { return node(n.inputs[static_cast<std::size_t>(i)]).requires_grad; };
  const auto gbuf = [&](int i) -> Tensor& { return grad_buffer(n.inputs[static_cast<std::size_t>(i)]); };

  switch (n.op) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatmul: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      ConstMatMap gm(g.data.data(), a.shape[0], b.shape[1]);
      if (wants(0)) gbuf(0).mat().noalias() += gm * b.mat().transpose();
      if (wants(1)) gbuf(1).mat().noalias() += a.mat().transpose() * gm;
      break;
    }
    case OpKind::kAdd: {
      if (wants(0)) gbuf(0).data += g.data;
      if (wants(1)) {
        Tensor& db = gbuf(1);
        if (db.size() == g.size()) {
          db.data += g.data;
        } else {
          // bias broadcast: fold leading dims
          const Eigen::Index nbias = db.size();
          ConstMatMap gm(g.data.data(), g.size() / nbias, nbias);
          db.data.matrix().transpose() += gm.colwise().sum();
        }
      }
      break;
    }
    case OpKind::kMul: {
      if (wants(0)) gbuf(0).data += g.data * in_val(1).data;
      if (wants(1)) gbuf(1).data += g.data * in_val(0).data;
      break;
    }
    case OpKind::kRelu: {
      if (wants(0)) gbuf(0).data += g.data * (in_val(0).data > 0.0).cast<double>();
      break;
    }
    case OpKind::kSoftmax: {
      if (!wants(0)) break;
      const Tensor& y = n.value;
      Tensor& dx = gbuf(0);
      const AxisView v = axis_view(y.shape, n.axis);
      for (std::int64_t o = 0; o < v.outer; ++o) {
        for (std::int64_t i = 0; i < v.inner; ++i) {
          double dot = 0.0;
          for (std::int64_t j = 0; j < v.len; ++j) {
            const std::int64_t k = (o * v.len + j) * v.inner + i;
            dot += g.data[k] * y.data[k];
          }
          for (std::int64_t j = 0; j < v.len; ++j) {
            const std::int64_t k = (o * v.len + j) * v.inner + i;
            dx.data[k] += y.data[k] * (g.data[k] - dot);
          }
        }
      }
      break;
    }
    case OpKind::kLayerNorm: {
      const Tensor& x = in_val(0);
      const Tensor& gamma = in_val(1);
      const AxisView v = axis_view(x.shape, n.axis);
      const double inv_len = 1.0 / static_cast<double>(v.len);
      for (std::int64_t o = 0; o < v.outer; ++o) {
        for (std::int64_t i = 0; i < v.inner; ++i) {
          double mu = 0.0, var = 0.0;
          for (std::int64_t j = 0; j < v.len; ++j)
            mu += x.data[(o * v.len + j) * v.inner + i];
          mu *= inv_len;
          for (std::int64_t j = 0; j < v.len; ++j) {
            const double d = x.data[(o * v.len + j) * v.inner + i] - mu;
            var += d * d;
          }
          var *= inv_len;
          const double inv_sd = 1.0 / std::sqrt(var + kLayerNormEps);
          double m1 = 0.0, m2 = 0.0;
          for (std::int64_t j = 0; j < v.len; ++j) {
            const std::int64_t k = (o * v.len + j) * v.inner + i;
            const double xhat = (x.data[k] - mu) * inv_sd;
            const double gh = g.data[k] * gamma.data[j];
            m1 += gh;
            m2 += gh * xhat;
          }
          m1 *= inv_len;
          m2 *= inv_len;
          for (std::int64_t j = 0; j < v.len; ++j) {
            const std::int64_t k = (o * v.len + j) * v.inner + i;
            const double xhat = (x.data[k] - mu) * inv_sd;
            const double gh = g.data[k] * gamma.data[j];
            if (wants(0)) gbuf(0).data[k] += (gh - m1 - xhat * m2) * inv_sd;
            if (wants(1)) gbuf(1).data[j] += g.data[k] * xhat;
            if (wants(2)) gbuf(2).data[j] += g.data[k];
          }
        }
      }
      break;
    }
    case OpKind::kConv2d: {
      const Tensor& x = in_val(0);
      const Tensor& w = in_val(1);
      const ConvDims d = conv_dims(x.shape, w.shape, in_val(2).shape, n.i0, n.i1);
      const Eigen::Index ncol = static_cast<Eigen::Index>(d.out_h) * d.out_w;
      ConstMatMap gm(g.data.data(), d.filters, ncol);
      if (wants(2)) gbuf(2).data.matrix() += gm.rowwise().sum();
      MatRM col;
      im2col(x, d, n.i0, n.i1, col);
      if (wants(1)) gbuf(1).mat_as(d.filters, col.rows()).noalias() += gm * col.transpose();
      if (wants(0)) {
        MatRM dcol = w.mat_as(d.filters, col.rows()).transpose() * gm;
        col2im_accumulate(dcol, d, n.i0, n.i1, gbuf(0));
      }
      break;
    }
    case OpKind::kMean: {
      if (wants(0)) {
        Tensor& dx = gbuf(0);
        dx.data += g.data[0] / static_cast<double>(dx.size());
      }
      break;
    }
    case OpKind::kSum: {
      if (wants(0)) gbuf(0).data += g.data[0];
      break;
    }
    case OpKind::kConcat: {
      const AxisView v = axis_view(n.value.shape, n.axis);
      std::int64_t offset = 0;
      for (std::size_t idx = 0; idx < n.inputs.size(); ++idx) {
        const Tensor& xin = node(n.inputs[idx]).value;
        const std::int64_t part = xin.shape[static_cast<std::size_t>(n.axis)];
        if (node(n.inputs[idx]).requires_grad) {
          Tensor& dx = grad_buffer(n.inputs[idx]);
          for (std::int64_t o = 0; o < v.outer; ++o)
            for (std::int64_t j = 0; j < part; ++j)
              for (std::int64_t i = 0; i < v.inner; ++i)
                dx.data[(o * part + j) * v.inner + i] +=
                    g.data[(o * v.len + offset + j) * v.inner + i];
        }
        offset += part;
      }
      break;
    }
    case OpKind::kReshape: {
      if (wants(0)) gbuf(0).data += g.data;
      break;
    }
    case OpKind::kSlice: {
      if (!wants(0)) break;
      Tensor& dx = gbuf(0);
      const AxisView v = axis_view(dx.shape, n.axis);
      const std::int64_t len = n.i1;
      for (std::int64_t o = 0; o < v.outer; ++o)
        for (std::int64_t j = 0; j < len; ++j)
          for (std::int64_t i = 0; i < v.inner; ++i)
            dx.data[(o * v.len + n.i0 + j) * v.inner + i] += g.data[(o * len + j) * v.inner + i];
      break;
    }
    case OpKind::kTranspose: {
      if (wants(0)) {
        const Tensor& x = in_val(0);
        ConstMatMap gm(g.data.data(), x.shape[1], x.shape[0]);
        gbuf(0).mat() += gm.transpose();
      }
      break;
    }
    case OpKind::kExp: {
      if (wants(0)) gbuf(0).data += g.data * n.value.data;
      break;
    }
    case OpKind::kScale: {
      if (wants(0)) gbuf(0).data += n.c * g.data;
      break;
    }
    case OpKind::kL1Loss: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      const double s = g.data[0] / static_cast<double>(a.size());
      const Eigen::ArrayXd sgn = (a.data - b.data).sign();
      if (wants(0)) gbuf(0).data += s * sgn;
      if (wants(1)) gbuf(1).data -= s * sgn;
      break;
    }
    case OpKind::kGaussianKl: {
      const Tensor& mu = in_val(0);
      const Tensor& lv = in_val(1);
      const double s = g.data[0];
      if (wants(0)) gbuf(0).data += s * mu.data;
      if (wants(1)) gbuf(1).data += s * 0.5 * (lv.data.exp() - 1.0);
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// forward primitives
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_graph(a, b, "matmul");
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
    throw ShapeError("matmul: incompatible " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
  Tensor out = Tensor::zeros({ta.shape[0], tb.shape[1]});
  out.mat().noalias() = ta.mat() * tb.mat();
  return g.record(OpKind::kMatmul, {a.id, b.id}, std::move(out));
}

Var add(Var a, Var b) {
  require_same_graph(a, b, "add");
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  Tensor out;
  if (ta.shape == tb.shape) {
    out = Tensor(ta.shape, ta.data + tb.data);
  } else if (tb.rank() == 1 && ta.rank() >= 1 && ta.shape.back() == tb.shape[0]) {
    out = Tensor::zeros(ta.shape);
    const Eigen::Index nbias = tb.size();
    out.mat_as(ta.size() / nbias, nbias) =
        ta.mat_as(ta.size() / nbias, nbias).rowwise() + tb.data.matrix().transpose();
  } else {
    throw ShapeError("add: incompatible " + shape_str(ta.shape) + " + " + shape_str(tb.shape));
  }
  return g.record(OpKind::kAdd, {a.id, b.id}, std::move(out));
}

Var mul(Var a, Var b) {
  require_same_graph(a, b, "mul");
  Graph& g = *a.graph;
  const Tensor& ta = g.val(a);
  const Tensor& tb = g.val(b);
  if (ta.shape != tb.shape)
    throw ShapeError("mul: incompatible " + shape_str(ta.shape) + " * " + shape_str(tb.shape));
  return g.record(OpKind::kMul, {a.id, b.id}, Tensor(ta.shape, ta.data * tb.data));
}

Var relu(Var x) {
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  return g.record(OpKind::kRelu, {x.id}, Tensor(t.shape, t.data.max(0.0)));
}

Var softmax(Var x, int axis) {
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  const AxisView v = axis_view(t.shape, axis);
  Tensor out = Tensor::zeros(t.shape);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t j = 0; j < v.len; ++j)
        mx = std::max(mx, t.data[(o * v.len + j) * v.inner + i]);
      double denom = 0.0;
      for (std::int64_t j = 0; j < v.len; ++j) {
        const std::int64_t k = (o * v.len + j) * v.inner + i;
        out.data[k] = std::exp(t.data[k] - mx);
        denom += out.data[k];
      }
      for (std::int64_t j = 0; j < v.len; ++j) out.data[(o * v.len + j) * v.inner + i] /= denom;
    }
  }
  Var r = g.record(OpKind::kSoftmax, {x.id}, std::move(out));
  g.node(r.id).axis = axis;
  return r;
}

Var layer_norm(Var x, Var gamma, Var beta, int axis) {
  require_same_graph(x, gamma, "layer_norm");
  require_same_graph(x, beta, "layer_norm");
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  const Tensor& tg = g.val(gamma);
  const Tensor& tb = g.val(beta);
  const AxisView v = axis_view(t.shape, axis);
  if (tg.rank() != 1 || tg.shape[0] != v.len || tb.shape != tg.shape)
    throw ShapeError("layer_norm: gamma/beta must be rank 1 of dim " + std::to_string(v.len));
  Tensor out = Tensor::zeros(t.shape);
  const double inv_len = 1.0 / static_cast<double>(v.len);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      double mu = 0.0, var = 0.0;
      for (std::int64_t j = 0; j < v.len; ++j) mu += t.data[(o * v.len + j) * v.inner + i];
      mu *= inv_len;
      for (std::int64_t j = 0; j < v.len; ++j) {
        const double d = t.data[(o * v.len + j) * v.inner + i] - mu;
        var += d * d;
      }
      var *= inv_len;
      const double inv_sd = 1.0 / std::sqrt(var + kLayerNormEps);
      for (std::int64_t j = 0; j < v.len; ++j) {
        const std::int64_t k = (o * v.len + j) * v.inner + i;
        out.data[k] = (t.data[k] - mu) * inv_sd * tg.data[j] + tb.data[j];
      }
    }
  }
  Var r = g.record(OpKind::kLayerNorm, {x.id, gamma.id, beta.id}, std::move(out));
  g.node(r.id).axis = axis;
  return r;
}

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
  require_same_graph(x, w, "conv2d");
  require_same_graph(x, b, "conv2d");
  Graph& g = *x.graph;
  const Tensor& tx = g.val(x);
  const Tensor& tw = g.val(w);
  const Tensor& tb = g.val(b);
  const ConvDims d = conv_dims(tx.shape, tw.shape, tb.shape, stride, pad);
  MatRM col;
  im2col(tx, d, stride, pad, col);
  Tensor out = Tensor::zeros({d.filters, d.out_h, d.out_w});
  const Eigen::Index ncol = static_cast<Eigen::Index>(d.out_h) * d.out_w;
  MatMap om(out.data.data(), d.filters, ncol);
  om.noalias() = tw.mat_as(d.filters, col.rows()) * col;
  om.colwise() += tb.data.matrix();
  Var r = g.record(OpKind::kConv2d, {x.id, w.id, b.id}, std::move(out));
  g.node(r.id).i0 = stride;
  g.node(r.id).i1 = pad;
  return r;
}

Var mean(Var x) {
  Graph& g = *x.graph;
  return g.record(OpKind::kMean, {x.id}, Tensor::scalar(g.val(x).data.mean()));
}

Var sum(Var x) {
  Graph& g = *x.graph;
  return g.record(OpKind::kSum, {x.id}, Tensor::scalar(g.val(x).data.sum()));
}

Var concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  Graph& g = *xs[0].graph;
  Shape out_shape = g.val(xs[0]).shape;
  const int rank = static_cast<int>(out_shape.size());
  if (axis < 0 || axis >= rank)
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range");
  std::int64_t total = 0;
  std::vector<int> ids;
  for (Var x : xs) {
    require_same_graph(xs[0], x, "concat");
    const Shape& s = g.val(x).shape;
    if (static_cast<int>(s.size()) != rank)
      throw ShapeError("concat: rank mismatch " + shape_str(s) + " vs " + shape_str(out_shape));
    for (int d = 0; d < rank; ++d)
      if (d != axis && s[static_cast<std::size_t>(d)] != out_shape[static_cast<std::size_t>(d)])
        throw ShapeError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(out_shape));
    total += s[static_cast<std::size_t>(axis)];
    ids.push_back(x.id);
  }
  out_shape[static_cast<std::size_t>(axis)] = static_cast<int>(total);
  Tensor out = Tensor::zeros(out_shape);
  const AxisView v = axis_view(out_shape, axis);
  std::int64_t offset = 0;
  for (Var x : xs) {
    const Tensor& t = g.val(x);
    const std::int64_t part = t.shape[static_cast<std::size_t>(axis)];
    for (std::int64_t o = 0; o < v.outer; ++o)
      for (std::int64_t j = 0; j < part; ++j)
        for (std::int64_t i = 0; i < v.inner; ++i)
          out.data[(o * v.len + offset + j) * v.inner + i] =
              t.data[(o * part + j) * v.inner + i];
    offset += part;
  }
  Var r = g.record(OpKind::kConcat, std::move(ids), std::move(out));
  g.node(r.id).axis = axis;
  return r;
}

Var reshape(Var x, Shape target) {
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  if (shape_numel(target) != t.size())
    throw ShapeError("reshape: " + shape_str(t.shape) + " -> " + shape_str(target) +
                     " changes element count");
  return g.record(OpKind::kReshape, {x.id}, Tensor(std::move(target), t.data));
}

Var slice(Var x, int axis, int start, int len) {
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  const AxisView v = axis_view(t.shape, axis);
  if (start < 0 || len < 1 || start + len > v.len)
    throw ShapeError("slice: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of range for axis " + std::to_string(axis) + " of " +
                     shape_str(t.shape));
  Shape out_shape = t.shape;
  out_shape[static_cast<std::size_t>(axis)] = len;
  Tensor out = Tensor::zeros(out_shape);
  for (std::int64_t o = 0; o < v.outer; ++o)
    for (std::int64_t j = 0; j < len; ++j)
      for (std::int64_t i = 0; i < v.inner; ++i)
        out.data[(o * len + j) * v.inner + i] = t.data[(o * v.len + start + j) * v.inner + i];
  Var r = g.record(OpKind::kSlice, {x.id}, std::move(out));
  g.node(r.id).axis = axis;
  g.node(r.id).i0 = start;
  g.node(r.id).i1 = len;
  return r;
}

Var transpose(Var x) {
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  if (t.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(t.shape));
  Tensor out = Tensor::zeros({t.shape[1], t.shape[0]});
  out.mat() = t.mat().transpose();
  return g.record(OpKind::kTranspose, {x.id}, std::move(out));
}

Var exp(Var x) {
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  return g.record(OpKind::kExp, {x.id}, Tensor(t.shape, t.data.exp()));
}

Var scale(Var x, double c) {
  Graph& g = *x.graph;
  const Tensor& t = g.val(x);
  Var r = g.record(OpKind::kScale, {x.id}, Tensor(t.shape, c * t.data));
  g.node(r.id).c = c;
  return r;
}

Var l1_loss(Var pred, Var target) {
  require_same_graph(pred, target, "l1_loss");
  Graph& g = *pred.graph;
  const Tensor& a = g.val(pred);
  const Tensor& b = g.val(target);
  if (a.shape != b.shape)
    throw ShapeError("l1_loss: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  return g.record(OpKind::kL1Loss, {pred.id, target.id},
                  Tensor::scalar((a.data - b.data).abs().mean()));
}

Var gaussian_kl(Var mu, Var logvar) {
  require_same_graph(mu, logvar, "gaussian_kl");
  Graph& g = *mu.graph;
  const Tensor& m = g.val(mu);
  const Tensor& lv = g.val(logvar);
  if (m.shape != lv.shape)
    throw ShapeError("gaussian_kl: " + shape_str(m.shape) + " vs " + shape_str(lv.shape));
  const double kl = 0.5 * (m.data.square() + lv.data.exp() - 1.0 - lv.data).sum();
  return g.record(OpKind::kGaussianKl, {mu.id, logvar.id}, Tensor::scalar(kl));
}

}  // namespace actbench
