#include "actbench/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace actbench {

Adam::Adam(AdamHyper hyper, const std::vector<Shape>& param_shapes)
    : hyper_(hyper), shapes_(param_shapes) {
  if (!(hyper_.lr > 0.0)) throw std::invalid_argument("adam: lr must be > 0");
  if (!(hyper_.beta1 >= 0.0 && hyper_.beta1 < 1.0))
    throw std::invalid_argument("adam: beta1 must be in [0, 1)");
  if (!(hyper_.beta2 >= 0.0 && hyper_.beta2 < 1.0))
    throw std::invalid_argument("adam: beta2 must be in [0, 1)");
  if (!(hyper_.eps > 0.0)) throw std::invalid_argument("adam: eps must be > 0");
  m_.reserve(shapes_.size());
  v_.reserve(shapes_.size());
  for (const Shape& s : shapes_) {
    m_.push_back(Eigen::ArrayXd::Zero(shape_numel(s)));
    v_.push_back(Eigen::ArrayXd::Zero(shape_numel(s)));
  }
}

void Adam::step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != shapes_.size() || grads.size() != shapes_.size())
    throw std::invalid_argument("adam: got " + std::to_string(params.size()) + " params, " +
                                std::to_string(grads.size()) + " grads, expected " +
                                std::to_string(shapes_.size()));
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(hyper_.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper_.beta2, t);
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (p.shape != shapes_[i] || g.shape != shapes_[i])
      throw ShapeError("adam: param " + std::to_string(i) + " shape " + shape_str(p.shape) +
                       " / grad " + shape_str(g.shape) + " != " + shape_str(shapes_[i]));
    m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * g.data;
    v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * g.data.square();
    p.data -= hyper_.lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + hyper_.eps);
  }
}

}  // namespace actbench
