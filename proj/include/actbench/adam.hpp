#pragma once

#include "actbench/tensor.hpp"

#include <cstdint>
#include <vector>

namespace actbench {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by position, so every
// step() call must pass the same parameter list in the same order.
class Adam {
 public:
  Adam(AdamHyper hyper, const std::vector<Shape>& param_shapes);

  // params[i] -= lr * mhat / (sqrt(vhat) + eps), with
  // mhat = m / (1 - beta1^t), vhat = v / (1 - beta2^t).
  void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

  std::int64_t step_count() const { return step_count_; }
  const AdamHyper& hyper() const { return hyper_; }

 private:
  AdamHyper hyper_;
  std::int64_t step_count_ = 0;
  std::vector<Eigen::ArrayXd> m_;
  std::vector<Eigen::ArrayXd> v_;
  std::vector<Shape> shapes_;
};

}  // namespace actbench
