#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace actbench {

using Shape = std::vector<int>;

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatRM>;
using ConstMatMap = Eigen::Map<const MatRM>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense f64 tensor, row-major flat storage. Rank 0 is a scalar with one
// element. 2-D views onto the buffer are taken with Eigen::Map.
struct Tensor {
  Shape shape;
  Eigen::ArrayXd data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(Shape s, Eigen::ArrayXd d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size())
      throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                       std::to_string(data.size()) + " values");
    for (int dim : shape)
      if (dim <= 0) throw ShapeError("tensor: non-positive dim in " + shape_str(shape));
  }

  static Tensor zeros(Shape s) {
    Eigen::ArrayXd d = Eigen::ArrayXd::Zero(shape_numel(s));
    return Tensor(std::move(s), std::move(d));
  }
  static Tensor full(Shape s, double v) {
    Eigen::ArrayXd d = Eigen::ArrayXd::Constant(shape_numel(s), v);
    return Tensor(std::move(s), std::move(d));
  }
  static Tensor scalar(double v) { return full({}, v); }
  static Tensor from(Shape s, std::initializer_list<double> vals) {
    Eigen::ArrayXd d(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double v : vals) d[i++] = v;
    return Tensor(std::move(s), std::move(d));
  }
  static Tensor from_vector(Shape s, const std::vector<double>& vals) {
    Eigen::ArrayXd d(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) d[static_cast<Eigen::Index>(i)] = vals[i];
    return Tensor(std::move(s), std::move(d));
  }

  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t size() const { return data.size(); }
  bool is_scalar() const { return data.size() == 1; }
  double scalar_value() const {
    if (!is_scalar()) throw ShapeError("tensor: scalar_value on " + shape_str(shape));
    return data[0];
  }

  int dim(int axis) const { return shape[static_cast<std::size_t>(axis)]; }
  int rows() const { return rank() == 2 ? shape[0] : throw_rank2(); }
  int cols() const { return rank() == 2 ? shape[1] : throw_rank2(); }

  MatMap mat() { return MatMap(data.data(), rows(), cols()); }
  ConstMatMap mat() const { return ConstMatMap(data.data(), rows(), cols()); }
  MatMap mat_as(int r, int c) { return MatMap(data.data(), r, c); }
  ConstMatMap mat_as(int r, int c) const { return ConstMatMap(data.data(), r, c); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const { return data.allFinite(); }

 private:
  int throw_rank2() const { throw ShapeError("tensor: expected rank 2, got " + shape_str(shape)); }
};

}  // namespace actbench
