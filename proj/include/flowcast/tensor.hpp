#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flowcast {

/// Dense row-major tensor of doubles, rank 1..4. Cheap to move, explicit to
/// copy via the usual value semantics. Indexing with operator() is unchecked.
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int64_t s : shape_) {
      if (s < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= s;
    }
    data_.assign(static_cast<size_t>(n), 0.0);
    init_strides();
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int64_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  static Tensor from(std::vector<int64_t> shape, std::vector<double> data) {
    Tensor t;
    t.shape_ = std::move(shape);
    int64_t n = 1;
    for (int64_t s : t.shape_) n *= s;
    if (n != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("Tensor::from: shape/data size mismatch");
    t.data_ = std::move(data);
    t.init_strides();
    return t;
  }

  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator()(int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator()(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& operator()(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * st_[0] + j)]; }
  double operator()(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * st_[0] + j)]; }
  double& operator()(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>(i * st_[0] + j * st_[1] + k)];
  }
  double operator()(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>(i * st_[0] + j * st_[1] + k)];
  }
  double& operator()(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data_[static_cast<size_t>(i * st_[0] + j * st_[1] + k * st_[2] + l)];
  }
  double operator()(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data_[static_cast<size_t>(i * st_[0] + j * st_[1] + k * st_[2] + l)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  Tensor reshaped(std::vector<int64_t> shape) const {
    Tensor t;
    t.shape_ = std::move(shape);
    int64_t n = 1;
    for (int64_t s : t.shape_) n *= s;
    if (n != numel()) throw std::invalid_argument("Tensor::reshaped: numel mismatch");
    t.data_ = data_;
    t.init_strides();
    return t;
  }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

private:
  void init_strides() {
    st_[0] = st_[1] = st_[2] = 1;
    const size_t r = shape_.size();
    if (r >= 2) {
      // stride of axis i = product of dims after it
      for (size_t i = 0; i + 1 < r && i < 3; ++i) {
        int64_t p = 1;
        for (size_t j = i + 1; j < r; ++j) p *= shape_[j];
        st_[i] = p;
      }
    }
  }

  std::vector<int64_t> shape_;
  std::vector<double> data_;
  int64_t st_[3] = {1, 1, 1};
};

}  // namespace flowcast
