#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spikegrasp/error.hpp"
#include "spikegrasp/rng.hpp"

namespace spikegrasp::nn {

// Dense row-major double tensor, up to 4 dimensions. Double precision keeps
// the finite-difference gradient checks far from float noise.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel_of(shape_), 0.0);
  }
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == numel_of(shape_), errc::shape_mismatch,
            "tensor data does not match shape");
  }

  static std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      require(d > 0, errc::shape_mismatch, "tensor dims must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  // Uniform(-bound, bound) with bound = 1/sqrt(fan_in): the seeded scaled
  // initialization recorded in the checkpoints.
  static Tensor uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in))
                              : 1.0;
    for (auto& x : t.data_) x = rng.uniform(-bound, bound);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 3D (C,H,W) and 2D (N,C) accessors used throughout the network code.
  double& at3(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at3(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double& at2(int i, int j) {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double at2(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::fabs(x));
    return m;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace spikegrasp::nn
