#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mstcn {

// Dense row-major tensor of 64-bit reals. Rank 1..3 is all the model needs.
//
// Tensors produced by forward ops are treated as immutable; training code
// mutates only ParamTensor members.
class Tensor {
  public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<int> shape);

    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D access, row-major: (row, col).
    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(c)]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(c)]; }

    // 3-D access: (a, b, c) with strides (dim1*dim2, dim2, 1).
    double& operator()(int a, int b, int c) {
        return data_[(static_cast<std::size_t>(a) * mid_ + static_cast<std::size_t>(b)) * cols_ + static_cast<std::size_t>(c)];
    }
    double operator()(int a, int b, int c) const {
        return data_[(static_cast<std::size_t>(a) * mid_ + static_cast<std::size_t>(b)) * cols_ + static_cast<std::size_t>(c)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    std::string shape_str() const;

  private:
    std::vector<int> shape_;
    std::vector<double> data_;
    // Cached strides for the 2-D / 3-D accessors.
    std::size_t cols_ = 1;
    std::size_t mid_ = 1;

    void init_strides();
};

// Trainable tensor: value plus gradient and Adam state, all same shape.
// grad is zeroed at the start of each accumulation pass; adam_step never
// touches it.
struct ParamTensor {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    long step_count = 0;

    ParamTensor() = default;
    ParamTensor(std::string param_name, Tensor initial);

    void zero_grad();
    std::size_t size() const { return value.size(); }
};

}  // namespace mstcn
