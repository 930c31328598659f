#include "mstcn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "mstcn/errors.hpp"

namespace mstcn {

namespace {

std::size_t checked_product(const std::vector<int>& shape) {
    if (shape.empty()) throw InvalidArgument("Tensor: shape must have at least one dimension");
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw InvalidArgument("Tensor: dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)), data_(checked_product(shape_), 0.0) {
    init_strides();
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (checked_product(shape_) != data_.size()) {
        throw InvalidArgument("Tensor: data length does not match shape " + shape_str());
    }
    init_strides();
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

void Tensor::init_strides() {
    cols_ = static_cast<std::size_t>(shape_.back());
    mid_ = shape_.size() == 3 ? static_cast<std::size_t>(shape_[1]) : 1;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

ParamTensor::ParamTensor(std::string param_name, Tensor initial)
    : name(std::move(param_name)),
      value(std::move(initial)),
      grad(Tensor::zeros(value.shape())),
      adam_m(Tensor::zeros(value.shape())),
      adam_v(Tensor::zeros(value.shape())) {}

void ParamTensor::zero_grad() {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = 0.0;
}

}  // namespace mstcn
