#pragma once

#include "mstcn/tensor.hpp"

namespace mstcn {

// Layer ops over [T x C] activations. Every op preserves the sequence
// length T, and every op has an exact analytic backward.
//
// Gradient convention: the *_backward functions take the upstream gradient
// dL/dy and the forward inputs, and return dL/d(input) plus parameter
// gradients where applicable. Parameter gradients are returned, not
// accumulated; callers add them into ParamTensor::grad.

// Acausal (centered) dilated convolution.
//   x: [T x Cin], w: [K x Cin x Cout], b: [Cout], K odd, dilation >= 1.
//   y[t,o] = b[o] + sum_{k,i} w[k,i,o] * x[t + (k - (K-1)/2) * dilation, i]
// with zero padding of dilation*(K-1)/2 on each side, so y is [T x Cout].
Tensor conv1d_dilated(const Tensor& x, const Tensor& w, const Tensor& b, int dilation);

struct Conv1dGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};
Conv1dGrads conv1d_dilated_backward(const Tensor& gy, const Tensor& x, const Tensor& w, int dilation);

// Per-sample affine map (1x1 convolution). x: [T x Cin], w: [Cin x Cout], b: [Cout].
Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& b);

struct PointwiseGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};
PointwiseGrads pointwise_conv_backward(const Tensor& gy, const Tensor& x, const Tensor& w);

// Elementwise max(0, x). Gradient at x == 0 is defined as 0.
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& gy, const Tensor& x);

// Row-wise softmax over the class axis of [T x C], stabilized by row-max
// subtraction. Rows sum to 1 within 1e-12.
Tensor softmax_over_classes(const Tensor& x);

// dL/dlogits given dL/dprobs and the forward probs.
Tensor softmax_backward(const Tensor& gprobs, const Tensor& probs);

// Elementwise sum of two same-shape tensors.
Tensor residual_add(const Tensor& a, const Tensor& b);

struct ResidualGrads {
    Tensor da;
    Tensor db;
};

// Sum rule: the upstream gradient flows unchanged to both inputs. The
// model's backward applies this in place; exposed here so the op pair is
// complete and testable.
ResidualGrads residual_add_backward(const Tensor& gy);

}  // namespace mstcn
