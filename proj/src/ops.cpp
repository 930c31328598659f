#include "mstcn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mstcn/errors.hpp"

namespace mstcn {

namespace {

void require_conv_shapes(const Tensor& x, const Tensor& w, const Tensor* b, int dilation) {
    if (dilation < 1) throw InvalidArgument("conv1d_dilated: dilation must be >= 1");
    if (x.rank() != 2 || w.rank() != 3) {
        throw ContractError("conv1d_dilated: expected x [TxCin], w [KxCinxCout], got " + x.shape_str() + " and " + w.shape_str());
    }
    const int kernel = w.dim(0);
    if (kernel % 2 == 0) throw InvalidArgument("conv1d_dilated: kernel size must be odd");
    if (w.dim(1) != x.dim(1)) {
        throw ContractError("conv1d_dilated: input channels " + x.shape_str() + " do not match kernel " + w.shape_str());
    }
    if (b && (b->rank() != 1 || b->dim(0) != w.dim(2))) {
        throw ContractError("conv1d_dilated: bias shape " + b->shape_str() + " does not match Cout");
    }
}

void require_pointwise_shapes(const Tensor& x, const Tensor& w, const Tensor* b) {
    if (x.rank() != 2 || w.rank() != 2) {
        throw ContractError("pointwise_conv: expected x [TxCin], w [CinxCout], got " + x.shape_str() + " and " + w.shape_str());
    }
    if (w.dim(0) != x.dim(1)) {
        throw ContractError("pointwise_conv: input channels " + x.shape_str() + " do not match weights " + w.shape_str());
    }
    if (b && (b->rank() != 1 || b->dim(0) != w.dim(1))) {
        throw ContractError("pointwise_conv: bias shape " + b->shape_str() + " does not match Cout");
    }
}

}  // namespace

Tensor conv1d_dilated(const Tensor& x, const Tensor& w, const Tensor& b, int dilation) {
    require_conv_shapes(x, w, &b, dilation);
    const int t_len = x.dim(0);
    const int c_in = x.dim(1);
    const int kernel = w.dim(0);
    const int c_out = w.dim(2);
    const int center = (kernel - 1) / 2;

    Tensor y({t_len, c_out});
    for (int t = 0; t < t_len; ++t) {
        double* yrow = y.data() + static_cast<std::size_t>(t) * c_out;
        for (int o = 0; o < c_out; ++o) yrow[o] = b[static_cast<std::size_t>(o)];
        for (int k = 0; k < kernel; ++k) {
            const int src = t + (k - center) * dilation;
            if (src < 0 || src >= t_len) continue;
            const double* xrow = x.data() + static_cast<std::size_t>(src) * c_in;
            const double* wslab = w.data() + static_cast<std::size_t>(k) * c_in * c_out;
            for (int i = 0; i < c_in; ++i) {
                const double xv = xrow[i];
                if (xv == 0.0) continue;
                const double* wrow = wslab + static_cast<std::size_t>(i) * c_out;
                for (int o = 0; o < c_out; ++o) yrow[o] += xv * wrow[o];
            }
        }
    }
    return y;
}

Conv1dGrads conv1d_dilated_backward(const Tensor& gy, const Tensor& x, const Tensor& w, int dilation) {
    require_conv_shapes(x, w, nullptr, dilation);
    const int t_len = x.dim(0);
    const int c_in = x.dim(1);
    const int kernel = w.dim(0);
    const int c_out = w.dim(2);
    const int center = (kernel - 1) / 2;
    if (gy.rank() != 2 || gy.dim(0) != t_len || gy.dim(1) != c_out) {
        throw ContractError("conv1d_dilated_backward: upstream gradient shape " + gy.shape_str() + " mismatch");
    }

    Conv1dGrads g{Tensor({t_len, c_in}), Tensor({kernel, c_in, c_out}), Tensor({c_out})};
    for (int t = 0; t < t_len; ++t) {
        const double* grow = gy.data() + static_cast<std::size_t>(t) * c_out;
        for (int o = 0; o < c_out; ++o) g.db[static_cast<std::size_t>(o)] += grow[o];
        for (int k = 0; k < kernel; ++k) {
            const int src = t + (k - center) * dilation;
            if (src < 0 || src >= t_len) continue;
            const double* xrow = x.data() + static_cast<std::size_t>(src) * c_in;
            double* dxrow = g.dx.data() + static_cast<std::size_t>(src) * c_in;
            const double* wslab = w.data() + static_cast<std::size_t>(k) * c_in * c_out;
            double* dwslab = g.dw.data() + static_cast<std::size_t>(k) * c_in * c_out;
            for (int i = 0; i < c_in; ++i) {
                const double* wrow = wslab + static_cast<std::size_t>(i) * c_out;
                double* dwrow = dwslab + static_cast<std::size_t>(i) * c_out;
                const double xv = xrow[i];
                double acc = 0.0;
                for (int o = 0; o < c_out; ++o) {
                    const double gv = grow[o];
                    acc += gv * wrow[o];
                    dwrow[o] += gv * xv;
                }
                dxrow[i] += acc;
            }
        }
    }
    return g;
}

Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_pointwise_shapes(x, w, &b);
    const int t_len = x.dim(0);
    const int c_in = x.dim(1);
    const int c_out = w.dim(1);

    Tensor y({t_len, c_out});
    for (int t = 0; t < t_len; ++t) {
        const double* xrow = x.data() + static_cast<std::size_t>(t) * c_in;
        double* yrow = y.data() + static_cast<std::size_t>(t) * c_out;
        for (int o = 0; o < c_out; ++o) yrow[o] = b[static_cast<std::size_t>(o)];
        for (int i = 0; i < c_in; ++i) {
            const double xv = xrow[i];
            if (xv == 0.0) continue;
            const double* wrow = w.data() + static_cast<std::size_t>(i) * c_out;
            for (int o = 0; o < c_out; ++o) yrow[o] += xv * wrow[o];
        }
    }
    return y;
}

PointwiseGrads pointwise_conv_backward(const Tensor& gy, const Tensor& x, const Tensor& w) {
    require_pointwise_shapes(x, w, nullptr);
    const int t_len = x.dim(0);
    const int c_in = x.dim(1);
    const int c_out = w.dim(1);
    if (gy.rank() != 2 || gy.dim(0) != t_len || gy.dim(1) != c_out) {
        throw ContractError("pointwise_conv_backward: upstream gradient shape " + gy.shape_str() + " mismatch");
    }

    PointwiseGrads g{Tensor({t_len, c_in}), Tensor({c_in, c_out}), Tensor({c_out})};
    for (int t = 0; t < t_len; ++t) {
        const double* xrow = x.data() + static_cast<std::size_t>(t) * c_in;
        const double* grow = gy.data() + static_cast<std::size_t>(t) * c_out;
        double* dxrow = g.dx.data() + static_cast<std::size_t>(t) * c_in;
        for (int o = 0; o < c_out; ++o) g.db[static_cast<std::size_t>(o)] += grow[o];
        for (int i = 0; i < c_in; ++i) {
            const double* wrow = w.data() + static_cast<std::size_t>(i) * c_out;
            double* dwrow = g.dw.data() + static_cast<std::size_t>(i) * c_out;
            const double xv = xrow[i];
            double acc = 0.0;
            for (int o = 0; o < c_out; ++o) {
                const double gv = grow[o];
                acc += gv * wrow[o];
                dwrow[o] += gv * xv;
            }
            dxrow[i] = acc;
        }
    }
    return g;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& gy, const Tensor& x) {
    if (!gy.same_shape(x)) throw ContractError("relu_backward: shape mismatch");
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? gy[i] : 0.0;
    return dx;
}

Tensor softmax_over_classes(const Tensor& x) {
    if (x.rank() != 2) throw ContractError("softmax_over_classes: expected [TxC], got " + x.shape_str());
    const int t_len = x.dim(0);
    const int classes = x.dim(1);
    if (classes < 2) throw InvalidArgument("softmax_over_classes: need at least 2 classes");

    Tensor y({t_len, classes});
    for (int t = 0; t < t_len; ++t) {
        const double* xrow = x.data() + static_cast<std::size_t>(t) * classes;
        double* yrow = y.data() + static_cast<std::size_t>(t) * classes;
        double m = xrow[0];
        for (int c = 1; c < classes; ++c) m = std::max(m, xrow[c]);
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
            yrow[c] = std::exp(xrow[c] - m);
            sum += yrow[c];
        }
        const double inv = 1.0 / sum;
        for (int c = 0; c < classes; ++c) yrow[c] *= inv;
    }
    return y;
}

Tensor softmax_backward(const Tensor& gprobs, const Tensor& probs) {
    if (!gprobs.same_shape(probs)) throw ContractError("softmax_backward: shape mismatch");
    const int t_len = probs.dim(0);
    const int classes = probs.dim(1);

    // dL/dz_c = p_c * (g_c - sum_j g_j p_j), row-wise.
    Tensor dz({t_len, classes});
    for (int t = 0; t < t_len; ++t) {
        const double* prow = probs.data() + static_cast<std::size_t>(t) * classes;
        const double* grow = gprobs.data() + static_cast<std::size_t>(t) * classes;
        double* drow = dz.data() + static_cast<std::size_t>(t) * classes;
        double dot = 0.0;
        for (int c = 0; c < classes; ++c) dot += grow[c] * prow[c];
        for (int c = 0; c < classes; ++c) drow[c] = prow[c] * (grow[c] - dot);
    }
    return dz;
}

Tensor residual_add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ContractError("residual_add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor y(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
    return y;
}

ResidualGrads residual_add_backward(const Tensor& gy) { return {gy, gy}; }

}  // namespace mstcn
