#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mstcn/adam.hpp"
#include "mstcn/errors.hpp"
#include "mstcn/gradcheck.hpp"
#include "mstcn/ops.hpp"
#include "mstcn/rng.hpp"
#include "mstcn/tensor.hpp"
#include "test_support.hpp"

using namespace mstcn;
using test_support::max_rel_error;
using test_support::numeric_grad;
using test_support::random_tensor;

namespace {

// Naive dilated-conv oracle: explicit zero padding, direct summation.
// Kept independent of the library implementation.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int dilation) {
    const int t_len = x.dim(0), c_in = x.dim(1), kernel = w.dim(0), c_out = w.dim(2);
    const int pad = dilation * (kernel - 1) / 2;
    Tensor y({t_len, c_out});
    for (int t = 0; t < t_len; ++t) {
        for (int o = 0; o < c_out; ++o) {
            double acc = b[static_cast<std::size_t>(o)];
            for (int k = 0; k < kernel; ++k) {
                for (int i = 0; i < c_in; ++i) {
                    const int src = t + k * dilation - pad;
                    const double xv = (src >= 0 && src < t_len) ? x(src, i) : 0.0;
                    acc += w(k, i, o) * xv;
                }
            }
            y(t, o) = acc;
        }
    }
    return y;
}

}  // namespace

TEST_CASE("conv1d_dilated matches the worked example and the padding oracle") {
    const Tensor x({5, 1}, {1, 2, 3, 4, 5});
    const Tensor w({3, 1, 1}, {1, 0, -1});
    const Tensor b({1});
    const Tensor y = conv1d_dilated(x, w, b, 2);
    const std::vector<double> expected{-3, -4, -4, 2, 3};
    for (int t = 0; t < 5; ++t) CHECK(y(t, 0) == expected[static_cast<std::size_t>(t)]);

    const Tensor oracle = conv_oracle(x, w, b, 2);
    CHECK(test_support::max_abs_diff(y, oracle) == 0.0);
}

TEST_CASE("conv1d_dilated agrees with the oracle on random shapes") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int t_len = 1 + static_cast<int>(rng.uniform_int(30));
        const int c_in = 1 + static_cast<int>(rng.uniform_int(4));
        const int c_out = 1 + static_cast<int>(rng.uniform_int(4));
        const int kernel = 1 + 2 * static_cast<int>(rng.uniform_int(3));
        const int dilation = 1 + static_cast<int>(rng.uniform_int(5));
        const Tensor x = random_tensor({t_len, c_in}, rng);
        const Tensor w = random_tensor({kernel, c_in, c_out}, rng);
        const Tensor b = random_tensor({c_out}, rng);
        const Tensor y = conv1d_dilated(x, w, b, dilation);
        CHECK(y.dim(0) == t_len);
        CHECK(y.all_finite());
        CHECK(test_support::max_abs_diff(y, conv_oracle(x, w, b, dilation)) < 1e-12);
    }
}

TEST_CASE("conv1d_dilated zero kernel broadcasts the bias") {
    Rng rng(3);
    const Tensor x = random_tensor({12, 3}, rng);
    const Tensor w({3, 3, 2});
    const Tensor b({2}, {0.5, -1.25});
    const Tensor y = conv1d_dilated(x, w, b, 4);
    for (int t = 0; t < 12; ++t) {
        CHECK(y(t, 0) == 0.5);
        CHECK(y(t, 1) == -1.25);
    }
}

TEST_CASE("conv1d_dilated center tap is the identity") {
    Tensor x({32, 1});
    x(10, 0) = 2.5;
    const Tensor w({3, 1, 1}, {0, 1, 0});
    const Tensor y = conv1d_dilated(x, w, Tensor({1}), 4);
    CHECK(test_support::max_abs_diff(y, x) == 0.0);
}

TEST_CASE("conv1d_dilated rejects bad arguments") {
    const Tensor x({5, 2});
    const Tensor w({3, 3, 1});  // channel mismatch
    CHECK_THROWS_AS(conv1d_dilated(x, w, Tensor({1}), 1), ContractError);
    const Tensor w_ok({3, 2, 1});
    CHECK_THROWS_AS(conv1d_dilated(x, w_ok, Tensor({1}), 0), InvalidArgument);
    CHECK_THROWS_AS(conv1d_dilated(x, Tensor({4, 2, 1}), Tensor({1}), 1), InvalidArgument);  // even kernel
}

TEST_CASE("conv1d_dilated is linear in its input for zero bias") {
    Rng rng(11);
    const Tensor x1 = random_tensor({20, 3}, rng);
    const Tensor x2 = random_tensor({20, 3}, rng);
    const Tensor w = random_tensor({3, 3, 4}, rng);
    const Tensor b({4});
    const double alpha = 1.7, beta = -0.4;

    Tensor mix({20, 3});
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * x1[i] + beta * x2[i];
    const Tensor lhs = conv1d_dilated(mix, w, b, 2);
    const Tensor y1 = conv1d_dilated(x1, w, b, 2);
    const Tensor y2 = conv1d_dilated(x2, w, b, 2);
    Tensor rhs({20, 4});
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = alpha * y1[i] + beta * y2[i];
    CHECK(test_support::max_abs_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("conv1d_dilated backward matches central differences") {
    Rng rng(23);
    Tensor x = random_tensor({14, 2}, rng);
    Tensor w = random_tensor({3, 2, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    const Tensor weights = random_tensor({14, 3}, rng);  // fixed projection to a scalar
    const int dilation = 2;

    auto scalar = [&]() {
        const Tensor y = conv1d_dilated(x, w, b, dilation);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
        return s;
    };
    const Conv1dGrads g = conv1d_dilated_backward(weights, x, w, dilation);
    CHECK(max_rel_error(g.dx, numeric_grad(x, scalar)) < 1e-4);
    CHECK(max_rel_error(g.dw, numeric_grad(w, scalar)) < 1e-4);
    CHECK(max_rel_error(g.db, numeric_grad(b, scalar)) < 1e-4);
}

TEST_CASE("pointwise_conv worked examples") {
    const Tensor identity({2, 2}, {1, 0, 0, 1});
    const Tensor x({1, 2}, {1, 2});
    CHECK(test_support::max_abs_diff(pointwise_conv(x, identity, Tensor({2})), x) == 0.0);

    const Tensor w({2, 1}, {1, 1});
    const Tensor b({1}, {1});
    CHECK(pointwise_conv(x, w, b)(0, 0) == 4.0);

    const Tensor wz({2, 3});
    const Tensor bz({3}, {2, 3, 4});
    const Tensor y = pointwise_conv(x, wz, bz);
    CHECK(y(0, 0) == 2.0);
    CHECK(y(0, 1) == 3.0);
    CHECK(y(0, 2) == 4.0);

    CHECK_THROWS_AS(pointwise_conv(x, Tensor({3, 1}), Tensor({1})), ContractError);
}

TEST_CASE("pointwise_conv backward matches central differences") {
    Rng rng(29);
    Tensor x = random_tensor({9, 3}, rng);
    Tensor w = random_tensor({3, 2}, rng);
    Tensor b = random_tensor({2}, rng);
    const Tensor weights = random_tensor({9, 2}, rng);

    auto scalar = [&]() {
        const Tensor y = pointwise_conv(x, w, b);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
        return s;
    };
    const PointwiseGrads g = pointwise_conv_backward(weights, x, w);
    CHECK(max_rel_error(g.dx, numeric_grad(x, scalar)) < 1e-4);
    CHECK(max_rel_error(g.dw, numeric_grad(w, scalar)) < 1e-4);
    CHECK(max_rel_error(g.db, numeric_grad(b, scalar)) < 1e-4);
}

TEST_CASE("relu forward and subgradient convention") {
    const Tensor x({3, 1}, {-1, 0, 2});
    const Tensor y = relu(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);

    const Tensor all_neg({2, 2}, {-3, -1, -0.5, -2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(relu(all_neg)[i] == 0.0);

    // Gradient at exactly 0 is 0.
    const Tensor up({3, 1}, {1, 1, 1});
    const Tensor dx = relu_backward(up, x);
    CHECK(dx[0] == 0.0);
    CHECK(dx[1] == 0.0);
    CHECK(dx[2] == 1.0);
}

TEST_CASE("relu backward matches central differences away from the kink") {
    Rng rng(31);
    Tensor x({20, 2});
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = rng.uniform(-1.0, 1.0);
        if (std::abs(v) < 1e-3) v = v < 0 ? v - 1e-3 : v + 1e-3;
        x[i] = v;
    }
    const Tensor weights = random_tensor({20, 2}, rng);
    auto scalar = [&]() {
        const Tensor y = relu(x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
        return s;
    };
    CHECK(max_rel_error(relu_backward(weights, x), numeric_grad(x, scalar)) < 1e-4);
}

TEST_CASE("softmax rows behave") {
    const Tensor equal({1, 4}, {3, 3, 3, 3});
    const Tensor p = softmax_over_classes(equal);
    for (int c = 0; c < 4; ++c) CHECK(p(0, c) == doctest::Approx(0.25).epsilon(1e-14));

    const Tensor big({1, 2}, {1000, 0});
    const Tensor pb = softmax_over_classes(big);
    CHECK(pb.all_finite());
    CHECK(pb(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    // e^0 / (e^0 + 3) = 1/4.
    const Tensor ln3({1, 2}, {0, std::log(3.0)});
    const Tensor p3 = softmax_over_classes(ln3);
    CHECK(p3(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p3(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and stay in (0,1) on random logits") {
    Rng rng(37);
    // Logit gaps below ~36 nats; past that the dominated terms vanish in
    // double rounding and the winning probability rounds to exactly 1.
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_tensor({25, 5}, rng, -15.0, 15.0);
        const Tensor p = softmax_over_classes(x);
        for (int t = 0; t < 25; ++t) {
            double sum = 0.0;
            for (int c = 0; c < 5; ++c) {
                sum += p(t, c);
                CHECK(p(t, c) > 0.0);
                CHECK(p(t, c) < 1.0);
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
    // Extreme gaps stay finite and within [0, 1].
    const Tensor extreme({1, 3}, {500.0, -500.0, 0.0});
    const Tensor pe = softmax_over_classes(extreme);
    CHECK(pe.all_finite());
    for (int c = 0; c < 3; ++c) {
        CHECK(pe(0, c) >= 0.0);
        CHECK(pe(0, c) <= 1.0);
    }
}

TEST_CASE("softmax backward matches central differences") {
    Rng rng(41);
    Tensor x = random_tensor({7, 4}, rng);
    const Tensor weights = random_tensor({7, 4}, rng);
    auto scalar = [&]() {
        const Tensor p = softmax_over_classes(x);
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += weights[i] * p[i];
        return s;
    };
    const Tensor analytic = softmax_backward(weights, softmax_over_classes(x));
    CHECK(max_rel_error(analytic, numeric_grad(x, scalar)) < 1e-4);
}

TEST_CASE("residual_add and its sum-rule backward") {
    Rng rng(43);
    const Tensor a = random_tensor({6, 2}, rng);
    const Tensor zero({6, 2});
    CHECK(test_support::max_abs_diff(residual_add(a, zero), a) == 0.0);

    const Tensor twice = residual_add(a, a);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(twice[i] == 2.0 * a[i]);

    const Tensor g = random_tensor({6, 2}, rng);
    const ResidualGrads rg = residual_add_backward(g);
    CHECK(test_support::max_abs_diff(rg.da, g) == 0.0);
    CHECK(test_support::max_abs_diff(rg.db, g) == 0.0);

    CHECK_THROWS_AS(residual_add(a, Tensor({5, 2})), ContractError);
}

TEST_CASE("layer ops preserve sequence length") {
    Rng rng(47);
    for (int t_len : {1, 2, 17}) {
        const Tensor x = random_tensor({t_len, 3}, rng);
        CHECK(conv1d_dilated(x, random_tensor({3, 3, 5}, rng), random_tensor({5}, rng), 8).dim(0) == t_len);
        CHECK(pointwise_conv(x, random_tensor({3, 2}, rng), random_tensor({2}, rng)).dim(0) == t_len);
        CHECK(relu(x).dim(0) == t_len);
        CHECK(softmax_over_classes(x).dim(0) == t_len);
    }
}

TEST_CASE("adam: zero gradient leaves values unchanged") {
    ParamTensor p("p", Tensor({2, 2}, {1, -2, 3, -4}));
    adam_step({&p}, AdamConfig{});
    CHECK(p.value[0] == 1.0);
    CHECK(p.value[3] == -4.0);
    CHECK(p.step_count == 1);
}

TEST_CASE("adam: first bias-corrected step moves by about lr") {
    // m_hat = v_hat = 1 after one step with grad 1, so the update is
    // lr / (1 + eps).
    ParamTensor p("p", Tensor({1}, {0.5}));
    p.grad[0] = 1.0;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step({&p}, cfg);
    CHECK(p.value[0] == doctest::Approx(0.5 - 0.01).epsilon(1e-7));
    CHECK(p.value[0] > 0.5 - 0.01);  // eps shrinks the step slightly
}

TEST_CASE("adam: identical params follow identical trajectories") {
    ParamTensor a("a", Tensor({3}, {0.1, 0.2, 0.3}));
    ParamTensor b("b", Tensor({3}, {0.1, 0.2, 0.3}));
    AdamConfig cfg;
    for (int step = 0; step < 5; ++step) {
        for (std::size_t i = 0; i < 3; ++i) {
            a.grad[i] = 0.5 * static_cast<double>(step + 1);
            b.grad[i] = 0.5 * static_cast<double>(step + 1);
        }
        adam_step({&a, &b}, cfg);
    }
    CHECK(test_support::max_abs_diff(a.value, b.value) == 0.0);
}

TEST_CASE("adam rejects non-positive learning rates") {
    ParamTensor p("p", Tensor({1}));
    AdamConfig cfg;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(adam_step({&p}, cfg), InvalidArgument);
}

TEST_CASE("grad_check validates a quadratic objective") {
    Rng rng(53);
    ParamTensor p("p", random_tensor({10}, rng));
    auto loss = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < p.value.size(); ++i) s += p.value[i] * p.value[i];
        return s;
    };
    auto populate = [&]() {
        p.zero_grad();
        for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] = 2.0 * p.value[i];
    };
    const GradCheckReport report = grad_check(loss, populate, {&p}, 1e-5);
    CHECK(report.coords_checked == 10);
    CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("grad_check passes on a constant objective") {
    ParamTensor p("p", Tensor({4}, {1, 2, 3, 4}));
    auto loss = [&]() { return 42.0; };
    auto populate = [&]() { p.zero_grad(); };
    CHECK(grad_check(loss, populate, {&p}, 1e-5).max_rel_error == 0.0);
}

TEST_CASE("grad_check rejects non-deterministic objectives and bad steps") {
    ParamTensor p("p", Tensor({1}));
    int calls = 0;
    auto noisy = [&]() { return static_cast<double>(calls++); };
    auto populate = [&]() { p.zero_grad(); };
    CHECK_THROWS_AS(grad_check(noisy, populate, {&p}, 1e-5), CheckInvalidError);

    auto constant = []() { return 1.0; };
    CHECK_THROWS_AS(grad_check(constant, populate, {&p}, 1e-2), InvalidArgument);
    CHECK_THROWS_AS(grad_check(constant, populate, {&p}, 1e-8), InvalidArgument);
}

TEST_CASE("rng is bit-deterministic under a seed") {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.uniform() == b.uniform());
    }
    Rng g1(5), g2(5);
    for (int i = 0; i < 100; ++i) CHECK(g1.gauss(0, 1) == g2.gauss(0, 1));
}

TEST_CASE("tensor construction validates shape") {
    CHECK_THROWS_AS(Tensor({0, 3}), InvalidArgument);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), InvalidArgument);
    CHECK(Tensor::full({2, 2}, 7.0)[3] == 7.0);
}
