#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mstcn/adam.hpp"
#include "mstcn/errors.hpp"
#include "mstcn/gradcheck.hpp"
#include "mstcn/loss.hpp"
#include "mstcn/model.hpp"
#include "mstcn/rng.hpp"
#include "test_support.hpp"

using namespace mstcn;
using test_support::max_abs_diff;
using test_support::random_tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.num_stages = 1;
    c.layers_per_stage = 2;
    c.num_filters = 4;
    c.in_channels = 2;
    c.num_classes = 3;
    return c;
}

Tensor reverse_time(const Tensor& x) {
    const int t_len = x.dim(0), cols = x.dim(1);
    Tensor y({t_len, cols});
    for (int t = 0; t < t_len; ++t) {
        for (int c = 0; c < cols; ++c) y(t, c) = x(t_len - 1 - t, c);
    }
    return y;
}

// All-positive weights, zero biases: ReLU is transparent and positive
// taps cannot cancel, so the impulse response support is exact.
void make_positive(StageNet& stage, Rng& rng) {
    for (ParamTensor* p : stage.params()) {
        const bool is_bias = p->name.ends_with(".b");
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = is_bias ? 0.0 : rng.uniform(0.05, 1.0);
    }
}

}  // namespace

TEST_CASE("build_model is bit-deterministic under (config, seed)") {
    ModelConfig c = tiny_config();
    c.num_stages = 3;
    const MsTcnNet a = build_model(c, 42);
    const MsTcnNet b = build_model(c, 42);
    const auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(max_abs_diff(pa[i]->value, pb[i]->value) == 0.0);
    }
    const MsTcnNet other = build_model(c, 43);
    CHECK(max_abs_diff(a.stages[0].in_proj_w.value, other.stages[0].in_proj_w.value) > 0.0);
}

TEST_CASE("build_model structure follows the config") {
    ModelConfig c = tiny_config();
    const MsTcnNet single = build_model(c, 1);
    CHECK(single.stages.size() == 1);
    CHECK(single.stages[0].in_proj_w.value.dim(0) == c.in_channels);

    c.num_stages = 4;
    c.num_classes = 7;
    const MsTcnNet multi = build_model(c, 1);
    REQUIRE(multi.stages.size() == 4);
    for (int s = 1; s < 4; ++s) {
        CHECK(multi.stages[static_cast<std::size_t>(s)].in_proj_w.value.dim(0) == 7);
        CHECK(multi.stages[static_cast<std::size_t>(s)].in_proj_w.value.dim(1) == c.num_filters);
    }
    // Dilations double per block.
    for (int l = 0; l < c.layers_per_stage; ++l) {
        CHECK(multi.stages[0].blocks[static_cast<std::size_t>(l)].dilation == (1 << l));
    }
    // Biases start at zero.
    for (std::size_t i = 0; i < multi.stages[0].in_proj_b.value.size(); ++i) {
        CHECK(multi.stages[0].in_proj_b.value[i] == 0.0);
    }
}

TEST_CASE("build_model rejects invalid configs") {
    ModelConfig c = tiny_config();
    c.num_classes = 1;
    CHECK_THROWS_AS(build_model(c, 1), InvalidArgument);
    c = tiny_config();
    c.kernel_size = 4;
    CHECK_THROWS_AS(build_model(c, 1), InvalidArgument);
    c = tiny_config();
    c.num_stages = 0;
    CHECK_THROWS_AS(build_model(c, 1), InvalidArgument);
}

TEST_CASE("stage_forward: zero output head gives uniform probabilities") {
    const ModelConfig c = tiny_config();
    MsTcnNet net = build_model(c, 7);
    StageNet& stage = net.stages[0];
    for (std::size_t i = 0; i < stage.head_w.value.size(); ++i) stage.head_w.value[i] = 0.0;
    for (std::size_t i = 0; i < stage.head_b.value.size(); ++i) stage.head_b.value[i] = 0.0;

    Rng rng(3);
    const StageOutput out = stage_forward(stage, random_tensor({15, 2}, rng));
    for (int t = 0; t < 15; ++t) {
        for (int cls = 0; cls < 3; ++cls) CHECK(out.probs(t, cls) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    }
}

TEST_CASE("stage_forward preserves length even for T=1") {
    const MsTcnNet net = build_model(tiny_config(), 11);
    Rng rng(5);
    const StageOutput out = stage_forward(net.stages[0], random_tensor({1, 2}, rng));
    CHECK(out.logits.dim(0) == 1);
    CHECK(out.probs.dim(0) == 1);
}

TEST_CASE("stage_forward rejects channel mismatches") {
    const MsTcnNet net = build_model(tiny_config(), 11);
    Rng rng(5);
    CHECK_THROWS_AS(stage_forward(net.stages[0], random_tensor({4, 3}, rng)), ContractError);
}

TEST_CASE("centered stages with symmetric kernels are reversal-equivariant") {
    ModelConfig c = tiny_config();
    c.layers_per_stage = 3;
    MsTcnNet net = build_model(c, 21);
    // Symmetrize every dilated kernel in k; 1x1 convs are trivially
    // symmetric. Generic (asymmetric) kernels are NOT equivariant.
    for (DilatedBlock& blk : net.stages[0].blocks) {
        Tensor& w = blk.conv_w.value;
        const int kernel = w.dim(0), d = w.dim(1);
        for (int i = 0; i < d; ++i) {
            for (int o = 0; o < d; ++o) {
                for (int k = 0; k < kernel / 2; ++k) w(kernel - 1 - k, i, o) = w(k, i, o);
            }
        }
    }
    Rng rng(9);
    const Tensor x = random_tensor({40, 2}, rng);
    const StageOutput fwd = stage_forward(net.stages[0], x);
    const StageOutput rev = stage_forward(net.stages[0], reverse_time(x));
    CHECK(max_abs_diff(rev.probs, reverse_time(fwd.probs)) < 1e-12);

    // Negative control: an asymmetric kernel breaks the property.
    const MsTcnNet plain = build_model(c, 22);
    const StageOutput f2 = stage_forward(plain.stages[0], x);
    const StageOutput r2 = stage_forward(plain.stages[0], reverse_time(x));
    CHECK(max_abs_diff(r2.probs, reverse_time(f2.probs)) > 1e-6);
}

TEST_CASE("model_forward returns one output per stage with constant T") {
    ModelConfig c = tiny_config();
    const MsTcnNet single = build_model(c, 2);
    Rng rng(13);
    const Tensor x = random_tensor({30, 2}, rng);
    CHECK(model_forward(single, x).size() == 1);

    c.num_stages = 4;
    const MsTcnNet multi = build_model(c, 2);
    const auto outputs = model_forward(multi, x);
    REQUIRE(outputs.size() == 4);
    for (const StageOutput& so : outputs) {
        CHECK(so.probs.dim(0) == 30);
        CHECK(so.probs.dim(1) == 3);
    }
    CHECK_THROWS_AS(model_forward(multi, random_tensor({30, 5}, rng)), ContractError);
}

TEST_CASE("stage s output depends only on stages <= s") {
    ModelConfig c = tiny_config();
    c.num_stages = 3;
    MsTcnNet net = build_model(c, 17);
    Rng rng(19);
    const Tensor x = random_tensor({25, 2}, rng);
    const auto before = model_forward(net, x);

    // Scramble the refinement stages; stage 1 must not notice.
    for (std::size_t s = 1; s < net.stages.size(); ++s) {
        for (ParamTensor* p : net.stages[s].params()) {
            for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-1.0, 1.0);
        }
    }
    const auto after = model_forward(net, x);
    CHECK(max_abs_diff(before[0].probs, after[0].probs) == 0.0);
    CHECK(max_abs_diff(before[1].probs, after[1].probs) > 0.0);
}

TEST_CASE("receptive_field formula") {
    CHECK(receptive_field(12) == 8191);
    CHECK(receptive_field(1) == 3);
    CHECK(receptive_field(4) == 31);
    CHECK_THROWS_AS(receptive_field(0), InvalidArgument);
}

TEST_CASE("impulse response support equals the receptive field for L in 1..5") {
    for (int layers = 1; layers <= 5; ++layers) {
        ModelConfig c = tiny_config();
        c.layers_per_stage = layers;
        c.in_channels = 1;
        MsTcnNet net = build_model(c, 100 + static_cast<std::uint64_t>(layers));
        Rng rng(200 + static_cast<std::uint64_t>(layers));
        make_positive(net.stages[0], rng);

        const int rf = static_cast<int>(receptive_field(layers));
        const int t_len = 2 * rf + 1;
        const int center = rf;
        Tensor impulse({t_len, 1});
        impulse(center, 0) = 1.0;

        const StageOutput out = stage_forward(net.stages[0], impulse);
        int first = -1, last = -1;
        for (int t = 0; t < t_len; ++t) {
            bool nonzero = false;
            for (int cls = 0; cls < c.num_classes; ++cls) nonzero = nonzero || out.logits(t, cls) != 0.0;
            if (nonzero) {
                if (first < 0) first = t;
                last = t;
            }
        }
        CHECK(first == center - (rf - 1) / 2);
        CHECK(last == center + (rf - 1) / 2);
        CHECK(last - first + 1 == rf);
    }
}

TEST_CASE("count_parameters matches hand enumeration") {
    // input 1x1: 2*4+4 = 12; per block 3*4*4+4 + 4*4+4 = 72, x2 = 144;
    // head 4*3+3 = 15; total 171.
    ModelConfig c;
    c.num_stages = 1;
    c.layers_per_stage = 2;
    c.num_filters = 4;
    c.in_channels = 2;
    c.num_classes = 3;
    CHECK(count_parameters(c) == 171);
}

TEST_CASE("adding a stage adds exactly one refinement stage worth of parameters") {
    ModelConfig c = tiny_config();
    c.num_stages = 2;
    const long long two = count_parameters(c);
    c.num_stages = 4;
    const long long four = count_parameters(c);

    // Refinement stage: in_proj C->D, blocks, head.
    const long long d = c.num_filters, k = c.kernel_size, cls = c.num_classes;
    const long long refinement = (cls * d + d) + c.layers_per_stage * ((k * d * d + d) + (d * d + d)) + (d * cls + cls);
    CHECK(four - two == 2 * refinement);
}

TEST_CASE("count_parameters equals the number of scalars an Adam step touches") {
    ModelConfig c = tiny_config();
    c.num_stages = 2;
    MsTcnNet net = build_model(c, 55);
    std::vector<ParamTensor*> params = net.params();
    std::vector<Tensor> before;
    for (ParamTensor* p : params) before.push_back(p->value);

    for (ParamTensor* p : params) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] = 1.0 + 0.01 * static_cast<double>(i);
    }
    adam_step(params, AdamConfig{});

    long long touched = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t i = 0; i < params[pi]->value.size(); ++i) {
            if (params[pi]->value[i] != before[pi][i]) ++touched;
        }
    }
    CHECK(touched == count_parameters(c));
}

TEST_CASE("cached and plain stage forwards agree") {
    ModelConfig c = tiny_config();
    c.layers_per_stage = 3;
    const MsTcnNet net = build_model(c, 77);
    Rng rng(78);
    const Tensor x = random_tensor({22, 2}, rng);
    StageCache cache;
    const StageOutput cached = stage_forward_cached(net.stages[0], x, cache);
    const StageOutput plain = stage_forward(net.stages[0], x);
    CHECK(max_abs_diff(cached.logits, plain.logits) == 0.0);
    CHECK(max_abs_diff(cached.probs, plain.probs) == 0.0);
}

TEST_CASE("stage_backward gradients match central differences") {
    ModelConfig c = tiny_config();
    MsTcnNet net = build_model(c, 91);
    StageNet& stage = net.stages[0];
    Rng rng(92);
    Tensor x = random_tensor({12, 2}, rng);
    const Tensor weights = random_tensor({12, 3}, rng);  // projection of logits to a scalar

    auto scalar = [&]() {
        const StageOutput out = stage_forward(stage, x);
        double s = 0.0;
        for (std::size_t i = 0; i < out.logits.size(); ++i) s += weights[i] * out.logits[i];
        return s;
    };

    net.zero_grads();
    StageCache cache;
    stage_forward_cached(stage, x, cache);
    const Tensor dx = stage_backward(stage, cache, weights);

    CHECK(test_support::max_rel_error(dx, test_support::numeric_grad(x, scalar)) < 1e-4);
    for (ParamTensor* p : stage.params()) {
        const Tensor numeric = test_support::numeric_grad(p->value, scalar);
        CHECK(test_support::max_rel_error(p->grad, numeric) < 1e-4);
    }
}

TEST_CASE("full composite gradient survives a small grad_check") {
    ModelConfig c = tiny_config();
    c.num_stages = 2;
    MsTcnNet net = build_model(c, 123);
    Rng rng(124);
    const Tensor x = random_tensor({16, 2}, rng);
    std::vector<int> labels(16);
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(3));

    LossOptions opts;
    opts.lambda = c.lambda;
    opts.tau = c.tau;
    // Finite differences see the whole differentiable path, so the
    // smoothing term's previous-sample detach must be off here; the detach
    // convention has its own stop-gradient test.
    opts.tmse_detach_previous = false;

    auto loss = [&]() {
        std::vector<Tensor> probs;
        for (const StageOutput& so : model_forward(net, x)) probs.push_back(so.probs);
        return total_loss(probs, labels, opts).total;
    };
    auto populate = [&]() {
        net.zero_grads();
        const ModelForwardCache fwd = model_forward_cached(net, x);
        std::vector<Tensor> probs;
        for (const StageOutput& so : fwd.outputs) probs.push_back(so.probs);
        model_backward(net, fwd, total_loss_backward(probs, labels, opts));
    };
    const GradCheckReport report = grad_check(loss, populate, net.params(), 1e-5);
    CHECK(report.max_rel_error < 1e-4);
}
