#include "mstcn/model.hpp"

#include <cmath>
#include <string>

#include "mstcn/errors.hpp"
#include "mstcn/ops.hpp"
#include "mstcn/rng.hpp"

namespace mstcn {

void ModelConfig::validate() const {
    if (num_stages < 1) throw InvalidArgument("config: num_stages must be >= 1");
    if (layers_per_stage < 1) throw InvalidArgument("config: layers_per_stage must be >= 1");
    if (num_filters < 1) throw InvalidArgument("config: num_filters must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw InvalidArgument("config: kernel_size must be odd and positive");
    if (in_channels < 1) throw InvalidArgument("config: in_channels must be >= 1");
    if (num_classes < 2) throw InvalidArgument("config: num_classes must be >= 2");
    if (lambda < 0.0) throw InvalidArgument("config: lambda must be >= 0");
    if (tau <= 0.0) throw InvalidArgument("config: tau must be positive");
    if (layers_per_stage > 30) throw InvalidArgument("config: layers_per_stage too large (dilation overflow)");
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    static const char* known[] = {"stages", "layers", "filters", "kernel", "in_channels", "classes", "lambda", "tau"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw FormatError("model config: unknown field \"" + it.key() + "\"");
    }
    ModelConfig c;
    c.num_stages = j.value("stages", c.num_stages);
    c.layers_per_stage = j.value("layers", c.layers_per_stage);
    c.num_filters = j.value("filters", c.num_filters);
    c.kernel_size = j.value("kernel", c.kernel_size);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.num_classes = j.value("classes", c.num_classes);
    c.lambda = j.value("lambda", c.lambda);
    c.tau = j.value("tau", c.tau);
    c.validate();
    return c;
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{{"stages", num_stages}, {"layers", layers_per_stage}, {"filters", num_filters},
                          {"kernel", kernel_size}, {"in_channels", in_channels}, {"classes", num_classes},
                          {"lambda", lambda},      {"tau", tau}};
}

std::vector<ParamTensor*> StageNet::params() {
    std::vector<ParamTensor*> out;
    out.push_back(&in_proj_w);
    out.push_back(&in_proj_b);
    for (DilatedBlock& blk : blocks) {
        out.push_back(&blk.conv_w);
        out.push_back(&blk.conv_b);
        out.push_back(&blk.pw_w);
        out.push_back(&blk.pw_b);
    }
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
}

std::vector<const ParamTensor*> StageNet::params() const {
    auto mut = const_cast<StageNet*>(this)->params();
    return {mut.begin(), mut.end()};
}

std::vector<ParamTensor*> MsTcnNet::params() {
    std::vector<ParamTensor*> out;
    for (StageNet& s : stages) {
        auto sp = s.params();
        out.insert(out.end(), sp.begin(), sp.end());
    }
    return out;
}

std::vector<const ParamTensor*> MsTcnNet::params() const {
    auto mut = const_cast<MsTcnNet*>(this)->params();
    return {mut.begin(), mut.end()};
}

void MsTcnNet::zero_grads() {
    for (ParamTensor* p : params()) p->zero_grad();
}

namespace {

Tensor uniform_fan_in(Rng& rng, std::vector<int> shape, int fan_in) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

StageNet build_stage(const ModelConfig& cfg, int stage_in_channels, int stage_index, Rng& rng) {
    StageNet s;
    s.in_channels = stage_in_channels;
    s.num_filters = cfg.num_filters;
    s.num_classes = cfg.num_classes;
    s.kernel_size = cfg.kernel_size;

    const std::string prefix = "stage" + std::to_string(stage_index) + ".";
    const int d = cfg.num_filters;
    s.in_proj_w = ParamTensor(prefix + "in_proj.w", uniform_fan_in(rng, {stage_in_channels, d}, stage_in_channels));
    s.in_proj_b = ParamTensor(prefix + "in_proj.b", Tensor({d}));

    s.blocks.resize(static_cast<std::size_t>(cfg.layers_per_stage));
    for (int l = 0; l < cfg.layers_per_stage; ++l) {
        DilatedBlock& blk = s.blocks[static_cast<std::size_t>(l)];
        blk.dilation = 1 << l;
        const std::string bp = prefix + "block" + std::to_string(l) + ".";
        blk.conv_w = ParamTensor(bp + "conv.w", uniform_fan_in(rng, {cfg.kernel_size, d, d}, cfg.kernel_size * d));
        blk.conv_b = ParamTensor(bp + "conv.b", Tensor({d}));
        blk.pw_w = ParamTensor(bp + "pw.w", uniform_fan_in(rng, {d, d}, d));
        blk.pw_b = ParamTensor(bp + "pw.b", Tensor({d}));
    }

    s.head_w = ParamTensor(prefix + "head.w", uniform_fan_in(rng, {d, cfg.num_classes}, d));
    s.head_b = ParamTensor(prefix + "head.b", Tensor({cfg.num_classes}));
    return s;
}

}  // namespace

MsTcnNet build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    MsTcnNet net;
    net.config = config;
    net.stages.reserve(static_cast<std::size_t>(config.num_stages));
    for (int s = 0; s < config.num_stages; ++s) {
        const int cin = s == 0 ? config.in_channels : config.num_classes;
        net.stages.push_back(build_stage(config, cin, s, rng));
    }
    return net;
}

StageOutput stage_forward(const StageNet& stage, const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != stage.in_channels) {
        throw ContractError("stage_forward: input " + x.shape_str() + " does not match stage channels");
    }
    Tensor h = pointwise_conv(x, stage.in_proj_w.value, stage.in_proj_b.value);
    for (const DilatedBlock& blk : stage.blocks) {
        Tensor z = conv1d_dilated(h, blk.conv_w.value, blk.conv_b.value, blk.dilation);
        z = relu(z);
        z = pointwise_conv(z, blk.pw_w.value, blk.pw_b.value);
        h = residual_add(h, z);
    }
    StageOutput out;
    out.logits = pointwise_conv(h, stage.head_w.value, stage.head_b.value);
    out.probs = softmax_over_classes(out.logits);
    return out;
}

StageOutput stage_forward_cached(const StageNet& stage, const Tensor& x, StageCache& cache) {
    if (x.rank() != 2 || x.dim(1) != stage.in_channels) {
        throw ContractError("stage_forward: input " + x.shape_str() + " does not match stage channels");
    }
    const std::size_t n_blocks = stage.blocks.size();
    cache.input = x;
    cache.projected = pointwise_conv(x, stage.in_proj_w.value, stage.in_proj_b.value);
    cache.block_in.assign(n_blocks, Tensor());
    cache.conv_out.assign(n_blocks, Tensor());
    cache.relu_out.assign(n_blocks, Tensor());

    Tensor h = cache.projected;
    for (std::size_t l = 0; l < n_blocks; ++l) {
        const DilatedBlock& blk = stage.blocks[l];
        cache.block_in[l] = h;
        cache.conv_out[l] = conv1d_dilated(h, blk.conv_w.value, blk.conv_b.value, blk.dilation);
        cache.relu_out[l] = relu(cache.conv_out[l]);
        Tensor z = pointwise_conv(cache.relu_out[l], blk.pw_w.value, blk.pw_b.value);
        h = residual_add(h, z);
    }
    cache.features = h;
    cache.logits = pointwise_conv(h, stage.head_w.value, stage.head_b.value);
    cache.probs = softmax_over_classes(cache.logits);
    return {cache.logits, cache.probs};
}

namespace {

void accumulate(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor stage_backward(StageNet& stage, const StageCache& cache, const Tensor& dlogits) {
    PointwiseGrads head = pointwise_conv_backward(dlogits, cache.features, stage.head_w.value);
    accumulate(stage.head_w.grad, head.dw);
    accumulate(stage.head_b.grad, head.db);

    Tensor dh = std::move(head.dx);
    for (std::size_t l = stage.blocks.size(); l-- > 0;) {
        DilatedBlock& blk = stage.blocks[l];
        // Block output = block_in + pw(relu(conv(block_in))); the residual
        // branch sees dh unchanged.
        PointwiseGrads pw = pointwise_conv_backward(dh, cache.relu_out[l], blk.pw_w.value);
        accumulate(blk.pw_w.grad, pw.dw);
        accumulate(blk.pw_b.grad, pw.db);
        Tensor dz = relu_backward(pw.dx, cache.conv_out[l]);
        Conv1dGrads cv = conv1d_dilated_backward(dz, cache.block_in[l], blk.conv_w.value, blk.dilation);
        accumulate(blk.conv_w.grad, cv.dw);
        accumulate(blk.conv_b.grad, cv.db);
        accumulate(dh, cv.dx);
    }

    PointwiseGrads proj = pointwise_conv_backward(dh, cache.input, stage.in_proj_w.value);
    accumulate(stage.in_proj_w.grad, proj.dw);
    accumulate(stage.in_proj_b.grad, proj.db);
    return std::move(proj.dx);
}

std::vector<StageOutput> model_forward(const MsTcnNet& net, const Tensor& series) {
    if (series.rank() != 2 || series.dim(1) != net.config.in_channels) {
        throw ContractError("model_forward: series " + series.shape_str() + " does not match configured channels");
    }
    std::vector<StageOutput> outputs;
    outputs.reserve(net.stages.size());
    const Tensor* x = &series;
    for (const StageNet& stage : net.stages) {
        outputs.push_back(stage_forward(stage, *x));
        x = &outputs.back().probs;
    }
    return outputs;
}

ModelForwardCache model_forward_cached(const MsTcnNet& net, const Tensor& series) {
    if (series.rank() != 2 || series.dim(1) != net.config.in_channels) {
        throw ContractError("model_forward: series " + series.shape_str() + " does not match configured channels");
    }
    ModelForwardCache fwd;
    fwd.stage_caches.resize(net.stages.size());
    fwd.outputs.reserve(net.stages.size());
    const Tensor* x = &series;
    for (std::size_t s = 0; s < net.stages.size(); ++s) {
        fwd.outputs.push_back(stage_forward_cached(net.stages[s], *x, fwd.stage_caches[s]));
        x = &fwd.stage_caches[s].probs;
    }
    return fwd;
}

Tensor model_backward(MsTcnNet& net, const ModelForwardCache& fwd, const std::vector<Tensor>& dprobs_per_stage) {
    if (dprobs_per_stage.size() != net.stages.size()) {
        throw ContractError("model_backward: need one probs gradient per stage");
    }
    Tensor dx;  // gradient flowing into stage s's probs from stage s+1
    for (std::size_t s = net.stages.size(); s-- > 0;) {
        Tensor dprobs = dprobs_per_stage[s];
        if (s + 1 < net.stages.size()) accumulate(dprobs, dx);
        Tensor dlogits = softmax_backward(dprobs, fwd.stage_caches[s].probs);
        dx = stage_backward(net.stages[s], fwd.stage_caches[s], dlogits);
    }
    return dx;
}

long long receptive_field(int layers) {
    if (layers < 1) throw InvalidArgument("receptive_field: layers must be >= 1");
    if (layers > 60) throw InvalidArgument("receptive_field: layers too large");
    return (1LL << (layers + 1)) - 1;
}

long long count_parameters(const ModelConfig& config) {
    config.validate();
    const long long d = config.num_filters;
    const long long k = config.kernel_size;
    const long long c = config.num_classes;
    const long long blocks = config.layers_per_stage * ((k * d * d + d) + (d * d + d));
    const long long head = d * c + c;
    auto stage = [&](long long cin) { return (cin * d + d) + blocks + head; };
    return stage(config.in_channels) + (config.num_stages - 1) * stage(c);
}

}  // namespace mstcn
