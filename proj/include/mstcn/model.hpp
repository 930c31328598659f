#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mstcn/tensor.hpp"

namespace mstcn {

// Architecture and loss hyperparameters.
//
// Defaults follow the multi-stage TCN settings this model family uses:
// 4 stages, 12 layers per stage, kernel 3, lambda 0.15, tau 4. The filter
// count is configurable (64 by default).
struct ModelConfig {
    int num_stages = 4;
    int layers_per_stage = 12;
    int num_filters = 64;
    int kernel_size = 3;
    int in_channels = 6;
    int num_classes = 2;
    double lambda = 0.15;
    double tau = 4.0;

    void validate() const;

    static ModelConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// One residual dilated block: dilated conv (KxDxD) -> ReLU -> pointwise
// conv (DxD) -> residual add with the block input.
struct DilatedBlock {
    int dilation = 1;
    ParamTensor conv_w;  // [K x D x D]
    ParamTensor conv_b;  // [D]
    ParamTensor pw_w;    // [D x D]
    ParamTensor pw_b;    // [D]
};

// Single-stage TCN: input projection (Cin -> D), L residual dilated blocks
// with dilation 2^l at block l, and a pointwise output head (D -> C).
struct StageNet {
    int in_channels = 0;
    int num_filters = 0;
    int num_classes = 0;
    int kernel_size = 3;

    ParamTensor in_proj_w;  // [Cin x D]
    ParamTensor in_proj_b;  // [D]
    std::vector<DilatedBlock> blocks;
    ParamTensor head_w;  // [D x C]
    ParamTensor head_b;  // [C]

    std::vector<ParamTensor*> params();
    std::vector<const ParamTensor*> params() const;
};

// Multi-stage TCN. Stage 1 consumes the raw signal; stages 2..S consume
// the softmax probabilities of the previous stage.
struct MsTcnNet {
    ModelConfig config;
    std::vector<StageNet> stages;

    std::vector<ParamTensor*> params();
    std::vector<const ParamTensor*> params() const;
    void zero_grads();
};

// Weights drawn uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases
// zero, reproducible from the seed.
MsTcnNet build_model(const ModelConfig& config, std::uint64_t seed);

struct StageOutput {
    Tensor logits;  // [T x C]
    Tensor probs;   // [T x C]
};

// Per-layer activations kept for the backward pass.
struct StageCache {
    Tensor input;
    Tensor projected;
    std::vector<Tensor> block_in;   // input of block l
    std::vector<Tensor> conv_out;   // pre-ReLU
    std::vector<Tensor> relu_out;
    Tensor features;  // output of the last block
    Tensor logits;
    Tensor probs;
};

// Inference-path forward of one stage; no cache, O(T*D) working memory.
StageOutput stage_forward(const StageNet& stage, const Tensor& x);

// Training-path forward; fills the cache consumed by stage_backward.
StageOutput stage_forward_cached(const StageNet& stage, const Tensor& x, StageCache& cache);

// Backward through one stage given dL/dlogits. Accumulates parameter
// gradients into the stage's ParamTensors and returns dL/d(input).
Tensor stage_backward(StageNet& stage, const StageCache& cache, const Tensor& dlogits);

// Full-model forward; element s > 1 is computed from the probs of element
// s-1. All S outputs are returned (training needs every stage's loss); the
// last element's probs are the model's prediction.
std::vector<StageOutput> model_forward(const MsTcnNet& net, const Tensor& series);

struct ModelForwardCache {
    std::vector<StageCache> stage_caches;
    std::vector<StageOutput> outputs;
};

ModelForwardCache model_forward_cached(const MsTcnNet& net, const Tensor& series);

// Backward through every stage given dL/dprobs per stage. Gradients flow
// both into each stage's own loss term and, through the refinement chain,
// into earlier stages. Returns dL/d(series).
Tensor model_backward(MsTcnNet& net, const ModelForwardCache& fwd, const std::vector<Tensor>& dprobs_per_stage);

// Receptive field of an L-layer stage with kernel 3 and doubling
// dilations: 2^(L+1) - 1.
long long receptive_field(int layers);

// Exact number of trainable scalars for a config.
long long count_parameters(const ModelConfig& config);

}  // namespace mstcn
