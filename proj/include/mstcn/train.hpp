#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mstcn/data.hpp"
#include "mstcn/loss.hpp"
#include "mstcn/model.hpp"

namespace mstcn {

struct TrainConfig {
    ModelConfig model;
    int epochs = 50;
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double slice_seconds = 40.0;
    double stride_seconds = 0.0;  // 0 = same as slice_seconds (non-overlapping)
    int batch_size = 16;
    std::uint64_t seed = 1;
    CeNorm ce_norm = CeNorm::paper;
    int log_every = 1;
    double grad_clip = 0.0;  // global L2 norm; 0 disables
    bool tmse_detach_previous = true;
    // Optional early exit: stop once training sample accuracy reaches the
    // target (checked every accuracy_check_every epochs; 0 disables).
    double target_accuracy = 0.0;
    int accuracy_check_every = 5;

    double effective_stride() const { return stride_seconds > 0.0 ? stride_seconds : slice_seconds; }
    LossOptions loss_options() const;
    void validate(double sample_rate_hz) const;

    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_total = 0.0;
    double train_accuracy = -1.0;  // -1 when not measured this epoch
};

struct TrainResult {
    MsTcnNet net;
    std::vector<EpochStats> epochs;
    int steps = 0;
};

// Runs the training loop: slice, shuffle, batch, forward, summed per-stage
// loss, backward, Adam. Writes one JSON metrics line per logged optimizer
// step to metrics_out ({epoch, step, total, per_stage:[{ce,tmse}]}) and
// human-readable progress to diagnostics (may both be null).
//
// When checkpoint_path is non-empty, a checkpoint is written before the
// first epoch and after every epoch, so a divergence abort (DivergedError)
// leaves the last good checkpoint on disk.
TrainResult train(const TrainConfig& config, const Dataset& dataset, const std::string& checkpoint_path = "",
                  std::ostream* metrics_out = nullptr, std::ostream* diagnostics = nullptr);

// Full-sequence forward; returns all stage probs, last entry is the
// prediction surface.
std::vector<Tensor> predict(const MsTcnNet& net, const Tensor& series);

// Fraction of samples where the final stage's argmax equals the label.
double sample_accuracy(const MsTcnNet& net, const std::vector<Slice>& slices);

// ------------------------------------------------------------ checkpoints

// Container: 8-byte magic "MSTCNCK1", 4-byte big-endian manifest length,
// UTF-8 JSON manifest, then the little-endian float32 blob. The manifest
// echoes the config, seed and epoch and lists every tensor's name, shape
// and byte offset.
void save_checkpoint(const MsTcnNet& net, const std::string& path, std::uint64_t seed = 0, int epoch = 0);

struct CheckpointMeta {
    ModelConfig config;
    std::uint64_t seed = 0;
    int epoch = 0;
    nlohmann::json manifest;
};

MsTcnNet load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace mstcn
