#include "mstcn/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "mstcn/adam.hpp"
#include "mstcn/errors.hpp"
#include "mstcn/util.hpp"
#include "mstcn/version.hpp"

namespace mstcn {

LossOptions TrainConfig::loss_options() const {
    LossOptions opts;
    opts.lambda = model.lambda;
    opts.tau = model.tau;
    opts.ce_norm = ce_norm;
    opts.tmse_detach_previous = tmse_detach_previous;
    return opts;
}

void TrainConfig::validate(double sample_rate_hz) const {
    model.validate();
    if (epochs < 1) throw InvalidArgument("train config: epochs must be >= 1");
    if (batch_size < 1) throw InvalidArgument("train config: batch_size must be >= 1");
    if (slice_seconds <= 0.0) throw InvalidArgument("train config: slice_seconds must be positive");
    if (log_every < 1) throw InvalidArgument("train config: log_every must be >= 1");
    if (grad_clip < 0.0) throw InvalidArgument("train config: grad_clip must be >= 0");
    AdamConfig{lr, beta1, beta2, eps}.validate();
    const long long slice_samples = std::llround(slice_seconds * sample_rate_hz);
    if (slice_samples <= receptive_field(model.layers_per_stage)) {
        throw InvalidArgument("train config: slice of " + std::to_string(slice_samples) +
                              " samples does not exceed the receptive field " +
                              std::to_string(receptive_field(model.layers_per_stage)) + "; shorten the stage or lengthen the slice");
    }
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    static const char* known[] = {"model",      "epochs",    "lr",         "beta1",
                                  "beta2",      "eps",       "slice_seconds", "stride_seconds",
                                  "batch_size", "seed",      "ce_norm",    "log_every",
                                  "grad_clip",  "tmse_detach_previous",     "target_accuracy",
                                  "accuracy_check_every"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw FormatError("train config: unknown field \"" + it.key() + "\"");
    }
    TrainConfig c;
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.slice_seconds = j.value("slice_seconds", c.slice_seconds);
    c.stride_seconds = j.value("stride_seconds", c.stride_seconds);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("ce_norm")) c.ce_norm = ce_norm_from_string(j.at("ce_norm").get<std::string>());
    c.log_every = j.value("log_every", c.log_every);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.tmse_detach_previous = j.value("tmse_detach_previous", c.tmse_detach_previous);
    c.target_accuracy = j.value("target_accuracy", c.target_accuracy);
    c.accuracy_check_every = j.value("accuracy_check_every", c.accuracy_check_every);
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{{"model", model.to_json()},
                          {"epochs", epochs},
                          {"lr", lr},
                          {"beta1", beta1},
                          {"beta2", beta2},
                          {"eps", eps},
                          {"slice_seconds", slice_seconds},
                          {"stride_seconds", stride_seconds},
                          {"batch_size", batch_size},
                          {"seed", seed},
                          {"ce_norm", to_string(ce_norm)},
                          {"log_every", log_every},
                          {"grad_clip", grad_clip},
                          {"tmse_detach_previous", tmse_detach_previous},
                          {"target_accuracy", target_accuracy},
                          {"accuracy_check_every", accuracy_check_every}};
}

namespace {

void clip_gradients(const std::vector<ParamTensor*>& params, double max_norm) {
    double sq = 0.0;
    for (const ParamTensor* p : params) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (ParamTensor* p : params) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
    }
}

struct BatchLoss {
    double total = 0.0;
    std::vector<StageLoss> per_stage;
};

// Mean loss over the batch; gradients of the mean accumulate into the net.
BatchLoss train_batch(MsTcnNet& net, const SliceBatch& batch, const LossOptions& opts) {
    BatchLoss out;
    out.per_stage.assign(net.stages.size(), StageLoss{});
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (const Slice* slice : batch.items) {
        ModelForwardCache fwd = model_forward_cached(net, slice->input);
        std::vector<Tensor> stage_probs;
        stage_probs.reserve(fwd.outputs.size());
        for (const StageOutput& so : fwd.outputs) stage_probs.push_back(so.probs);

        const LossBreakdown breakdown = total_loss(stage_probs, slice->labels, opts);
        out.total += breakdown.total * inv_batch;
        for (std::size_t s = 0; s < breakdown.per_stage.size(); ++s) {
            out.per_stage[s].ce += breakdown.per_stage[s].ce * inv_batch;
            out.per_stage[s].tmse += breakdown.per_stage[s].tmse * inv_batch;
            out.per_stage[s].combined += breakdown.per_stage[s].combined * inv_batch;
        }

        const std::vector<Tensor> dprobs = total_loss_backward(stage_probs, slice->labels, opts, inv_batch);
        model_backward(net, fwd, dprobs);
    }
    return out;
}

std::string metrics_line(int epoch, int step, const BatchLoss& loss) {
    nlohmann::json per_stage = nlohmann::json::array();
    for (const StageLoss& s : loss.per_stage) per_stage.push_back({{"ce", s.ce}, {"tmse", s.tmse}});
    return nlohmann::json{{"epoch", epoch}, {"step", step}, {"total", loss.total}, {"per_stage", per_stage}}.dump();
}

}  // namespace

double sample_accuracy(const MsTcnNet& net, const std::vector<Slice>& slices) {
    long long correct = 0, total = 0;
    for (const Slice& slice : slices) {
        const std::vector<StageOutput> outputs = model_forward(net, slice.input);
        const Tensor& probs = outputs.back().probs;
        const int t_len = probs.dim(0);
        const int classes = probs.dim(1);
        for (int t = 0; t < t_len; ++t) {
            const double* row = probs.data() + static_cast<std::size_t>(t) * classes;
            int best = 0;
            for (int c = 1; c < classes; ++c) {
                if (row[c] > row[best]) best = c;
            }
            correct += best == slice.labels[static_cast<std::size_t>(t)] ? 1 : 0;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(const TrainConfig& config, const Dataset& dataset, const std::string& checkpoint_path,
                  std::ostream* metrics_out, std::ostream* diagnostics) {
    if (dataset.empty()) throw InvalidArgument("train: dataset is empty");
    const double rate = dataset.front().series.sample_rate_hz;
    config.validate(rate);

    std::vector<Slice> slices;
    for (const LabeledSeries& ls : dataset) {
        auto s = slice_sequence(ls.series, ls.labels, config.slice_seconds, config.effective_stride());
        slices.insert(slices.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    if (slices.empty()) {
        throw InvalidArgument("train: no full slices; every series is shorter than slice_seconds");
    }

    TrainResult result;
    result.net = build_model(config.model, config.seed);
    const std::vector<ParamTensor*> params = result.net.params();
    const AdamConfig adam{config.lr, config.beta1, config.beta2, config.eps};
    const LossOptions loss_opts = config.loss_options();
    Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

    if (!checkpoint_path.empty()) save_checkpoint(result.net, checkpoint_path, config.seed, 0);

    int step = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::vector<SliceBatch> batches = make_batches(slices, config.batch_size, shuffle_rng);
        double epoch_total = 0.0;
        for (const SliceBatch& batch : batches) {
            result.net.zero_grads();
            const BatchLoss loss = train_batch(result.net, batch, loss_opts);
            if (!std::isfinite(loss.total)) {
                throw DivergedError("train: loss became non-finite at epoch " + std::to_string(epoch) + " step " +
                                    std::to_string(step + 1) + "; last good checkpoint retained");
            }
            if (config.grad_clip > 0.0) clip_gradients(params, config.grad_clip);
            adam_step(params, adam);
            ++step;
            epoch_total += loss.total;
            if (metrics_out && (step % config.log_every == 0)) {
                (*metrics_out) << metrics_line(epoch, step, loss) << '\n';
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_total = epoch_total / static_cast<double>(batches.size());

        const bool check_accuracy = config.target_accuracy > 0.0 &&
                                    (epoch % std::max(1, config.accuracy_check_every) == 0 || epoch == config.epochs);
        if (check_accuracy) stats.train_accuracy = sample_accuracy(result.net, slices);
        result.epochs.push_back(stats);

        if (!checkpoint_path.empty()) save_checkpoint(result.net, checkpoint_path, config.seed, epoch);
        if (diagnostics) {
            (*diagnostics) << "[" << iso8601_utc_now() << "] epoch " << epoch << "/" << config.epochs
                           << " mean_total=" << stats.mean_total;
            if (stats.train_accuracy >= 0.0) (*diagnostics) << " train_acc=" << stats.train_accuracy;
            (*diagnostics) << '\n';
        }
        if (check_accuracy && stats.train_accuracy >= config.target_accuracy) break;
    }
    result.steps = step;
    return result;
}

std::vector<Tensor> predict(const MsTcnNet& net, const Tensor& series) {
    const std::vector<StageOutput> outputs = model_forward(net, series);
    std::vector<Tensor> probs;
    probs.reserve(outputs.size());
    for (const StageOutput& so : outputs) probs.push_back(so.probs);
    return probs;
}

// ------------------------------------------------------------ checkpoints

namespace {

constexpr char kMagic[8] = {'M', 'S', 'T', 'C', 'N', 'C', 'K', '1'};

void append_f32_le(std::string& blob, double v) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    blob.push_back(static_cast<char>(bits & 0xff));
    blob.push_back(static_cast<char>((bits >> 8) & 0xff));
    blob.push_back(static_cast<char>((bits >> 16) & 0xff));
    blob.push_back(static_cast<char>((bits >> 24) & 0xff));
}

double read_f32_le(const std::string& blob, std::size_t offset) {
    std::uint32_t bits = static_cast<std::uint8_t>(blob[offset]) |
                         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[offset + 1])) << 8) |
                         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[offset + 2])) << 16) |
                         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(blob[offset + 3])) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
}

}  // namespace

void save_checkpoint(const MsTcnNet& net, const std::string& path, std::uint64_t seed, int epoch) {
    nlohmann::json tensors = nlohmann::json::array();
    std::string blob;
    for (const ParamTensor* p : net.params()) {
        tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", blob.size()}});
        for (std::size_t i = 0; i < p->value.size(); ++i) append_f32_le(blob, p->value[i]);
    }
    const nlohmann::json manifest{{"format_version", kCheckpointFormatVersion},
                                  {"tool_version", kVersion},
                                  {"config", net.config.to_json()},
                                  {"seed", seed},
                                  {"epoch", epoch},
                                  {"blob_bytes", blob.size()},
                                  {"tensors", tensors}};
    const std::string mjson = manifest.dump();

    std::string file;
    file.append(kMagic, sizeof(kMagic));
    const std::uint32_t mlen = static_cast<std::uint32_t>(mjson.size());
    file.push_back(static_cast<char>((mlen >> 24) & 0xff));
    file.push_back(static_cast<char>((mlen >> 16) & 0xff));
    file.push_back(static_cast<char>((mlen >> 8) & 0xff));
    file.push_back(static_cast<char>(mlen & 0xff));
    file += mjson;
    file += blob;
    atomic_write_file(path, file);
}

MsTcnNet load_checkpoint(const std::string& path, CheckpointMeta* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("load_checkpoint: cannot open " + path);
    std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (file.size() < 12 || std::memcmp(file.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(path + ": not a checkpoint (bad magic)");
    }
    const std::uint32_t mlen = (static_cast<std::uint32_t>(static_cast<std::uint8_t>(file[8])) << 24) |
                               (static_cast<std::uint32_t>(static_cast<std::uint8_t>(file[9])) << 16) |
                               (static_cast<std::uint32_t>(static_cast<std::uint8_t>(file[10])) << 8) |
                               static_cast<std::uint32_t>(static_cast<std::uint8_t>(file[11]));
    if (file.size() < 12 + static_cast<std::size_t>(mlen)) throw FormatError(path + ": truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(file.substr(12, mlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": manifest is not valid JSON: " + e.what());
    }
    if (manifest.value("format_version", -1) != kCheckpointFormatVersion) {
        throw FormatError(path + ": unsupported checkpoint format version");
    }

    const ModelConfig config = ModelConfig::from_json(manifest.at("config"));
    MsTcnNet net = build_model(config, 0);

    const std::string blob = file.substr(12 + mlen);
    if (blob.size() != manifest.value("blob_bytes", std::size_t{0})) {
        throw FormatError(path + ": truncated blob (" + std::to_string(blob.size()) + " bytes, manifest says " +
                          std::to_string(manifest.value("blob_bytes", std::size_t{0})) + ")");
    }

    // Index manifest tensors by name; each must appear exactly once.
    std::map<std::string, nlohmann::json> by_name;
    for (const auto& t : manifest.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        if (!by_name.emplace(name, t).second) throw FormatError(path + ": duplicate tensor \"" + name + "\"");
    }

    for (ParamTensor* p : net.params()) {
        const auto it = by_name.find(p->name);
        if (it == by_name.end()) throw FormatError(path + ": manifest missing tensor \"" + p->name + "\"");
        const std::vector<int> shape = it->second.at("shape").get<std::vector<int>>();
        if (shape != p->value.shape()) {
            throw FormatError(path + ": tensor \"" + p->name + "\" shape mismatch");
        }
        const std::size_t offset = it->second.at("offset").get<std::size_t>();
        if (offset + 4 * p->value.size() > blob.size()) {
            throw FormatError(path + ": tensor \"" + p->name + "\" extends past end of blob");
        }
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = read_f32_le(blob, offset + 4 * i);
        by_name.erase(it);
    }
    if (!by_name.empty()) throw FormatError(path + ": manifest lists unknown tensor \"" + by_name.begin()->first + "\"");

    if (meta) {
        meta->config = config;
        meta->seed = manifest.value("seed", std::uint64_t{0});
        meta->epoch = manifest.value("epoch", 0);
        meta->manifest = manifest;
    }
    return net;
}

}  // namespace mstcn
