#pragma once

// Shared helpers for the test binaries: random tensors, a generic
// finite-difference probe, a canonical synthetic dataset spec and scratch
// directories.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "mstcn/data.hpp"
#include "mstcn/rng.hpp"
#include "mstcn/tensor.hpp"

namespace test_support {

inline mstcn::Tensor random_tensor(std::vector<int> shape, mstcn::Rng& rng, double lo = -1.0, double hi = 1.0) {
    mstcn::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Central-difference gradient of a scalar function with respect to one
// tensor, probed coordinate by coordinate.
inline mstcn::Tensor numeric_grad(mstcn::Tensor& x, const std::function<double()>& f, double h = 1e-5) {
    mstcn::Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double plus = f();
        x[i] = saved - h;
        const double minus = f();
        x[i] = saved;
        g[i] = (plus - minus) / (2.0 * h);
    }
    return g;
}

inline double max_rel_error(const mstcn::Tensor& analytic, const mstcn::Tensor& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

inline double max_abs_diff(const mstcn::Tensor& a, const mstcn::Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

// Four activity classes over six channels: three jump-like pulses with
// distinct amplitudes and mixings plus one slow squat-like excursion.
inline mstcn::SynthSpec canonical_spec(int num_subjects, double session_seconds, std::uint64_t seed,
                                       double event_rate_hz = 0.05) {
    mstcn::SynthSpec spec;
    spec.num_subjects = num_subjects;
    spec.session_seconds = session_seconds;
    spec.noise_sigma = 0.05;
    spec.seed = seed;

    mstcn::ClassTemplate cmj;
    cmj.name = "cmj";
    cmj.kind = mstcn::PulseKind::jump;
    cmj.amp_lo = 2.2;
    cmj.amp_hi = 3.0;
    cmj.dur_lo = 0.5;
    cmj.dur_hi = 0.8;
    cmj.channel_weights = {0.2, 0.1, 1.0, 0.1, 0.05, 0.05};
    cmj.event_rate_hz = event_rate_hz;

    mstcn::ClassTemplate block;
    block.name = "block";
    block.kind = mstcn::PulseKind::jump;
    block.amp_lo = 1.6;
    block.amp_hi = 2.2;
    block.dur_lo = 0.35;
    block.dur_hi = 0.55;
    block.channel_weights = {0.05, 0.05, 0.8, 0.7, 0.1, 0.3};
    block.event_rate_hz = event_rate_hz;

    mstcn::ClassTemplate smash;
    smash.name = "smash";
    smash.kind = mstcn::PulseKind::jump;
    smash.amp_lo = 2.8;
    smash.amp_hi = 3.8;
    smash.dur_lo = 0.45;
    smash.dur_hi = 0.7;
    smash.channel_weights = {0.9, 0.6, 0.7, 0.05, 0.5, 0.05};
    smash.event_rate_hz = event_rate_hz;

    mstcn::ClassTemplate squat;
    squat.name = "squat";
    squat.kind = mstcn::PulseKind::slow;
    squat.amp_lo = 0.5;
    squat.amp_hi = 0.9;
    squat.dur_lo = 0.8;
    squat.dur_hi = 1.6;
    squat.channel_weights = {0.1, 0.8, 0.4, 0.1, 0.05, 0.6};
    squat.event_rate_hz = event_rate_hz;

    spec.class_templates = {cmj, block, smash, squat};
    return spec;
}

// Scratch directory removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("mstcn_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& name = "") const { return (name.empty() ? path_ : path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

}  // namespace test_support
