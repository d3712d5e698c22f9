#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nucleonet/checkpoint.hpp"
#include "nucleonet/data.hpp"
#include "nucleonet/losses.hpp"
#include "nucleonet/network.hpp"
#include "nucleonet/rng.hpp"

namespace nucleo {

struct ExperimentConfig {
    uint64_t seed = 12345;
    double split_fraction = 400.0 / 2078.0;
    size_t rounds = 5;
    size_t cae_epochs = 30;
    size_t cycle_epochs = 50;
    double lr = 0.0;            // 0 picks the per-variant default
    double cae_lr = 0.00001;
    double momentum = 0.975;
    int lr_decay = -1;          // -1 variant default, 0 off, 1 on
    size_t lr_decay_every = 50;
    double w = 5.0;
    size_t c = 20;
    double m = 0.6;
    size_t batch_size = 32;
    size_t filter_div = 1;
    size_t injected_dim = 64;

    void validate() const;
    double lr_for(Variant v) const;       // explicit lr or variant default
    bool decay_for(Variant v) const;      // explicit flag or variant default
};

// 0.0005 for default/w, 0.0001 for wf/wfm.
double default_lr(Variant v);
// Decay enabled for wfm only by default.
bool default_decay(Variant v);

double lr_schedule(size_t epoch, double base, bool decay, size_t every = 50);

class SgdMomentum {
public:
    SgdMomentum(std::vector<Param*> params, double lr, double momentum);

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    // v <- mu*v - lr*g; p <- p + v. Throws NumericError naming the parameter
    // on any non-finite gradient; `where` gives epoch/batch context.
    void step(const std::string& where);

private:
    std::vector<Param*> params_;
    std::vector<Tensor> velocity_;
    double lr_;
    double momentum_;
};

struct Split {
    std::vector<size_t> train;
    std::vector<size_t> test;
};

// Deterministic permutation from (seed, round_index); the last
// ceil(fraction*N) indices become the test set.
Split split_dataset(size_t n, uint64_t seed, double fraction, size_t round_index);

// Worker count from NUCLEONET_THREADS (0 or unset = single-threaded).
size_t worker_count();

struct Sample {
    Tensor image;      // [3, side, side]
    LabelVector labels;
    Tensor injected;   // [injected_dim] or empty
};

struct Dataset {
    std::vector<Sample> samples;
    size_t injected_dim = 0;
};

// Load images (center-cropped to crop_side) and optional feature rows.
Dataset load_dataset(const DatasetManifest& manifest, const std::string& image_root,
                     size_t crop_side, const std::string& feature_path = "");

// Feedback slot contents for the second cycle: flat output probabilities, or
// attr then shape probabilities for the split-head variant.
Tensor feedback_from_output(const ModelSpec& spec, const CnnOutput& out);

// Evaluation-time forward: first pass with zero feedback, second pass feeding
// back the first pass's probabilities.
Prediction predict_two_pass(CnnNetwork& net, const Tensor& image, const Tensor* injected);

Checkpoint pretrain_cae(const std::vector<const Tensor*>& images, const ModelSpec& spec,
                        const ExperimentConfig& cfg, std::ostream* log);

// Two supervised cycles on `net` in place; returns the final checkpoint.
// indices selects the training rows of `data`.
Checkpoint train_two_cycle(CnnNetwork& net, const Dataset& data,
                           const std::vector<size_t>& indices, const ExperimentConfig& cfg,
                           std::ostream* log);

// Mean/std of the injected rows over the given indices (std floored at 1e-8).
void fit_standardizer(CnnNetwork& net, const Dataset& data, const std::vector<size_t>& indices);

}  // namespace nucleo
