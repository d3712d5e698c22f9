#include "nucleonet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <thread>

#include "nucleonet/error.hpp"
#include "nucleonet/features.hpp"

namespace nucleo {

void ExperimentConfig::validate() const {
    if (split_fraction <= 0.0 || split_fraction >= 1.0)
        throw UsageError("config: split_fraction must be in (0,1)");
    if (rounds == 0) throw UsageError("config: rounds must be positive");
    if (lr < 0.0 || cae_lr <= 0.0) throw UsageError("config: learning rates must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw UsageError("config: momentum must be in [0,1)");
    if (m < 0.0 || m > 1.0) throw UsageError("config: loss weight m must be in [0,1]");
    if (batch_size == 0) throw UsageError("config: batch_size must be positive");
    if (lr_decay_every == 0) throw UsageError("config: lr_decay_every must be positive");
    if (filter_div == 0) throw UsageError("config: filter_div must be positive");
    try {
        WeightMatrixSpec{32, c, w}.validate();
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
}

double default_lr(Variant v) {
    return (v == Variant::Default || v == Variant::W) ? 0.0005 : 0.0001;
}

bool default_decay(Variant v) { return v == Variant::WFM; }

double ExperimentConfig::lr_for(Variant v) const { return lr > 0.0 ? lr : default_lr(v); }

bool ExperimentConfig::decay_for(Variant v) const {
    return lr_decay < 0 ? default_decay(v) : lr_decay != 0;
}

double lr_schedule(size_t epoch, double base, bool decay, size_t every) {
    if (!decay) return base;
    return base * std::pow(0.1, static_cast<double>(epoch / every));
}

SgdMomentum::SgdMomentum(std::vector<Param*> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
    velocity_.reserve(params_.size());
    for (Param* p : params_) velocity_.push_back(Tensor(p->value->shape()));
}

void SgdMomentum::step(const std::string& where) {
    for (size_t i = 0; i < params_.size(); ++i) {
        Param* p = params_[i];
        if (!p->grad.all_finite())
            throw NumericError("non-finite gradient in '" + p->name + "' at " + where);
        Tensor& v = velocity_[i];
        Tensor& val = *p->value;
        for (size_t k = 0; k < v.size(); ++k) {
            v[k] = momentum_ * v[k] - lr_ * p->grad[k];
            val[k] += v[k];
        }
    }
}

Split split_dataset(size_t n, uint64_t seed, double fraction, size_t round_index) {
    if (n < 2) throw DataError("split_dataset: need at least 2 rows, got " + std::to_string(n));
    if (fraction <= 0.0 || fraction >= 1.0)
        throw DataError("split_dataset: fraction must be in (0,1)");
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(mix_seed(seed, round_index, 0x5B717));
    for (size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    size_t n_test = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
    n_test = std::clamp<size_t>(n_test, 1, n - 1);
    Split s;
    s.train.assign(perm.begin(), perm.end() - static_cast<std::ptrdiff_t>(n_test));
    s.test.assign(perm.end() - static_cast<std::ptrdiff_t>(n_test), perm.end());
    return s;
}

size_t worker_count() {
    const char* env = std::getenv("NUCLEONET_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0)
        throw UsageError(std::string("NUCLEONET_THREADS must be a non-negative integer, got '") +
                         env + "'");
    return v == 0 ? 1 : static_cast<size_t>(v);
}

Dataset load_dataset(const DatasetManifest& manifest, const std::string& image_root,
                     size_t crop_side, const std::string& feature_path) {
    Dataset ds;
    Tensor feats;
    if (!feature_path.empty()) {
        feats = load_feature_file(feature_path);
        if (feats.extent(0) != manifest.rows.size())
            throw DataError("feature file rows (" + std::to_string(feats.extent(0)) +
                            ") do not match manifest rows (" +
                            std::to_string(manifest.rows.size()) + ")");
        ds.injected_dim = feats.extent(1);
    }
    ds.samples.reserve(manifest.rows.size());
    for (size_t i = 0; i < manifest.rows.size(); ++i) {
        const ManifestRow& row = manifest.rows[i];
        Sample s;
        s.image = center_crop(load_ppm(image_root + "/" + row.path), crop_side);
        s.labels = row.labels;
        if (ds.injected_dim > 0) {
            s.injected = Tensor({ds.injected_dim});
            for (size_t j = 0; j < ds.injected_dim; ++j) s.injected[j] = feats.at2(i, j);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Tensor feedback_from_output(const ModelSpec& spec, const CnnOutput& out) {
    if (spec.is_flat()) return out.flat;
    return concat_vectors({&out.attr, &out.shape});
}

Prediction predict_two_pass(CnnNetwork& net, const Tensor& image, const Tensor* injected) {
    Tensor zero_fb({net.spec().feedback_dim});
    CnnOutput first = net.forward(image, zero_fb, injected, false, nullptr);
    Tensor fb = feedback_from_output(net.spec(), first);
    CnnOutput second = net.forward(image, fb, injected, false, nullptr);
    return net.to_prediction(second);
}

void fit_standardizer(CnnNetwork& net, const Dataset& data, const std::vector<size_t>& indices) {
    size_t dim = net.spec().injected_dim;
    if (dim == 0) return;
    if (data.injected_dim != dim)
        throw DataError("injected feature dim " + std::to_string(data.injected_dim) +
                        " does not match model injected_dim " + std::to_string(dim));
    if (indices.empty()) throw DataError("fit_standardizer: empty index set");
    Tensor mean({dim}), var({dim});
    for (size_t idx : indices)
        for (size_t j = 0; j < dim; ++j) mean[j] += data.samples[idx].injected[j];
    mean.scale(1.0 / static_cast<double>(indices.size()));
    for (size_t idx : indices)
        for (size_t j = 0; j < dim; ++j) {
            double d = data.samples[idx].injected[j] - mean[j];
            var[j] += d * d;
        }
    var.scale(1.0 / static_cast<double>(indices.size()));
    Tensor sd({dim});
    for (size_t j = 0; j < dim; ++j) sd[j] = std::max(std::sqrt(var[j]), 1e-8);
    net.feat_mean = mean;
    net.feat_std = sd;
}

namespace {

void shuffle_indices(std::vector<size_t>& order, Rng& rng) {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
}

// Contiguous partition of [0, n) into at most t near-equal pieces.
std::vector<std::pair<size_t, size_t>> partition(size_t n, size_t t) {
    t = std::max<size_t>(1, std::min(t, n));
    std::vector<std::pair<size_t, size_t>> parts;
    size_t base = n / t, rem = n % t, start = 0;
    for (size_t k = 0; k < t; ++k) {
        size_t len = base + (k < rem ? 1 : 0);
        parts.push_back({start, start + len});
        start += len;
    }
    return parts;
}

}  // namespace

Checkpoint pretrain_cae(const std::vector<const Tensor*>& images, const ModelSpec& spec,
                        const ExperimentConfig& cfg, std::ostream* log) {
    if (images.empty()) throw DataError("pretrain_cae: empty image set");
    cfg.validate();
    Rng init(mix_seed(cfg.seed, 0xCAE));
    CaeNetwork net(spec, init);
    WeightMatrixSpec wspec{spec.input_side, cfg.c, cfg.w};
    wspec.validate();
    Tensor weights = weight_matrix(wspec);

    size_t nthreads = worker_count();
    std::vector<std::unique_ptr<CaeNetwork>> clones;
    for (size_t t = 1; t < nthreads; ++t) clones.push_back(net.clone_shared());

    SgdMomentum opt(net.params(), cfg.cae_lr, cfg.momentum);
    std::vector<size_t> order(images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < cfg.cae_epochs; ++epoch) {
        Rng shuf(mix_seed(cfg.seed, 0xCAE5, epoch));
        shuffle_indices(order, shuf);
        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            double inv = 1.0 / static_cast<double>(b1 - b0);
            net.zero_grads();
            for (auto& c : clones) c->zero_grads();

            auto parts = partition(b1 - b0, nthreads);
            std::vector<double> part_loss(parts.size(), 0.0);
            auto work = [&](size_t pi, CaeNetwork* worker) {
                for (size_t k = parts[pi].first; k < parts[pi].second; ++k) {
                    const Tensor& x = *images[order[b0 + k]];
                    Tensor r = worker->forward(x);
                    LossGrad lg = wmse(x, r, weights);
                    part_loss[pi] += lg.loss;
                    lg.grad.scale(inv);
                    worker->backward(lg.grad);
                }
            };
            if (parts.size() == 1) {
                work(0, &net);
            } else {
                std::vector<std::thread> threads;
                for (size_t pi = 1; pi < parts.size(); ++pi)
                    threads.emplace_back(work, pi, clones[pi - 1].get());
                work(0, &net);
                for (auto& th : threads) th.join();
                auto main_params = net.params();
                for (size_t pi = 1; pi < parts.size(); ++pi) {
                    auto cp = clones[pi - 1]->params();
                    for (size_t j = 0; j < main_params.size(); ++j)
                        main_params[j]->grad += cp[j]->grad;
                }
            }
            double batch_loss = 0.0;
            for (double pl : part_loss) batch_loss += pl;
            batch_loss *= inv;
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite loss at cae epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batches));
            opt.step("cae epoch " + std::to_string(epoch) + " batch " + std::to_string(batches));
            epoch_loss += batch_loss;
            ++batches;
        }
        if (log) {
            (*log) << epoch << "\t0\t" << cfg.cae_lr << "\t"
                   << epoch_loss / static_cast<double>(batches) << "\n";
            log->flush();
        }
    }
    Checkpoint ck = snapshot_cae(net);
    ck.meta["epochs"] = std::to_string(cfg.cae_epochs);
    ck.meta["w"] = std::to_string(cfg.w);
    ck.meta["c"] = std::to_string(cfg.c);
    return ck;
}

namespace {

struct SampleGrad {
    double loss = 0.0;
    CnnOutput grad;
};

// Loss and output-probability gradient for one sample; grad scaled by `inv`.
SampleGrad sample_loss(const ModelSpec& spec, const CnnOutput& out, const LabelVector& labels,
                       double m, double inv) {
    SampleGrad sg;
    if (spec.is_flat()) {
        LossGrad lg = bce_multilabel(out.flat, labels.flat_targets());
        sg.loss = lg.loss;
        lg.grad.scale(inv);
        sg.grad.flat = std::move(lg.grad);
    } else {
        LossGrad ml = bce_multilabel(out.attr, labels.attr_targets());
        LossGrad sl = ce_singlelabel(out.shape, static_cast<size_t>(labels.shape));
        MultiTaskLoss mt = combined_loss(ml.loss, sl.loss, m);
        sg.loss = mt.total;
        ml.grad.scale(m * inv);
        sl.grad.scale((1.0 - m) * inv);
        sg.grad.attr = std::move(ml.grad);
        sg.grad.shape = std::move(sl.grad);
    }
    return sg;
}

}  // namespace

Checkpoint train_two_cycle(CnnNetwork& net, const Dataset& data,
                           const std::vector<size_t>& indices, const ExperimentConfig& cfg,
                           std::ostream* log) {
    cfg.validate();
    const ModelSpec& spec = net.spec();
    if (indices.empty()) throw DataError("train_two_cycle: empty training set");
    if (spec.injected_dim > 0 && data.injected_dim != spec.injected_dim)
        throw DataError("injected feature dim " + std::to_string(data.injected_dim) +
                        " does not match model injected_dim " + std::to_string(spec.injected_dim));

    double base_lr = cfg.lr_for(spec.variant);
    bool decay = cfg.decay_for(spec.variant);

    size_t nthreads = worker_count();
    std::vector<std::unique_ptr<CnnNetwork>> clones;
    for (size_t t = 1; t < nthreads; ++t) clones.push_back(net.clone_shared());

    SgdMomentum opt(net.params(), base_lr, cfg.momentum);

    Tensor zero_fb({spec.feedback_dim});
    // cycle 1 feedback is all-zero; cycle 2 feedback is frozen from the
    // cycle-1 model and never recomputed mid-cycle
    std::vector<Tensor> feedback(indices.size(), zero_fb);

    std::vector<size_t> order(indices.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    size_t global_epoch = 0;
    for (int cycle = 1; cycle <= 2; ++cycle) {
        for (size_t e = 0; e < cfg.cycle_epochs; ++e, ++global_epoch) {
            double lr = lr_schedule(global_epoch, base_lr, decay, cfg.lr_decay_every);
            opt.set_lr(lr);
            Rng shuf(mix_seed(cfg.seed, 0x0E90C, global_epoch));
            shuffle_indices(order, shuf);
            double epoch_loss = 0.0;
            size_t batches = 0;
            for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
                size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
                double inv = 1.0 / static_cast<double>(b1 - b0);
                net.zero_grads();
                for (auto& c : clones) c->zero_grads();

                auto parts = partition(b1 - b0, nthreads);
                std::vector<double> part_loss(parts.size(), 0.0);
                auto work = [&](size_t pi, CnnNetwork* worker) {
                    for (size_t k = parts[pi].first; k < parts[pi].second; ++k) {
                        size_t local = order[b0 + k];
                        const Sample& s = data.samples[indices[local]];
                        const Tensor* inj = spec.injected_dim > 0 ? &s.injected : nullptr;
                        Rng drop(mix_seed(cfg.seed ^ 0xD80D80ULL, global_epoch, indices[local]));
                        CnnOutput out =
                            worker->forward(s.image, feedback[local], inj, true, &drop);
                        SampleGrad sg = sample_loss(spec, out, s.labels, cfg.m, inv);
                        part_loss[pi] += sg.loss;
                        worker->backward(sg.grad);
                    }
                };
                if (parts.size() == 1) {
                    work(0, &net);
                } else {
                    std::vector<std::thread> threads;
                    for (size_t pi = 1; pi < parts.size(); ++pi)
                        threads.emplace_back(work, pi, clones[pi - 1].get());
                    work(0, &net);
                    for (auto& th : threads) th.join();
                    auto main_params = net.params();
                    for (size_t pi = 1; pi < parts.size(); ++pi) {
                        auto cp = clones[pi - 1]->params();
                        for (size_t j = 0; j < main_params.size(); ++j)
                            main_params[j]->grad += cp[j]->grad;
                    }
                }
                double batch_loss = 0.0;
                for (double pl : part_loss) batch_loss += pl;
                batch_loss *= inv;
                if (!std::isfinite(batch_loss))
                    throw NumericError("non-finite loss at epoch " + std::to_string(global_epoch) +
                                       " batch " + std::to_string(batches));
                opt.step("epoch " + std::to_string(global_epoch) + " batch " +
                         std::to_string(batches));
                epoch_loss += batch_loss;
                ++batches;
            }
            if (log) {
                (*log) << global_epoch << "\t" << cycle << "\t" << lr << "\t"
                       << epoch_loss / static_cast<double>(batches) << "\n";
                log->flush();
            }
        }
        if (cycle == 1) {
            for (size_t i = 0; i < indices.size(); ++i) {
                const Sample& s = data.samples[indices[i]];
                const Tensor* inj = spec.injected_dim > 0 ? &s.injected : nullptr;
                CnnOutput out = net.forward(s.image, zero_fb, inj, false, nullptr);
                feedback[i] = feedback_from_output(spec, out);
            }
        }
    }
    Checkpoint ck = snapshot(net);
    ck.meta["epochs"] = std::to_string(global_epoch);
    ck.meta["cycles"] = "2";
    return ck;
}

}  // namespace nucleo
