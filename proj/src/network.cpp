#include "nucleonet/network.hpp"

#include <algorithm>
#include <sstream>

#include "nucleonet/error.hpp"

namespace nucleo {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Default: return "default";
        case Variant::W: return "w";
        case Variant::WF: return "wf";
        case Variant::WFM: return "wfm";
    }
    return "?";
}

Variant variant_from_name(const std::string& s) {
    if (s == "default") return Variant::Default;
    if (s == "w") return Variant::W;
    if (s == "wf") return Variant::WF;
    if (s == "wfm") return Variant::WFM;
    throw DataError("unknown variant '" + s + "' (expected default|w|wf|wfm)");
}

// ---------------------------------------------------------------- ModelSpec

ModelSpec ModelSpec::make(Variant v, size_t filter_div, size_t injected_dim) {
    ModelSpec s;
    s.variant = v;
    auto ch = [&](size_t c) { return std::max<size_t>(1, c / filter_div); };
    s.conv_stack = {ConvStackItem::conv(ch(80)),  ConvStackItem::conv(ch(80)),
                    ConvStackItem::conv(ch(120)), ConvStackItem::maxpool(),
                    ConvStackItem::conv(ch(100)), ConvStackItem::conv(ch(140)),
                    ConvStackItem::conv(ch(140)), ConvStackItem::maxpool()};
    if (v == Variant::WF || v == Variant::WFM) {
        s.injected_dim = injected_dim;
        s.bottleneck = 1000;
    }
    s.feedback_dim = (v == Variant::WFM) ? s.n_attr + s.n_shape : s.flat_outputs;
    return s;
}

ModelSpec ModelSpec::make_scaled8(Variant v) {
    ModelSpec s;
    s.variant = v;
    s.input_side = 8;
    s.conv_stack = {ConvStackItem::conv(8), ConvStackItem::conv(8), ConvStackItem::conv(12),
                    ConvStackItem::maxpool()};
    s.fc1 = 40;
    s.fc2 = 10;
    s.head_hidden = 10;
    if (v == Variant::WF || v == Variant::WFM) {
        s.injected_dim = 8;
        s.bottleneck = 100;
    }
    s.feedback_dim = (v == Variant::WFM) ? s.n_attr + s.n_shape : s.flat_outputs;
    return s;
}

void ModelSpec::validate() const {
    if ((variant == Variant::WF || variant == Variant::WFM) && injected_dim == 0)
        throw DataError("spec invariant: variant " + variant_name(variant) +
                        " requires injected_dim > 0");
    if ((variant == Variant::WF || variant == Variant::WFM) && bottleneck == 0)
        throw DataError("spec invariant: variant " + variant_name(variant) +
                        " requires the bottleneck (1000-unit) layer");
    if (variant == Variant::WFM && n_shape < 2)
        throw DataError("spec invariant: wfm requires n_shape >= 2");
    if (variant != Variant::WF && variant != Variant::WFM && injected_dim != 0)
        throw DataError("spec invariant: variant " + variant_name(variant) +
                        " must not have injected features");
    size_t expect_fb = is_flat() ? flat_outputs : n_attr + n_shape;
    if (feedback_dim != expect_fb)
        throw DataError("spec invariant: feedback_dim " + std::to_string(feedback_dim) +
                        " does not match label universe " + std::to_string(expect_fb));
    if (conv_stack.empty()) throw DataError("spec invariant: empty conv stack");
    conv_trace();  // throws on impossible geometry
}

std::vector<size_t> ModelSpec::conv_trace() const {
    std::vector<size_t> out;
    size_t s = input_side;
    for (const auto& item : conv_stack) {
        if (item.pool) {
            if (s < 2) throw DataError("conv stack: maxpool on side " + std::to_string(s));
            s /= 2;
        } else {
            if (s < kernel)
                throw DataError("conv stack: side " + std::to_string(s) + " smaller than kernel " +
                                std::to_string(kernel));
            s = s - kernel + 1;
        }
        out.push_back(s);
    }
    return out;
}

size_t ModelSpec::flatten_dim() const {
    size_t ch = in_channels;
    for (const auto& item : conv_stack)
        if (!item.pool) ch = item.out_ch;
    size_t side = conv_trace().back();
    return ch * side * side;
}

std::string ModelSpec::canonical_text() const {
    std::ostringstream os;
    os << "variant=" << variant_name(variant) << "\n";
    os << "input_side=" << input_side << "\n";
    os << "in_channels=" << in_channels << "\n";
    os << "conv_stack=";
    for (size_t i = 0; i < conv_stack.size(); ++i) {
        if (i) os << ",";
        if (conv_stack[i].pool)
            os << "P";
        else
            os << "C" << conv_stack[i].out_ch;
    }
    os << "\n";
    os << "kernel=" << kernel << "\n";
    os << "fc1=" << fc1 << "\n";
    os << "fc2=" << fc2 << "\n";
    os << "n_attr=" << n_attr << "\n";
    os << "n_shape=" << n_shape << "\n";
    os << "flat_outputs=" << flat_outputs << "\n";
    os << "feedback_dim=" << feedback_dim << "\n";
    os << "injected_dim=" << injected_dim << "\n";
    os << "bottleneck=" << bottleneck << "\n";
    os << "head_hidden=" << head_hidden << "\n";
    os << "dropout_p=" << dropout_p << "\n";
    return os.str();
}

ModelSpec ModelSpec::parse(const std::string& text) {
    ModelSpec s;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("model spec: malformed line '" + line + "'");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "variant") s.variant = variant_from_name(val);
        else if (key == "input_side") s.input_side = std::stoul(val);
        else if (key == "in_channels") s.in_channels = std::stoul(val);
        else if (key == "kernel") s.kernel = std::stoul(val);
        else if (key == "fc1") s.fc1 = std::stoul(val);
        else if (key == "fc2") s.fc2 = std::stoul(val);
        else if (key == "n_attr") s.n_attr = std::stoul(val);
        else if (key == "n_shape") s.n_shape = std::stoul(val);
        else if (key == "flat_outputs") s.flat_outputs = std::stoul(val);
        else if (key == "feedback_dim") s.feedback_dim = std::stoul(val);
        else if (key == "injected_dim") s.injected_dim = std::stoul(val);
        else if (key == "bottleneck") s.bottleneck = std::stoul(val);
        else if (key == "head_hidden") s.head_hidden = std::stoul(val);
        else if (key == "dropout_p") s.dropout_p = std::stod(val);
        else if (key == "conv_stack") {
            s.conv_stack.clear();
            std::istringstream ss(val);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                if (tok == "P") s.conv_stack.push_back(ConvStackItem::maxpool());
                else if (!tok.empty() && tok[0] == 'C')
                    s.conv_stack.push_back(ConvStackItem::conv(std::stoul(tok.substr(1))));
                else throw DataError("model spec: bad conv stack token '" + tok + "'");
            }
        } else if (key.rfind("meta.", 0) == 0) {
            // metadata lines are parsed by the checkpoint reader
        } else {
            throw DataError("model spec: unknown key '" + key + "'");
        }
    }
    return s;
}

// ---------------------------------------------------------------- CnnNetwork

static void run_trace(std::vector<std::pair<std::string, std::vector<size_t>>>* trace,
                      const std::string& name, const Tensor& t) {
    if (trace) trace->emplace_back(name, t.shape());
}

CnnNetwork::CnnNetwork(const ModelSpec& spec) : spec_(spec) {}

CnnNetwork::CnnNetwork(const ModelSpec& spec, Rng& init) : spec_(spec) {
    spec_.validate();
    auto drop = std::make_unique<Dropout>(spec_.dropout_p);
    dropout_ = drop.get();
    trunk_.push_back(std::move(drop));

    size_t ch = spec_.in_channels;
    size_t conv_idx = 0;
    for (const auto& item : spec_.conv_stack) {
        if (item.pool) {
            trunk_.push_back(std::make_unique<MaxPool2>());
        } else {
            trunk_.push_back(std::make_unique<Conv2d>("conv" + std::to_string(conv_idx), ch,
                                                      item.out_ch, spec_.kernel, 0, init));
            trunk_.push_back(std::make_unique<Relu>());
            ch = item.out_ch;
            ++conv_idx;
        }
    }
    trunk_.push_back(std::make_unique<Dense>("fc1", spec_.flatten_dim(), spec_.fc1, init));
    trunk_.push_back(std::make_unique<Relu>());
    trunk_.push_back(std::make_unique<Dense>("fc2", spec_.fc1, spec_.fc2, init));
    trunk_.push_back(std::make_unique<Relu>());

    size_t post_in = spec_.concat_width();
    if (spec_.bottleneck > 0) {
        shared_.push_back(std::make_unique<Dense>("bottleneck", post_in, spec_.bottleneck, init));
        shared_.push_back(std::make_unique<Relu>());
        post_in = spec_.bottleneck;
    }
    shared_.push_back(std::make_unique<Dense>("shared_fc", post_in, spec_.fc2, init));
    shared_.push_back(std::make_unique<Relu>());

    if (spec_.is_flat()) {
        flat_head_.push_back(std::make_unique<Dense>("flat_out", spec_.fc2, spec_.flat_outputs, init));
        flat_head_.push_back(std::make_unique<Sigmoid>());
    } else {
        attr_head_.push_back(std::make_unique<Dense>("attr_hidden", spec_.fc2, spec_.head_hidden, init));
        attr_head_.push_back(std::make_unique<Relu>());
        attr_head_.push_back(std::make_unique<Dense>("attr_out", spec_.head_hidden, spec_.n_attr, init));
        attr_head_.push_back(std::make_unique<Sigmoid>());
        shape_head_.push_back(std::make_unique<Dense>("shape_hidden", spec_.fc2, spec_.head_hidden, init));
        shape_head_.push_back(std::make_unique<Relu>());
        shape_head_.push_back(std::make_unique<Dense>("shape_out", spec_.head_hidden, spec_.n_shape, init));
        shape_head_.push_back(std::make_unique<Softmax>());
    }
    if (spec_.injected_dim > 0) {
        feat_mean = Tensor::zeros({spec_.injected_dim});
        feat_std = Tensor::full({spec_.injected_dim}, 1.0);
    }
}

static Tensor run_layers(std::vector<std::unique_ptr<Layer>>& layers, Tensor x,
                         std::vector<std::pair<std::string, std::vector<size_t>>>* trace) {
    for (auto& l : layers) {
        x = l->forward(x);
        run_trace(trace, l->kind(), x);
    }
    return x;
}

static Tensor run_layers_backward(std::vector<std::unique_ptr<Layer>>& layers, Tensor g) {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g);
    return g;
}

CnnOutput CnnNetwork::forward(const Tensor& image, const Tensor& feedback, const Tensor* injected,
                              bool training, Rng* dropout_rng) {
    if (feedback.size() != spec_.feedback_dim)
        throw DataError("feedback vector has " + std::to_string(feedback.size()) +
                        " entries, expected " + std::to_string(spec_.feedback_dim));
    if (spec_.injected_dim > 0 && injected == nullptr)
        throw DataError("variant " + variant_name(spec_.variant) +
                        " requires an injected feature vector");
    trace_.clear();
    auto* tr = trace_on_ ? &trace_ : nullptr;
    dropout_->set_mode(training, dropout_rng);

    Tensor x = run_layers(trunk_, image, tr);

    std::vector<const Tensor*> parts = {&x, &feedback};
    if (spec_.injected_dim > 0) {
        if (injected->size() != spec_.injected_dim)
            throw DataError("injected vector has " + std::to_string(injected->size()) +
                            " entries, expected " + std::to_string(spec_.injected_dim));
        std_injected_ = Tensor({spec_.injected_dim});
        for (size_t i = 0; i < spec_.injected_dim; ++i)
            std_injected_[i] = ((*injected)[i] - feat_mean[i]) / feat_std[i];
        parts.push_back(&std_injected_);
    }
    Tensor cat = concat_vectors(parts);
    run_trace(tr, "concat", cat);

    Tensor shared = run_layers(shared_, cat, tr);

    CnnOutput out;
    if (spec_.is_flat()) {
        out.flat = run_layers(flat_head_, shared, tr);
    } else {
        out.attr = run_layers(attr_head_, shared, tr);
        out.shape = run_layers(shape_head_, shared, tr);
    }
    return out;
}

InputGrads CnnNetwork::backward(const CnnOutput& grad) {
    Tensor gshared;
    if (spec_.is_flat()) {
        gshared = run_layers_backward(flat_head_, grad.flat);
    } else {
        Tensor ga = run_layers_backward(attr_head_, grad.attr);
        Tensor gs = run_layers_backward(shape_head_, grad.shape);
        ga += gs;
        gshared = std::move(ga);
    }
    Tensor gcat = run_layers_backward(shared_, gshared);

    std::vector<size_t> sizes = {spec_.fc2, spec_.feedback_dim};
    if (spec_.injected_dim > 0) sizes.push_back(spec_.injected_dim);
    auto parts = split_vector(gcat, sizes);

    InputGrads ig;
    ig.image = run_layers_backward(trunk_, parts[0]);
    ig.feedback = std::move(parts[1]);
    if (spec_.injected_dim > 0) {
        ig.injected = std::move(parts[2]);
        for (size_t i = 0; i < ig.injected.size(); ++i) ig.injected[i] /= feat_std[i];
    }
    return ig;
}

std::vector<Param*> CnnNetwork::params() {
    std::vector<Param*> out;
    for (auto* vec : {&trunk_, &shared_, &flat_head_, &attr_head_, &shape_head_})
        for (auto& l : *vec) l->collect_params(out);
    return out;
}

void CnnNetwork::zero_grads() {
    for (Param* p : params()) p->zero_grad();
}

static std::vector<std::unique_ptr<Layer>> clone_vec(
    const std::vector<std::unique_ptr<Layer>>& src) {
    std::vector<std::unique_ptr<Layer>> out;
    out.reserve(src.size());
    for (const auto& l : src) out.push_back(l->clone_shared());
    return out;
}

std::unique_ptr<CnnNetwork> CnnNetwork::clone_shared() const {
    auto net = std::unique_ptr<CnnNetwork>(new CnnNetwork(spec_));
    net->trunk_ = clone_vec(trunk_);
    net->shared_ = clone_vec(shared_);
    net->flat_head_ = clone_vec(flat_head_);
    net->attr_head_ = clone_vec(attr_head_);
    net->shape_head_ = clone_vec(shape_head_);
    net->dropout_ = dynamic_cast<Dropout*>(net->trunk_.front().get());
    net->feat_mean = feat_mean;
    net->feat_std = feat_std;
    return net;
}

std::vector<Conv2d*> CnnNetwork::conv_layers() {
    std::vector<Conv2d*> out;
    for (auto& l : trunk_)
        if (auto* c = dynamic_cast<Conv2d*>(l.get())) out.push_back(c);
    return out;
}

void CnnNetwork::set_freeze_dropout(bool f) { dropout_->set_freeze_mask(f); }

Prediction CnnNetwork::to_prediction(const CnnOutput& out) const {
    Prediction p;
    if (!spec_.is_flat()) {
        p.attr = out.attr;
        p.shape = out.shape;
        return p;
    }
    if (spec_.flat_outputs != spec_.n_attr + spec_.n_shape - 1)
        throw DataError("flat output arity " + std::to_string(spec_.flat_outputs) +
                        " does not map onto the shared-label universe");
    p.attr = Tensor({spec_.n_attr});
    for (size_t i = 0; i < spec_.n_attr; ++i) p.attr[i] = out.flat[i];
    // shape scores: the 5 dedicated sigmoids plus the shared no-nucleus sigmoid
    p.shape = Tensor({spec_.n_shape});
    for (size_t j = 0; j + 1 < spec_.n_shape; ++j) p.shape[j] = out.flat[spec_.n_attr + j];
    p.shape[spec_.n_shape - 1] = out.flat[spec_.n_attr - 1];
    return p;
}

// ---------------------------------------------------------------- CaeNetwork

struct DecoderConvPlan {
    size_t in_ch, out_ch, pad;
    bool relu;
};

struct DecoderPlan {
    // entries in decoder order; pool -> upsample marker (in_ch == 0)
    std::vector<DecoderConvPlan> items;
};

static DecoderPlan plan_decoder(const ModelSpec& spec) {
    // Encoder conv channel pairs in order.
    std::vector<std::pair<size_t, size_t>> convs;  // (in, out)
    size_t ch = spec.in_channels;
    for (const auto& item : spec.conv_stack) {
        if (!item.pool) {
            convs.emplace_back(ch, item.out_ch);
            ch = item.out_ch;
        }
    }
    DecoderPlan plan;
    size_t cur = spec.conv_trace().back();
    size_t conv_i = convs.size();
    int last_conv_plan = -1;
    for (auto it = spec.conv_stack.rbegin(); it != spec.conv_stack.rend(); ++it) {
        if (it->pool) {
            plan.items.push_back({0, 0, 0, false});  // upsample
            cur *= 2;
        } else {
            --conv_i;
            size_t pad = (spec.kernel + 1) / 2;  // shape +2 for k=3
            plan.items.push_back({convs[conv_i].second, convs[conv_i].first, pad, conv_i != 0});
            last_conv_plan = static_cast<int>(plan.items.size()) - 1;
            cur = cur + 2 * pad - spec.kernel + 1;
        }
    }
    long delta = static_cast<long>(spec.input_side) - static_cast<long>(cur);
    if (last_conv_plan < 0 || delta % 2 != 0 ||
        static_cast<long>(plan.items[last_conv_plan].pad) + delta / 2 < 0)
        throw DataError("cae decoder cannot reproduce input side " +
                        std::to_string(spec.input_side) + " (reached " + std::to_string(cur) + ")");
    plan.items[last_conv_plan].pad =
        static_cast<size_t>(static_cast<long>(plan.items[last_conv_plan].pad) + delta / 2);
    return plan;
}

CaeNetwork::CaeNetwork(const ModelSpec& spec) : spec_(spec) {}

CaeNetwork::CaeNetwork(const ModelSpec& spec, Rng& init) : spec_(spec) {
    size_t ch = spec_.in_channels;
    size_t conv_idx = 0;
    for (const auto& item : spec_.conv_stack) {
        if (item.pool) {
            encoder_.push_back(std::make_unique<MaxPool2>());
        } else {
            encoder_.push_back(std::make_unique<Conv2d>("enc_conv" + std::to_string(conv_idx), ch,
                                                        item.out_ch, spec_.kernel, 0, init));
            encoder_.push_back(std::make_unique<Relu>());
            ch = item.out_ch;
            ++conv_idx;
        }
    }
    DecoderPlan plan = plan_decoder(spec_);
    size_t dec_idx = 0;
    for (const auto& item : plan.items) {
        if (item.in_ch == 0) {
            decoder_.push_back(std::make_unique<Upsample2x>());
        } else {
            decoder_.push_back(std::make_unique<Conv2d>("dec_conv" + std::to_string(dec_idx),
                                                        item.in_ch, item.out_ch, spec_.kernel,
                                                        item.pad, init));
            if (item.relu) decoder_.push_back(std::make_unique<Relu>());
            ++dec_idx;
        }
    }
}

Tensor CaeNetwork::forward(const Tensor& image) {
    Tensor x = run_layers(encoder_, image, nullptr);
    return run_layers(decoder_, std::move(x), nullptr);
}

Tensor CaeNetwork::backward(const Tensor& grad_recon) {
    Tensor g = run_layers_backward(decoder_, grad_recon);
    return run_layers_backward(encoder_, std::move(g));
}

Tensor CaeNetwork::encode(const Tensor& image) { return run_layers(encoder_, image, nullptr); }

std::vector<Param*> CaeNetwork::params() {
    std::vector<Param*> out;
    for (auto& l : encoder_) l->collect_params(out);
    for (auto& l : decoder_) l->collect_params(out);
    return out;
}

void CaeNetwork::zero_grads() {
    for (Param* p : params()) p->zero_grad();
}

std::unique_ptr<CaeNetwork> CaeNetwork::clone_shared() const {
    auto net = std::unique_ptr<CaeNetwork>(new CaeNetwork(spec_));
    net->encoder_ = clone_vec(encoder_);
    net->decoder_ = clone_vec(decoder_);
    return net;
}

std::vector<Conv2d*> CaeNetwork::encoder_conv_layers() {
    std::vector<Conv2d*> out;
    for (auto& l : encoder_)
        if (auto* c = dynamic_cast<Conv2d*>(l.get())) out.push_back(c);
    return out;
}

// ---------------------------------------------------------------- transfer

void transfer_weights(CaeNetwork& cae, CnnNetwork& cnn) {
    auto src = cae.encoder_conv_layers();
    auto dst = cnn.conv_layers();
    if (src.size() != dst.size())
        throw DataError("transfer: encoder has " + std::to_string(src.size()) +
                        " conv layers but CNN trunk has " + std::to_string(dst.size()));
    for (size_t i = 0; i < src.size(); ++i) {
        const Tensor& sk = *src[i]->kernel().value;
        Tensor& dk = *dst[i]->kernel().value;
        if (!sk.same_shape(dk))
            throw DataError("transfer: conv" + std::to_string(i) + " kernel shape mismatch " +
                            shape_str(sk.shape()) + " vs " + shape_str(dk.shape()));
        const Tensor& sb = *src[i]->bias().value;
        Tensor& db = *dst[i]->bias().value;
        if (!sb.same_shape(db))
            throw DataError("transfer: conv" + std::to_string(i) + " bias shape mismatch " +
                            shape_str(sb.shape()) + " vs " + shape_str(db.shape()));
        std::copy(sk.data(), sk.data() + sk.size(), dk.data());
        std::copy(sb.data(), sb.data() + sb.size(), db.data());
    }
}

Prediction combine_predictions(const Prediction& wf, const Prediction& wfm) {
    if (wf.attr.size() != wfm.attr.size() || wf.shape.size() != wfm.shape.size())
        throw DataError("combine: label universe mismatch (attr " + std::to_string(wf.attr.size()) +
                        "/" + std::to_string(wfm.attr.size()) + ", shape " +
                        std::to_string(wf.shape.size()) + "/" + std::to_string(wfm.shape.size()) +
                        ")");
    Prediction out;
    out.attr = wf.attr;
    out.shape = wfm.shape;
    return out;
}

}  // namespace nucleo
