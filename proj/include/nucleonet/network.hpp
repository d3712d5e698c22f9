#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nucleonet/layers.hpp"
#include "nucleonet/tensor.hpp"

namespace nucleo {

enum class Variant { Default, W, WF, WFM };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& s);

// One entry of the convolutional stack: either a conv (out_ch filters) or a
// 2x2 maxpool.
struct ConvStackItem {
    bool pool = false;
    size_t out_ch = 0;

    static ConvStackItem conv(size_t ch) { return {false, ch}; }
    static ConvStackItem maxpool() { return {true, 0}; }
};

// Declarative description of a network variant, sufficient to rebuild it.
struct ModelSpec {
    Variant variant = Variant::Default;
    size_t input_side = 32;
    size_t in_channels = 3;
    std::vector<ConvStackItem> conv_stack;
    size_t kernel = 3;
    size_t fc1 = 400;
    size_t fc2 = 100;
    size_t n_attr = 10;
    size_t n_shape = 6;
    size_t flat_outputs = 15;   // flat variants: sigmoid over all labels
    size_t feedback_dim = 15;   // first-cycle prediction slot width
    size_t injected_dim = 0;    // external feature vector (0 = none)
    size_t bottleneck = 0;      // 1000-unit layer when features are injected
    size_t head_hidden = 100;   // WFM per-branch hidden width
    double dropout_p = 0.05;

    // Full-size architecture for a variant; conv filter counts divided by
    // `filter_div` for scaled-down runs.
    static ModelSpec make(Variant v, size_t filter_div = 1, size_t injected_dim = 64);
    // Tiny architecture for 3x8x8 gradient-check inputs.
    static ModelSpec make_scaled8(Variant v);

    bool is_flat() const { return variant != Variant::WFM; }
    size_t concat_width() const { return fc2 + feedback_dim + injected_dim; }
    size_t output_dim() const { return is_flat() ? flat_outputs : n_attr + n_shape; }

    void validate() const;  // throws DataError naming the first violated invariant
    std::string canonical_text() const;
    static ModelSpec parse(const std::string& text);

    // Activation side lengths through the conv stack (starting at input_side).
    std::vector<size_t> conv_trace() const;
    size_t flatten_dim() const;
};

struct CnnOutput {
    Tensor flat;   // flat variants: sigmoid over all labels
    Tensor attr;   // WFM: sigmoid attribute block
    Tensor shape;  // WFM: softmax shape block
};

struct InputGrads {
    Tensor image;
    Tensor feedback;
    Tensor injected;  // empty when injected_dim == 0
};

// Unified prediction over the label universe.
struct Prediction {
    Tensor attr;   // [n_attr] sigmoid probabilities
    Tensor shape;  // [n_shape] shape scores (softmax for WFM, sigmoids for flat)
};

class CnnNetwork {
public:
    CnnNetwork(const ModelSpec& spec, Rng& init);

    const ModelSpec& spec() const { return spec_; }

    // Per-entry shapes recorded by the last forward when tracing is enabled.
    void set_trace(bool on) { trace_on_ = on; }
    const std::vector<std::pair<std::string, std::vector<size_t>>>& trace() const { return trace_; }

    CnnOutput forward(const Tensor& image, const Tensor& feedback, const Tensor* injected,
                      bool training, Rng* dropout_rng);
    // grad with respect to the forward output probabilities.
    InputGrads backward(const CnnOutput& grad);

    // Parameters in deterministic order (clone-aligned).
    std::vector<Param*> params();
    void zero_grads();

    // Clone sharing parameter storage; independent caches and grads.
    std::unique_ptr<CnnNetwork> clone_shared() const;

    // Conv layers of the trunk in order (for CAE weight transfer).
    std::vector<Conv2d*> conv_layers();

    void set_freeze_dropout(bool f);

    // Injected-feature standardization, computed on the training split.
    Tensor feat_mean, feat_std;  // [injected_dim]; empty when no injection

    Prediction to_prediction(const CnnOutput& out) const;

private:
    CnnNetwork(const ModelSpec& spec);  // structure only, for cloning

    ModelSpec spec_;
    std::vector<std::unique_ptr<Layer>> trunk_;      // dropout, convs/pools, fc1+relu, fc2+relu
    std::vector<std::unique_ptr<Layer>> shared_;     // [bottleneck+relu], fc(fc2)+relu
    std::vector<std::unique_ptr<Layer>> flat_head_;  // fc(flat_outputs)+sigmoid
    std::vector<std::unique_ptr<Layer>> attr_head_;  // fc(head_hidden)+relu, fc(n_attr)+sigmoid
    std::vector<std::unique_ptr<Layer>> shape_head_; // fc(head_hidden)+relu, fc(n_shape)+softmax
    Dropout* dropout_ = nullptr;

    bool trace_on_ = false;
    std::vector<std::pair<std::string, std::vector<size_t>>> trace_;
    Tensor std_injected_;  // cached standardized injected vector for backward
};

class CaeNetwork {
public:
    CaeNetwork(const ModelSpec& spec, Rng& init);

    const ModelSpec& spec() const { return spec_; }

    Tensor forward(const Tensor& image);
    Tensor backward(const Tensor& grad_recon);

    std::vector<Param*> params();
    void zero_grads();
    std::unique_ptr<CaeNetwork> clone_shared() const;

    std::vector<Conv2d*> encoder_conv_layers();
    // Encoder output on an image (for transfer checks).
    Tensor encode(const Tensor& image);

private:
    CaeNetwork(const ModelSpec& spec);

    ModelSpec spec_;
    std::vector<std::unique_ptr<Layer>> encoder_;
    std::vector<std::unique_ptr<Layer>> decoder_;
};

// Copy every encoder conv kernel/bias into the CNN trunk. Shapes must match
// layer by layer; fully-connected layers keep their fresh initialization.
void transfer_weights(CaeNetwork& cae, CnnNetwork& cnn);

// Attribute block from wf, shape block from wfm.
Prediction combine_predictions(const Prediction& wf, const Prediction& wfm);

}  // namespace nucleo
