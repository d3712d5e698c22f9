#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nucleonet/rng.hpp"
#include "nucleonet/tensor.hpp"

namespace nucleo {

// A trainable parameter. `value` storage is shared between network clones
// (worker threads read the same weights); gradients are per-clone.
struct Param {
    std::string name;
    std::shared_ptr<Tensor> value;
    Tensor grad;

    Param(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::make_shared<Tensor>(std::move(v))),
          grad(Tensor::zeros(value->shape())) {}

    Param(std::string n, std::shared_ptr<Tensor> shared)
        : name(std::move(n)), value(std::move(shared)), grad(Tensor::zeros(value->shape())) {}

    void zero_grad() { grad.fill(0.0); }
};

// Single-input layer with cached forward state. backward() accumulates into
// param grads and returns the gradient with respect to the layer input.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& in) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect_params(std::vector<Param*>& out) {}
    // Clone sharing parameter storage, with independent caches and grads.
    virtual std::unique_ptr<Layer> clone_shared() const = 0;
    virtual std::string kind() const = 0;
};

// Valid convolution (stride 1) with optional symmetric zero padding.
class Conv2d : public Layer {
public:
    Conv2d(std::string name, size_t in_ch, size_t out_ch, size_t k, size_t pad, Rng& init);
    Conv2d(std::string name, size_t pad, Param kernel, Param bias);

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(std::vector<Param*>& out) override;
    std::unique_ptr<Layer> clone_shared() const override;
    std::string kind() const override { return "conv"; }

    Param& kernel() { return kernel_; }
    Param& bias() { return bias_; }
    size_t pad() const { return pad_; }

private:
    std::string name_;
    size_t pad_;
    Param kernel_;  // [F, C, k, k]
    Param bias_;    // [F]
    Tensor padded_in_;
    std::vector<size_t> in_shape_;
};

// 2x2 max pooling, stride 2, floor semantics (odd trailing row/col dropped).
class MaxPool2 : public Layer {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone_shared() const override { return std::make_unique<MaxPool2>(); }
    std::string kind() const override { return "pool"; }

private:
    std::vector<size_t> in_shape_;
    std::vector<size_t> argmax_;  // flat index into input per output cell
};

// Fully connected; flattens any input shape.
class Dense : public Layer {
public:
    Dense(std::string name, size_t in_dim, size_t out_dim, Rng& init);
    Dense(std::string name, Param weight, Param bias);

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(std::vector<Param*>& out) override;
    std::unique_ptr<Layer> clone_shared() const override;
    std::string kind() const override { return "dense"; }

    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    std::string name_;
    Param weight_;  // [out, in]
    Param bias_;    // [out]
    Tensor in_;
    std::vector<size_t> in_shape_;
};

class Relu : public Layer {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone_shared() const override { return std::make_unique<Relu>(); }
    std::string kind() const override { return "relu"; }

private:
    Tensor in_;
};

class Sigmoid : public Layer {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone_shared() const override { return std::make_unique<Sigmoid>(); }
    std::string kind() const override { return "sigmoid"; }

private:
    Tensor out_;
};

// Vector softmax with max-subtraction.
class Softmax : public Layer {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone_shared() const override { return std::make_unique<Softmax>(); }
    std::string kind() const override { return "softmax"; }

private:
    Tensor out_;
};

// Inverted dropout: survivors scaled by 1/(1-p) at train time, identity in eval.
class Dropout : public Layer {
public:
    explicit Dropout(double p);

    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone_shared() const override;
    std::string kind() const override { return "dropout"; }

    void set_mode(bool training, Rng* rng) {
        training_ = training;
        rng_ = rng;
    }
    // When frozen, the first training forward samples a mask and later
    // forwards reuse it (finite-difference checking needs a fixed graph).
    void set_freeze_mask(bool f) { freeze_ = f; has_mask_ = false; }

private:
    double p_;
    bool training_ = false;
    bool freeze_ = false;
    bool has_mask_ = false;
    Rng* rng_ = nullptr;
    Tensor mask_;
};

// Nearest-neighbor 2x upsampling (decoder counterpart of MaxPool2).
class Upsample2x : public Layer {
public:
    Tensor forward(const Tensor& in) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone_shared() const override { return std::make_unique<Upsample2x>(); }
    std::string kind() const override { return "upsample"; }

private:
    std::vector<size_t> in_shape_;
};

// Concatenation of vectors; backward splits at the recorded offsets.
Tensor concat_vectors(const std::vector<const Tensor*>& parts);
std::vector<Tensor> split_vector(const Tensor& grad, const std::vector<size_t>& part_sizes);

double glorot_limit(size_t fan_in, size_t fan_out);

}  // namespace nucleo
