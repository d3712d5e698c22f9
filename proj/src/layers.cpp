#include "nucleonet/layers.hpp"

#include <algorithm>
#include <cmath>

#include "nucleonet/error.hpp"

namespace nucleo {

double glorot_limit(size_t fan_in, size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

static Tensor glorot_init(std::vector<size_t> shape, size_t fan_in, size_t fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    double lim = glorot_limit(fan_in, fan_out);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-lim, lim);
    return t;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, size_t in_ch, size_t out_ch, size_t k, size_t pad, Rng& init)
    : name_(std::move(name)),
      pad_(pad),
      kernel_(name_ + ".kernel",
              glorot_init({out_ch, in_ch, k, k}, in_ch * k * k, out_ch * k * k, init)),
      bias_(name_ + ".bias", Tensor::zeros({out_ch})) {}

Conv2d::Conv2d(std::string name, size_t pad, Param kernel, Param bias)
    : name_(std::move(name)), pad_(pad), kernel_(std::move(kernel)), bias_(std::move(bias)) {}

static Tensor pad_chw(const Tensor& in, size_t p) {
    if (p == 0) return in;
    size_t c = in.extent(0), h = in.extent(1), w = in.extent(2);
    Tensor out({c, h + 2 * p, w + 2 * p});
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t y = 0; y < h; ++y) {
            const double* src = in.data() + (ch * h + y) * w;
            double* dst = out.data() + (ch * (h + 2 * p) + y + p) * (w + 2 * p) + p;
            std::copy(src, src + w, dst);
        }
    return out;
}

Tensor Conv2d::forward(const Tensor& in) {
    const Tensor& kv = *kernel_.value;
    size_t f_out = kv.extent(0), c_in = kv.extent(1), k = kv.extent(2);
    if (in.rank() != 3 || in.extent(0) != c_in)
        throw DataError(name_ + ": conv input shape " + shape_str(in.shape()) +
                        " does not match kernel " + shape_str(kv.shape()));
    in_shape_ = in.shape();
    padded_in_ = pad_chw(in, pad_);
    size_t h = padded_in_.extent(1), w = padded_in_.extent(2);
    if (h < k || w < k)
        throw DataError(name_ + ": conv input " + shape_str(in.shape()) +
                        " smaller than kernel size " + std::to_string(k));
    size_t oh = h - k + 1, ow = w - k + 1;
    Tensor out({f_out, oh, ow});
    const double* bv = bias_.value->data();
    for (size_t f = 0; f < f_out; ++f) {
        double* op = out.data() + f * oh * ow;
        std::fill(op, op + oh * ow, bv[f]);
        for (size_t c = 0; c < c_in; ++c) {
            const double* ip = padded_in_.data() + c * h * w;
            const double* kp = kv.data() + (f * c_in + c) * k * k;
            for (size_t dy = 0; dy < k; ++dy)
                for (size_t dx = 0; dx < k; ++dx) {
                    double kw = kp[dy * k + dx];
                    for (size_t y = 0; y < oh; ++y) {
                        const double* row = ip + (y + dy) * w + dx;
                        double* orow = op + y * ow;
                        for (size_t x = 0; x < ow; ++x) orow[x] += kw * row[x];
                    }
                }
        }
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const Tensor& kv = *kernel_.value;
    size_t f_out = kv.extent(0), c_in = kv.extent(1), k = kv.extent(2);
    size_t h = padded_in_.extent(1), w = padded_in_.extent(2);
    size_t oh = grad_out.extent(1), ow = grad_out.extent(2);

    Tensor dpad({c_in, h, w});
    double* kg = kernel_.grad.data();
    double* bg = bias_.grad.data();
    for (size_t f = 0; f < f_out; ++f) {
        const double* gp = grad_out.data() + f * oh * ow;
        double s = 0.0;
        for (size_t i = 0; i < oh * ow; ++i) s += gp[i];
        bg[f] += s;
        for (size_t c = 0; c < c_in; ++c) {
            const double* ip = padded_in_.data() + c * h * w;
            double* dp = dpad.data() + c * h * w;
            const double* kp = kv.data() + (f * c_in + c) * k * k;
            double* kgp = kg + (f * c_in + c) * k * k;
            for (size_t dy = 0; dy < k; ++dy)
                for (size_t dx = 0; dx < k; ++dx) {
                    double kw = kp[dy * k + dx];
                    double acc = 0.0;
                    for (size_t y = 0; y < oh; ++y) {
                        const double* irow = ip + (y + dy) * w + dx;
                        double* drow = dp + (y + dy) * w + dx;
                        const double* grow = gp + y * ow;
                        for (size_t x = 0; x < ow; ++x) {
                            acc += grow[x] * irow[x];
                            drow[x] += kw * grow[x];
                        }
                    }
                    kgp[dy * k + dx] += acc;
                }
        }
    }
    if (pad_ == 0) return dpad;
    size_t ih = in_shape_[1], iw = in_shape_[2];
    Tensor din(in_shape_);
    for (size_t c = 0; c < c_in; ++c)
        for (size_t y = 0; y < ih; ++y) {
            const double* src = dpad.data() + (c * h + y + pad_) * w + pad_;
            double* dst = din.data() + (c * ih + y) * iw;
            std::copy(src, src + iw, dst);
        }
    return din;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&kernel_);
    out.push_back(&bias_);
}

std::unique_ptr<Layer> Conv2d::clone_shared() const {
    return std::unique_ptr<Layer>(new Conv2d(name_, pad_, Param(kernel_.name, kernel_.value),
                                             Param(bias_.name, bias_.value)));
}

// ---------------------------------------------------------------- MaxPool2

Tensor MaxPool2::forward(const Tensor& in) {
    if (in.rank() != 3 || in.extent(1) < 2 || in.extent(2) < 2)
        throw DataError("maxpool2 needs [C,H,W] with H,W >= 2, got " + shape_str(in.shape()));
    in_shape_ = in.shape();
    size_t c = in.extent(0), h = in.extent(1), w = in.extent(2);
    size_t oh = h / 2, ow = w / 2;
    Tensor out({c, oh, ow});
    argmax_.assign(c * oh * ow, 0);
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t y = 0; y < oh; ++y)
            for (size_t x = 0; x < ow; ++x) {
                size_t best = (ch * h + 2 * y) * w + 2 * x;
                double bv = in[best];
                // row-major scan; first max wins on ties
                size_t cand[3] = {(ch * h + 2 * y) * w + 2 * x + 1,
                                  (ch * h + 2 * y + 1) * w + 2 * x,
                                  (ch * h + 2 * y + 1) * w + 2 * x + 1};
                for (size_t i : cand)
                    if (in[i] > bv) {
                        bv = in[i];
                        best = i;
                    }
                out.at3(ch, y, x) = bv;
                argmax_[(ch * oh + y) * ow + x] = best;
            }
    return out;
}

Tensor MaxPool2::backward(const Tensor& grad_out) {
    Tensor din(in_shape_);
    for (size_t i = 0; i < grad_out.size(); ++i) din[argmax_[i]] += grad_out[i];
    return din;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, size_t in_dim, size_t out_dim, Rng& init)
    : name_(std::move(name)),
      weight_(name_ + ".weight", glorot_init({out_dim, in_dim}, in_dim, out_dim, init)),
      bias_(name_ + ".bias", Tensor::zeros({out_dim})) {}

Dense::Dense(std::string name, Param weight, Param bias)
    : name_(std::move(name)), weight_(std::move(weight)), bias_(std::move(bias)) {}

Tensor Dense::forward(const Tensor& in) {
    const Tensor& wv = *weight_.value;
    size_t m = wv.extent(0), n = wv.extent(1);
    if (in.size() != n)
        throw DataError(name_ + ": dense input length " + std::to_string(in.size()) +
                        " does not match weight columns " + std::to_string(n));
    in_shape_ = in.shape();
    in_ = Tensor({n}, std::vector<double>(in.data(), in.data() + n));
    Tensor out({m});
    const double* bv = bias_.value->data();
    for (size_t i = 0; i < m; ++i) {
        const double* wr = wv.data() + i * n;
        double acc = bv[i];
        for (size_t j = 0; j < n; ++j) acc += wr[j] * in_[j];
        out[i] = acc;
    }
    return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
    const Tensor& wv = *weight_.value;
    size_t m = wv.extent(0), n = wv.extent(1);
    Tensor din({n});
    double* wg = weight_.grad.data();
    double* bg = bias_.grad.data();
    for (size_t i = 0; i < m; ++i) {
        double g = grad_out[i];
        bg[i] += g;
        const double* wr = wv.data() + i * n;
        double* wgr = wg + i * n;
        for (size_t j = 0; j < n; ++j) {
            wgr[j] += g * in_[j];
            din[j] += g * wr[j];
        }
    }
    return Tensor(in_shape_, std::vector<double>(din.data(), din.data() + n));
}

void Dense::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

std::unique_ptr<Layer> Dense::clone_shared() const {
    return std::unique_ptr<Layer>(new Dense(name_, Param(weight_.name, weight_.value),
                                            Param(bias_.name, bias_.value)));
}

// ---------------------------------------------------------------- activations

Tensor Relu::forward(const Tensor& in) {
    in_ = in;
    Tensor out(in.shape());
    for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
    return out;
}

Tensor Relu::backward(const Tensor& grad_out) {
    Tensor din(in_.shape());
    for (size_t i = 0; i < in_.size(); ++i) din[i] = in_[i] > 0.0 ? grad_out[i] : 0.0;
    return din;
}

Tensor Sigmoid::forward(const Tensor& in) {
    Tensor out(in.shape());
    for (size_t i = 0; i < in.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
    out_ = out;
    return out;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
    Tensor din(out_.shape());
    for (size_t i = 0; i < out_.size(); ++i) din[i] = grad_out[i] * out_[i] * (1.0 - out_[i]);
    return din;
}

Tensor Softmax::forward(const Tensor& in) {
    if (in.rank() != 1) throw DataError("softmax expects a vector, got " + shape_str(in.shape()));
    double mx = in[0];
    for (size_t i = 1; i < in.size(); ++i) mx = std::max(mx, in[i]);
    Tensor out(in.shape());
    double sum = 0.0;
    for (size_t i = 0; i < in.size(); ++i) {
        out[i] = std::exp(in[i] - mx);
        sum += out[i];
    }
    for (size_t i = 0; i < in.size(); ++i) out[i] /= sum;
    out_ = out;
    return out;
}

Tensor Softmax::backward(const Tensor& grad_out) {
    double dot = 0.0;
    for (size_t i = 0; i < out_.size(); ++i) dot += grad_out[i] * out_[i];
    Tensor din(out_.shape());
    for (size_t i = 0; i < out_.size(); ++i) din[i] = out_[i] * (grad_out[i] - dot);
    return din;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0)
        throw DataError("dropout probability must be in [0,1), got " + std::to_string(p));
}

Tensor Dropout::forward(const Tensor& in) {
    if (!training_ || p_ == 0.0) {
        mask_ = Tensor::full(in.shape(), 1.0);
        return in;
    }
    if (!(freeze_ && has_mask_)) {
        if (!rng_) throw DataError("dropout in training mode requires an rng");
        mask_ = Tensor(in.shape());
        double keep = 1.0 - p_;
        for (size_t i = 0; i < mask_.size(); ++i)
            mask_[i] = rng_->uniform() < p_ ? 0.0 : 1.0 / keep;
        has_mask_ = true;
    }
    Tensor out(in.shape());
    for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] * mask_[i];
    return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
    Tensor din(grad_out.shape());
    for (size_t i = 0; i < grad_out.size(); ++i) din[i] = grad_out[i] * mask_[i];
    return din;
}

std::unique_ptr<Layer> Dropout::clone_shared() const { return std::make_unique<Dropout>(p_); }

// ---------------------------------------------------------------- Upsample2x

Tensor Upsample2x::forward(const Tensor& in) {
    in_shape_ = in.shape();
    size_t c = in.extent(0), h = in.extent(1), w = in.extent(2);
    Tensor out({c, 2 * h, 2 * w});
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t y = 0; y < h; ++y)
            for (size_t x = 0; x < w; ++x) {
                double v = in.at3(ch, y, x);
                out.at3(ch, 2 * y, 2 * x) = v;
                out.at3(ch, 2 * y, 2 * x + 1) = v;
                out.at3(ch, 2 * y + 1, 2 * x) = v;
                out.at3(ch, 2 * y + 1, 2 * x + 1) = v;
            }
    return out;
}

Tensor Upsample2x::backward(const Tensor& grad_out) {
    Tensor din(in_shape_);
    size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t y = 0; y < h; ++y)
            for (size_t x = 0; x < w; ++x)
                din.at3(ch, y, x) = grad_out.at3(ch, 2 * y, 2 * x) +
                                    grad_out.at3(ch, 2 * y, 2 * x + 1) +
                                    grad_out.at3(ch, 2 * y + 1, 2 * x) +
                                    grad_out.at3(ch, 2 * y + 1, 2 * x + 1);
    return din;
}

// ---------------------------------------------------------------- concat

Tensor concat_vectors(const std::vector<const Tensor*>& parts) {
    size_t total = 0;
    for (const Tensor* p : parts) {
        if (p->rank() != 1)
            throw DataError("concat expects vectors, got " + shape_str(p->shape()));
        total += p->size();
    }
    Tensor out({total});
    size_t off = 0;
    for (const Tensor* p : parts) {
        std::copy(p->data(), p->data() + p->size(), out.data() + off);
        off += p->size();
    }
    return out;
}

std::vector<Tensor> split_vector(const Tensor& grad, const std::vector<size_t>& part_sizes) {
    size_t total = 0;
    for (size_t s : part_sizes) total += s;
    if (grad.size() != total)
        throw DataError("split_vector: gradient length " + std::to_string(grad.size()) +
                        " does not match parts total " + std::to_string(total));
    std::vector<Tensor> out;
    size_t off = 0;
    for (size_t s : part_sizes) {
        out.emplace_back(std::vector<size_t>{s},
                         std::vector<double>(grad.data() + off, grad.data() + off + s));
        off += s;
    }
    return out;
}

}  // namespace nucleo
