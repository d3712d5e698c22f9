#include "nucleonet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "nucleonet/error.hpp"

namespace nucleo {

void WeightMatrixSpec::validate() const {
    if (c == 0 || c > d)
        throw DataError("weight matrix needs 0 < c <= d, got c=" + std::to_string(c) +
                        " d=" + std::to_string(d));
    if (w < 1.0)
        throw DataError("center weight must be >= 1, got " + std::to_string(w));
    if ((d - c) % 2 != 0)
        throw DataError("weight matrix requires (d - c) even so the c x c window centers exactly; "
                        "got d=" + std::to_string(d) + " c=" + std::to_string(c));
}

Tensor weight_matrix(const WeightMatrixSpec& spec) {
    spec.validate();
    size_t lo = (spec.d - spec.c) / 2;  // window covers [lo, lo + c)
    size_t hi = lo + spec.c;
    Tensor out = Tensor::full({spec.d, spec.d}, 1.0);
    for (size_t i = lo; i < hi; ++i)
        for (size_t j = lo; j < hi; ++j) out.at2(i, j) = spec.w;
    return out;
}

LossGrad wmse(const Tensor& x, const Tensor& r, const Tensor& weights) {
    if (!x.same_shape(r))
        throw DataError("wmse shape mismatch: x " + shape_str(x.shape()) + " vs r " +
                        shape_str(r.shape()));
    size_t d0 = weights.extent(0), d1 = weights.extent(1);
    size_t ch = x.rank() == 3 ? x.extent(0) : 1;
    size_t h = x.rank() == 3 ? x.extent(1) : x.extent(0);
    size_t w = x.rank() == 3 ? x.extent(2) : x.extent(1);
    if (h != d0 || w != d1)
        throw DataError("wmse: image " + shape_str(x.shape()) + " does not match weight matrix " +
                        shape_str(weights.shape()));
    LossGrad out;
    out.grad = Tensor(r.shape());
    for (size_t c = 0; c < ch; ++c)
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < w; ++j) {
                size_t idx = (c * h + i) * w + j;
                double diff = r[idx] - x[idx];
                double wm = weights.at2(i, j);
                out.loss += wm * diff * diff;
                out.grad[idx] = 2.0 * wm * diff;
            }
    return out;
}

LossGrad wmse(const Tensor& x, const Tensor& r, const WeightMatrixSpec& spec) {
    return wmse(x, r, weight_matrix(spec));
}

LossGrad bce_multilabel(const Tensor& probs, const Tensor& targets) {
    if (!probs.same_shape(targets))
        throw DataError("bce shape mismatch: probs " + shape_str(probs.shape()) + " vs targets " +
                        shape_str(targets.shape()));
    LossGrad out;
    out.grad = Tensor(probs.shape());
    for (size_t i = 0; i < probs.size(); ++i) {
        double y = targets[i];
        if (y != 0.0 && y != 1.0)
            throw DataError("bce target must be 0 or 1, got " + std::to_string(y) + " at index " +
                            std::to_string(i));
        double p = probs[i];
        bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
        double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
        out.loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
        out.grad[i] = clamped ? 0.0 : (pc - y) / (pc * (1.0 - pc));
    }
    return out;
}

LossGrad ce_singlelabel(const Tensor& probs, size_t target) {
    if (target >= probs.size())
        throw DataError("ce target index " + std::to_string(target) + " out of range for " +
                        std::to_string(probs.size()) + " classes");
    LossGrad out;
    out.grad = Tensor(probs.shape());
    double p = probs[target];
    bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    out.loss = -std::log(pc);
    out.grad[target] = clamped ? 0.0 : -1.0 / pc;
    return out;
}

MultiTaskLoss combined_loss(double l_ml, double l_sl, double m) {
    if (m < 0.0 || m > 1.0)
        throw DataError("combined loss weight m must be in [0,1], got " + std::to_string(m));
    MultiTaskLoss out;
    out.l_ml = l_ml;
    out.l_sl = l_sl;
    out.m = m;
    out.total = m * l_ml + (1.0 - m) * l_sl;
    return out;
}

}  // namespace nucleo
