#pragma once

#include "nucleonet/tensor.hpp"

namespace nucleo {

// Center-weighted reconstruction loss: the central c x c pixel window of a
// d x d image is weighted w, everything else 1.
struct WeightMatrixSpec {
    size_t d = 32;  // image side
    size_t c = 20;  // center window side
    double w = 5.0; // center weight

    void validate() const;
};

Tensor weight_matrix(const WeightMatrixSpec& spec);  // [d, d]

struct LossGrad {
    double loss = 0.0;
    Tensor grad;  // same shape as the predicted input
};

// Per-image weighted squared-error sum; grad is with respect to r.
// The caller averages over the minibatch.
LossGrad wmse(const Tensor& x, const Tensor& r, const Tensor& weights);
LossGrad wmse(const Tensor& x, const Tensor& r, const WeightMatrixSpec& spec);

inline constexpr double kProbClamp = 1e-7;

// Sum over labels of -[y log p + (1-y) log(1-p)], probabilities clamped to
// [kProbClamp, 1-kProbClamp] before the logs. Grad is with respect to probs.
LossGrad bce_multilabel(const Tensor& probs, const Tensor& targets);

// -log p[target]; grad with respect to probs (composes with softmax backward
// to p - onehot(target)).
LossGrad ce_singlelabel(const Tensor& probs, size_t target);

struct MultiTaskLoss {
    double l_ml = 0.0;
    double l_sl = 0.0;
    double m = 0.6;
    double total = 0.0;
};

// total = m * l_ml + (1 - m) * l_sl
MultiTaskLoss combined_loss(double l_ml, double l_sl, double m);

}  // namespace nucleo
