#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nucleonet/tensor.hpp"

namespace nucleo {

// One tensor to check: its live storage and the analytic gradient computed by
// a prior backward pass.
struct CheckItem {
    std::string name;
    Tensor* value;
    const Tensor* analytic;
};

// Central finite differences against the analytic gradients. `loss_fn` must
// re-evaluate the scalar loss from the current tensor contents (any dropout
// mask frozen). Returns the max relative error
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::function<double()>& loss_fn, std::vector<CheckItem> items,
                         double epsilon = 1e-5);

struct GradCheckResult {
    std::string name;
    double max_rel_error;
};

// Every layer, every loss, the CAE and all four CNN variants at 3x8x8 scale.
std::vector<GradCheckResult> run_all_gradchecks();

// Prints one line per check; returns true iff all below `tol`.
bool gradcheck_all(std::ostream& os, double tol = 1e-4);

}  // namespace nucleo
