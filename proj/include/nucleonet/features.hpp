#pragma once

#include <string>
#include <vector>

#include "nucleonet/tensor.hpp"

namespace nucleo {

// Hand-crafted per-image descriptor standing in for an external deep-feature
// export: per-channel 16-bin intensity histograms, a 3x3 block mean/variance
// grid over luminance, and a 10-ring radial intensity profile, zero-padded or
// truncated to `dim`.
Tensor standin_features(const Tensor& image, size_t dim);

// "NFV1" feature file: magic, u32 count, u32 dim, count*dim little-endian
// f32 row-major. Rows follow manifest order.
void save_feature_file(const Tensor& matrix, const std::string& path);
Tensor load_feature_file(const std::string& path);

}  // namespace nucleo
