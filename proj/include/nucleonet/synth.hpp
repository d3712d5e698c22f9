#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "nucleonet/data.hpp"
#include "nucleonet/rng.hpp"
#include "nucleonet/tensor.hpp"

namespace nucleo {

// Procedural nucleus-image generator. Shape classes are drawn from an
// explicit mix; attribute modifiers are sampled independently per image
// (conditioned on a nucleus being present), so emitted labels are exact by
// construction and the whole generation is a pure function of the seed.
struct SynthParams {
    uint64_t seed = 1;
    size_t count = 2000;
    size_t side = 50;
    // oval, close_round, round, elongated, irregular, no_nucleus
    std::array<double, kNumShapes> shape_mix = {0.1564, 0.0500, 0.1424, 0.1602, 0.2286, 0.2624};
    // probability of each attribute given a nucleus is present
    // (halo, gemistocyte, nucleoli, grooved, hyperchromasia, overlapping,
    //  multinucleation, mitosis, apoptosis); the no_nucleus flag is implied.
    std::array<double, 9> attr_probs = {0.051, 0.033, 0.050, 0.020, 0.329,
                                        0.068, 0.028, 0.035, 0.020};
    double noise = 0.025;

    void validate() const;
};

// Axis-ratio bands per shape class (minor/major).
// round: [0.9,1]; close_round: [0.75,0.9); oval: [0.55,0.75); elongated: <0.4.
int shape_class_for_ratio(double ratio);
double sample_axis_ratio(int shape_class, Rng& rng);

struct SynthRecord {
    Tensor image;  // [3, side, side]
    LabelVector labels;
};

// Render one image with the given shape class and attribute flags.
SynthRecord synth_image(Rng& rng, int shape_class, const std::array<int, 9>& attrs,
                        const SynthParams& params);

// Generate `count` images under `out_dir`/images/NNNN.ppm plus
// `out_dir`/manifest.csv. Returns the manifest.
DatasetManifest gen_synthetic(const SynthParams& params, const std::string& out_dir);

// Second-moment axis ratio of the dark (nuclear) pixels of an image;
// used to cross-check emitted shape labels.
double measure_axis_ratio(const Tensor& image);

}  // namespace nucleo
