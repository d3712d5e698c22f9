#pragma once

#include <string>

#include "nucleonet/train.hpp"

namespace nucleo {

// Full run configuration: experiment settings plus paths and variant
// selection. Every run writes the resolved form (all defaults filled) next to
// its outputs so results are reproducible from artifacts alone.
struct RunConfig {
    ExperimentConfig exp;
    std::string variant = "wfm";  // default, w, wf, wfm, combo
    size_t input_side = 32;
    std::string manifest;
    std::string image_root;
    std::string features;
    std::string out;

    // Parse JSON; unknown keys are an error, missing keys keep defaults.
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);
    std::string to_json() const;
    void write_resolved(const std::string& dir) const;

    // Named-key accessor errors for required paths.
    const std::string& require(const std::string& key) const;
};

}  // namespace nucleo
