#pragma once

#include <array>
#include <string>
#include <vector>

#include "nucleonet/tensor.hpp"

namespace nucleo {

inline constexpr size_t kNumAttrs = 10;
inline constexpr size_t kNumShapes = 6;
inline constexpr size_t kNumClasses = 15;  // 10 attributes + 5 dedicated shapes

inline constexpr std::array<const char*, kNumAttrs> kAttrNames = {
    "halo",        "gemistocyte",     "nucleoli", "grooved",   "hyperchromasia",
    "overlapping", "multinucleation", "mitosis",  "apoptosis", "no_nucleus"};

inline constexpr std::array<const char*, kNumShapes> kShapeNames = {
    "oval", "close_round", "round", "elongated", "irregular", "no_nucleus"};

inline constexpr size_t kShapeNoNucleus = 5;
inline constexpr size_t kAttrNoNucleus = 9;

// Per-image ground truth: binary attribute flags plus one shape class.
// "no nucleus" is shared: shape == no_nucleus iff the attribute flag is set.
struct LabelVector {
    std::array<int, kNumAttrs> attributes{};
    int shape = 0;

    void validate() const;  // throws DataError on invariant breach

    Tensor attr_targets() const;                       // [10] binary
    Tensor flat_targets() const;                       // [15] attrs + 1-of-5 shape block
    // Name of class index k in [0, 15): attributes then dedicated shapes.
    static std::string class_name(size_t k);
    // Binary truth of class k for this label.
    int class_truth(size_t k) const;
};

struct ManifestRow {
    std::string path;
    LabelVector labels;
};

struct DatasetManifest {
    std::vector<ManifestRow> rows;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// Binary PPM (P6, maxval 255), values scaled to [0,1].
Tensor load_ppm(const std::string& path);
void save_ppm(const Tensor& image, const std::string& path);

Tensor center_crop(const Tensor& image, size_t side);

}  // namespace nucleo
