#include "nucleonet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nucleonet/error.hpp"

namespace nucleo {

void LabelVector::validate() const {
    if (shape < 0 || shape >= static_cast<int>(kNumShapes))
        throw DataError("shape class index " + std::to_string(shape) + " out of range");
    for (size_t i = 0; i < kNumAttrs; ++i)
        if (attributes[i] != 0 && attributes[i] != 1)
            throw DataError(std::string("attribute '") + kAttrNames[i] + "' must be 0 or 1, got " +
                            std::to_string(attributes[i]));
    bool flag = attributes[kAttrNoNucleus] == 1;
    bool cls = shape == static_cast<int>(kShapeNoNucleus);
    if (flag != cls)
        throw DataError("shared no-nucleus label inconsistent: attribute flag=" +
                        std::to_string(attributes[kAttrNoNucleus]) + " but shape=" +
                        kShapeNames[shape]);
}

Tensor LabelVector::attr_targets() const {
    Tensor t({kNumAttrs});
    for (size_t i = 0; i < kNumAttrs; ++i) t[i] = attributes[i];
    return t;
}

Tensor LabelVector::flat_targets() const {
    Tensor t({kNumClasses});
    for (size_t i = 0; i < kNumAttrs; ++i) t[i] = attributes[i];
    if (shape != static_cast<int>(kShapeNoNucleus)) t[kNumAttrs + shape] = 1.0;
    return t;
}

std::string LabelVector::class_name(size_t k) {
    if (k < kNumAttrs) return kAttrNames[k];
    return std::string("shape_") + kShapeNames[k - kNumAttrs];
}

int LabelVector::class_truth(size_t k) const {
    if (k < kNumAttrs) return attributes[k];
    return shape == static_cast<int>(k - kNumAttrs) ? 1 : 0;
}

// ---------------------------------------------------------------- manifest

static const char* kHeader =
    "path,halo,gemistocyte,nucleoli,grooved,hyperchromasia,overlapping,multinucleation,"
    "mitosis,apoptosis,no_nucleus,shape";

static int shape_index(const std::string& name) {
    for (size_t i = 0; i < kNumShapes; ++i)
        if (name == kShapeNames[i]) return static_cast<int>(i);
    throw DataError("unknown shape class '" + name + "'");
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("manifest: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line)) throw DataError("manifest: empty file '" + path + "'");
    if (line != kHeader)
        throw DataError("manifest: unexpected header '" + line + "'");
    DatasetManifest m;
    size_t row_no = 1;
    std::vector<std::string> seen_paths;
    while (std::getline(is, line)) {
        ++row_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) fields.push_back(tok);
        if (fields.size() != 12)
            throw DataError("manifest row " + std::to_string(row_no) + ": expected 12 fields, got " +
                            std::to_string(fields.size()));
        ManifestRow row;
        row.path = fields[0];
        try {
            for (size_t i = 0; i < kNumAttrs; ++i)
                row.labels.attributes[i] = std::stoi(fields[1 + i]);
            row.labels.shape = shape_index(fields[11]);
            row.labels.validate();
        } catch (const std::exception& e) {
            throw DataError("manifest row " + std::to_string(row_no) + ": " + e.what());
        }
        m.rows.push_back(std::move(row));
    }
    // paths must be unique (row order is the canonical index order)
    std::vector<std::string> paths;
    for (const auto& r : m.rows) paths.push_back(r.path);
    std::sort(paths.begin(), paths.end());
    auto dup = std::adjacent_find(paths.begin(), paths.end());
    if (dup != paths.end()) throw DataError("manifest: duplicate path '" + *dup + "'");
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("manifest: cannot open '" + path + "' for writing");
    os << kHeader << "\n";
    for (const auto& r : m.rows) {
        os << r.path;
        for (size_t i = 0; i < kNumAttrs; ++i) os << "," << r.labels.attributes[i];
        os << "," << kShapeNames[r.labels.shape] << "\n";
    }
    if (!os) throw DataError("manifest: write failed for '" + path + "'");
}

// ---------------------------------------------------------------- PPM

static int ppm_token(std::istream& is) {
    // skips whitespace and '#' comments
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (std::isspace(c)) {
            c = is.get();
        } else {
            break;
        }
    }
    if (c == EOF) throw DataError("ppm: truncated header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}

Tensor load_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("ppm: cannot open '" + path + "'");
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '6') throw DataError("ppm: '" + path + "' is not a binary P6 file");
    size_t w = static_cast<size_t>(ppm_token(is));
    size_t h = static_cast<size_t>(ppm_token(is));
    int maxval = ppm_token(is);
    if (maxval != 255)
        throw DataError("ppm: '" + path + "' has maxval " + std::to_string(maxval) +
                        ", only 255 supported");
    std::vector<unsigned char> buf(w * h * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size())
        throw DataError("ppm: '" + path + "' truncated payload");
    Tensor t({3, h, w});
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x)
            for (size_t c = 0; c < 3; ++c)
                t.at3(c, y, x) = buf[(y * w + x) * 3 + c] / 255.0;
    return t;
}

void save_ppm(const Tensor& image, const std::string& path) {
    if (image.rank() != 3 || image.extent(0) != 3)
        throw DataError("ppm: image must be [3,H,W], got " + shape_str(image.shape()));
    size_t h = image.extent(1), w = image.extent(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("ppm: cannot open '" + path + "' for writing");
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> buf(w * h * 3);
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x)
            for (size_t c = 0; c < 3; ++c) {
                double v = std::clamp(image.at3(c, y, x), 0.0, 1.0);
                buf[(y * w + x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw DataError("ppm: write failed for '" + path + "'");
}

Tensor center_crop(const Tensor& image, size_t side) {
    if (image.rank() != 3)
        throw DataError("center_crop: image must be [C,H,W], got " + shape_str(image.shape()));
    size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
    if (side > h || side > w)
        throw DataError("center_crop: side " + std::to_string(side) + " exceeds image " +
                        shape_str(image.shape()));
    size_t oy = (h - side) / 2, ox = (w - side) / 2;
    Tensor out({c, side, side});
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t y = 0; y < side; ++y)
            for (size_t x = 0; x < side; ++x)
                out.at3(ch, y, x) = image.at3(ch, oy + y, ox + x);
    return out;
}

}  // namespace nucleo
