#include "nucleonet/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "nucleonet/error.hpp"

namespace nucleo {

Tensor standin_features(const Tensor& image, size_t dim) {
    if (image.rank() != 3 || image.extent(0) != 3)
        throw DataError("standin_features: image must be [3,H,W], got " + shape_str(image.shape()));
    if (dim < 1) throw DataError("standin_features: dim must be >= 1");
    size_t h = image.extent(1), w = image.extent(2);
    double npix = static_cast<double>(h * w);

    std::vector<double> desc;
    desc.reserve(76);

    // per-channel 16-bin histograms
    for (size_t c = 0; c < 3; ++c) {
        std::array<double, 16> hist{};
        for (size_t y = 0; y < h; ++y)
            for (size_t x = 0; x < w; ++x) {
                double v = std::clamp(image.at3(c, y, x), 0.0, 1.0);
                size_t bin = std::min<size_t>(15, static_cast<size_t>(v * 16.0));
                hist[bin] += 1.0;
            }
        for (double b : hist) desc.push_back(b / npix);
    }

    auto lum = [&](size_t y, size_t x) {
        return (image.at3(0, y, x) + image.at3(1, y, x) + image.at3(2, y, x)) / 3.0;
    };

    // 3x3 block mean and variance of luminance
    for (size_t by = 0; by < 3; ++by)
        for (size_t bx = 0; bx < 3; ++bx) {
            size_t y0 = by * h / 3, y1 = (by + 1) * h / 3;
            size_t x0 = bx * w / 3, x1 = (bx + 1) * w / 3;
            double s = 0, s2 = 0, n = 0;
            for (size_t y = y0; y < y1; ++y)
                for (size_t x = x0; x < x1; ++x) {
                    double v = lum(y, x);
                    s += v;
                    s2 += v * v;
                    n += 1.0;
                }
            double mean = n > 0 ? s / n : 0.0;
            double var = n > 0 ? std::max(0.0, s2 / n - mean * mean) : 0.0;
            desc.push_back(mean);
            desc.push_back(var);
        }

    // radial luminance profile, 10 rings from center to the corner distance
    {
        double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
        double rmax = std::hypot(cy, cx) + 1e-9;
        std::array<double, 10> ringsum{}, ringn{};
        for (size_t y = 0; y < h; ++y)
            for (size_t x = 0; x < w; ++x) {
                double r = std::hypot(y - cy, x - cx) / rmax;
                size_t ring = std::min<size_t>(9, static_cast<size_t>(r * 10.0));
                ringsum[ring] += lum(y, x);
                ringn[ring] += 1.0;
            }
        for (size_t k = 0; k < 10; ++k)
            desc.push_back(ringn[k] > 0 ? ringsum[k] / ringn[k] : 0.0);
    }

    Tensor out({dim});
    for (size_t i = 0; i < dim && i < desc.size(); ++i) out[i] = desc[i];
    return out;
}

void save_feature_file(const Tensor& matrix, const std::string& path) {
    if (matrix.rank() != 2)
        throw DataError("feature file: matrix must be [count,dim], got " +
                        shape_str(matrix.shape()));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("feature file: cannot open '" + path + "' for writing");
    uint32_t count = static_cast<uint32_t>(matrix.extent(0));
    uint32_t dim = static_cast<uint32_t>(matrix.extent(1));
    os.write("NFV1", 4);
    os.write(reinterpret_cast<const char*>(&count), 4);
    os.write(reinterpret_cast<const char*>(&dim), 4);
    std::vector<float> row(dim);
    for (uint32_t i = 0; i < count; ++i) {
        for (uint32_t j = 0; j < dim; ++j) row[j] = static_cast<float>(matrix.at2(i, j));
        os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(4) * dim);
    }
    if (!os) throw DataError("feature file: write failed for '" + path + "'");
}

Tensor load_feature_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("feature file: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, "NFV1", 4) != 0)
        throw DataError("feature file: '" + path + "' has wrong magic");
    uint32_t count = 0, dim = 0;
    is.read(reinterpret_cast<char*>(&count), 4);
    is.read(reinterpret_cast<char*>(&dim), 4);
    if (!is) throw DataError("feature file: '" + path + "' truncated header");
    if (dim == 0) throw DataError("feature file: '" + path + "' has dim 0");
    Tensor out({count, dim});
    std::vector<float> row(dim);
    for (uint32_t i = 0; i < count; ++i) {
        is.read(reinterpret_cast<char*>(row.data()), std::streamsize(4) * dim);
        if (static_cast<size_t>(is.gcount()) != size_t(4) * dim)
            throw DataError("feature file: '" + path + "' truncated payload at row " +
                            std::to_string(i));
        for (uint32_t j = 0; j < dim; ++j) out.at2(i, j) = row[j];
    }
    if (is.get() != std::char_traits<char>::eof())
        throw DataError("feature file: '" + path + "' has trailing bytes");
    return out;
}

}  // namespace nucleo
