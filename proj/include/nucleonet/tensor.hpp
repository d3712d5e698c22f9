#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "nucleonet/error.hpp"

namespace nucleo {

inline std::string shape_str(const std::vector<size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor of doubles.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw DataError("tensor shape " + shape_str(shape_) + " does not match data length " +
                            std::to_string(data_.size()));
    }

    static Tensor zeros(std::vector<size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    size_t extent(size_t i) const { return shape_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at2(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double at2(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    double& at3(size_t c, size_t y, size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at3(size_t c, size_t y, size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    double& at4(size_t a, size_t b, size_t c, size_t d) {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }
    double at4(size_t a, size_t b, size_t c, size_t d) const {
        return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

    Tensor& operator+=(const Tensor& o) {
        if (!same_shape(o))
            throw DataError("tensor += shape mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Tensor& scale(double s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

private:
    static size_t count(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t e : s) {
            if (e == 0) throw DataError("tensor extent must be positive, got shape " + shape_str(s));
            n *= e;
        }
        return s.empty() ? 0 : n;
    }

    std::vector<size_t> shape_;
    std::vector<double> data_;
};

}  // namespace nucleo
