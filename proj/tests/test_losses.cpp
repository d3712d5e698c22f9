#include <doctest.h>

#include <cmath>

#include "nucleonet/error.hpp"
#include "nucleonet/losses.hpp"
#include "nucleonet/rng.hpp"

using namespace nucleo;

namespace {

Rng seeded(uint64_t n) { return Rng(mix_seed(0x1055, n)); }

Tensor random_tensor(std::vector<size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// independent double-loop realization of the weight matrix
Tensor weight_matrix_oracle(size_t d, size_t c, double w) {
    Tensor m({d, d});
    size_t lo = d / 2 - c / 2, hi = lo + c;
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j)
            m.at2(i, j) = (i >= lo && i < hi && j >= lo && j < hi) ? w : 1.0;
    return m;
}

// independent double-loop realization of the weighted reconstruction error
double wmse_oracle(const Tensor& x, const Tensor& r, size_t c, double w) {
    size_t d = x.extent(1);
    Tensor m = weight_matrix_oracle(d, c, w);
    double loss = 0.0;
    for (size_t ch = 0; ch < x.extent(0); ++ch)
        for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j) {
                double diff = r.at3(ch, i, j) - x.at3(ch, i, j);
                loss += m.at2(i, j) * diff * diff;
            }
    return loss;
}

}  // namespace

TEST_CASE("weight_matrix d=32 c=20 w=5 weights rows/cols 6..25") {
    Tensor m = weight_matrix({32, 20, 5.0});
    size_t fives = 0, ones = 0;
    for (size_t i = 0; i < 32; ++i)
        for (size_t j = 0; j < 32; ++j) {
            bool center = i >= 6 && i <= 25 && j >= 6 && j <= 25;
            CHECK(m.at2(i, j) == (center ? 5.0 : 1.0));
            (m.at2(i, j) == 5.0 ? fives : ones)++;
        }
    CHECK(fives == 400);
    CHECK(ones == 624);
}

TEST_CASE("weight_matrix c=d weights everything") {
    Tensor m = weight_matrix({8, 8, 3.0});
    for (size_t i = 0; i < m.size(); ++i) CHECK(m[i] == 3.0);
}

TEST_CASE("weight_matrix d=4 c=2 w=5 center block") {
    Tensor m = weight_matrix({4, 2, 5.0});
    Tensor oracle = weight_matrix_oracle(4, 2, 5.0);
    for (size_t i = 0; i < m.size(); ++i) CHECK(m[i] == oracle[i]);
    CHECK(m.at2(1, 1) == 5.0);
    CHECK(m.at2(2, 2) == 5.0);
    CHECK(m.at2(0, 0) == 1.0);
}

TEST_CASE("weight_matrix rejects odd d-c and bad specs") {
    CHECK_THROWS_AS(weight_matrix({5, 2, 5.0}), DataError);
    CHECK_THROWS_AS(weight_matrix({4, 6, 5.0}), DataError);
    CHECK_THROWS_AS(weight_matrix({4, 2, 0.5}), DataError);
}

TEST_CASE("wmse is zero when r equals x") {
    Rng rng = seeded(1);
    Tensor x = random_tensor({3, 8, 8}, rng);
    CHECK(wmse(x, x, WeightMatrixSpec{8, 4, 5.0}).loss == 0.0);
}

TEST_CASE("wmse d=4 c=2 w=5 all-zero vs all-one is 32") {
    Tensor x({1, 4, 4});
    Tensor r = Tensor::full({1, 4, 4}, 1.0);
    CHECK(wmse(x, r, WeightMatrixSpec{4, 2, 5.0}).loss == doctest::Approx(32.0).epsilon(1e-15));
}

TEST_CASE("wmse with w=1 equals the plain mse sum") {
    Rng rng = seeded(2);
    for (int it = 0; it < 20; ++it) {
        Tensor x = random_tensor({3, 10, 10}, rng);
        Tensor r = random_tensor({3, 10, 10}, rng);
        double mse_sum = 0.0;
        for (size_t i = 0; i < x.size(); ++i) mse_sum += (r[i] - x[i]) * (r[i] - x[i]);
        CHECK(std::fabs(wmse(x, r, WeightMatrixSpec{10, 4, 1.0}).loss - mse_sum) < 1e-12);
    }
}

TEST_CASE("wmse matches double-loop oracle on random instances") {
    Rng rng = seeded(3);
    for (int it = 0; it < 100; ++it) {
        size_t d = 4 + 2 * rng.index(7);           // even sides up to 16
        size_t c = 2 + 2 * rng.index(d / 2);       // even window, c <= d
        double w = 1.0 + rng.uniform(0.0, 6.0);
        Tensor x = random_tensor({3, d, d}, rng);
        Tensor r = random_tensor({3, d, d}, rng);
        double got = wmse(x, r, WeightMatrixSpec{d, c, w}).loss;
        CHECK(std::fabs(got - wmse_oracle(x, r, c, w)) < 1e-12);
    }
}

TEST_CASE("wmse value symmetric, gradient antisymmetric") {
    Rng rng = seeded(4);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor r = random_tensor({2, 6, 6}, rng);
    WeightMatrixSpec spec{6, 2, 4.0};
    LossGrad fwd = wmse(x, r, spec);
    LossGrad rev = wmse(r, x, spec);
    CHECK(std::fabs(fwd.loss - rev.loss) < 1e-12);
    for (size_t i = 0; i < fwd.grad.size(); ++i)
        CHECK(std::fabs(fwd.grad[i] + rev.grad[i]) < 1e-12);
}

TEST_CASE("scaling w scales only the center-window contribution") {
    Rng rng = seeded(5);
    Tensor x = random_tensor({3, 12, 12}, rng);
    Tensor r = random_tensor({3, 12, 12}, rng);
    double k = 7.0;
    double base = wmse(x, r, WeightMatrixSpec{12, 6, 1.0}).loss;
    double weighted = wmse(x, r, WeightMatrixSpec{12, 6, k}).loss;
    double center = 0.0;
    for (size_t ch = 0; ch < 3; ++ch)
        for (size_t i = 3; i < 9; ++i)
            for (size_t j = 3; j < 9; ++j) {
                double diff = r.at3(ch, i, j) - x.at3(ch, i, j);
                center += diff * diff;
            }
    CHECK(std::fabs((weighted - base) - (k - 1.0) * center) < 1e-10);
}

TEST_CASE("wmse rejects shape mismatch") {
    Tensor x({1, 4, 4}), r({1, 6, 6});
    CHECK_THROWS_AS(wmse(x, r, WeightMatrixSpec{4, 2, 5.0}), DataError);
}

TEST_CASE("bce at the targets is nearly zero") {
    Tensor p({3}, {1.0, 0.0, 1.0});
    Tensor y({3}, {1.0, 0.0, 1.0});
    double bound = 3.0 * std::log(1.0 / (1.0 - kProbClamp));
    CHECK(bce_multilabel(p, y).loss <= bound + 1e-12);
}

TEST_CASE("bce of a single 0.5 prediction is ln 2") {
    CHECK(bce_multilabel(Tensor({1}, {0.5}), Tensor({1}, {1.0})).loss ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("bce hand evaluation") {
    Tensor p({2}, {0.9, 0.2});
    Tensor y({2}, {1.0, 0.0});
    CHECK(bce_multilabel(p, y).loss ==
          doctest::Approx(-(std::log(0.9) + std::log(0.8))).epsilon(1e-12));
}

TEST_CASE("bce rejects non-binary targets") {
    CHECK_THROWS_AS(bce_multilabel(Tensor({1}, {0.5}), Tensor({1}, {0.3})), DataError);
}

TEST_CASE("ce of uniform probs over 6 classes is ln 6") {
    CHECK(ce_singlelabel(Tensor::full({6}, 1.0 / 6.0), 2).loss ==
          doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("ce at a confident correct prediction is nearly zero") {
    Tensor p({3}, {0.0, 1.0, 0.0});
    CHECK(ce_singlelabel(p, 1).loss <= std::log(1.0 / (1.0 - kProbClamp)) + 1e-12);
}

TEST_CASE("ce hand evaluation and range check") {
    CHECK(ce_singlelabel(Tensor({3}, {0.7, 0.2, 0.1}), 1).loss ==
          doctest::Approx(-std::log(0.2)).epsilon(1e-12));
    CHECK_THROWS_AS(ce_singlelabel(Tensor({3}, {0.7, 0.2, 0.1}), 3), DataError);
}

TEST_CASE("combined_loss endpoints and arithmetic") {
    CHECK(combined_loss(2.0, 1.0, 1.0).total == 2.0);
    CHECK(combined_loss(2.0, 1.0, 0.0).total == 1.0);
    CHECK(combined_loss(2.0, 1.0, 0.6).total == doctest::Approx(1.6).epsilon(1e-15));
    MultiTaskLoss def;
    CHECK(def.m == 0.6);
    CHECK_THROWS_AS(combined_loss(1.0, 1.0, 1.5), DataError);
    CHECK_THROWS_AS(combined_loss(1.0, 1.0, -0.1), DataError);
}

TEST_CASE("combined_loss is linear in each branch") {
    Rng rng = seeded(6);
    for (int it = 0; it < 50; ++it) {
        double a = rng.uniform(0.0, 5.0), b = rng.uniform(0.0, 5.0);
        double m = rng.uniform(0.0, 1.0);
        MultiTaskLoss mt = combined_loss(a, b, m);
        CHECK(mt.total == m * a + (1.0 - m) * b);
        CHECK(combined_loss(2.0 * a, b, m).total - mt.total == doctest::Approx(m * a).epsilon(1e-12));
    }
}
