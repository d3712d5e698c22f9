#include <doctest.h>

#include <cmath>

#include "nucleonet/error.hpp"
#include "nucleonet/gradcheck.hpp"
#include "nucleonet/layers.hpp"
#include "nucleonet/losses.hpp"

using namespace nucleo;

namespace {

Rng seeded(uint64_t n) { return Rng(mix_seed(0x7E57, n)); }

Tensor random_tensor(std::vector<size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("tensor shape/data mismatch is rejected") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DataError);
    CHECK_THROWS_AS(Tensor({2, 0}), DataError);
}

TEST_CASE("conv2d output shape 3x32x32 -> 80x30x30") {
    Rng rng = seeded(1);
    Conv2d conv("c", 3, 80, 3, 0, rng);
    Tensor in = random_tensor({3, 32, 32}, rng);
    Tensor out = conv.forward(in);
    CHECK(out.shape() == std::vector<size_t>{80, 30, 30});
}

TEST_CASE("conv2d delta kernel reproduces center crop") {
    Rng rng = seeded(2);
    Conv2d conv("c", 1, 1, 3, 0, rng);
    conv.kernel().value->fill(0.0);
    conv.kernel().value->at4(0, 0, 1, 1) = 1.0;
    conv.bias().value->fill(0.0);
    Tensor in = random_tensor({1, 6, 6}, rng);
    Tensor out = conv.forward(in);
    for (size_t y = 0; y < 4; ++y)
        for (size_t x = 0; x < 4; ++x)
            CHECK(out.at3(0, y, x) == doctest::Approx(in.at3(0, y + 1, x + 1)).epsilon(1e-15));
}

TEST_CASE("conv2d all-ones 3x3 window sums to 9") {
    Rng rng = seeded(3);
    Conv2d conv("c", 1, 1, 3, 0, rng);
    conv.kernel().value->fill(1.0);
    conv.bias().value->fill(0.0);
    Tensor in = Tensor::full({1, 3, 3}, 1.0);
    Tensor out = conv.forward(in);
    CHECK(out.shape() == std::vector<size_t>{1, 1, 1});
    CHECK(out[0] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("maxpool2 140x7x7 -> 140x3x3 with floor semantics") {
    Rng rng = seeded(4);
    MaxPool2 pool;
    Tensor in = random_tensor({140, 7, 7}, rng);
    CHECK(pool.forward(in).shape() == std::vector<size_t>{140, 3, 3});
}

TEST_CASE("maxpool2 constant input stays constant") {
    MaxPool2 pool;
    Tensor out = pool.forward(Tensor::full({2, 4, 4}, 3.5));
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 3.5);
}

TEST_CASE("maxpool2 picks window max and routes gradient to argmax") {
    MaxPool2 pool;
    Tensor in({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor out = pool.forward(in);
    CHECK(out[0] == 4.0);
    Tensor g = pool.backward(Tensor({1, 1, 1}, {7.0}));
    CHECK(g.at3(0, 0, 0) == 0.0);
    CHECK(g.at3(0, 1, 1) == 7.0);
}

TEST_CASE("maxpool2 tie-break is first max in row-major order") {
    MaxPool2 pool;
    Tensor in = Tensor::full({1, 2, 2}, 1.0);
    pool.forward(in);
    Tensor g = pool.backward(Tensor({1, 1, 1}, {5.0}));
    CHECK(g.at3(0, 0, 0) == 5.0);
    CHECK(g.at3(0, 0, 1) == 0.0);
    CHECK(g.at3(0, 1, 0) == 0.0);
    CHECK(g.at3(0, 1, 1) == 0.0);
}

TEST_CASE("dense 1260 -> 400 shape") {
    Rng rng = seeded(5);
    Dense fc("fc", 1260, 400, rng);
    Tensor in = random_tensor({140, 3, 3}, rng);
    CHECK(fc.forward(in).shape() == std::vector<size_t>{400});
}

TEST_CASE("dense identity weight passes input through") {
    Rng rng = seeded(6);
    Dense fc("fc", 4, 4, rng);
    fc.weight().value->fill(0.0);
    for (size_t i = 0; i < 4; ++i) fc.weight().value->at2(i, i) = 1.0;
    fc.bias().value->fill(0.0);
    Tensor in = random_tensor({4}, rng);
    Tensor out = fc.forward(in);
    for (size_t i = 0; i < 4; ++i) CHECK(out[i] == in[i]);
}

TEST_CASE("dense hand matrix multiply") {
    Rng rng = seeded(7);
    Dense fc("fc", 2, 2, rng);
    *fc.weight().value = Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
    *fc.bias().value = Tensor({2}, {1.0, 1.0});
    Tensor out = fc.forward(Tensor({2}, {1.0, 1.0}));
    CHECK(out[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("dense dimension mismatch is rejected") {
    Rng rng = seeded(8);
    Dense fc("fc", 4, 2, rng);
    CHECK_THROWS_AS(fc.forward(Tensor({5})), DataError);
}

TEST_CASE("softmax of equal logits is uniform") {
    Softmax sm;
    Tensor out = sm.forward(Tensor::full({6}, 2.3));
    for (size_t i = 0; i < 6; ++i) CHECK(out[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance and simplex property") {
    Rng rng = seeded(9);
    Softmax sm;
    Tensor x = random_tensor({6}, rng, -3.0, 3.0);
    Tensor a = sm.forward(x);
    Tensor shifted = x;
    for (size_t i = 0; i < 6; ++i) shifted[i] += 17.5;
    Tensor b = sm.forward(shifted);
    double sum = 0.0;
    for (size_t i = 0; i < 6; ++i) {
        CHECK(std::fabs(a[i] - b[i]) < 1e-12);
        CHECK(a[i] > 0.0);
        CHECK(a[i] < 1.0);
        sum += a[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
}

TEST_CASE("sigmoid(0)=0.5 and relu(-3)=0") {
    Sigmoid sg;
    Relu re;
    CHECK(sg.forward(Tensor({1}, {0.0}))[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(re.forward(Tensor({1}, {-3.0}))[0] == 0.0);
}

TEST_CASE("dropout p=0 is identity in both modes") {
    Rng rng = seeded(10);
    Dropout drop(0.0);
    Tensor in = random_tensor({50}, rng);
    drop.set_mode(false, nullptr);
    Tensor a = drop.forward(in);
    drop.set_mode(true, &rng);
    Tensor b = drop.forward(in);
    for (size_t i = 0; i < in.size(); ++i) {
        CHECK(a[i] == in[i]);
        CHECK(b[i] == in[i]);
    }
}

TEST_CASE("dropout eval mode is identity for any p") {
    Rng rng = seeded(11);
    Dropout drop(0.4);
    drop.set_mode(false, nullptr);
    Tensor in = random_tensor({100}, rng);
    Tensor out = drop.forward(in);
    for (size_t i = 0; i < in.size(); ++i) CHECK(out[i] == in[i]);
}

TEST_CASE("dropout survivor fraction matches binomial expectation") {
    Rng rng = seeded(12);
    Dropout drop(0.05);
    drop.set_mode(true, &rng);
    Tensor in = Tensor::full({1000000}, 1.0);
    Tensor out = drop.forward(in);
    size_t survivors = 0;
    for (size_t i = 0; i < out.size(); ++i)
        if (out[i] != 0.0) ++survivors;
    double frac = static_cast<double>(survivors) / 1e6;
    CHECK(frac > 0.948);
    CHECK(frac < 0.952);
    // survivors scaled by 1/(1-p)
    for (size_t i = 0; i < 100; ++i)
        if (out[i] != 0.0) CHECK(out[i] == doctest::Approx(1.0 / 0.95).epsilon(1e-12));
}

TEST_CASE("dropout mask is a pure function of rng state") {
    Dropout drop(0.3);
    Tensor in = Tensor::full({200}, 1.0);
    Rng r1(99), r2(99);
    drop.set_mode(true, &r1);
    Tensor a = drop.forward(in);
    drop.set_mode(true, &r2);
    Tensor b = drop.forward(in);
    for (size_t i = 0; i < in.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("dropout rejects p >= 1") {
    CHECK_THROWS_AS(Dropout(1.0), DataError);
    CHECK_THROWS_AS(Dropout(-0.1), DataError);
}

TEST_CASE("concat joins 100 + 19 into 119") {
    Tensor a({100}), b({19});
    CHECK(concat_vectors({&a, &b}).shape() == std::vector<size_t>{119});
}

TEST_CASE("concat of a single part is identity") {
    Rng rng = seeded(13);
    Tensor a = random_tensor({7}, rng);
    Tensor out = concat_vectors({&a});
    for (size_t i = 0; i < 7; ++i) CHECK(out[i] == a[i]);
}

TEST_CASE("concat preserves segment order and split inverts it") {
    Tensor a({2}, {1.0, 2.0}), b({3}, {3.0, 4.0, 5.0}), c({4}, {6.0, 7.0, 8.0, 9.0});
    Tensor out = concat_vectors({&a, &b, &c});
    CHECK(out.size() == 9);
    for (size_t i = 0; i < 9; ++i) CHECK(out[i] == static_cast<double>(i + 1));
    auto parts = split_vector(out, {2, 3, 4});
    CHECK(parts[0].size() == 2);
    CHECK(parts[1][0] == 3.0);
    CHECK(parts[2][3] == 9.0);
}

TEST_CASE("finite_diff_check on dense+sigmoid+bce") {
    Rng rng = seeded(14);
    Dense fc("fc", 5, 3, rng);
    Sigmoid sg;
    Tensor in = random_tensor({5}, rng);
    Tensor targets({3}, {1.0, 0.0, 1.0});
    Tensor input_grad;
    auto loss_fn = [&]() {
        Tensor probs = sg.forward(fc.forward(in));
        return bce_multilabel(probs, targets).loss;
    };
    // one analytic pass
    fc.weight().zero_grad();
    fc.bias().zero_grad();
    Tensor probs = sg.forward(fc.forward(in));
    LossGrad lg = bce_multilabel(probs, targets);
    input_grad = fc.backward(sg.backward(lg.grad));
    std::vector<CheckItem> items = {
        {"weight", fc.weight().value.get(), &fc.weight().grad},
        {"bias", fc.bias().value.get(), &fc.bias().grad},
        {"input", &in, &input_grad},
    };
    CHECK(finite_diff_check(loss_fn, items) < 1e-4);
}

TEST_CASE("finite_diff_check reports zero error on a constant graph") {
    Tensor x({3}, {1.0, 2.0, 3.0});
    Tensor zero_grad({3});
    auto loss_fn = []() { return 4.2; };
    CHECK(finite_diff_check(loss_fn, {{"x", &x, &zero_grad}}) == 0.0);
}

TEST_CASE("every registered gradcheck passes below 1e-4") {
    for (const auto& r : run_all_gradchecks()) {
        INFO(r.name);
        CHECK(r.max_rel_error < 1e-4);
    }
}
