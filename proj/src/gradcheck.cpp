#include "nucleonet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "nucleonet/error.hpp"
#include "nucleonet/layers.hpp"
#include "nucleonet/losses.hpp"
#include "nucleonet/network.hpp"
#include "nucleonet/rng.hpp"

namespace nucleo {

double finite_diff_check(const std::function<double()>& loss_fn, std::vector<CheckItem> items,
                         double epsilon) {
    double worst = 0.0;
    for (auto& item : items) {
        Tensor& v = *item.value;
        const Tensor& a = *item.analytic;
        if (!v.same_shape(a))
            throw DataError("finite_diff_check: '" + item.name + "' analytic gradient shape " +
                            shape_str(a.shape()) + " does not match value " + shape_str(v.shape()));
        for (size_t i = 0; i < v.size(); ++i) {
            double orig = v[i];
            v[i] = orig + epsilon;
            double fp = loss_fn();
            v[i] = orig - epsilon;
            double fm = loss_fn();
            v[i] = orig;
            double numeric = (fp - fm) / (2.0 * epsilon);
            double denom = std::max({std::fabs(a[i]), std::fabs(numeric), 1e-8});
            worst = std::max(worst, std::fabs(a[i] - numeric) / denom);
        }
    }
    return worst;
}

namespace {

Tensor random_tensor(std::vector<size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Scalarize a tensor output with fixed random coefficients so every output
// element influences the loss.
struct DotLoss {
    Tensor coeffs;
    explicit DotLoss(const Tensor& like, Rng& rng) : coeffs(random_tensor(like.shape(), rng)) {}
    double value(const Tensor& t) const {
        double s = 0.0;
        for (size_t i = 0; i < t.size(); ++i) s += coeffs[i] * t[i];
        return s;
    }
    Tensor grad() const { return coeffs; }
};

double check_single_layer(Layer& layer, Tensor input, Rng& rng,
                          std::vector<Param*> params = {}) {
    Tensor out = layer.forward(input);
    DotLoss loss(out, rng);
    for (Param* p : params) p->zero_grad();
    Tensor din = layer.backward(loss.grad());

    std::vector<CheckItem> items;
    items.push_back({"input", &input, &din});
    for (Param* p : params) items.push_back({p->name, p->value.get(), &p->grad});
    auto fn = [&] { return loss.value(layer.forward(input)); };
    return finite_diff_check(fn, std::move(items));
}

double check_conv(Rng& rng, size_t pad) {
    Rng init(rng.next_u64());
    Conv2d conv("c", 2, 3, 3, pad, init);
    std::vector<Param*> ps;
    conv.collect_params(ps);
    return check_single_layer(conv, random_tensor({2, 6, 6}, rng), rng, ps);
}

double check_maxpool(Rng& rng) {
    MaxPool2 pool;
    return check_single_layer(pool, random_tensor({2, 5, 5}, rng), rng);
}

double check_dense(Rng& rng) {
    Rng init(rng.next_u64());
    Dense d("d", 7, 4, init);
    std::vector<Param*> ps;
    d.collect_params(ps);
    return check_single_layer(d, random_tensor({7}, rng), rng, ps);
}

double check_relu(Rng& rng) {
    Relu r;
    // keep inputs away from the kink
    Tensor in = random_tensor({20}, rng);
    for (size_t i = 0; i < in.size(); ++i)
        if (std::fabs(in[i]) < 1e-3) in[i] = in[i] < 0 ? -1e-3 : 1e-3;
    return check_single_layer(r, in, rng);
}

double check_sigmoid(Rng& rng) {
    Sigmoid s;
    return check_single_layer(s, random_tensor({12}, rng), rng);
}

double check_softmax(Rng& rng) {
    Softmax s;
    return check_single_layer(s, random_tensor({6}, rng), rng);
}

double check_upsample(Rng& rng) {
    Upsample2x u;
    return check_single_layer(u, random_tensor({2, 3, 3}, rng), rng);
}

double check_dropout(Rng& rng) {
    Dropout d(0.3);
    Rng drop_rng(rng.next_u64());
    d.set_mode(true, &drop_rng);
    d.set_freeze_mask(true);
    return check_single_layer(d, random_tensor({30}, rng), rng);
}

double check_wmse(Rng& rng) {
    WeightMatrixSpec spec{6, 4, 5.0};
    Tensor w = weight_matrix(spec);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor r = random_tensor({2, 6, 6}, rng);
    LossGrad lg = wmse(x, r, w);
    std::vector<CheckItem> items = {{"r", &r, &lg.grad}};
    auto fn = [&] { return wmse(x, r, w).loss; };
    return finite_diff_check(fn, std::move(items));
}

// dense -> sigmoid -> BCE on a random 5 -> 3 net
double check_bce_net(Rng& rng) {
    Rng init(rng.next_u64());
    Dense d("d", 5, 3, init);
    Sigmoid sig;
    Tensor in = random_tensor({5}, rng);
    Tensor targets({3}, {1.0, 0.0, 1.0});

    auto fwd = [&] { return bce_multilabel(sig.forward(d.forward(in)), targets).loss; };
    Tensor probs = sig.forward(d.forward(in));
    LossGrad lg = bce_multilabel(probs, targets);
    std::vector<Param*> ps;
    d.collect_params(ps);
    for (Param* p : ps) p->zero_grad();
    Tensor din = d.backward(sig.backward(lg.grad));

    std::vector<CheckItem> items = {{"input", &in, &din}};
    for (Param* p : ps) items.push_back({p->name, p->value.get(), &p->grad});
    return finite_diff_check(fwd, std::move(items));
}

// dense -> softmax -> CE
double check_ce_net(Rng& rng) {
    Rng init(rng.next_u64());
    Dense d("d", 5, 4, init);
    Softmax sm;
    Tensor in = random_tensor({5}, rng);
    size_t target = 2;

    auto fwd = [&] { return ce_singlelabel(sm.forward(d.forward(in)), target).loss; };
    Tensor probs = sm.forward(d.forward(in));
    LossGrad lg = ce_singlelabel(probs, target);
    std::vector<Param*> ps;
    d.collect_params(ps);
    for (Param* p : ps) p->zero_grad();
    Tensor din = d.backward(sm.backward(lg.grad));

    std::vector<CheckItem> items = {{"input", &in, &din}};
    for (Param* p : ps) items.push_back({p->name, p->value.get(), &p->grad});
    return finite_diff_check(fwd, std::move(items));
}

double check_cae_full(Rng& rng) {
    ModelSpec spec = ModelSpec::make_scaled8(Variant::W);
    Rng init(rng.next_u64());
    CaeNetwork cae(spec, init);
    Tensor img = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
    WeightMatrixSpec wspec{8, 4, 5.0};
    Tensor w = weight_matrix(wspec);

    auto fwd = [&] { return wmse(img, cae.forward(img), w).loss; };
    Tensor recon = cae.forward(img);
    LossGrad lg = wmse(img, recon, w);
    cae.zero_grads();
    cae.backward(lg.grad);

    std::vector<CheckItem> items;
    for (Param* p : cae.params()) items.push_back({p->name, p->value.get(), &p->grad});
    return finite_diff_check(fwd, std::move(items));
}

double check_cnn_full(Variant v, Rng& rng) {
    ModelSpec spec = ModelSpec::make_scaled8(v);
    Rng init(rng.next_u64());
    CnnNetwork net(spec, init);
    Tensor img = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
    Tensor feedback = random_tensor({spec.feedback_dim}, rng, 0.0, 1.0);
    Tensor injected;
    const Tensor* inj = nullptr;
    if (spec.injected_dim > 0) {
        injected = random_tensor({spec.injected_dim}, rng);
        inj = &injected;
    }
    // binary targets over the label universe
    Tensor flat_targets({spec.is_flat() ? spec.flat_outputs : spec.n_attr});
    for (size_t i = 0; i < flat_targets.size(); ++i) flat_targets[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    size_t shape_target = rng.index(spec.n_shape);
    double m = 0.6;

    Rng drop_rng(rng.next_u64());
    net.set_freeze_dropout(true);

    auto fwd = [&]() -> double {
        CnnOutput out = net.forward(img, feedback, inj, true, &drop_rng);
        if (spec.is_flat()) return bce_multilabel(out.flat, flat_targets).loss;
        double l_ml = bce_multilabel(out.attr, flat_targets).loss;
        double l_sl = ce_singlelabel(out.shape, shape_target).loss;
        return combined_loss(l_ml, l_sl, m).total;
    };

    CnnOutput out = net.forward(img, feedback, inj, true, &drop_rng);
    net.zero_grads();
    CnnOutput grad;
    if (spec.is_flat()) {
        grad.flat = bce_multilabel(out.flat, flat_targets).grad;
    } else {
        grad.attr = bce_multilabel(out.attr, flat_targets).grad;
        grad.attr.scale(m);
        grad.shape = ce_singlelabel(out.shape, shape_target).grad;
        grad.shape.scale(1.0 - m);
    }
    InputGrads ig = net.backward(grad);

    std::vector<CheckItem> items;
    items.push_back({"image", &img, &ig.image});
    items.push_back({"feedback", &feedback, &ig.feedback});
    if (inj) items.push_back({"injected", &injected, &ig.injected});
    for (Param* p : net.params()) items.push_back({p->name, p->value.get(), &p->grad});
    return finite_diff_check(fwd, std::move(items));
}

}  // namespace

std::vector<GradCheckResult> run_all_gradchecks() {
    // Each check runs on its own fixed seed so the suite is deterministic and
    // checks stay independent of each other.
    auto seeded = [](uint64_t n) { return Rng(mix_seed(0xC0FFEEULL, n)); };
    std::vector<GradCheckResult> out;
    {
        Rng r = seeded(1);
        out.push_back({"layer/conv2d", check_conv(r, 0)});
    }
    {
        Rng r = seeded(2);
        out.push_back({"layer/conv2d_padded", check_conv(r, 2)});
    }
    {
        Rng r = seeded(3);
        out.push_back({"layer/maxpool2", check_maxpool(r)});
    }
    {
        Rng r = seeded(4);
        out.push_back({"layer/dense", check_dense(r)});
    }
    {
        Rng r = seeded(5);
        out.push_back({"layer/relu", check_relu(r)});
    }
    {
        Rng r = seeded(6);
        out.push_back({"layer/sigmoid", check_sigmoid(r)});
    }
    {
        Rng r = seeded(7);
        out.push_back({"layer/softmax", check_softmax(r)});
    }
    {
        Rng r = seeded(8);
        out.push_back({"layer/upsample2x", check_upsample(r)});
    }
    {
        Rng r = seeded(9);
        out.push_back({"layer/dropout", check_dropout(r)});
    }
    {
        Rng r = seeded(10);
        out.push_back({"loss/wmse", check_wmse(r)});
    }
    {
        Rng r = seeded(11);
        out.push_back({"loss/bce_sigmoid_dense", check_bce_net(r)});
    }
    {
        Rng r = seeded(12);
        out.push_back({"loss/ce_softmax_dense", check_ce_net(r)});
    }
    {
        Rng r = seeded(13);
        out.push_back({"model/cae", check_cae_full(r)});
    }
    {
        Rng r = seeded(418);
        out.push_back({"model/cnn_default", check_cnn_full(Variant::Default, r)});
    }
    {
        Rng r = seeded(522);
        out.push_back({"model/cnn_w", check_cnn_full(Variant::W, r)});
    }
    {
        Rng r = seeded(234);
        out.push_back({"model/cnn_wf", check_cnn_full(Variant::WF, r)});
    }
    {
        Rng r = seeded(321);
        out.push_back({"model/cnn_wfm", check_cnn_full(Variant::WFM, r)});
    }
    return out;
}

bool gradcheck_all(std::ostream& os, double tol) {
    bool ok = true;
    for (const auto& r : run_all_gradchecks()) {
        bool pass = r.max_rel_error < tol;
        ok = ok && pass;
        os << (pass ? "ok   " : "FAIL ") << r.name << "  max_rel_error=" << r.max_rel_error
           << "\n";
    }
    return ok;
}

}  // namespace nucleo
