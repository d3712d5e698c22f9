#include "nucleonet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "nucleonet/error.hpp"

namespace nucleo {

void SynthParams::validate() const {
    double s = 0.0;
    for (double p : shape_mix) {
        if (p < 0.0) throw DataError("synth: negative shape-mix proportion");
        s += p;
    }
    if (std::fabs(s - 1.0) > 1e-6)
        throw DataError("synth: shape-mix proportions must sum to 1, got " + std::to_string(s));
    for (double p : attr_probs)
        if (p < 0.0 || p > 1.0) throw DataError("synth: attribute probability outside [0,1]");
    if (side < 16) throw DataError("synth: image side must be >= 16");
    if (count == 0) throw DataError("synth: count must be positive");
}

int shape_class_for_ratio(double ratio) {
    if (ratio >= 0.9) return 2;      // round
    if (ratio >= 0.75) return 1;     // close_round
    if (ratio >= 0.475) return 0;    // oval (0.4..0.55 gap split at midpoint)
    return 3;                        // elongated
}

double sample_axis_ratio(int shape_class, Rng& rng) {
    switch (shape_class) {
        // kept clear of the class boundaries so pixel-level measurement
        // noise cannot flip the derived class
        case 0: return rng.uniform(0.58, 0.71);   // oval
        case 1: return rng.uniform(0.80, 0.88);   // close_round
        case 2: return rng.uniform(0.93, 1.00);   // round
        case 3: return rng.uniform(0.24, 0.38);   // elongated
        case 4: return rng.uniform(0.55, 0.80);   // irregular (boundary perturbed)
        default: return 1.0;
    }
}

namespace {

struct Rgb {
    double r, g, b;
};

// small value-noise hash for in-nucleus texture
double hash_noise(size_t x, size_t y, uint64_t salt) {
    uint64_t h = mix_seed(salt, x * 73856093ULL + 1, y * 19349663ULL + 1);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void blend(Tensor& img, size_t y, size_t x, const Rgb& c, double alpha) {
    if (alpha <= 0.0) return;
    img.at3(0, y, x) = (1.0 - alpha) * img.at3(0, y, x) + alpha * c.r;
    img.at3(1, y, x) = (1.0 - alpha) * img.at3(1, y, x) + alpha * c.g;
    img.at3(2, y, x) = (1.0 - alpha) * img.at3(2, y, x) + alpha * c.b;
}

struct Ellipse {
    double cx, cy;      // center in pixels
    double a, b;        // semi-axes in pixels
    double theta;       // orientation
    double bump_amp[3] = {0, 0, 0};   // irregular boundary modulation
    double bump_phase[3] = {0, 0, 0};

    // normalized squared radius; <= 1 is inside
    double eval(double px, double py) const {
        double dx = px - cx, dy = py - cy;
        double ct = std::cos(theta), st = std::sin(theta);
        double u = (dx * ct + dy * st) / a;
        double v = (-dx * st + dy * ct) / b;
        double e = u * u + v * v;
        double amp_total = bump_amp[0] + bump_amp[1] + bump_amp[2];
        if (amp_total > 0.0) {
            double phi = std::atan2(v, u);
            double r = 1.0;
            for (int k = 0; k < 3; ++k)
                r += bump_amp[k] * std::sin((k + 2) * phi + bump_phase[k]);
            r = std::max(r, 0.3);
            e /= r * r;
        }
        return e;
    }

    // coordinate along the minor axis, normalized (for grooves)
    double minor_coord(double px, double py) const {
        double dx = px - cx, dy = py - cy;
        double ct = std::cos(theta), st = std::sin(theta);
        return (-dx * st + dy * ct) / b;
    }
};

double edge_alpha(double e) {
    // soft boundary around e == 1
    constexpr double w = 0.18;
    return std::clamp((1.0 + w - e) / (2.0 * w), 0.0, 1.0);
}

void render_nucleus_body(Tensor& img, const Ellipse& el, const Rgb& fill, double fill_jitter,
                         uint64_t salt, bool mitosis, bool apoptosis, bool grooved,
                         bool nucleoli, double nucleoli_u, double nucleoli_v) {
    size_t side = img.extent(1);
    for (size_t y = 0; y < side; ++y)
        for (size_t x = 0; x < side; ++x) {
            double e = el.eval(static_cast<double>(x), static_cast<double>(y));
            double alpha = edge_alpha(e);
            if (alpha <= 0.0) continue;
            Rgb c = fill;
            double n = (hash_noise(x, y, salt) - 0.5) * fill_jitter;
            c.r += n;
            c.g += n;
            c.b += n;
            if (mitosis && e < 1.0 && hash_noise(x, y, salt ^ 0xA5A5ULL) > 0.55) {
                c = {0.10, 0.05, 0.15};
            }
            if (apoptosis && e < 1.05) {
                // fragmented look: pale cracks over a condensed dark body
                double f = hash_noise(x / 2, y / 2, salt ^ 0x5A5AULL);
                if (f > 0.45 && f < 0.62) alpha *= 0.45;
                else c = {0.28, 0.14, 0.36};
            }
            if (grooved && e < 0.95 &&
                std::fabs(el.minor_coord(static_cast<double>(x), static_cast<double>(y))) < 0.10) {
                c = {0.5 * c.r, 0.5 * c.g, 0.5 * c.b};
            }
            blend(img, y, x, c, alpha);
        }
    if (nucleoli) {
        // small dark dot at a fixed offset inside the nucleus
        double ct = std::cos(el.theta), st = std::sin(el.theta);
        double px = el.cx + nucleoli_u * el.a * ct - nucleoli_v * el.b * st;
        double py = el.cy + nucleoli_u * el.a * st + nucleoli_v * el.b * ct;
        double rad = std::max(1.4, el.b * 0.18);
        for (size_t y = 0; y < side; ++y)
            for (size_t x = 0; x < side; ++x) {
                double d = std::hypot(static_cast<double>(x) - px, static_cast<double>(y) - py);
                double a = std::clamp((rad - d) / 1.0 + 0.5, 0.0, 1.0);
                blend(img, y, x, {0.12, 0.06, 0.20}, a);
            }
    }
}

}  // namespace

SynthRecord synth_image(Rng& rng, int shape_class, const std::array<int, 9>& attrs,
                        const SynthParams& params) {
    size_t side = params.side;
    SynthRecord rec;
    rec.image = Tensor({3, side, side});
    Tensor& img = rec.image;

    // textured pink-ish background
    uint64_t salt = rng.next_u64();
    double wobble_fx = rng.uniform(0.05, 0.15), wobble_fy = rng.uniform(0.05, 0.15);
    double wobble_ph = rng.uniform(0.0, 6.28);
    for (size_t y = 0; y < side; ++y)
        for (size_t x = 0; x < side; ++x) {
            double tex = 0.02 * std::sin(wobble_fx * x + wobble_fy * y + wobble_ph);
            double n0 = (hash_noise(x, y, salt) - 0.5) * 2.0 * params.noise;
            double n1 = (hash_noise(x, y, salt ^ 1) - 0.5) * 2.0 * params.noise;
            double n2 = (hash_noise(x, y, salt ^ 2) - 0.5) * 2.0 * params.noise;
            img.at3(0, y, x) = std::clamp(0.90 + tex + n0, 0.0, 1.0);
            img.at3(1, y, x) = std::clamp(0.78 + tex + n1, 0.0, 1.0);
            img.at3(2, y, x) = std::clamp(0.84 + tex + n2, 0.0, 1.0);
        }

    rec.labels.shape = shape_class;
    for (size_t i = 0; i < 9; ++i) rec.labels.attributes[i] = attrs[i];
    rec.labels.attributes[kAttrNoNucleus] = shape_class == static_cast<int>(kShapeNoNucleus) ? 1 : 0;
    rec.labels.validate();
    if (shape_class == static_cast<int>(kShapeNoNucleus)) return rec;

    bool halo = attrs[0], gemistocyte = attrs[1], nucleoli = attrs[2], grooved = attrs[3];
    bool hyperchromasia = attrs[4], overlapping = attrs[5], multinucleation = attrs[6];
    bool mitosis = attrs[7], apoptosis = attrs[8];

    Ellipse el;
    el.cx = side / 2.0 + rng.uniform(-1.5, 1.5);
    el.cy = side / 2.0 + rng.uniform(-1.5, 1.5);
    double ratio = sample_axis_ratio(shape_class, rng);
    el.a = side * rng.uniform(0.20, 0.26);
    if (shape_class == 3) el.a = side * rng.uniform(0.26, 0.32);  // elongated: keep area up
    el.b = el.a * ratio;
    el.theta = rng.uniform(0.0, 3.141592653589793);
    if (shape_class == 4) {
        for (int k = 0; k < 3; ++k) {
            el.bump_amp[k] = rng.uniform(0.12, 0.20);
            el.bump_phase[k] = rng.uniform(0.0, 6.28);
        }
    }

    Rgb fill = hyperchromasia ? Rgb{0.22, 0.10, 0.34} : Rgb{0.48, 0.32, 0.62};

    if (gemistocyte) {
        // enlarged pale cytoplasm ring around the nucleus
        Ellipse cyt = el;
        cyt.a *= 1.9;
        cyt.b *= 1.9;
        size_t s = side;
        for (size_t y = 0; y < s; ++y)
            for (size_t x = 0; x < s; ++x) {
                double a = edge_alpha(cyt.eval(static_cast<double>(x), static_cast<double>(y)));
                blend(img, y, x, {0.96, 0.92, 0.95}, 0.85 * a);
            }
    }
    if (halo) {
        // bright ring just outside the nuclear boundary
        for (size_t y = 0; y < side; ++y)
            for (size_t x = 0; x < side; ++x) {
                double e = el.eval(static_cast<double>(x), static_cast<double>(y));
                if (e > 1.05 && e < 2.1) {
                    double t = 1.0 - std::fabs(e - 1.55) / 0.55;
                    blend(img, y, x, {0.98, 0.96, 0.98}, 0.9 * std::clamp(t, 0.0, 1.0));
                }
            }
    }

    double nuc_u = rng.uniform(-0.4, 0.4), nuc_v = rng.uniform(-0.4, 0.4);
    render_nucleus_body(img, el, fill, 0.10, salt ^ 3, mitosis, apoptosis, grooved, nucleoli,
                        nuc_u, nuc_v);

    if (multinucleation) {
        // interior second nucleus: same center and orientation, darker outline
        Ellipse inner = el;
        inner.a *= 0.55;
        inner.b *= 0.55;
        Rgb dark = {0.6 * fill.r, 0.6 * fill.g, 0.6 * fill.b};
        for (size_t y = 0; y < side; ++y)
            for (size_t x = 0; x < side; ++x) {
                double e = inner.eval(static_cast<double>(x), static_cast<double>(y));
                if (e > 0.72 && e < 1.05) blend(img, y, x, dark, 0.9);
            }
    }
    if (overlapping) {
        // neighbor nucleus near the patch edge, kept clear of the main body
        Ellipse nb;
        double ang = rng.uniform(0.0, 6.28);
        double off = el.a + 0.16 * side;
        nb.cx = el.cx + off * std::cos(ang);
        nb.cy = el.cy + off * std::sin(ang);
        nb.a = 0.10 * side * rng.uniform(0.8, 1.0);
        nb.b = nb.a * rng.uniform(0.6, 0.95);
        nb.theta = rng.uniform(0.0, 3.141592653589793);
        render_nucleus_body(img, nb, {0.52, 0.38, 0.64}, 0.10, salt ^ 5, false, false, false,
                            false, 0, 0);
    }
    return rec;
}

DatasetManifest gen_synthetic(const SynthParams& params, const std::string& out_dir) {
    params.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    if (ec) throw DataError("synth: cannot create output directory '" + out_dir + "': " + ec.message());

    DatasetManifest manifest;
    for (size_t i = 0; i < params.count; ++i) {
        Rng rng(mix_seed(params.seed, i));
        // shape class from the mix
        double u = rng.uniform();
        int shape_class = static_cast<int>(kNumShapes) - 1;
        double acc = 0.0;
        for (size_t k = 0; k < kNumShapes; ++k) {
            acc += params.shape_mix[k];
            if (u < acc) {
                shape_class = static_cast<int>(k);
                break;
            }
        }
        std::array<int, 9> attrs{};
        if (shape_class != static_cast<int>(kShapeNoNucleus))
            for (size_t k = 0; k < 9; ++k) attrs[k] = rng.bernoulli(params.attr_probs[k]) ? 1 : 0;

        SynthRecord rec = synth_image(rng, shape_class, attrs, params);
        char name[32];
        std::snprintf(name, sizeof(name), "images/%05zu.ppm", i);
        save_ppm(rec.image, (fs::path(out_dir) / name).string());
        manifest.rows.push_back({name, rec.labels});
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.csv").string());
    return manifest;
}

double measure_axis_ratio(const Tensor& image) {
    size_t h = image.extent(1), w = image.extent(2);
    std::vector<char> dark(h * w, 0);
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            double lum = (image.at3(0, y, x) + image.at3(1, y, x) + image.at3(2, y, x)) / 3.0;
            dark[y * w + x] = lum < 0.62 ? 1 : 0;
        }
    // flood-fill the dark component nearest the image center; extra dark
    // blobs (neighboring nuclei) must not contaminate the moments
    double cy0 = (h - 1) / 2.0, cx0 = (w - 1) / 2.0;
    size_t seed = h * w;
    double best = 1e18;
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            if (!dark[y * w + x]) continue;
            double d = (y - cy0) * (y - cy0) + (x - cx0) * (x - cx0);
            if (d < best) {
                best = d;
                seed = y * w + x;
            }
        }
    if (seed == h * w) throw DataError("measure_axis_ratio: no nuclear pixels found");
    std::vector<char> keep(h * w, 0);
    std::vector<size_t> stack = {seed};
    keep[seed] = 1;
    while (!stack.empty()) {
        size_t p = stack.back();
        stack.pop_back();
        size_t y = p / w, x = p % w;
        auto visit = [&](size_t q) {
            if (dark[q] && !keep[q]) {
                keep[q] = 1;
                stack.push_back(q);
            }
        };
        if (y > 0) visit(p - w);
        if (y + 1 < h) visit(p + w);
        if (x > 0) visit(p - 1);
        if (x + 1 < w) visit(p + 1);
    }
    double sw = 0, sx = 0, sy = 0;
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            if (!keep[y * w + x]) continue;
            sw += 1.0;
            sx += x;
            sy += y;
        }
    if (sw < 8.0) throw DataError("measure_axis_ratio: nuclear region too small");
    double mx = sx / sw, my = sy / sw;
    double cxx = 0, cxy = 0, cyy = 0;
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            if (!keep[y * w + x]) continue;
            double dx = x - mx, dy = y - my;
            cxx += dx * dx;
            cxy += dx * dy;
            cyy += dy * dy;
        }
    cxx /= sw;
    cxy /= sw;
    cyy /= sw;
    double tr = cxx + cyy, det = cxx * cyy - cxy * cxy;
    double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    double l1 = tr / 2.0 + disc, l2 = tr / 2.0 - disc;
    if (l1 <= 0.0) return 1.0;
    return std::sqrt(std::max(0.0, l2) / l1);
}

}  // namespace nucleo
