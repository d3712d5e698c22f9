#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nucleonet/error.hpp"
#include "nucleonet/eval.hpp"
#include "nucleonet/rng.hpp"

using namespace nucleo;

namespace {

// brute-force Mann-Whitney statistic: correctly ranked pairs, ties 0.5
double pairwise_oracle(const std::vector<ScoredLabel>& samples) {
    double credit = 0.0;
    size_t pairs = 0;
    for (const auto& p : samples) {
        if (!p.truth) continue;
        for (const auto& n : samples) {
            if (n.truth) continue;
            ++pairs;
            if (p.score > n.score) credit += 1.0;
            else if (p.score == n.score) credit += 0.5;
        }
    }
    return credit / static_cast<double>(pairs);
}

std::vector<ScoredLabel> zip(std::vector<double> scores, std::vector<int> truths) {
    std::vector<ScoredLabel> out;
    for (size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], truths[i]});
    return out;
}

Prediction prediction_from(std::vector<double> attr, std::vector<double> shape) {
    size_t na = attr.size(), ns = shape.size();
    return {Tensor({na}, std::move(attr)), Tensor({ns}, std::move(shape))};
}

LabelVector truth(int shape, std::array<int, 9> attrs = {}) {
    LabelVector l;
    l.shape = shape;
    for (size_t i = 0; i < 9; ++i) l.attributes[i] = attrs[i];
    l.attributes[kAttrNoNucleus] = shape == static_cast<int>(kShapeNoNucleus) ? 1 : 0;
    return l;
}

}  // namespace

TEST_CASE("roc of perfectly separated scores") {
    auto curve = roc_curve(zip({0.9, 0.1}, {1, 0}));
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].fpr == 0.0);
    CHECK(curve[0].tpr == 0.0);
    CHECK(curve[1].fpr == 0.0);
    CHECK(curve[1].tpr == 1.0);
    CHECK(curve[2].fpr == 1.0);
    CHECK(curve[2].tpr == 1.0);
}

TEST_CASE("roc groups equal scores into one threshold") {
    auto curve = roc_curve(zip({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}));
    REQUIRE(curve.size() == 2);
    CHECK(curve[1].fpr == 1.0);
    CHECK(curve[1].tpr == 1.0);
}

TEST_CASE("worked auroc example is 0.75") {
    auto samples = zip({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
    CHECK(auroc(samples) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(pairwise_oracle(samples) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("auroc endpoints: perfect, inverted, all tied") {
    CHECK(auroc(zip({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
    CHECK(auroc(zip({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1})) == 0.0);
    CHECK(auroc(zip({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0})) == 0.5);
}

TEST_CASE("trapezoid auroc equals the pairwise oracle on random tied data") {
    Rng rng(1414);
    for (int it = 0; it < 200; ++it) {
        size_t n = 5 + rng.index(46);
        std::vector<ScoredLabel> samples;
        size_t pos = 0;
        for (size_t i = 0; i < n; ++i) {
            // coarse grid injects plenty of score ties
            double s = static_cast<double>(rng.index(8)) / 8.0;
            int t = rng.bernoulli(0.4) ? 1 : 0;
            pos += t;
            samples.push_back({s, t});
        }
        if (pos == 0 || pos == n) continue;
        CHECK(std::fabs(auroc(samples) - pairwise_oracle(samples)) < 1e-12);
    }
}

TEST_CASE("auroc is invariant under strictly monotone score transforms") {
    Rng rng(1515);
    std::vector<ScoredLabel> samples;
    for (size_t i = 0; i < 40; ++i)
        samples.push_back({rng.uniform(), rng.bernoulli(0.5) ? 1 : 0});
    samples[0].truth = 1;
    samples[1].truth = 0;
    double base = auroc(samples);
    std::vector<ScoredLabel> warped = samples;
    for (auto& s : warped) s.score = std::exp(3.0 * s.score) - 0.5;
    CHECK(std::fabs(auroc(warped) - base) < 1e-12);
}

TEST_CASE("flipping truths mirrors the auroc") {
    Rng rng(1616);
    std::vector<ScoredLabel> samples;
    for (size_t i = 0; i < 30; ++i)
        samples.push_back({static_cast<double>(rng.index(5)) / 5.0, rng.bernoulli(0.5) ? 1 : 0});
    samples[0].truth = 1;
    samples[1].truth = 0;
    std::vector<ScoredLabel> flipped = samples;
    for (auto& s : flipped) s.truth = 1 - s.truth;
    CHECK(std::fabs(auroc(samples) + auroc(flipped) - 1.0) < 1e-12);
}

TEST_CASE("roc coordinates are monotone and bounded") {
    Rng rng(1717);
    std::vector<ScoredLabel> samples;
    for (size_t i = 0; i < 50; ++i)
        samples.push_back({static_cast<double>(rng.index(6)) / 6.0, rng.bernoulli(0.3) ? 1 : 0});
    samples[0].truth = 1;
    samples[1].truth = 0;
    auto curve = roc_curve(samples);
    for (size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].fpr >= curve[i - 1].fpr);
        CHECK(curve[i].tpr >= curve[i - 1].tpr);
        CHECK(curve[i].fpr <= 1.0);
        CHECK(curve[i].tpr <= 1.0);
    }
    CHECK(curve.back().fpr == 1.0);
    CHECK(curve.back().tpr == 1.0);
}

TEST_CASE("single-class input raises an explicit undefined-ROC error") {
    CHECK_THROWS_WITH_AS(roc_curve(zip({0.5, 0.6}, {1, 1})), doctest::Contains("undefined ROC"),
                         DataError);
    CHECK_THROWS_AS(auroc(zip({0.5, 0.6}, {0, 0})), DataError);
}

TEST_CASE("error rates on exact predictions are zero") {
    std::vector<Prediction> preds = {
        prediction_from({1, 0, 0, 0, 1, 0, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0}),
    };
    std::vector<LabelVector> truths = {truth(2, {1, 0, 0, 0, 1, 0, 0, 0, 0})};
    ErrorRates er = error_rates(preds, truths);
    CHECK(er.attr_error == 0.0);
    CHECK(er.shape_error == 0.0);
}

TEST_CASE("threshold semantics: probabilities below 0.5 decide negative") {
    std::vector<Prediction> preds = {
        prediction_from(std::vector<double>(10, 0.4999), {1, 0, 0, 0, 0, 0}),
    };
    std::vector<LabelVector> truths = {truth(0)};
    CHECK(error_rates(preds, truths).attr_error == 0.0);
}

TEST_CASE("one wrong argmax among three images gives shape error 1/3") {
    std::vector<Prediction> preds = {
        prediction_from(std::vector<double>(10, 0.0), {0.9, 0.1, 0, 0, 0, 0}),
        prediction_from(std::vector<double>(10, 0.0), {0.1, 0.9, 0, 0, 0, 0}),
        prediction_from(std::vector<double>(10, 0.0), {0.9, 0.1, 0, 0, 0, 0}),
    };
    std::vector<LabelVector> truths = {truth(0), truth(1), truth(1)};
    CHECK(error_rates(preds, truths).shape_error == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("evaluate computes means exactly and warns on empty classes") {
    Rng rng(1818);
    std::vector<Prediction> preds;
    std::vector<LabelVector> truths;
    for (size_t i = 0; i < 40; ++i) {
        std::vector<double> attr(10), shape(6);
        for (auto& v : attr) v = rng.uniform();
        for (auto& v : shape) v = rng.uniform();
        preds.push_back(prediction_from(attr, shape));
        // only attrs 0/1 ever positive; shapes only 0 and 2
        truths.push_back(truth(rng.bernoulli(0.5) ? 0 : 2,
                               {rng.bernoulli(0.4) ? 1 : 0, rng.bernoulli(0.4) ? 1 : 0}));
    }
    std::ostringstream warn;
    EvaluationReport r = evaluate(preds, truths, 3, &warn);
    CHECK(warn.str().find("excluded") != std::string::npos);
    CHECK(!r.has_class[5]);
    double sum = 0.0;
    size_t n = 0;
    for (size_t k = 0; k < kNumClasses; ++k)
        if (r.has_class[k]) {
            sum += r.class_auroc[k];
            ++n;
        }
    CHECK(std::fabs(r.mean_auroc - sum / n) < 1e-12);
    double ssum = 0.0;
    size_t sn = 0;
    for (size_t k = kNumAttrs; k < kNumClasses; ++k)
        if (r.has_class[k]) {
            ssum += r.class_auroc[k];
            ++sn;
        }
    CHECK(std::fabs(r.mean_shape_auroc - ssum / sn) < 1e-12);
}

TEST_CASE("report json round-trips") {
    Rng rng(1919);
    std::vector<Prediction> preds;
    std::vector<LabelVector> truths;
    for (size_t i = 0; i < 30; ++i) {
        std::vector<double> attr(10), shape(6);
        for (auto& v : attr) v = rng.uniform();
        for (auto& v : shape) v = rng.uniform();
        preds.push_back(prediction_from(attr, shape));
        truths.push_back(truth(static_cast<int>(rng.index(6)),
                               {rng.bernoulli(0.5) ? 1 : 0, rng.bernoulli(0.5) ? 1 : 0,
                                rng.bernoulli(0.5) ? 1 : 0}));
    }
    EvaluationReport r = evaluate(preds, truths, 2, nullptr);
    EvaluationReport back = report_from_json(report_to_json(r));
    CHECK(back.round == r.round);
    CHECK(back.mean_auroc == r.mean_auroc);
    CHECK(back.attr_error == r.attr_error);
    for (size_t k = 0; k < kNumClasses; ++k) {
        CHECK(back.has_class[k] == r.has_class[k]);
        if (r.has_class[k]) CHECK(back.class_auroc[k] == r.class_auroc[k]);
    }
}

TEST_CASE("aggregate report averages across rounds") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "nucleo_report_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    EvaluationReport r1, r2;
    for (size_t k = 0; k < kNumClasses; ++k) {
        r1.has_class[k] = r2.has_class[k] = true;
        r1.class_auroc[k] = 0.8;
        r2.class_auroc[k] = 0.9;
    }
    r1.mean_auroc = 0.8;
    r2.mean_auroc = 0.9;
    r1.round = 0;
    r2.round = 1;
    write_aggregate_report({"wfm"}, {{r1, r2}}, dir.string());

    std::ifstream csv(dir / "report.csv");
    std::string line, halo_line;
    while (std::getline(csv, line))
        if (line.rfind("halo,", 0) == 0) halo_line = line;
    CHECK(halo_line == "halo,0.85");

    // one round aggregates to itself
    write_aggregate_report({"wfm"}, {{r1}}, dir.string());
    std::ifstream csv2(dir / "report.csv");
    while (std::getline(csv2, line))
        if (line.rfind("halo,", 0) == 0) halo_line = line;
    CHECK(halo_line == "halo,0.8");

    // inconsistent class sets across rounds are rejected
    EvaluationReport r3 = r2;
    r3.has_class[4] = false;
    CHECK_THROWS_AS(write_aggregate_report({"wfm"}, {{r1, r3}}, dir.string()), DataError);
    fs::remove_all(dir);
}
