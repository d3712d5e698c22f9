#include "nucleonet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "nucleonet/error.hpp"

namespace nucleo {

std::vector<RocPoint> roc_curve(const std::vector<ScoredLabel>& samples) {
    size_t pos = 0, neg = 0;
    for (const auto& s : samples) {
        if (!std::isfinite(s.score)) throw DataError("roc_curve: non-finite score");
        if (s.truth != 0 && s.truth != 1) throw DataError("roc_curve: truth must be 0 or 1");
        (s.truth ? pos : neg)++;
    }
    if (pos == 0 || neg == 0)
        throw DataError("undefined ROC: need at least one positive and one negative sample");

    std::vector<ScoredLabel> sorted = samples;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

    std::vector<RocPoint> curve = {{0.0, 0.0}};
    size_t tp = 0, fp = 0, i = 0;
    while (i < sorted.size()) {
        double s = sorted[i].score;
        while (i < sorted.size() && sorted[i].score == s) {
            (sorted[i].truth ? tp : fp)++;
            ++i;
        }
        curve.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }
    return curve;
}

double auroc(const std::vector<ScoredLabel>& samples) {
    std::vector<RocPoint> curve = roc_curve(samples);
    double area = 0.0;
    for (size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
    return area;
}

ErrorRates error_rates(const std::vector<Prediction>& predictions,
                       const std::vector<LabelVector>& truths) {
    if (predictions.size() != truths.size() || predictions.empty())
        throw DataError("error_rates: prediction/truth arity mismatch");
    size_t attr_wrong = 0, shape_wrong = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const Prediction& p = predictions[i];
        if (p.attr.size() != kNumAttrs || p.shape.size() != kNumShapes)
            throw DataError("error_rates: prediction does not cover the label universe");
        for (size_t k = 0; k < kNumAttrs; ++k) {
            int decided = p.attr[k] >= 0.5 ? 1 : 0;
            if (decided != truths[i].attributes[k]) ++attr_wrong;
        }
        size_t best = 0;
        for (size_t k = 1; k < kNumShapes; ++k)
            if (p.shape[k] > p.shape[best]) best = k;
        if (static_cast<int>(best) != truths[i].shape) ++shape_wrong;
    }
    ErrorRates er;
    er.attr_error = static_cast<double>(attr_wrong) /
                    static_cast<double>(predictions.size() * kNumAttrs);
    er.shape_error = static_cast<double>(shape_wrong) / static_cast<double>(predictions.size());
    return er;
}

double class_score(const Prediction& p, size_t k) {
    if (k < kNumAttrs) return p.attr[k];
    return p.shape[k - kNumAttrs];
}

EvaluationReport evaluate(const std::vector<Prediction>& predictions,
                          const std::vector<LabelVector>& truths, size_t round,
                          std::ostream* warn) {
    EvaluationReport r;
    r.round = round;
    double sum_all = 0.0, sum_shape = 0.0, sum_attr = 0.0;
    size_t n_all = 0, n_shape = 0, n_attr = 0;
    for (size_t k = 0; k < kNumClasses; ++k) {
        std::vector<ScoredLabel> scored;
        scored.reserve(predictions.size());
        for (size_t i = 0; i < predictions.size(); ++i)
            scored.push_back({class_score(predictions[i], k), truths[i].class_truth(k)});
        size_t pos = 0;
        for (const auto& s : scored) pos += s.truth;
        if (pos == 0 || pos == scored.size()) {
            r.has_class[k] = false;
            if (warn)
                (*warn) << "warning: class " << LabelVector::class_name(k) << " has "
                        << (pos == 0 ? "no positives" : "no negatives") << " in round " << round
                        << "; excluded from means\n";
            continue;
        }
        r.class_auroc[k] = auroc(scored);
        r.has_class[k] = true;
        sum_all += r.class_auroc[k];
        ++n_all;
        if (k < kNumAttrs) {
            sum_attr += r.class_auroc[k];
            ++n_attr;
        } else {
            sum_shape += r.class_auroc[k];
            ++n_shape;
        }
    }
    if (n_all == 0) throw DataError("evaluate: no class has both positives and negatives");
    r.mean_auroc = sum_all / n_all;
    r.mean_shape_auroc = n_shape ? sum_shape / n_shape : 0.0;
    r.mean_attr_auroc = n_attr ? sum_attr / n_attr : 0.0;
    ErrorRates er = error_rates(predictions, truths);
    r.attr_error = er.attr_error;
    r.shape_error = er.shape_error;
    return r;
}

std::string report_to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["round"] = r.round;
    nlohmann::json classes = nlohmann::json::object();
    for (size_t k = 0; k < kNumClasses; ++k)
        if (r.has_class[k]) classes[LabelVector::class_name(k)] = r.class_auroc[k];
    j["class_auroc"] = classes;
    j["mean_auroc"] = r.mean_auroc;
    j["mean_auroc_shapes"] = r.mean_shape_auroc;
    j["mean_auroc_attrs"] = r.mean_attr_auroc;
    j["attr_error"] = r.attr_error;
    j["shape_error"] = r.shape_error;
    j["definitions"] = {
        {"attr_error", "micro-averaged over all attribute labels, threshold 0.5"},
        {"shape_error", "argmax over the 6 shape scores"},
        {"tie_handling", "0.5 pair credit; trapezoid equals Mann-Whitney"},
    };
    return j.dump(2);
}

EvaluationReport report_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EvaluationReport r;
    r.round = j.at("round").get<size_t>();
    for (size_t k = 0; k < kNumClasses; ++k) {
        std::string name = LabelVector::class_name(k);
        if (j.at("class_auroc").contains(name)) {
            r.class_auroc[k] = j["class_auroc"][name].get<double>();
            r.has_class[k] = true;
        }
    }
    r.mean_auroc = j.at("mean_auroc").get<double>();
    r.mean_shape_auroc = j.at("mean_auroc_shapes").get<double>();
    r.mean_attr_auroc = j.at("mean_auroc_attrs").get<double>();
    r.attr_error = j.at("attr_error").get<double>();
    r.shape_error = j.at("shape_error").get<double>();
    return r;
}

void write_roc_csv(const std::vector<RocPoint>& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("roc csv: cannot open '" + path + "' for writing");
    os << "fpr,tpr\n";
    for (const auto& p : curve) os << p.fpr << "," << p.tpr << "\n";
    if (!os) throw DataError("roc csv: write failed for '" + path + "'");
}

void write_aggregate_report(const std::vector<std::string>& variants,
                            const std::vector<std::vector<EvaluationReport>>& rounds_per_variant,
                            const std::string& out_dir) {
    if (variants.empty() || variants.size() != rounds_per_variant.size())
        throw DataError("report: variant/report arity mismatch");
    for (const auto& rr : rounds_per_variant)
        if (rr.empty()) throw DataError("report: need at least one round per variant");

    // per-class cross-round means; a class must be present in either all
    // rounds of a variant or none of them
    auto class_mean = [](const std::vector<EvaluationReport>& rounds, size_t k, bool& present) {
        size_t n = 0;
        double s = 0.0;
        for (const auto& r : rounds)
            if (r.has_class[k]) {
                s += r.class_auroc[k];
                ++n;
            }
        if (n != 0 && n != rounds.size())
            throw DataError("report: class " + LabelVector::class_name(k) +
                            " evaluable in only some rounds");
        present = n > 0;
        return n ? s / n : 0.0;
    };
    auto field_mean = [](const std::vector<EvaluationReport>& rounds, auto getter) {
        double s = 0.0;
        for (const auto& r : rounds) s += getter(r);
        return s / static_cast<double>(rounds.size());
    };

    std::ofstream csv(out_dir + "/report.csv");
    if (!csv) throw DataError("report: cannot open '" + out_dir + "/report.csv' for writing");
    csv << "# AuROC averaged across rounds; attr_error micro-averaged at threshold 0.5; "
           "shape_error by argmax\n";
    csv << "class";
    for (const auto& v : variants) csv << "," << v;
    csv << "\n";
    nlohmann::json jrows = nlohmann::json::object();
    for (size_t k = 0; k < kNumClasses; ++k) {
        csv << LabelVector::class_name(k);
        nlohmann::json row = nlohmann::json::object();
        for (size_t vi = 0; vi < variants.size(); ++vi) {
            bool present = false;
            double mean = class_mean(rounds_per_variant[vi], k, present);
            if (present) {
                csv << "," << mean;
                row[variants[vi]] = mean;
            } else {
                csv << ",";
            }
        }
        csv << "\n";
        jrows[LabelVector::class_name(k)] = row;
    }
    struct MeanRow {
        const char* name;
        double (*get)(const EvaluationReport&);
    };
    const MeanRow mean_rows[] = {
        {"mean_auroc", [](const EvaluationReport& r) { return r.mean_auroc; }},
        {"mean_auroc_shapes", [](const EvaluationReport& r) { return r.mean_shape_auroc; }},
        {"mean_auroc_attrs", [](const EvaluationReport& r) { return r.mean_attr_auroc; }},
        {"attr_error", [](const EvaluationReport& r) { return r.attr_error; }},
        {"shape_error", [](const EvaluationReport& r) { return r.shape_error; }},
    };
    nlohmann::json jmeans = nlohmann::json::object();
    for (const auto& mr : mean_rows) {
        csv << mr.name;
        nlohmann::json row = nlohmann::json::object();
        for (size_t vi = 0; vi < variants.size(); ++vi) {
            double mean = field_mean(rounds_per_variant[vi], mr.get);
            csv << "," << mean;
            row[variants[vi]] = mean;
        }
        csv << "\n";
        jmeans[mr.name] = row;
    }
    if (!csv) throw DataError("report: write failed for '" + out_dir + "/report.csv'");

    nlohmann::json j;
    j["variants"] = variants;
    j["rounds"] = rounds_per_variant[0].size();
    j["class_auroc"] = jrows;
    j["means"] = jmeans;
    j["definitions"] = {
        {"attr_error", "micro-averaged over all attribute labels, threshold 0.5"},
        {"shape_error", "argmax over the 6 shape scores"},
        {"tie_handling", "0.5 pair credit; trapezoid equals Mann-Whitney"},
    };
    std::ofstream js(out_dir + "/report.json");
    if (!js) throw DataError("report: cannot open '" + out_dir + "/report.json' for writing");
    js << j.dump(2) << "\n";
    if (!js) throw DataError("report: write failed for '" + out_dir + "/report.json'");
}

}  // namespace nucleo
