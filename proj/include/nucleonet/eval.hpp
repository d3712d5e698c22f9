#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "nucleonet/data.hpp"
#include "nucleonet/network.hpp"

namespace nucleo {

struct ScoredLabel {
    double score = 0.0;
    int truth = 0;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// Tie-grouped ROC sweep over distinct scores descending; starts at (0,0),
// ends at (1,1). Throws DataError on single-class input.
std::vector<RocPoint> roc_curve(const std::vector<ScoredLabel>& samples);

// Trapezoidal area under roc_curve; equals the Mann-Whitney pair statistic
// with ties credited 0.5.
double auroc(const std::vector<ScoredLabel>& samples);

struct ErrorRates {
    double attr_error = 0.0;   // micro over all 10 attribute decisions, threshold 0.5
    double shape_error = 0.0;  // argmax over the 6 shape scores
};

ErrorRates error_rates(const std::vector<Prediction>& predictions,
                       const std::vector<LabelVector>& truths);

struct EvaluationReport {
    size_t round = 0;
    std::array<double, kNumClasses> class_auroc{};  // meaningful iff has_class
    std::array<bool, kNumClasses> has_class{};      // false: no positives or no negatives
    double mean_auroc = 0.0;        // over all evaluable classes
    double mean_shape_auroc = 0.0;  // over the 5 dedicated shape classes
    double mean_attr_auroc = 0.0;   // over the 10 attribute classes
    double attr_error = 0.0;
    double shape_error = 0.0;
};

// Score of class k (attributes then dedicated shapes) under a prediction.
double class_score(const Prediction& p, size_t k);

// Per-class AuROC plus error rates; classes with a single truth value are
// excluded from the means with a warning line on `warn`.
EvaluationReport evaluate(const std::vector<Prediction>& predictions,
                          const std::vector<LabelVector>& truths, size_t round,
                          std::ostream* warn);

std::string report_to_json(const EvaluationReport& r);
EvaluationReport report_from_json(const std::string& text);

// Writes fpr,tpr lines for one class.
void write_roc_csv(const std::vector<RocPoint>& curve, const std::string& path);

// Cross-round averages, one column per variant: report.csv and report.json
// under out_dir. Every variant must supply the same number of rounds.
void write_aggregate_report(const std::vector<std::string>& variants,
                            const std::vector<std::vector<EvaluationReport>>& rounds_per_variant,
                            const std::string& out_dir);

}  // namespace nucleo
