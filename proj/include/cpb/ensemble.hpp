#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpb/prob.hpp"

namespace cpb {

/// Weight of the CNN probabilities in the ensemble, 0 <= w <= 1.
class EnsembleWeight {
public:
    EnsembleWeight() = default;
    explicit EnsembleWeight(double w);  // throws ConfigError outside [0, 1]
    double value() const noexcept { return w_; }

private:
    double w_ = 0.4;
};

/// w * pc + (1 - w) * pg, componentwise.
ProbTriple ensemble(const ProbTriple& pc, const ProbTriple& pg, EnsembleWeight w);

/// Argmax label; exact ties resolve in the order 1, 0, -1.
int predict_class(const ProbTriple& p);

/// correct / total. Throws on empty or misaligned input.
double accuracy(std::span<const int> predictions, std::span<const int> truths);

/// Mann-Whitney AUC of `scores` for separating positives from negatives, ties counted 1/2.
/// Throws UndefinedMetricError when either class is empty.
double rank_auc(std::span<const double> scores, std::span<const char> positive);

struct AucOptions {
    /// When false, label-0 instances are dropped from both sub-AUCs.
    bool neutral_as_negative = true;
};

struct BidirectionalAuc {
    double forward = 0.0;   ///< label 1 vs rest on s = p1 - p_neg1
    double backward = 0.0;  ///< label -1 vs rest on -s
    double value() const noexcept { return 0.5 * (forward + backward); }
};

BidirectionalAuc auc_bidirectional_parts(std::span<const ProbTriple> probs, std::span<const int> truths,
                                         const AucOptions& options = {});

double auc_bidirectional(std::span<const ProbTriple> probs, std::span<const int> truths,
                         const AucOptions& options = {});

enum class TuneMetric { Auc, Accuracy };

TuneMetric parse_tune_metric(const std::string& name);  // "auc" | "accuracy"
std::string to_string(TuneMetric metric);

double evaluate_metric(std::span<const ProbTriple> probs, std::span<const int> truths, TuneMetric metric,
                       const AucOptions& options = {});

inline constexpr int kWeightGridSize = 11;

/// {0.0, 0.1, ..., 1.0}, each computed as i / 10.
std::vector<double> weight_grid();

struct WeightTuning {
    EnsembleWeight best;
    std::vector<double> candidates;
    std::vector<double> scores;  ///< metric per candidate
};

/// Grid search over weight_grid(); ties go to the smallest w.
WeightTuning tune_weight_scan(std::span<const ProbTriple> val_pc, std::span<const ProbTriple> val_pg,
                              std::span<const int> val_labels, TuneMetric metric = TuneMetric::Auc,
                              const AucOptions& options = {});

EnsembleWeight tune_weight(std::span<const ProbTriple> val_pc, std::span<const ProbTriple> val_pg,
                           std::span<const int> val_labels, TuneMetric metric = TuneMetric::Auc,
                           const AucOptions& options = {});

struct EvalRecord {
    std::string id;
    ProbTriple p;
    int predicted = 0;
    int truth = 0;
};

struct EvalReport {
    double accuracy = 0.0;
    BidirectionalAuc auc;
    std::vector<EvalRecord> records;
    std::optional<double> weight;  ///< set for ensemble reports
};

EvalReport evaluate(std::span<const std::string> ids, std::span<const ProbTriple> probs,
                    std::span<const int> truths, const AucOptions& options = {});

/// "id,p1,p0,p_neg1,score,predicted_label" with header.
std::string format_predictions(const EvalReport& report);
/// key=value lines: accuracy, auc, auc_fwd, auc_bwd, w (when set).
std::string format_report(const EvalReport& report);

}  // namespace cpb
