#include "cpb/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpb/error.hpp"
#include "text.hpp"

namespace cpb {

EnsembleWeight::EnsembleWeight(double w) : w_(w) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("ensemble weight must lie in [0, 1], got " + text::format_double(w));
}

ProbTriple ensemble(const ProbTriple& pc, const ProbTriple& pg, EnsembleWeight weight) {
    const double w = weight.value();
    return {w * pc.p1 + (1.0 - w) * pg.p1, w * pc.p0 + (1.0 - w) * pg.p0, w * pc.p_neg1 + (1.0 - w) * pg.p_neg1};
}

int predict_class(const ProbTriple& p) {
    if (p.p1 >= p.p0 && p.p1 >= p.p_neg1) return 1;
    if (p.p0 >= p.p_neg1) return 0;
    return -1;
}

double accuracy(std::span<const int> predictions, std::span<const int> truths) {
    if (predictions.size() != truths.size())
        throw ConfigError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                          std::to_string(truths.size()) + " truths");
    if (predictions.empty()) throw UndefinedMetricError("accuracy of an empty set is undefined");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) correct += predictions[i] == truths[i];
    return static_cast<double>(correct) / static_cast<double>(truths.size());
}

double rank_auc(std::span<const double> scores, std::span<const char> positive) {
    if (scores.size() != positive.size()) throw ConfigError("rank_auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    for (double s : scores)
        if (std::isnan(s)) throw ValidationError("rank_auc: NaN score");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the (1-based, tie-averaged) rank sum of positives, kept integral.
    std::uint64_t rank2_pos = 0, n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t rank2 = i + j + 1;  // (i+1 + j) averaged, times 2
        for (std::size_t k = i; k < j; ++k)
            if (positive[order[k]]) {
                rank2_pos += rank2;
                ++n_pos;
            }
        i = j;
    }
    const std::uint64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUC undefined: need at least one positive and one negative");
    const std::uint64_t u2 = rank2_pos - n_pos * (n_pos + 1);
    return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

BidirectionalAuc auc_bidirectional_parts(std::span<const ProbTriple> probs, std::span<const int> truths,
                                         const AucOptions& options) {
    if (probs.size() != truths.size()) throw ConfigError("auc: probabilities and labels differ in length");
    if (probs.empty()) throw UndefinedMetricError("AUC of an empty set is undefined");
    std::vector<double> fwd, bwd;
    std::vector<char> pos_fwd, pos_bwd;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (truths[i] == 0 && !options.neutral_as_negative) continue;
        const double s = probs[i].score();
        fwd.push_back(s);
        pos_fwd.push_back(truths[i] == 1);
        bwd.push_back(-s);
        pos_bwd.push_back(truths[i] == -1);
    }
    BidirectionalAuc r;
    try {
        r.forward = rank_auc(fwd, pos_fwd);
    } catch (const UndefinedMetricError&) {
        throw UndefinedMetricError("forward AUC undefined: need label-1 and non-label-1 instances");
    }
    try {
        r.backward = rank_auc(bwd, pos_bwd);
    } catch (const UndefinedMetricError&) {
        throw UndefinedMetricError("backward AUC undefined: need label -1 and non-label -1 instances");
    }
    return r;
}

double auc_bidirectional(std::span<const ProbTriple> probs, std::span<const int> truths, const AucOptions& options) {
    return auc_bidirectional_parts(probs, truths, options).value();
}

TuneMetric parse_tune_metric(const std::string& name) {
    if (name == "auc") return TuneMetric::Auc;
    if (name == "accuracy") return TuneMetric::Accuracy;
    throw ConfigError("unknown tune metric '" + name + "' (expected auc or accuracy)");
}

std::string to_string(TuneMetric metric) { return metric == TuneMetric::Auc ? "auc" : "accuracy"; }

double evaluate_metric(std::span<const ProbTriple> probs, std::span<const int> truths, TuneMetric metric,
                       const AucOptions& options) {
    if (metric == TuneMetric::Auc) return auc_bidirectional(probs, truths, options);
    std::vector<int> pred(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) pred[i] = predict_class(probs[i]);
    return accuracy(pred, truths);
}

std::vector<double> weight_grid() {
    std::vector<double> grid(kWeightGridSize);
    for (int i = 0; i < kWeightGridSize; ++i) grid[i] = static_cast<double>(i) / 10.0;
    return grid;
}

WeightTuning tune_weight_scan(std::span<const ProbTriple> val_pc, std::span<const ProbTriple> val_pg,
                              std::span<const int> val_labels, TuneMetric metric, const AucOptions& options) {
    if (val_pc.size() != val_pg.size() || val_pc.size() != val_labels.size())
        throw ConfigError("tune_weight: misaligned validation lists");
    if (val_pc.empty()) throw ConfigError("tune_weight: empty validation set");
    WeightTuning t;
    t.candidates = weight_grid();
    double best_score = -1.0;
    std::vector<ProbTriple> mixed(val_pc.size());
    for (double w : t.candidates) {
        for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = ensemble(val_pc[i], val_pg[i], EnsembleWeight(w));
        const double score = evaluate_metric(mixed, val_labels, metric, options);
        t.scores.push_back(score);
        if (score > best_score) {
            best_score = score;
            t.best = EnsembleWeight(w);
        }
    }
    return t;
}

EnsembleWeight tune_weight(std::span<const ProbTriple> val_pc, std::span<const ProbTriple> val_pg,
                           std::span<const int> val_labels, TuneMetric metric, const AucOptions& options) {
    return tune_weight_scan(val_pc, val_pg, val_labels, metric, options).best;
}

EvalReport evaluate(std::span<const std::string> ids, std::span<const ProbTriple> probs, std::span<const int> truths,
                    const AucOptions& options) {
    if (ids.size() != probs.size() || probs.size() != truths.size())
        throw ConfigError("evaluate: misaligned ids, probabilities and labels");
    EvalReport r;
    std::vector<int> pred(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        pred[i] = predict_class(probs[i]);
        r.records.push_back({ids[i], probs[i], pred[i], truths[i]});
    }
    r.accuracy = accuracy(pred, truths);
    r.auc = auc_bidirectional_parts(probs, truths, options);
    return r;
}

std::string format_predictions(const EvalReport& report) {
    std::string out = "id,p1,p0,p_neg1,score,predicted_label\n";
    for (const auto& rec : report.records) {
        out += rec.id + ',' + text::format_double(rec.p.p1) + ',' + text::format_double(rec.p.p0) + ',' +
               text::format_double(rec.p.p_neg1) + ',' + text::format_double(rec.p.score()) + ',' +
               std::to_string(rec.predicted) + '\n';
    }
    return out;
}

std::string format_report(const EvalReport& report) {
    std::string out;
    out += "accuracy=" + text::format_double(report.accuracy) + '\n';
    out += "auc=" + text::format_double(report.auc.value()) + '\n';
    out += "auc_fwd=" + text::format_double(report.auc.forward) + '\n';
    out += "auc_bwd=" + text::format_double(report.auc.backward) + '\n';
    if (report.weight) out += "w=" + text::format_double(*report.weight) + '\n';
    return out;
}

}  // namespace cpb
