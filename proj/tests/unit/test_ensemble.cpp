#include <doctest.h>

#include <cmath>

#include "cpb/ensemble.hpp"
#include "cpb/error.hpp"
#include "cpb/rng.hpp"

using namespace cpb;

namespace {

ProbTriple random_triple(Rng& rng) {
    const double a = rng.uniform() + 1e-3, b = rng.uniform() + 1e-3, c = rng.uniform() + 1e-3;
    const double s = a + b + c;
    return {a / s, b / s, c / s};
}

// O(n^2) pair counting with ties worth 1/2.
double pair_count_auc(const std::vector<double>& s, const std::vector<char>& pos) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (pos[i] && !pos[j]) {
                den += 1;
                num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
    return num / den;
}

}  // namespace

TEST_SUITE("ensemble_eval") {

TEST_CASE("ensemble combination") {
    const ProbTriple pc{0.6, 0.3, 0.1}, pg{0.2, 0.5, 0.3};
    CHECK(ensemble(pc, pg, EnsembleWeight(1.0)) == pc);
    CHECK(ensemble(pc, pg, EnsembleWeight(0.0)) == pg);
    const auto e = ensemble(pc, pg, EnsembleWeight(0.4));
    CHECK(e.p1 == doctest::Approx(0.36));
    CHECK(e.p0 == doctest::Approx(0.42));
    CHECK(e.p_neg1 == doctest::Approx(0.22));
    CHECK(EnsembleWeight().value() == 0.4);
    CHECK_THROWS_AS(EnsembleWeight(1.1), ConfigError);
    CHECK_THROWS_AS(EnsembleWeight(-0.1), ConfigError);

    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_triple(rng), b = random_triple(rng);
        const EnsembleWeight w(rng.uniform());
        CHECK(ensemble(a, b, w).valid());
        const auto same = ensemble(a, a, w);
        CHECK(same.p1 == doctest::Approx(a.p1).epsilon(1e-15));
        CHECK(same.p0 == doctest::Approx(a.p0).epsilon(1e-15));
    }
}

TEST_CASE("predict_class argmax and tie order") {
    CHECK(predict_class({0.5, 0.3, 0.2}) == 1);
    CHECK(predict_class({1.0 / 3, 1.0 / 3, 1.0 / 3}) == 1);
    CHECK(predict_class({0.2, 0.4, 0.4}) == 0);
    CHECK(predict_class({0.1, 0.2, 0.7}) == -1);
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_triple(rng);
        const double c = rng.uniform(0.1, 10);
        const double s = (p.p1 + p.p0 + p.p_neg1) * c;
        CHECK(predict_class({p.p1 * c / s, p.p0 * c / s, p.p_neg1 * c / s}) == predict_class(p));
        const double shift = rng.uniform(-5, 5);
        const double a = std::exp(std::log(p.p1) + shift), b = std::exp(std::log(p.p0) + shift),
                     d = std::exp(std::log(p.p_neg1) + shift);
        CHECK(predict_class({a / (a + b + d), b / (a + b + d), d / (a + b + d)}) == predict_class(p));
    }
}

TEST_CASE("accuracy") {
    const std::vector<int> t{1, 0, -1, 1};
    CHECK(accuracy(t, t) == 1.0);
    CHECK(accuracy(std::vector<int>{1, 0, -1, 1}, std::vector<int>{1, 0, 1, -1}) == 0.5);
    CHECK(accuracy(std::vector<int>{0, 1, 1, -1}, std::vector<int>{0, 1, -1, 1}) == 0.5);
    CHECK_THROWS(accuracy(std::vector<int>{}, std::vector<int>{}));
    CHECK_THROWS(accuracy(std::vector<int>{1}, std::vector<int>{1, 0}));
}

TEST_CASE("bidirectional AUC examples") {
    const std::vector<int> truths{1, -1, 0};
    const std::vector<ProbTriple> probs{{0.6, 0.2, 0.2}, {0.2, 0.2, 0.6}, {0.4, 0.3, 0.3}};
    const auto parts = auc_bidirectional_parts(probs, truths);
    CHECK(parts.forward == 1.0);
    CHECK(parts.backward == 1.0);
    CHECK(auc_bidirectional(probs, truths) == 1.0);

    const std::vector<ProbTriple> flat(3, ProbTriple{});
    CHECK(auc_bidirectional(flat, truths) == 0.5);

    std::vector<ProbTriple> ordered;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        const int label = i % 3 - 1;
        const double s = label + 0.01 * i / 30.0;
        ordered.push_back({0.5 + s / 4, 0.5, 0.0});
        ordered.back().p_neg1 = 1.0 - ordered.back().p1 - 0.5;
        labels.push_back(label);
    }
    CHECK(auc_bidirectional(ordered, labels) == 1.0);
}

TEST_CASE("undefined sub-AUC is reported") {
    const std::vector<ProbTriple> p(3, ProbTriple{});
    CHECK_THROWS_AS(auc_bidirectional(p, std::vector<int>{0, 0, 1}), UndefinedMetricError);
    CHECK_THROWS_AS(auc_bidirectional(p, std::vector<int>{1, 1, 0}, {false}), UndefinedMetricError);
    CHECK_NOTHROW(auc_bidirectional(p, std::vector<int>{1, 0, -1}, {false}));
}

TEST_CASE("rank AUC equals the pair-counting oracle") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(499);
        std::vector<double> s(n);
        std::vector<char> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial % 2 ? static_cast<double>(rng.uniform_int(5)) : rng.normal();
            pos[i] = rng.bernoulli(0.4);
        }
        pos[0] = 1;
        pos[1] = 0;
        CHECK(std::abs(rank_auc(s, pos) - pair_count_auc(s, pos)) <= 1e-12);
    }
}

TEST_CASE("AUC is invariant under increasing transforms of the score") {
    Rng rng(4);
    std::vector<ProbTriple> p, q;
    std::vector<int> t;
    for (int i = 0; i < 200; ++i) {
        p.push_back(random_triple(rng));
        t.push_back(static_cast<int>(rng.uniform_int(3)) - 1);
        // Same ordering of p1 - p_neg1, different magnitudes.
        const double s = p.back().score();
        const double s2 = std::tanh(3 * s) * 0.5;
        q.push_back({0.5 + s2 / 2, 0.5, 0.0});
        q.back().p_neg1 = 0.5 - s2 / 2;
        q.back().p0 = 1 - q.back().p1 - q.back().p_neg1;
    }
    CHECK(auc_bidirectional(p, t) == doctest::Approx(auc_bidirectional(q, t)).epsilon(1e-12));
}

TEST_CASE("weight tuning") {
    CHECK(weight_grid().size() == 11);
    CHECK(weight_grid()[3] == 3 / 10.0);
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<ProbTriple> pc, pg;
        std::vector<int> t;
        for (int i = 0; i < 80; ++i) {
            pc.push_back(random_triple(rng));
            pg.push_back(random_triple(rng));
            t.push_back(i % 3 - 1);
        }
        for (auto metric : {TuneMetric::Auc, TuneMetric::Accuracy}) {
            const auto scan = tune_weight_scan(pc, pg, t, metric);
            CHECK(scan.candidates.size() == 11);
            const double best = scan.scores[static_cast<std::size_t>(std::lround(scan.best.value() * 10))];
            CHECK(best >= scan.scores.front());
            CHECK(best >= scan.scores.back());
            for (double s : scan.scores) CHECK(best >= s);
        }
        CHECK(tune_weight(pc, pc, t).value() == 0.0);
    }
    CHECK_THROWS(tune_weight(std::vector<ProbTriple>(3), std::vector<ProbTriple>(2), std::vector<int>{1, 0, -1}));
}

TEST_CASE("reports and prediction files") {
    const std::vector<std::string> ids{"a", "b", "c"};
    const std::vector<ProbTriple> p{{0.6, 0.2, 0.2}, {0.2, 0.2, 0.6}, {0.2, 0.5, 0.3}};
    auto r = evaluate(ids, p, std::vector<int>{1, -1, 1});
    CHECK(r.accuracy == doctest::Approx(2.0 / 3));
    CHECK(r.records[2].predicted == 0);
    const auto csv = format_predictions(r);
    CHECK(csv.rfind("id,p1,p0,p_neg1,score,predicted_label\n", 0) == 0);
    CHECK(csv.find("\nb,") != std::string::npos);
    CHECK(format_report(r).find("w=") == std::string::npos);
    r.weight = 0.4;
    const auto rep = format_report(r);
    CHECK(rep.find("accuracy=") != std::string::npos);
    CHECK(rep.find("auc_fwd=") != std::string::npos);
    CHECK(rep.find("auc_bwd=") != std::string::npos);
    CHECK(rep.find("w=0.4\n") != std::string::npos);
    CHECK(parse_tune_metric("accuracy") == TuneMetric::Accuracy);
    CHECK_THROWS(parse_tune_metric("f1"));
}

}
