#include "cpb/gbc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "binio.hpp"
#include "cpb/dataset.hpp"
#include "cpb/error.hpp"
#include "cpb/rng.hpp"
#include "cpb/tensor.hpp"

namespace cpb {

using nlohmann::json;

FeatureMatrix FeatureMatrix::from_vectors(const std::vector<FeatureVector>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().values.size();
    FeatureMatrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].values.size() != cols)
            throw ShapeError("feature row " + std::to_string(r) + " has " + std::to_string(rows[r].values.size()) +
                             " values, expected " + std::to_string(cols));
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r].values[c];
    }
    return m;
}

std::size_t RegressionTree::leaf_index(std::span<const double> row) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0)
        i = static_cast<std::size_t>(row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    return i;
}

std::size_t RegressionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].feature >= 0) {
            d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
            deepest = std::max(deepest, d[i] + 1);
        }
    return deepest;
}

namespace {

double midpoint(double lo, double hi) {
    const double m = 0.5 * (lo + hi);
    return (m >= lo && m < hi) ? m : lo;
}

// Level-wise exact split search over presorted feature orders: every level
// costs one pass per feature over all samples.
class TreeBuilder {
public:
    explicit TreeBuilder(const FeatureMatrix& x) : x_(x), order_(x.cols()) {
        for (std::size_t f = 0; f < x.cols(); ++f) {
            auto& o = order_[f];
            o.resize(x.rows());
            std::iota(o.begin(), o.end(), std::uint32_t{0});
            std::stable_sort(o.begin(), o.end(), [&](auto a, auto b) { return x(a, f) < x(b, f); });
        }
    }

    struct Result {
        RegressionTree tree;
        std::vector<std::int32_t> leaf_of;  // sample -> node index
    };

    Result fit(std::span<const double> t, int depth_limit, int min_split, std::span<const char> feature_mask) const {
        const std::size_t n = x_.rows();
        Result res;
        auto& nodes = res.tree.nodes;
        auto& node_of = res.leaf_of;
        node_of.assign(n, 0);
        std::vector<Stats> stats(1);
        for (std::size_t i = 0; i < n; ++i) stats[0].add(t[i]);
        nodes.emplace_back();

        std::vector<std::int32_t> frontier;
        if (splittable(stats[0], depth_limit > 0, min_split)) frontier.push_back(0);

        for (int depth = 0; depth < depth_limit && !frontier.empty(); ++depth) {
            const auto best = scan(t, node_of, stats, frontier, nodes.size(), feature_mask);
            std::vector<std::int32_t> split_nodes;
            for (std::size_t s = 0; s < frontier.size(); ++s) {
                if (best[s].feature < 0) continue;
                const auto nd = frontier[s];
                nodes[nd].feature = best[s].feature;
                nodes[nd].threshold = best[s].threshold;
                nodes[nd].left = static_cast<std::int32_t>(nodes.size());
                nodes[nd].right = static_cast<std::int32_t>(nodes.size() + 1);
                nodes.emplace_back();
                nodes.emplace_back();
                stats.emplace_back();
                stats.emplace_back();
                split_nodes.push_back(nd);
            }
            if (split_nodes.empty()) break;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& nd = nodes[node_of[i]];
                if (nd.feature < 0) continue;
                node_of[i] = x_(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
                stats[node_of[i]].add(t[i]);
            }
            frontier.clear();
            for (auto nd : split_nodes)
                for (auto child : {nodes[nd].left, nodes[nd].right})
                    if (splittable(stats[child], depth + 1 < depth_limit, min_split)) frontier.push_back(child);
        }
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].feature < 0 && stats[i].count > 0) nodes[i].value = stats[i].sum / stats[i].count;
        return res;
    }

    SplitChoice root_split(std::span<const double> t) const {
        std::vector<std::int32_t> node_of(x_.rows(), 0);
        std::vector<Stats> stats(1);
        for (double v : t) stats[0].add(v);
        return scan(t, node_of, stats, {0}, 1, {}).front();
    }

private:
    struct Stats {
        double count = 0, sum = 0;
        double tmin = INFINITY, tmax = -INFINITY;
        void add(double v) {
            count += 1;
            sum += v;
            tmin = std::min(tmin, v);
            tmax = std::max(tmax, v);
        }
    };

    static bool splittable(const Stats& s, bool depth_ok, int min_split) {
        return depth_ok && s.count >= std::max(2, min_split) && s.tmax > s.tmin;
    }

    std::vector<SplitChoice> scan(std::span<const double> t, const std::vector<std::int32_t>& node_of,
                                  const std::vector<Stats>& stats, const std::vector<std::int32_t>& frontier,
                                  std::size_t node_count, std::span<const char> feature_mask) const {
        std::vector<int> slot_of(node_count, -1);
        for (std::size_t s = 0; s < frontier.size(); ++s) slot_of[frontier[s]] = static_cast<int>(s);
        std::vector<SplitChoice> best(frontier.size());
        struct Scan {
            double count, sum, last;
        };
        std::vector<Scan> state(frontier.size());
        for (std::size_t f = 0; f < x_.cols(); ++f) {
            if (!feature_mask.empty() && !feature_mask[f]) continue;
            std::fill(state.begin(), state.end(), Scan{0, 0, 0});
            for (auto i : order_[f]) {
                const int s = slot_of[node_of[i]];
                if (s < 0) continue;
                Scan& st = state[s];
                const double v = x_(i, f);
                if (st.count > 0 && v != st.last) {
                    const Stats& node = stats[frontier[s]];
                    const double n_left = st.count, n_right = node.count - st.count;
                    const double diff = st.sum / n_left - (node.sum - st.sum) / n_right;
                    const double gain = n_left * n_right / node.count * diff * diff;
                    if (gain > best[s].gain) best[s] = {static_cast<int>(f), midpoint(st.last, v), gain};
                }
                st.count += 1;
                st.sum += t[i];
                st.last = v;
            }
        }
        return best;
    }

    const FeatureMatrix& x_;
    std::vector<std::vector<std::uint32_t>> order_;
};

constexpr std::string_view kGbcMagic = "CPBG";
constexpr std::uint32_t kGbcVersion = 1;
constexpr std::size_t kClasses = 3;

std::vector<double> softmax3(std::span<const double> scores) { return softmax(scores); }

}  // namespace

SplitChoice best_split(const FeatureMatrix& x, std::span<const double> targets) {
    if (targets.size() != x.rows()) throw ShapeError("best_split: targets and rows differ");
    if (x.rows() == 0) return {};
    return TreeBuilder(x).root_split(targets);
}

RegressionTree fit_tree(const FeatureMatrix& x, std::span<const double> targets, int depth_limit, int min_split) {
    if (targets.size() != x.rows()) throw ShapeError("fit_tree: targets and rows differ");
    if (x.rows() == 0) throw ConfigError("fit_tree: need at least one sample");
    return TreeBuilder(x).fit(targets, depth_limit, min_split, {}).tree;
}

void GbcConfig::validate() const {
    if (n_estimators < 0) throw ConfigError("n_estimators must be >= 0");
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (feature_subsample && !(*feature_subsample > 0.0 && *feature_subsample <= 1.0))
        throw ConfigError("feature_subsample must lie in (0, 1]");
}

BoostedModel gbc_fit(const std::vector<FeatureVector>& features, std::span<const int> labels, const GbcConfig& cfg) {
    cfg.validate();
    if (features.size() != labels.size()) throw ConfigError("gbc_fit: features and labels differ in length");
    const FeatureMatrix x = FeatureMatrix::from_vectors(features);
    const std::size_t n = x.rows();

    std::vector<std::size_t> cls(n);
    std::array<double, kClasses> counts{};
    for (std::size_t i = 0; i < n; ++i) {
        cls[i] = label_to_class(labels[i]);
        counts[cls[i]] += 1.0;
    }
    if (std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) < 2)
        throw ConfigError("gbc_fit: need at least two classes in the training labels");

    BoostedModel model;
    model.config = cfg;
    model.n_features = x.cols();
    model.trees.resize(kClasses);
    for (std::size_t k = 0; k < kClasses; ++k)
        model.initial_scores.push_back(std::log(std::max(counts[k] / static_cast<double>(n), 1e-12)));

    std::vector<double> scores(n * kClasses);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < kClasses; ++k) scores[i * kClasses + k] = model.initial_scores[k];

    std::vector<double> prob(n * kClasses);
    const auto refresh = [&] {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = softmax3({scores.data() + i * kClasses, kClasses});
            std::copy(p.begin(), p.end(), prob.begin() + i * kClasses);
            loss += cross_entropy(p, cls[i]);
        }
        model.train_log_loss.push_back(loss / static_cast<double>(n));
    };
    refresh();

    const TreeBuilder builder(x);
    const double leaf_scale = static_cast<double>(kClasses - 1) / static_cast<double>(kClasses);
    for (int round = 0; round < cfg.n_estimators; ++round) {
        std::array<RegressionTree, kClasses> round_trees;
        std::array<std::vector<std::int32_t>, kClasses> leaf_of;
#pragma omp parallel for schedule(static)
        for (long k = 0; k < static_cast<long>(kClasses); ++k) {
            std::vector<double> residual(n);
            for (std::size_t i = 0; i < n; ++i)
                residual[i] = (cls[i] == static_cast<std::size_t>(k) ? 1.0 : 0.0) - prob[i * kClasses + k];
            std::vector<char> mask;
            if (cfg.feature_subsample) {
                Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(round) * kClasses + k));
                const auto keep = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::floor(*cfg.feature_subsample * static_cast<double>(x.cols()))));
                auto idx = shuffled_indices(x.cols(), rng.next_u64());
                mask.assign(x.cols(), 0);
                for (std::size_t j = 0; j < keep; ++j) mask[idx[j]] = 1;
            }
            auto fitted = builder.fit(residual, cfg.max_depth, cfg.min_samples_split, mask);
            // Newton step per leaf.
            std::vector<double> num(fitted.tree.nodes.size(), 0.0), den(fitted.tree.nodes.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = residual[i];
                num[fitted.leaf_of[i]] += r;
                den[fitted.leaf_of[i]] += std::abs(r) * (1.0 - std::abs(r));
            }
            for (std::size_t j = 0; j < fitted.tree.nodes.size(); ++j)
                if (fitted.tree.nodes[j].feature < 0)
                    fitted.tree.nodes[j].value = den[j] < 1e-150 ? 0.0 : leaf_scale * num[j] / den[j];
            round_trees[k] = std::move(fitted.tree);
            leaf_of[k] = std::move(fitted.leaf_of);
        }
        for (std::size_t k = 0; k < kClasses; ++k) {
            for (std::size_t i = 0; i < n; ++i)
                scores[i * kClasses + k] += cfg.learning_rate * round_trees[k].nodes[leaf_of[k][i]].value;
            model.trees[k].push_back(std::move(round_trees[k]));
        }
        refresh();
    }
    return model;
}

ProbTriple gbc_predict(const BoostedModel& model, const FeatureVector& features) {
    if (features.values.size() != model.n_features)
        throw ShapeError("gbc_predict: feature vector has " + std::to_string(features.values.size()) +
                         " values, model expects " + std::to_string(model.n_features));
    std::array<double, kClasses> scores{};
    for (std::size_t k = 0; k < kClasses; ++k) {
        double s = model.initial_scores[k];
        for (const auto& tree : model.trees[k]) s += model.config.learning_rate * tree.predict(features.values);
        scores[k] = s;
    }
    return triple_from_classes(softmax3(scores));
}

std::string BoostedModel::serialize() const {
    json meta;
    meta["kind"] = "gbc";
    meta["n_estimators"] = config.n_estimators;
    meta["max_depth"] = config.max_depth;
    meta["min_samples_split"] = config.min_samples_split;
    meta["learning_rate"] = config.learning_rate;
    meta["max_features"] = config.feature_subsample ? json(*config.feature_subsample) : json("None");
    meta["seed"] = config.seed;
    meta["loss"] = "multinomial deviance (softmax)";
    meta["label_mapping"] = {{"1", 0}, {"0", 1}, {"-1", 2}};
    meta["n_features"] = n_features;
    meta["train_log_loss"] = train_log_loss;

    binio::Writer w;
    w.bytes(kGbcMagic);
    w.u32(kGbcVersion);
    w.str(meta.dump(1));
    w.u32(static_cast<std::uint32_t>(n_features));
    w.u32(static_cast<std::uint32_t>(initial_scores.size()));
    for (double s : initial_scores) w.f64(s);
    for (const auto& per_class : trees) {
        w.u32(static_cast<std::uint32_t>(per_class.size()));
        for (const auto& tree : per_class) {
            w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
            for (const auto& nd : tree.nodes) {
                w.i32(nd.feature);
                w.f64(nd.threshold);
                w.i32(nd.left);
                w.i32(nd.right);
                w.f64(nd.value);
            }
        }
    }
    return w.take();
}

BoostedModel BoostedModel::deserialize(std::string_view bytes) {
    binio::Reader r(bytes, "gbc model");
    if (r.bytes(4) != kGbcMagic) throw ValidationError("gbc model: bad magic bytes");
    if (const auto v = r.u32(); v != kGbcVersion)
        throw ValidationError("gbc model: unsupported version " + std::to_string(v));
    const json meta = json::parse(r.str());
    BoostedModel m;
    m.config.n_estimators = meta.at("n_estimators").get<int>();
    m.config.max_depth = meta.at("max_depth").get<int>();
    m.config.min_samples_split = meta.at("min_samples_split").get<int>();
    m.config.learning_rate = meta.at("learning_rate").get<double>();
    if (meta.at("max_features").is_number()) m.config.feature_subsample = meta.at("max_features").get<double>();
    m.config.seed = meta.at("seed").get<std::uint64_t>();
    m.train_log_loss = meta.at("train_log_loss").get<std::vector<double>>();
    m.n_features = r.u32();
    const auto k = r.u32();
    if (k != kClasses) throw ValidationError("gbc model: expected 3 classes");
    for (std::uint32_t i = 0; i < k; ++i) m.initial_scores.push_back(r.f64());
    m.trees.resize(k);
    for (auto& per_class : m.trees) {
        const auto count = r.u32();
        per_class.resize(count);
        for (auto& tree : per_class) {
            tree.nodes.resize(r.u32());
            for (auto& nd : tree.nodes) {
                nd.feature = r.i32();
                nd.threshold = r.f64();
                nd.left = r.i32();
                nd.right = r.i32();
                nd.value = r.f64();
                const auto limit = static_cast<std::int32_t>(tree.nodes.size());
                if (nd.feature >= static_cast<std::int32_t>(m.n_features) ||
                    (nd.feature >= 0 && (nd.left <= 0 || nd.right <= 0 || nd.left >= limit || nd.right >= limit)))
                    throw ValidationError("gbc model: corrupt tree node");
            }
        }
    }
    if (!r.done()) throw ValidationError("gbc model: trailing bytes");
    return m;
}

}  // namespace cpb
