#include "cpb/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cpb/error.hpp"
#include "cpb/raster.hpp"
#include "text.hpp"

namespace cpb {

namespace {

// ---- moments and correlations ----------------------------------------------

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double a : v) s += a;
    return s / static_cast<double>(v.size());
}

struct Moments {
    double mean = 0, std = 0, skew = 0, kurt = 0;
};

Moments moments(std::span<const double> v) {
    Moments m;
    m.mean = mean_of(v);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double a : v) {
        const double d = a - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(v.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.std = std::sqrt(m2);
    // Values that are constant up to rounding have no meaningful shape.
    if (m.std > 1e-12 * std::max(1.0, std::abs(m.mean))) {
        m.skew = m3 / (m2 * m.std);
        m.kurt = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0) || !(syy > 0)) return 0.0;
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j - 1);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

double unique_ratio(std::span<const double> v) {
    std::unordered_set<double> seen(v.begin(), v.end());
    return static_cast<double>(seen.size()) / static_cast<double>(v.size());
}

// ---- discrete information measures ----------------------------------------

double entropy_of_counts(std::span<const double> counts, double total) {
    double h = 0.0;
    for (double c : counts)
        if (c > 0) {
            const double p = c / total;
            h -= p * std::log(p);
        }
    return h;
}

double normalized_entropy(std::span<const int> bins) {
    std::array<double, kFeatureBins> counts{};
    for (int b : bins) counts[b] += 1.0;
    return entropy_of_counts(counts, static_cast<double>(bins.size())) / std::log(double(kFeatureBins));
}

double mutual_information(std::span<const int> a, std::span<const int> b) {
    std::array<double, kFeatureBins * kFeatureBins> joint{};
    std::array<double, kFeatureBins> ca{}, cb{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[a[i] * kFeatureBins + b[i]] += 1.0;
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double mi = 0.0;
    for (int i = 0; i < kFeatureBins; ++i)
        for (int j = 0; j < kFeatureBins; ++j) {
            const double c = joint[i * kFeatureBins + j];
            if (c > 0) mi += (c / n) * std::log(c * n / (ca[i] * cb[j]));
        }
    return std::max(0.0, mi);
}

// Symmetric form used for the pairwise MI so that swapping arguments is exact.
double symmetric_mi(std::span<const int> a, std::span<const int> b) {
    return 0.5 * (mutual_information(a, b) + mutual_information(b, a));
}

// ---- conditional (input-binned) statistics ----------------------------------

struct Conditional {
    double std_mean = 0;       // mean of per-bin std of target / overall std
    double std_spread = 0;     // std of those relative stds
    double entropy_spread = 0; // std of per-bin normalized target entropy
    double corr_ratio = 0;     // between-bin variance / total variance
};

double spread(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0;
    for (double a : v) s += (a - m) * (a - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

Conditional conditional_stats(std::span<const int> input_bins, std::span<const double> target,
                              std::span<const int> target_bins) {
    Conditional c;
    const double n = static_cast<double>(target.size());
    const Moments tm = moments(target);
    std::array<std::vector<std::size_t>, kFeatureBins> members;
    for (std::size_t i = 0; i < input_bins.size(); ++i) members[input_bins[i]].push_back(i);

    std::vector<double> rel_std, ent;
    double between = 0.0;
    for (const auto& idx : members) {
        if (idx.empty()) continue;
        double s = 0;
        for (auto i : idx) s += target[i];
        const double bm = s / static_cast<double>(idx.size());
        between += static_cast<double>(idx.size()) * (bm - tm.mean) * (bm - tm.mean);
        if (idx.size() < 2) continue;
        double ss = 0;
        std::array<double, kFeatureBins> counts{};
        for (auto i : idx) {
            ss += (target[i] - bm) * (target[i] - bm);
            counts[target_bins[i]] += 1.0;
        }
        if (tm.std > 0) rel_std.push_back(std::sqrt(ss / static_cast<double>(idx.size())) / tm.std);
        ent.push_back(entropy_of_counts(counts, static_cast<double>(idx.size())) / std::log(double(kFeatureBins)));
    }
    if (!rel_std.empty()) {
        c.std_mean = mean_of(rel_std);
        c.std_spread = spread(rel_std);
    }
    c.entropy_spread = spread(ent);
    const double total = tm.std * tm.std * n;
    if (total > 0) c.corr_ratio = std::clamp(between / total, 0.0, 1.0);
    return c;
}

// ---- regression fits --------------------------------------------------------

struct LinearFit {
    double slope = 0;
    double resid_var = 0;
};

LinearFit linear_fit(std::span<const double> input, std::span<const double> target) {
    const double mx = mean_of(input), my = mean_of(target);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double dx = input[i] - mx, dy = target[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    const double n = static_cast<double>(input.size());
    LinearFit f;
    if (sxx > 0) {
        f.slope = sxy / sxx;
        f.resid_var = std::max(0.0, (syy - f.slope * sxy) / n);
    } else {
        f.resid_var = syy / n;
    }
    return f;
}

std::vector<double> standardized(std::span<const double> v) {
    const Moments m = moments(v);
    std::vector<double> out(v.size(), 0.0);
    if (m.std > 0)
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - m.mean) / m.std;
    return out;
}

// Least-squares cubic on standardized data; returns the residuals.
std::vector<double> cubic_residuals(std::span<const double> u, std::span<const double> t) {
    constexpr int P = 4;
    double a[P][P + 1] = {};
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double basis[P] = {1.0, u[i], u[i] * u[i], u[i] * u[i] * u[i]};
        for (int r = 0; r < P; ++r) {
            for (int c = 0; c < P; ++c) a[r][c] += basis[r] * basis[c];
            a[r][P] += basis[r] * t[i];
        }
    }
    for (int r = 0; r < P; ++r) a[r][r] += 1e-9 * static_cast<double>(u.size());
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < P; ++col) {
        int piv = col;
        for (int r = col + 1; r < P; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        for (int c = 0; c <= P; ++c) std::swap(a[col][c], a[piv][c]);
        if (std::abs(a[col][col]) < 1e-300) continue;
        for (int r = col + 1; r < P; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c <= P; ++c) a[r][c] -= f * a[col][c];
        }
    }
    double coef[P] = {};
    for (int r = P - 1; r >= 0; --r) {
        double s = a[r][P];
        for (int c = r + 1; c < P; ++c) s -= a[r][c] * coef[c];
        coef[r] = std::abs(a[r][r]) < 1e-300 ? 0.0 : s / a[r][r];
    }
    std::vector<double> res(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        res[i] = t[i] - (coef[0] + u[i] * (coef[1] + u[i] * (coef[2] + u[i] * coef[3])));
    return res;
}

// Slope-based information-geometric estimate: mean log |dy/dx| over
// consecutive points sorted by (x, y), both rescaled to [0, 1].
double igci_slope(std::span<const double> x, std::span<const double> y) {
    const auto [xl, xh] = std::minmax_element(x.begin(), x.end());
    const auto [yl, yh] = std::minmax_element(y.begin(), y.end());
    const double xr = *xh - *xl, yr = *yh - *yl;
    if (!(xr > 0) || !(yr > 0)) return 0.0;
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]); });
    double s = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const double dx = (x[order[k]] - x[order[k - 1]]) / xr;
        const double dy = (y[order[k]] - y[order[k - 1]]) / yr;
        if (dx != 0 && dy != 0) {
            s += std::log(std::abs(dy / dx));
            ++used;
        }
    }
    return used ? s / static_cast<double>(used) : 0.0;
}

struct Directional {
    Conditional cond;
    LinearFit lin;
    double poly_resid_frac = 0;
    double resid_dependence = 0;
    double resid_kurtosis = 0;
    double heteroscedasticity = 0;
    double igci = 0;
};

// Statistics of "target given input".
Directional directional(std::span<const double> input, std::span<const int> input_bins, std::span<const double> target,
                        std::span<const int> target_bins) {
    Directional d;
    d.cond = conditional_stats(input_bins, target, target_bins);
    d.lin = linear_fit(input, target);
    const auto u = standardized(input);
    const auto t = standardized(target);
    const bool degenerate_target = std::all_of(t.begin(), t.end(), [](double v) { return v == 0.0; });
    if (!degenerate_target) {
        const auto r = cubic_residuals(u, t);
        double ss = 0;
        for (double v : r) ss += v * v;
        d.poly_resid_frac = std::clamp(ss / static_cast<double>(r.size()), 0.0, 1.0);
        const auto rb = discretize(r, kFeatureBins);
        d.resid_dependence = mutual_information(input_bins, rb);
        d.resid_kurtosis = moments(r).kurt;
        std::vector<double> abs_r(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) abs_r[i] = std::abs(r[i]);
        d.heteroscedasticity = conditional_stats(input_bins, abs_r, discretize(abs_r, kFeatureBins)).corr_ratio;
    }
    d.igci = igci_slope(input, target);
    return d;
}

std::vector<std::string> make_names() {
    const std::string b = std::to_string(kFeatureBins);
    std::vector<std::string> n = {"log_n", "x_num", "x_bin", "y_num", "y_bin",
                                  "x_mean", "x_std", "x_skew", "x_kurt",
                                  "y_mean", "y_std", "y_skew", "y_kurt",
                                  "x_unique_ratio", "y_unique_ratio",
                                  "x_entropy" + b, "y_entropy" + b,
                                  "pearson", "spearman", "mi" + b, "nmi" + b};
    const auto pair = [&](const std::string& stem) {
        n.push_back(stem + "_y|x");
        n.push_back(stem + "_x|y");
    };
    pair("cond_std_mean" + b);
    pair("cond_std_spread" + b);
    pair("cond_entropy_spread" + b);
    pair("corr_ratio" + b);
    pair("slope");
    pair("lin_resid_var");
    pair("cubic_resid_frac");
    pair("resid_dependence" + b);
    pair("resid_kurt");
    pair("resid_hetero" + b);
    n.push_back("igci_x->y");
    n.push_back("igci_y->x");
    return n;
}

std::string swapped_name(const std::string& name) {
    const auto ends_with = [&](std::string_view s) {
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (name.rfind("x_", 0) == 0) return "y_" + name.substr(2);
    if (name.rfind("y_", 0) == 0) return "x_" + name.substr(2);
    if (ends_with("_y|x")) return name.substr(0, name.size() - 4) + "_x|y";
    if (ends_with("_x|y")) return name.substr(0, name.size() - 4) + "_y|x";
    if (ends_with("x->y")) return name.substr(0, name.size() - 4) + "y->x";
    if (ends_with("y->x")) return name.substr(0, name.size() - 4) + "x->y";
    return name;
}

}  // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = make_names();
    return names;
}

std::size_t feature_count() { return feature_names().size(); }

const std::vector<std::size_t>& swap_permutation() {
    static const std::vector<std::size_t> perm = [] {
        const auto& names = feature_names();
        std::vector<std::size_t> p(names.size());
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto target = swapped_name(names[i]);
            p[i] = static_cast<std::size_t>(std::find(names.begin(), names.end(), target) - names.begin());
        }
        return p;
    }();
    return perm;
}

FeatureVector extract_features(const PairInstance& d) {
    if (d.size() < 2) throw ValidationError("instance " + d.id + ": feature extraction needs at least 2 observations");
    if (d.x.size() != d.y.size()) throw ValidationError("instance " + d.id + ": x and y lengths differ");
    const auto bx = discretize(d.x, kFeatureBins, d.x_kind);
    const auto by = discretize(d.y, kFeatureBins, d.y_kind);
    const Moments mx = moments(d.x), my = moments(d.y);
    const auto rx = average_ranks(d.x), ry = average_ranks(d.y);
    const double hx = normalized_entropy(bx), hy = normalized_entropy(by);
    const double mi = symmetric_mi(bx, by);
    const double hmin = std::min(hx, hy) * std::log(double(kFeatureBins));
    const Directional yx = directional(d.x, bx, d.y, by);
    const Directional xy = directional(d.y, by, d.x, bx);

    const auto is = [](AttributeKind k, AttributeKind want) { return k == want ? 1.0 : 0.0; };
    std::vector<double> v = {
        std::log(static_cast<double>(d.size())),
        is(d.x_kind, AttributeKind::Numerical), is(d.x_kind, AttributeKind::Binary),
        is(d.y_kind, AttributeKind::Numerical), is(d.y_kind, AttributeKind::Binary),
        mx.mean, mx.std, mx.skew, mx.kurt,
        my.mean, my.std, my.skew, my.kurt,
        unique_ratio(d.x), unique_ratio(d.y),
        hx, hy,
        pearson(d.x, d.y), pearson(rx, ry), mi, hmin > 0 ? std::min(1.0, mi / hmin) : 0.0,
        yx.cond.std_mean, xy.cond.std_mean,
        yx.cond.std_spread, xy.cond.std_spread,
        yx.cond.entropy_spread, xy.cond.entropy_spread,
        yx.cond.corr_ratio, xy.cond.corr_ratio,
        yx.lin.slope, xy.lin.slope,
        yx.lin.resid_var, xy.lin.resid_var,
        yx.poly_resid_frac, xy.poly_resid_frac,
        yx.resid_dependence, xy.resid_dependence,
        yx.resid_kurtosis, xy.resid_kurtosis,
        yx.heteroscedasticity, xy.heteroscedasticity,
        yx.igci, xy.igci,
    };
    for (auto& a : v)
        if (!std::isfinite(a)) a = 0.0;
    return {std::move(v)};
}

std::vector<FeatureVector> extract_all(const std::vector<PairInstance>& instances) {
    std::vector<FeatureVector> out(instances.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(instances.size()); ++i) out[i] = extract_features(instances[i]);
    return out;
}

std::string format_feature_matrix(const std::vector<PairInstance>& instances,
                                  const std::vector<FeatureVector>& features) {
    std::string out = "id";
    for (const auto& n : feature_names()) out += ',' + n;
    out += '\n';
    for (std::size_t i = 0; i < instances.size(); ++i) {
        out += instances[i].id;
        for (double v : features[i].values) out += ',' + text::format_double(v);
        out += '\n';
    }
    return out;
}

}  // namespace cpb
