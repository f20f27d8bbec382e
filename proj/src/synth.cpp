#include "cpb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <unordered_map>

#include "cpb/error.hpp"
#include "cpb/raster.hpp"
#include "cpb/rng.hpp"

namespace cpb {

std::string to_string(Mechanism m) {
    switch (m) {
        case Mechanism::AdditiveNoiseNonlinear: return "anm";
        case Mechanism::LinearNonGaussian: return "linear_nongaussian";
        case Mechanism::Independent: return "independent";
        case Mechanism::CommonCause: return "common_cause";
    }
    return "?";
}

void GenSpec::validate() const {
    if (n_obs < 2) throw ConfigError("n_obs must be >= 2");
    if (!(noise_scale > 0.0)) throw ConfigError("noise_scale must be > 0");
}

namespace {

void standardize(std::vector<double>& v) {
    double m = 0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double a : v) s += (a - m) * (a - m);
    s = std::sqrt(s / static_cast<double>(v.size()));
    for (double& a : v) a = s > 0 ? (a - m) / s : 0.0;
}

// Mixture of 1-3 normal / uniform / Laplace components.
std::vector<double> mixture_source(Rng& rng, int n) {
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    struct Component {
        double mean, scale, weight;
        int shape;
    };
    std::vector<Component> comps(k);
    double total = 0;
    for (auto& c : comps) {
        c.mean = rng.uniform(-2.0, 2.0);
        c.scale = rng.uniform(0.3, 1.2);
        c.weight = rng.uniform(0.2, 1.0);
        c.shape = static_cast<int>(rng.uniform_int(3));
        total += c.weight;
    }
    std::vector<double> v(n);
    for (auto& a : v) {
        double u = rng.uniform() * total;
        std::size_t j = 0;
        while (j + 1 < comps.size() && u >= comps[j].weight) u -= comps[j++].weight;
        const auto& c = comps[j];
        double z = 0;
        switch (c.shape) {
            case 0: z = rng.normal(); break;
            case 1: z = rng.uniform(-std::sqrt(3.0), std::sqrt(3.0)); break;
            default: z = rng.laplace() / std::numbers::sqrt2; break;
        }
        a = c.mean + c.scale * z;
    }
    return v;
}

// Unit-variance non-Gaussian noise: uniform, Laplace, or a centred exponential
// whose skew direction is drawn once per instance.
std::vector<double> noise(Rng& rng, int n) {
    const int family = static_cast<int>(rng.uniform_int(3));
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    std::vector<double> v(n);
    for (auto& a : v) {
        switch (family) {
            case 0: a = rng.uniform(-std::sqrt(3.0), std::sqrt(3.0)); break;
            case 1: a = rng.laplace() / std::numbers::sqrt2; break;
            default: {
                double u = rng.uniform();
                while (u <= 0.0) u = rng.uniform();
                a = sign * (-std::log(u) - 1.0);
            }
        }
    }
    return v;
}

struct Function {
    FunctionFamily family;
    double p[4];
    double operator()(double x) const {
        switch (family) {
            case FunctionFamily::Polynomial: return x * (p[0] + x * (p[1] + x * p[2]));
            case FunctionFamily::Sigmoid: return p[0] * std::tanh(p[1] * (x - p[2]));
            default: return std::sin(p[0] * x + p[1]);
        }
    }
};

Function draw_function(Rng& rng, FunctionFamily family) {
    if (family == FunctionFamily::Any) family = static_cast<FunctionFamily>(1 + rng.uniform_int(3));
    Function f{family, {0, 0, 0, 0}};
    switch (family) {
        case FunctionFamily::Polynomial: {
            const int degree = 1 + static_cast<int>(rng.uniform_int(3));
            for (int j = 0; j < degree; ++j) f.p[j] = rng.uniform(-1.0, 1.0);
            // Keep the leading coefficient away from zero.
            double& lead = f.p[degree - 1];
            lead = (lead < 0 ? -1.0 : 1.0) * (0.3 + 0.7 * std::abs(lead));
            break;
        }
        case FunctionFamily::Sigmoid:
            f.p[0] = rng.bernoulli(0.5) ? 1.0 : -1.0;
            f.p[1] = rng.uniform(0.5, 3.0);
            f.p[2] = rng.uniform(-1.0, 1.0);
            break;
        default:
            f.p[0] = rng.uniform(1.0, 3.0);
            f.p[1] = rng.uniform(0.0, 2.0 * std::numbers::pi);
            break;
    }
    return f;
}

std::vector<double> evaluate_standardized(const Function& f, const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    standardize(y);
    return y;
}

}  // namespace

PairInstance generate(const GenSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const bool coin = rng.bernoulli(0.5);
    const bool swap = spec.force_swap.value_or(coin);
    const int n = spec.n_obs;

    PairInstance d;
    d.id = spec.id;
    switch (spec.mechanism) {
        case Mechanism::AdditiveNoiseNonlinear: {
            d.x = mixture_source(rng, n);
            standardize(d.x);
            const auto f = draw_function(rng, spec.family);
            d.y = evaluate_standardized(f, d.x);
            const auto e = noise(rng, n);
            for (int i = 0; i < n; ++i) d.y[i] += spec.noise_scale * e[i];
            d.label = 1;
            break;
        }
        case Mechanism::LinearNonGaussian: {
            d.x = mixture_source(rng, n);
            standardize(d.x);
            const double a = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.5, 2.0);
            const auto e = noise(rng, n);
            d.y.resize(n);
            for (int i = 0; i < n; ++i) d.y[i] = a * d.x[i] + std::abs(a) * spec.noise_scale * e[i];
            d.label = 1;
            break;
        }
        case Mechanism::Independent:
            d.x = mixture_source(rng, n);
            d.y = mixture_source(rng, n);
            d.label = 0;
            break;
        case Mechanism::CommonCause: {
            auto z = mixture_source(rng, n);
            standardize(z);
            const auto g = draw_function(rng, spec.family);
            const auto h = draw_function(rng, spec.family);
            d.x = evaluate_standardized(g, z);
            d.y = evaluate_standardized(h, z);
            const auto ex = noise(rng, n);
            const auto ey = noise(rng, n);
            for (int i = 0; i < n; ++i) {
                d.x[i] += spec.noise_scale * ex[i];
                d.y[i] += spec.noise_scale * ey[i];
            }
            d.label = 0;
            break;
        }
    }
    standardize(d.x);
    standardize(d.y);
    if (swap) {
        std::swap(d.x, d.y);
        d.label = -d.label;
    }
    return d;
}

std::array<int, 4> allocate_mix(int count, const MechanismMix& mix) {
    double sum = 0;
    for (double f : mix) {
        if (f < 0) throw ConfigError("mechanism fractions must be non-negative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("mechanism fractions must sum to 1");
    std::array<int, 4> counts{};
    std::array<double, 4> remainder{};
    int assigned = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double exact = mix[i] * count;
        counts[i] = static_cast<int>(std::floor(exact + 1e-9));
        remainder[i] = exact - counts[i];
        assigned += counts[i];
    }
    while (assigned < count) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 4; ++i)
            if (remainder[i] > remainder[best]) best = i;
        ++counts[best];
        remainder[best] = -1.0;
        ++assigned;
    }
    return counts;
}

std::vector<Mechanism> benchmark_mechanisms(const BenchmarkSpec& spec) {
    if (spec.count < 1) throw ConfigError("benchmark count must be >= 1");
    const auto counts = allocate_mix(spec.count, spec.mix);
    std::vector<Mechanism> ordered;
    for (std::size_t m = 0; m < 4; ++m) ordered.insert(ordered.end(), counts[m], kMechanisms[m]);
    const auto perm = shuffled_indices(ordered.size(), derive_seed(spec.seed, std::string_view("order")));
    std::vector<Mechanism> out(ordered.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out[i] = ordered[perm[i]];
    return out;
}

std::vector<PairInstance> generate_benchmark(const BenchmarkSpec& spec) {
    if (spec.min_obs < 2 || spec.max_obs < spec.min_obs) throw ConfigError("observation range must satisfy 2 <= min <= max");
    if (!(spec.min_noise > 0) || spec.max_noise < spec.min_noise) throw ConfigError("noise range must satisfy 0 < min <= max");
    const auto mechanisms = benchmark_mechanisms(spec);
    std::vector<PairInstance> out(mechanisms.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(mechanisms.size()); ++i) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
        GenSpec g;
        g.mechanism = mechanisms[i];
        g.n_obs = spec.min_obs + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.max_obs - spec.min_obs + 1)));
        g.noise_scale = rng.uniform(spec.min_noise, spec.max_noise);
        g.seed = rng.next_u64();
        char id[32];
        std::snprintf(id, sizeof id, "syn%05ld", i);
        g.id = id;
        out[i] = generate(g);
    }
    return out;
}

PairInstance discretize_instance(const PairInstance& d, int k_x, int k_y) {
    PairInstance out = d;
    const auto convert = [](std::vector<double>& v, AttributeKind& kind, int k) {
        if (k <= 0 || kind != AttributeKind::Numerical) return;
        if (k < 2) throw ConfigError("discretization needs at least 2 levels");
        const auto bins = discretize(v, k);
        std::unordered_map<int, double> codes;
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto [it, inserted] = codes.try_emplace(bins[i], static_cast<double>(codes.size()));
            v[i] = it->second;
        }
        kind = k == 2 ? AttributeKind::Binary : AttributeKind::Categorical;
    };
    convert(out.x, out.x_kind, k_x);
    convert(out.y, out.y_kind, k_y);
    return out;
}

}  // namespace cpb
