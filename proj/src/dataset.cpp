#include "cpb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "cpb/error.hpp"
#include "cpb/rng.hpp"
#include "io.hpp"
#include "text.hpp"

namespace cpb {

std::string_view kind_token(AttributeKind kind) {
    switch (kind) {
        case AttributeKind::Numerical: return "num";
        case AttributeKind::Categorical: return "cat";
        case AttributeKind::Binary: return "bin";
    }
    return "num";
}

AttributeKind parse_kind_token(std::string_view token) {
    token = text::trim(token);
    if (token == "num") return AttributeKind::Numerical;
    if (token == "cat") return AttributeKind::Categorical;
    if (token == "bin") return AttributeKind::Binary;
    throw ValidationError("unknown attribute kind '" + std::string(token) + "' (expected num, cat or bin)");
}

namespace {

void validate_values(const std::vector<double>& v, AttributeKind kind, const std::string& id, char axis) {
    for (double value : v) {
        if (!std::isfinite(value))
            throw ValidationError("instance " + id + ": non-finite value in " + axis);
        if (kind == AttributeKind::Binary && value != 0.0 && value != 1.0)
            throw ValidationError("instance " + id + ": binary attribute " + axis +
                                  " has value " + text::format_double(value) + " (expected 0 or 1)");
        if (kind == AttributeKind::Categorical && (value < 0.0 || value != std::floor(value)))
            throw ValidationError("instance " + id + ": categorical attribute " + axis +
                                  " has non-integer code " + text::format_double(value));
    }
}

// First-appearance re-coding; the result is the identity on already coded data.
void recode_categorical(std::vector<double>& v) {
    std::unordered_map<double, double> codes;
    for (double& value : v) {
        auto [it, inserted] = codes.try_emplace(value, static_cast<double>(codes.size()));
        value = it->second;
    }
}

bool is_header(std::string_view first_field) {
    return text::iequals(text::trim(first_field), "SampleID") || text::iequals(text::trim(first_field), "id");
}

std::vector<double> parse_values(std::string_view field, const std::string& file, std::size_t line) {
    std::vector<double> out;
    for (auto tok : text::split_ws(text::trim(field))) {
        auto v = text::parse_double(tok);
        if (!v) throw ParseError(file, line, "invalid number '" + std::string(tok) + "'");
        out.push_back(*v);
    }
    return out;
}

}  // namespace

void validate(const PairInstance& d) {
    if (d.x.empty() || d.y.empty()) throw ValidationError("instance " + d.id + ": empty observation vector");
    if (d.x.size() != d.y.size())
        throw ValidationError("instance " + d.id + ": x has " + std::to_string(d.x.size()) +
                              " observations but y has " + std::to_string(d.y.size()));
    if (d.label < -1 || d.label > 1)
        throw ValidationError("instance " + d.id + ": label " + std::to_string(d.label) + " not in {1,0,-1}");
    validate_values(d.x, d.x_kind, d.id, 'x');
    validate_values(d.y, d.y_kind, d.id, 'y');
}

std::vector<PairInstance> parse_pairs(std::string_view pairs_text, std::string_view info_text,
                                      std::string_view target_text, const std::string& pairs_name,
                                      const std::string& info_name, const std::string& target_name) {
    struct Info {
        AttributeKind a, b;
    };
    std::map<std::string, Info, std::less<>> info;
    {
        const auto rows = text::lines(info_text);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (text::trim(rows[i]).empty()) continue;
            const auto f = text::split(rows[i], ',');
            if (i == 0 && is_header(f[0])) continue;
            if (f.size() != 3) throw ParseError(info_name, i + 1, "expected 'id,kindA,kindB'");
            std::string id(text::trim(f[0]));
            if (id.empty()) throw ParseError(info_name, i + 1, "empty id");
            try {
                Info entry{parse_kind_token(f[1]), parse_kind_token(f[2])};
                if (!info.emplace(id, entry).second) throw ParseError(info_name, i + 1, "duplicate id " + id);
            } catch (const ValidationError& e) {
                throw ParseError(info_name, i + 1, e.what());
            }
        }
    }

    std::map<std::string, int, std::less<>> target;
    {
        const auto rows = text::lines(target_text);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (text::trim(rows[i]).empty()) continue;
            const auto f = text::split(rows[i], ',');
            if (i == 0 && is_header(f[0])) continue;
            if (f.size() < 2) throw ParseError(target_name, i + 1, "expected 'id,label'");
            std::string id(text::trim(f[0]));
            auto label = text::parse_int(f[1]);
            if (!label || *label < -1 || *label > 1)
                throw ParseError(target_name, i + 1, "label must be 1, 0 or -1");
            if (!target.emplace(id, static_cast<int>(*label)).second)
                throw ParseError(target_name, i + 1, "duplicate id " + id);
        }
    }

    std::vector<PairInstance> out;
    std::map<std::string, bool, std::less<>> seen;
    const auto rows = text::lines(pairs_text);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        const auto f = text::split(rows[i], ',');
        if (i == 0 && is_header(f[0])) continue;
        if (f.size() != 3) throw ParseError(pairs_name, i + 1, "expected 'id, x values, y values'");
        PairInstance d;
        d.id = std::string(text::trim(f[0]));
        if (d.id.empty()) throw ParseError(pairs_name, i + 1, "empty id");
        if (!seen.emplace(d.id, true).second) throw ParseError(pairs_name, i + 1, "duplicate id " + d.id);
        d.x = parse_values(f[1], pairs_name, i + 1);
        d.y = parse_values(f[2], pairs_name, i + 1);

        const auto in = info.find(d.id);
        if (in == info.end()) throw ConsistencyError("id " + d.id + " has no row in " + info_name);
        const auto tg = target.find(d.id);
        if (tg == target.end()) throw ConsistencyError("id " + d.id + " has no row in " + target_name);
        d.x_kind = in->second.a;
        d.y_kind = in->second.b;
        d.label = tg->second;
        if (d.x_kind == AttributeKind::Categorical) recode_categorical(d.x);
        if (d.y_kind == AttributeKind::Categorical) recode_categorical(d.y);
        try {
            validate(d);
        } catch (const ValidationError& e) {
            throw ValidationError(pairs_name + ":" + std::to_string(i + 1) + ": " + e.what());
        }
        out.push_back(std::move(d));
    }
    for (const auto& [id, _] : info)
        if (!seen.contains(id)) throw ConsistencyError("id " + id + " in " + info_name + " has no row in " + pairs_name);
    for (const auto& [id, _] : target)
        if (!seen.contains(id))
            throw ConsistencyError("id " + id + " in " + target_name + " has no row in " + pairs_name);
    return out;
}

std::vector<PairInstance> read_pairs(const PairFiles& files) {
    // A missing member of the three-file set is a consistency problem, not an I/O one.
    for (const auto* path : {&files.pairs, &files.info, &files.target})
        if (!std::filesystem::exists(*path)) throw ConsistencyError("missing input file " + path->string());
    return parse_pairs(io::read_file(files.pairs), io::read_file(files.info), io::read_file(files.target),
                       files.pairs.string(), files.info.string(), files.target.string());
}

std::string format_pairs_text(const std::vector<PairInstance>& instances) {
    std::string out = "SampleID,A,B\n";
    const auto append_values = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ' ';
            out += text::format_double(v[i]);
        }
    };
    for (const auto& d : instances) {
        out += d.id;
        out += ',';
        append_values(d.x);
        out += ',';
        append_values(d.y);
        out += '\n';
    }
    return out;
}

std::string format_info_text(const std::vector<PairInstance>& instances) {
    std::string out = "SampleID,A type,B type\n";
    for (const auto& d : instances) {
        out += d.id + ',';
        out += kind_token(d.x_kind);
        out += ',';
        out += kind_token(d.y_kind);
        out += '\n';
    }
    return out;
}

std::string format_target_text(const std::vector<PairInstance>& instances) {
    std::string out = "SampleID,Target\n";
    for (const auto& d : instances) out += d.id + ',' + std::to_string(d.label) + '\n';
    return out;
}

void write_pairs(const std::vector<PairInstance>& instances, const PairFiles& files) {
    io::write_file(files.pairs, format_pairs_text(instances));
    io::write_file(files.info, format_info_text(instances));
    io::write_file(files.target, format_target_text(instances));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Split split(const std::vector<PairInstance>& instances, const SplitSpec& spec) {
    if (!(spec.train_frac > 0.0) || !(spec.val_frac > 0.0) || !(spec.train_frac + spec.val_frac < 1.0))
        throw ConfigError("split fractions must satisfy 0 < train, 0 < val, train + val < 1");
    if (instances.empty()) throw ConfigError("cannot split an empty instance list");
    const std::size_t n = instances.size();
    // The 1e-9 nudge keeps e.g. 0.7 * 10 from flooring to 6 through representation error.
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(n) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(n) + 1e-9));
    const auto order = shuffled_indices(n, spec.seed);
    Split out;
    out.train.reserve(n_train);
    out.validation.reserve(n_val);
    out.test.reserve(n - n_train - n_val);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = instances[order[i]];
        if (i < n_train)
            out.train.push_back(d);
        else if (i < n_train + n_val)
            out.validation.push_back(d);
        else
            out.test.push_back(d);
    }
    return out;
}

PairInstance augment_swap(const PairInstance& d) {
    PairInstance s;
    s.id = d.id + std::string(kSwapSuffix);
    s.x = d.y;
    s.y = d.x;
    s.x_kind = d.y_kind;
    s.y_kind = d.x_kind;
    s.label = -d.label;
    return s;
}

std::vector<PairInstance> augment_all(const std::vector<PairInstance>& instances) {
    std::vector<PairInstance> out;
    out.reserve(2 * instances.size());
    for (const auto& d : instances) {
        out.push_back(d);
        out.push_back(augment_swap(d));
    }
    return out;
}

}  // namespace cpb
