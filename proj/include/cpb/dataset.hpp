#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cpb {

enum class AttributeKind { Numerical, Categorical, Binary };

std::string_view kind_token(AttributeKind kind);       // "num" | "cat" | "bin"
AttributeKind parse_kind_token(std::string_view token);  // throws ValidationError

/// One labeled attribute pair. label: 1 for x -> y, -1 for y -> x, 0 otherwise.
struct PairInstance {
    std::string id;
    std::vector<double> x;
    std::vector<double> y;
    AttributeKind x_kind = AttributeKind::Numerical;
    AttributeKind y_kind = AttributeKind::Numerical;
    int label = 0;

    std::size_t size() const noexcept { return x.size(); }
    bool operator==(const PairInstance&) const = default;
};

/// Throws ValidationError when an instance breaks the PairInstance invariants.
void validate(const PairInstance& instance);

/// Parses the three challenge-style texts. `*_name` are used in error messages.
///
/// Categorical values are re-coded 0, 1, 2, ... in order of first appearance
/// within each attribute; binary values must already be 0 or 1.
std::vector<PairInstance> parse_pairs(std::string_view pairs_text, std::string_view info_text,
                                      std::string_view target_text,
                                      const std::string& pairs_name = "pairs",
                                      const std::string& info_name = "info",
                                      const std::string& target_name = "target");

struct PairFiles {
    std::filesystem::path pairs;
    std::filesystem::path info;
    std::filesystem::path target;
};

std::vector<PairInstance> read_pairs(const PairFiles& files);

/// Writes instances in the same three-file layout parse_pairs reads.
void write_pairs(const std::vector<PairInstance>& instances, const PairFiles& files);

/// Row text helpers used by write_pairs (shortest round-trip formatting).
std::string format_pairs_text(const std::vector<PairInstance>& instances);
std::string format_info_text(const std::vector<PairInstance>& instances);
std::string format_target_text(const std::vector<PairInstance>& instances);

struct SplitSpec {
    double train_frac = 0.70;
    double val_frac = 0.15;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<PairInstance> train;
    std::vector<PairInstance> validation;
    std::vector<PairInstance> test;
};

/// Seeded Fisher-Yates permutation of indices [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Deterministic partition: floor(train_frac n), floor(val_frac n), remainder.
Split split(const std::vector<PairInstance>& instances, const SplitSpec& spec);

inline constexpr std::string_view kSwapSuffix = ":swap";

/// x and y exchanged, kinds exchanged, label negated.
PairInstance augment_swap(const PairInstance& instance);

/// Each original followed by its swap.
std::vector<PairInstance> augment_all(const std::vector<PairInstance>& instances);

}  // namespace cpb
