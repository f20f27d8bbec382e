#pragma once

// Reproducible command pipelines behind the `cpb` CLI.
//
// Output directory layout (relative to --out):
//   manifests/{train,val,test}.txt   one instance id per line
//   manifests/summary.txt            sizes and input checksums
//   images/<id>.pgm                  scatter images
//   models/{cnn,gbc}.bin             trained models
//   reports/...                      training logs, predictions, metric reports
//   runs/<command>/run.meta          every parameter, seed and input checksum of the run

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpb/cnn.hpp"
#include "cpb/dataset.hpp"
#include "cpb/ensemble.hpp"
#include "cpb/gbc.hpp"
#include "cpb/synth.hpp"

namespace cpb {

namespace fs = std::filesystem;

/// Ordered key=value record; `command` is stored under the key "command".
class RunMeta {
public:
    void set(const std::string& key, const std::string& value);
    std::optional<std::string> get(const std::string& key) const;
    std::string require(const std::string& key) const;  // ConfigError when missing
    std::string format() const;
    static RunMeta parse(std::string_view text, const std::string& name = "run.meta");
    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Messages for the user (warnings, progress). Defaults to stderr.
using Logger = std::function<void(const std::string&)>;
void set_logger(Logger logger);
void log_message(const std::string& message);

std::string file_checksum(const fs::path& path);  // hex FNV-1a of the file bytes

struct ManifestSet {
    std::vector<std::string> train, validation, test;
};

ManifestSet read_manifests(const fs::path& out_dir);

/// Subset of `instances` with the given ids, in manifest order.
std::vector<PairInstance> select(const std::vector<PairInstance>& instances, const std::vector<std::string>& ids);

// ---- ingest ------------------------------------------------------------------

struct IngestParams {
    PairFiles files;
    fs::path out;
    SplitSpec split;
};
ManifestSet cmd_ingest(const IngestParams& p);

// ---- rasterize ---------------------------------------------------------------

struct RasterizeParams {
    PairFiles files;
    fs::path out;
    int side = 200;
};
/// One greymap per manifest instance; returns the number written.
std::size_t cmd_rasterize(const RasterizeParams& p);

/// File name used for an instance image (path separators and spaces replaced).
std::string image_file_name(const std::string& id);

// ---- train -------------------------------------------------------------------

enum class ModelKind { Cnn, Gbc };
std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);
ModelKind detect_model_kind(const fs::path& model_file);

struct TrainParams {
    ModelKind kind = ModelKind::Cnn;
    PairFiles files;
    fs::path out;
    bool augment = false;
    int side = 200;
    ChannelPlan channels = kDefaultChannelPlan;
    TrainConfig cnn;
    GbcConfig gbc;
    std::optional<fs::path> model_path;  ///< default models/<kind>.bin under out
};

struct TrainSummary {
    fs::path model_path;
    std::size_t train_count = 0;      ///< after augmentation
    std::size_t original_count = 0;   ///< manifest size
};
TrainSummary cmd_train(const TrainParams& p);

// ---- evaluate ----------------------------------------------------------------

struct EvaluateParams {
    PairFiles files;
    fs::path out;
    fs::path model;
    std::optional<fs::path> model2;
    std::optional<double> weight;  ///< unset with two models means tune on validation
    TuneMetric tune_metric = TuneMetric::Auc;
    bool neutral_as_negative = true;
    int side_override = 0;  ///< unused unless a CNN model needs a different raster side
};
EvalReport cmd_evaluate(const EvaluateParams& p);

// ---- sparse sweep ------------------------------------------------------------

struct SparseSweepParams {
    std::optional<PairFiles> files;  ///< corpus; unset means a synthetic benchmark
    BenchmarkSpec benchmark{.count = 1000, .min_obs = 1000, .max_obs = 1000};
    fs::path out;
    std::vector<int> obs_counts{100, 200, 500, 1000};
    SplitSpec split;
    bool augment = true;
    int side = 64;
    ChannelPlan channels = kDefaultChannelPlan;
    TrainConfig cnn;
    GbcConfig gbc;
    std::uint64_t seed = 0;  ///< subsampling seed
};

struct SweepRow {
    int obs = 0;
    double cnn_accuracy = 0, cnn_auc = 0, gbc_accuracy = 0, gbc_auc = 0;
    std::size_t clamped = 0;  ///< instances with fewer observations than `obs`
};
std::vector<SweepRow> cmd_sparse_sweep(const SparseSweepParams& p);
std::string format_sweep_table(const std::vector<SweepRow>& rows);

/// Keeps `count` observations chosen without replacement (original order kept);
/// instances with fewer observations are returned unchanged and flagged.
PairInstance subsample(const PairInstance& d, int count, std::uint64_t seed, bool* clamped = nullptr);

// ---- synth / features --------------------------------------------------------

struct SynthParams {
    BenchmarkSpec benchmark;
    fs::path out;
    double categorical_fraction = 0.0;  ///< share of instances discretized into categorical/binary pairs
};
/// Writes out/data/{pairs,info,target}.csv; returns the file set.
PairFiles cmd_synth(const SynthParams& p);

struct FeaturesParams {
    PairFiles files;
    fs::path out;
};
fs::path cmd_features(const FeaturesParams& p);

/// Re-executes the command recorded in a run.meta file.
void cmd_rerun(const fs::path& meta_file);

// Shared conversions used by the commands and tests.
std::vector<LabeledImage> rasterize_all(const std::vector<PairInstance>& instances, int side);
std::vector<ProbTriple> predict_all(const CnnModel& model, const std::vector<PairInstance>& instances);
std::vector<ProbTriple> predict_all(const BoostedModel& model, const std::vector<PairInstance>& instances);
std::vector<int> labels_of(const std::vector<PairInstance>& instances);

/// "32x32,64x64,128x128,256x256,256x256" style plans.
ChannelPlan parse_channel_plan(const std::string& s);
std::string format_channel_plan(const ChannelPlan& plan);
/// Comma-separated observation counts.
std::vector<int> parse_obs_counts(const std::string& s);

}  // namespace cpb
