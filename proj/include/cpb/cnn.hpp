#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cpb/network.hpp"
#include "cpb/prob.hpp"
#include "cpb/raster.hpp"

namespace cpb {

/// Filters per convolution, two per stage.
using ChannelPlan = std::array<std::pair<std::size_t, std::size_t>, 5>;

inline constexpr ChannelPlan kDefaultChannelPlan{{{32, 32}, {64, 64}, {128, 128}, {256, 256}, {256, 256}}};

/// Five stages of (conv 3x3 + ReLU) x 2 then 2x2 max-pool, followed by dense
/// 1024 -> ReLU -> 512 -> ReLU -> 25 -> 3 -> softmax.
struct CnnArchitecture {
    int input_side = 200;
    ChannelPlan stages = kDefaultChannelPlan;
    std::array<std::size_t, 3> dense_units{1024, 512, 25};
    std::size_t output_units = 3;

    /// Spatial side after each of the five poolings.
    std::array<int, 5> stage_sides() const;
    std::size_t flatten_length() const;
    std::vector<LayerSpec> layer_specs() const;
    bool operator==(const CnnArchitecture&) const = default;
};

/// Throws ConfigError when input_side < 32 or a channel count is zero.
CnnArchitecture build_cnn_arch(int input_side, const ChannelPlan& plan = kDefaultChannelPlan);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 0.003;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    /// Fixed reduction order over the batch; off lets samples run on separate threads.
    bool deterministic = true;
};

struct LabeledImage {
    ScatterImage image;
    int label = 0;  ///< 1, 0 or -1
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;      ///< mean cross-entropy over the epoch's updates
    double train_accuracy = 0.0;  ///< accuracy of the pre-update predictions seen during the epoch
    double val_accuracy = 0.0;
};

struct CnnModel {
    CnnArchitecture arch;
    TrainConfig config;
    Network network;
    std::uint64_t data_checksum = 0;
    int best_epoch = 0;
    std::vector<EpochMetrics> history;

    std::string serialize() const;
    static CnnModel deserialize(std::string_view bytes);
};

/// Pixel darkness scaled to [0, 1] as a [1, m, m] tensor.
Tensor image_to_tensor(const ScatterImage& image);

/// Checksum of image pixels and labels in order.
std::uint64_t image_data_checksum(const std::vector<LabeledImage>& data);

/// Fresh model with initialized weights (no training).
CnnModel make_cnn(const CnnArchitecture& arch, const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch momentum SGD on mean cross-entropy. Returns the parameters from the
/// epoch with the best validation accuracy (earliest on ties; last epoch when val is empty).
CnnModel train_cnn(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& val,
                   const CnnArchitecture& arch, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

ProbTriple predict_cnn(const CnnModel& model, const ScatterImage& image);

/// Fraction of images whose argmax class matches the label.
double cnn_accuracy(const CnnModel& model, const std::vector<LabeledImage>& data);

}  // namespace cpb
