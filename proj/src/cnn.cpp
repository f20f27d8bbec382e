#include "cpb/cnn.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>
#include <omp.h>

#include "binio.hpp"
#include "cpb/dataset.hpp"
#include "cpb/ensemble.hpp"
#include "cpb/error.hpp"
#include "cpb/rng.hpp"

namespace cpb {

using nlohmann::json;

namespace {

constexpr std::string_view kModelMagic = "CPBM";
constexpr std::uint32_t kModelVersion = 1;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::array<int, 5> CnnArchitecture::stage_sides() const {
    std::array<int, 5> sides{};
    int s = input_side;
    for (auto& side : sides) side = s = s / 2;
    return sides;
}

std::size_t CnnArchitecture::flatten_length() const {
    const auto last = static_cast<std::size_t>(stage_sides().back());
    return last * last * stages.back().second;
}

std::vector<LayerSpec> CnnArchitecture::layer_specs() const {
    std::vector<LayerSpec> specs;
    for (const auto& [a, b] : stages) {
        specs.emplace_back(layer::Conv{a});
        specs.emplace_back(layer::Relu{});
        specs.emplace_back(layer::Conv{b});
        specs.emplace_back(layer::Relu{});
        specs.emplace_back(layer::MaxPool{});
    }
    specs.emplace_back(layer::Dense{dense_units[0]});
    specs.emplace_back(layer::Relu{});
    specs.emplace_back(layer::Dense{dense_units[1]});
    specs.emplace_back(layer::Relu{});
    specs.emplace_back(layer::Dense{dense_units[2]});
    specs.emplace_back(layer::Dense{output_units});
    specs.emplace_back(layer::Softmax{});
    return specs;
}

CnnArchitecture build_cnn_arch(int input_side, const ChannelPlan& plan) {
    if (input_side < 32)
        throw ConfigError("input side " + std::to_string(input_side) + " too small: five poolings need >= 32");
    for (const auto& [a, b] : plan)
        if (a == 0 || b == 0) throw ConfigError("channel counts must be positive");
    CnnArchitecture arch;
    arch.input_side = input_side;
    arch.stages = plan;
    return arch;
}

Tensor image_to_tensor(const ScatterImage& image) {
    const auto m = static_cast<std::size_t>(image.side());
    Tensor t({1, m, m});
    const auto px = image.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) t[i] = static_cast<double>(px[i]) / 255.0;
    return t;
}

std::uint64_t image_data_checksum(const std::vector<LabeledImage>& data) {
    std::uint64_t h = fnv1a64("");
    for (const auto& d : data) {
        const auto px = d.image.pixels();
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(px.data()), px.size()), h);
        const char label = static_cast<char>(d.label);
        h = fnv1a64(std::string_view(&label, 1), h);
    }
    return h;
}

CnnModel make_cnn(const CnnArchitecture& arch, const TrainConfig& cfg) {
    CnnModel model;
    model.arch = arch;
    model.config = cfg;
    const auto side = static_cast<std::size_t>(arch.input_side);
    model.network = Network({1, side, side}, arch.layer_specs(), derive_seed(cfg.seed, std::string_view("init")));
    return model;
}

double cnn_accuracy(const CnnModel& model, const std::vector<LabeledImage>& data) {
    if (data.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& d : data)
        if (predict_class(predict_cnn(model, d.image)) == d.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

CnnModel train_cnn(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& val,
                   const CnnArchitecture& arch, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (train.empty()) throw ConfigError("train_cnn: empty training set");
    if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("train_cnn: epochs and batch size must be >= 1");
    for (const auto* set : {&train, &val})
        for (const auto& d : *set)
            if (d.image.side() != arch.input_side)
                throw ShapeError("image side " + std::to_string(d.image.side()) + " does not match architecture input " +
                                 std::to_string(arch.input_side));

    CnnModel model = make_cnn(arch, cfg);
    model.data_checksum = image_data_checksum(train);
    SgdOptimizer sgd(model.network, cfg.learning_rate, cfg.momentum);

    std::vector<Tensor> inputs;
    inputs.reserve(train.size());
    for (const auto& d : train) inputs.push_back(image_to_tensor(d.image));

    Network best = model.network;
    double best_val = -1.0;
    Gradients grads = model.network.zero_gradients();
    const std::size_t n = train.size();
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(n, derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
            const std::size_t stop = std::min(n, start + batch);
            grads.zero();
            double batch_loss = 0.0;
            std::size_t batch_correct = 0;
            if (cfg.deterministic) {
                for (std::size_t s = start; s < stop; ++s) {
                    const auto idx = order[s];
                    const auto cls = label_to_class(train[idx].label);
                    const auto trace = model.network.forward(inputs[idx]);
                    const auto& p = trace.activations.back();
                    batch_loss += cross_entropy(p.data(), cls);
                    if (label_to_class(predict_class(triple_from_classes(p.data()))) == cls) ++batch_correct;
                    model.network.backward(trace, cls, grads);
                }
            } else {
#pragma omp parallel reduction(+ : batch_loss, batch_correct)
                {
                    Gradients local = model.network.zero_gradients();
#pragma omp for schedule(dynamic)
                    for (long s = static_cast<long>(start); s < static_cast<long>(stop); ++s) {
                        const auto idx = order[s];
                        const auto cls = label_to_class(train[idx].label);
                        const auto trace = model.network.forward(inputs[idx]);
                        const auto& p = trace.activations.back();
                        batch_loss += cross_entropy(p.data(), cls);
                        if (label_to_class(predict_class(triple_from_classes(p.data()))) == cls) ++batch_correct;
                        model.network.backward(trace, cls, local);
                    }
#pragma omp critical
                    grads.add(local);
                }
            }
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            grads.scale(1.0 / static_cast<double>(stop - start));
            sgd.step(model.network, grads);
            loss_sum += batch_loss;
            correct += batch_correct;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = loss_sum / static_cast<double>(n);
        m.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
        m.val_accuracy = val.empty() ? 0.0 : cnn_accuracy(model, val);
        model.history.push_back(m);
        if (on_epoch) on_epoch(m);
        if (val.empty() || m.val_accuracy > best_val) {
            best_val = m.val_accuracy;
            best = model.network;
            model.best_epoch = epoch;
        }
    }
    model.network = std::move(best);
    return model;
}

ProbTriple predict_cnn(const CnnModel& model, const ScatterImage& image) {
    if (image.side() != model.arch.input_side)
        throw ShapeError("image side " + std::to_string(image.side()) + " does not match model input " +
                         std::to_string(model.arch.input_side));
    return triple_from_classes(model.network.predict(image_to_tensor(image)));
}

std::string CnnModel::serialize() const {
    json meta;
    meta["kind"] = "cnn";
    json a;
    a["input_side"] = arch.input_side;
    json plan = json::array();
    for (const auto& [x, y] : arch.stages) plan.push_back({x, y});
    a["channel_plan"] = plan;
    a["dense_units"] = arch.dense_units;
    a["output_units"] = arch.output_units;
    a["kernel"] = 3;
    a["padding"] = "same";
    a["pool"] = "max2x2";
    a["activations"] = "relu after every conv and after dense1, dense2";
    a["init"] = "he_uniform, zero bias";
    a["input_scaling"] = "pixel/255";
    meta["architecture"] = a;
    meta["label_mapping"] = {{"1", 0}, {"0", 1}, {"-1", 2}};
    meta["train_config"] = {{"epochs", config.epochs},
                            {"batch_size", config.batch_size},
                            {"learning_rate", config.learning_rate},
                            {"momentum", config.momentum},
                            {"seed", config.seed},
                            {"deterministic", config.deterministic}};
    meta["data_checksum"] = hex64(data_checksum);
    meta["best_epoch"] = best_epoch;
    json hist = json::array();
    for (const auto& h : history)
        hist.push_back({{"epoch", h.epoch},
                        {"train_loss", h.train_loss},
                        {"train_accuracy", h.train_accuracy},
                        {"val_accuracy", h.val_accuracy}});
    meta["history"] = hist;

    binio::Writer w;
    w.bytes(kModelMagic);
    w.u32(kModelVersion);
    w.str(meta.dump(1));
    w.str(network.serialize());
    return w.take();
}

CnnModel CnnModel::deserialize(std::string_view bytes) {
    binio::Reader r(bytes, "cnn model");
    if (r.bytes(4) != kModelMagic) throw ValidationError("cnn model: bad magic bytes");
    if (const auto v = r.u32(); v != kModelVersion)
        throw ValidationError("cnn model: unsupported version " + std::to_string(v));
    const json meta = json::parse(r.str());
    CnnModel m;
    const auto& a = meta.at("architecture");
    m.arch.input_side = a.at("input_side").get<int>();
    const auto& plan = a.at("channel_plan");
    if (plan.size() != 5) throw ValidationError("cnn model: channel plan must have 5 stages");
    for (std::size_t i = 0; i < 5; ++i)
        m.arch.stages[i] = {plan[i][0].get<std::size_t>(), plan[i][1].get<std::size_t>()};
    m.arch.dense_units = a.at("dense_units").get<std::array<std::size_t, 3>>();
    m.arch.output_units = a.at("output_units").get<std::size_t>();
    const auto& mapping = meta.at("label_mapping");
    if (mapping.at("1") != 0 || mapping.at("0") != 1 || mapping.at("-1") != 2)
        throw ValidationError("cnn model: unsupported label mapping");
    const auto& tc = meta.at("train_config");
    m.config.epochs = tc.at("epochs").get<int>();
    m.config.batch_size = tc.at("batch_size").get<int>();
    m.config.learning_rate = tc.at("learning_rate").get<double>();
    m.config.momentum = tc.at("momentum").get<double>();
    m.config.seed = tc.at("seed").get<std::uint64_t>();
    m.config.deterministic = tc.at("deterministic").get<bool>();
    m.data_checksum = std::stoull(meta.at("data_checksum").get<std::string>(), nullptr, 16);
    m.best_epoch = meta.at("best_epoch").get<int>();
    for (const auto& h : meta.at("history"))
        m.history.push_back({h.at("epoch").get<int>(), h.at("train_loss").get<double>(),
                             h.at("train_accuracy").get<double>(), h.at("val_accuracy").get<double>()});
    m.network = Network::deserialize(r.str());
    if (!r.done()) throw ValidationError("cnn model: trailing bytes");
    const auto side = static_cast<std::size_t>(m.arch.input_side);
    if (!(m.network.input_shape() == InputShape{1, side, side}))
        throw ValidationError("cnn model: network input does not match architecture");
    return m;
}

}  // namespace cpb
