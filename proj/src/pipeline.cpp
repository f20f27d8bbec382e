#include "cpb/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>

#include "cpb/error.hpp"
#include "cpb/features.hpp"
#include "cpb/raster.hpp"
#include "cpb/rng.hpp"
#include "io.hpp"
#include "text.hpp"

namespace cpb {

namespace {

std::mutex g_log_mutex;
Logger g_logger;

const fs::path kManifestDir = "manifests";
const fs::path kImageDir = "images";
const fs::path kModelDir = "models";
const fs::path kReportDir = "reports";
const fs::path kRunDir = "runs";

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("run.meta: " + key + " is not a boolean: " + v);
}

double meta_double(const RunMeta& m, const std::string& key) {
    const auto v = m.require(key);
    const auto d = text::parse_double(v);
    if (!d) throw ConfigError("run.meta: " + key + " is not a number: " + v);
    return *d;
}

long long meta_int(const RunMeta& m, const std::string& key) {
    const auto v = m.require(key);
    const auto i = text::parse_int(v);
    if (!i) throw ConfigError("run.meta: " + key + " is not an integer: " + v);
    return *i;
}

std::uint64_t meta_u64(const RunMeta& m, const std::string& key) {
    const auto v = m.require(key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("run.meta: " + key + " is not an unsigned integer: " + v);
    return out;
}

std::string format_channels(const ChannelPlan& plan) {
    std::string out;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(plan[i].first) + "x" + std::to_string(plan[i].second);
    }
    return out;
}

ChannelPlan parse_channels(const std::string& s) {
    const auto parts = text::split(s, ',');
    if (parts.size() != 5) throw ConfigError("channel plan needs 5 stages, got '" + s + "'");
    ChannelPlan plan{};
    for (std::size_t i = 0; i < 5; ++i) {
        const auto ab = text::split(text::trim(parts[i]), 'x');
        const auto a = ab.size() == 2 ? text::parse_int(ab[0]) : std::nullopt;
        const auto b = ab.size() == 2 ? text::parse_int(ab[1]) : std::nullopt;
        if (!a || !b || *a <= 0 || *b <= 0) throw ConfigError("bad channel stage '" + std::string(parts[i]) + "'");
        plan[i] = {static_cast<std::size_t>(*a), static_cast<std::size_t>(*b)};
    }
    return plan;
}

std::string format_counts(const std::vector<int>& counts) {
    std::string out;
    for (std::size_t i = 0; i < counts.size(); ++i) out += (i ? "," : "") + std::to_string(counts[i]);
    return out;
}

std::vector<int> parse_counts(const std::string& s) {
    std::vector<int> out;
    for (auto part : text::split(s, ',')) {
        const auto v = text::parse_int(text::trim(part));
        if (!v) throw ConfigError("bad observation count '" + std::string(part) + "'");
        out.push_back(static_cast<int>(*v));
    }
    return out;
}

void put_files(RunMeta& m, const PairFiles& f) {
    m.set("pairs", f.pairs.string());
    m.set("info", f.info.string());
    m.set("target", f.target.string());
    m.set("pairs_checksum", file_checksum(f.pairs));
    m.set("info_checksum", file_checksum(f.info));
    m.set("target_checksum", file_checksum(f.target));
}

PairFiles get_files(const RunMeta& m) {
    PairFiles f{m.require("pairs"), m.require("info"), m.require("target")};
    const std::pair<const char*, const fs::path*> checks[] = {
        {"pairs_checksum", &f.pairs}, {"info_checksum", &f.info}, {"target_checksum", &f.target}};
    for (const auto& [key, path] : checks) {
        const auto want = m.get(key);
        if (want && *want != file_checksum(*path))
            log_message("warning: " + path->string() + " changed since the recorded run (" + key + ")");
    }
    return f;
}

void put_split(RunMeta& m, const SplitSpec& s) {
    m.set("train_frac", text::format_double(s.train_frac));
    m.set("val_frac", text::format_double(s.val_frac));
    m.set("seed", std::to_string(s.seed));
}

SplitSpec get_split(const RunMeta& m) {
    return {meta_double(m, "train_frac"), meta_double(m, "val_frac"), meta_u64(m, "seed")};
}

void put_cnn(RunMeta& m, const TrainConfig& c, const ChannelPlan& channels, int side) {
    m.set("side", std::to_string(side));
    m.set("channels", format_channels(channels));
    m.set("epochs", std::to_string(c.epochs));
    m.set("batch", std::to_string(c.batch_size));
    m.set("lr", text::format_double(c.learning_rate));
    m.set("momentum", text::format_double(c.momentum));
    m.set("cnn_seed", std::to_string(c.seed));
    m.set("deterministic", bool_str(c.deterministic));
}

TrainConfig get_cnn(const RunMeta& m) {
    TrainConfig c;
    c.epochs = static_cast<int>(meta_int(m, "epochs"));
    c.batch_size = static_cast<int>(meta_int(m, "batch"));
    c.learning_rate = meta_double(m, "lr");
    c.momentum = meta_double(m, "momentum");
    c.seed = meta_u64(m, "cnn_seed");
    c.deterministic = parse_bool("deterministic", m.require("deterministic"));
    return c;
}

void put_gbc(RunMeta& m, const GbcConfig& g) {
    m.set("n_estimators", std::to_string(g.n_estimators));
    m.set("max_depth", std::to_string(g.max_depth));
    m.set("min_samples_split", std::to_string(g.min_samples_split));
    m.set("gbc_lr", text::format_double(g.learning_rate));
    m.set("feature_subsample", g.feature_subsample ? text::format_double(*g.feature_subsample) : "none");
    m.set("gbc_seed", std::to_string(g.seed));
}

GbcConfig get_gbc(const RunMeta& m) {
    GbcConfig g;
    g.n_estimators = static_cast<int>(meta_int(m, "n_estimators"));
    g.max_depth = static_cast<int>(meta_int(m, "max_depth"));
    g.min_samples_split = static_cast<int>(meta_int(m, "min_samples_split"));
    g.learning_rate = meta_double(m, "gbc_lr");
    if (m.require("feature_subsample") != "none") g.feature_subsample = meta_double(m, "feature_subsample");
    g.seed = meta_u64(m, "gbc_seed");
    return g;
}

void put_benchmark(RunMeta& m, const BenchmarkSpec& b) {
    m.set("count", std::to_string(b.count));
    std::string mix;
    for (std::size_t i = 0; i < b.mix.size(); ++i) mix += (i ? "," : "") + text::format_double(b.mix[i]);
    m.set("mix", mix);
    m.set("min_obs", std::to_string(b.min_obs));
    m.set("max_obs", std::to_string(b.max_obs));
    m.set("min_noise", text::format_double(b.min_noise));
    m.set("max_noise", text::format_double(b.max_noise));
    m.set("benchmark_seed", std::to_string(b.seed));
}

BenchmarkSpec get_benchmark(const RunMeta& m) {
    BenchmarkSpec b;
    b.count = static_cast<int>(meta_int(m, "count"));
    const auto mix = m.require("mix");
    const auto parts = text::split(mix, ',');
    if (parts.size() != 4) throw ConfigError("run.meta: mix needs 4 fractions");
    for (std::size_t i = 0; i < 4; ++i) {
        const auto v = text::parse_double(parts[i]);
        if (!v) throw ConfigError("run.meta: bad mix fraction");
        b.mix[i] = *v;
    }
    b.min_obs = static_cast<int>(meta_int(m, "min_obs"));
    b.max_obs = static_cast<int>(meta_int(m, "max_obs"));
    b.min_noise = meta_double(m, "min_noise");
    b.max_noise = meta_double(m, "max_noise");
    b.seed = meta_u64(m, "benchmark_seed");
    return b;
}

void write_meta(const fs::path& out, const std::string& command, const RunMeta& body) {
    RunMeta m;
    m.set("command", command);
    for (const auto& [k, v] : body.entries()) m.set(k, v);
    io::write_file(out / kRunDir / command / "run.meta", m.format());
}

std::string ids_text(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) out += id + '\n';
    return out;
}

std::vector<std::string> read_ids(const fs::path& path) {
    if (!fs::exists(path)) throw ConsistencyError("missing manifest " + path.string() + " (run ingest first)");
    std::vector<std::string> ids;
    const auto content = io::read_file(path);
    for (auto line : text::lines(content)) {
        line = text::trim(line);
        if (!line.empty()) ids.emplace_back(line);
    }
    return ids;
}

std::vector<std::string> ids_of(const std::vector<PairInstance>& v) {
    std::vector<std::string> ids;
    ids.reserve(v.size());
    for (const auto& d : v) ids.push_back(d.id);
    return ids;
}

template <class Model>
Model load_model(const fs::path& path) {
    return Model::deserialize(io::read_file(path));
}

std::vector<ProbTriple> predict_with(const fs::path& model_path, const std::vector<PairInstance>& instances) {
    if (detect_model_kind(model_path) == ModelKind::Cnn) return predict_all(load_model<CnnModel>(model_path), instances);
    return predict_all(load_model<BoostedModel>(model_path), instances);
}

std::string component_lines(const std::string& prefix, const EvalReport& r) {
    return prefix + "accuracy=" + text::format_double(r.accuracy) + "\n" + prefix +
           "auc=" + text::format_double(r.auc.value()) + "\n";
}

}  // namespace

// ---- RunMeta -----------------------------------------------------------------

void RunMeta::set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find_first_of("=\n") != std::string::npos)
        throw ConfigError("bad run.meta key '" + key + "'");
    if (value.find('\n') != std::string::npos) throw ConfigError("run.meta value for " + key + " contains a newline");
    for (auto& [k, v] : entries_)
        if (k == key) {
            v = value;
            return;
        }
    entries_.emplace_back(key, value);
}

std::optional<std::string> RunMeta::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    return std::nullopt;
}

std::string RunMeta::require(const std::string& key) const {
    auto v = get(key);
    if (!v) throw ConfigError("run.meta: missing key '" + key + "'");
    return *v;
}

std::string RunMeta::format() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
}

RunMeta RunMeta::parse(std::string_view text_in, const std::string& name) {
    RunMeta m;
    std::size_t line_no = 0;
    for (auto line : text::lines(text_in)) {
        ++line_no;
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos || eq == 0) throw ParseError(name, line_no, "expected key=value");
        m.set(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    return m;
}

// ---- shared helpers ----------------------------------------------------------

void set_logger(Logger logger) {
    std::lock_guard lock(g_log_mutex);
    g_logger = std::move(logger);
}

void log_message(const std::string& message) {
    std::lock_guard lock(g_log_mutex);
    if (g_logger)
        g_logger(message);
    else
        std::cerr << message << '\n';
}

std::string file_checksum(const fs::path& path) {
    const auto bytes = io::read_file(path);
    return hex64(fnv1a64(bytes));
}

ManifestSet read_manifests(const fs::path& out_dir) {
    const auto dir = out_dir / kManifestDir;
    return {read_ids(dir / "train.txt"), read_ids(dir / "val.txt"), read_ids(dir / "test.txt")};
}

std::vector<PairInstance> select(const std::vector<PairInstance>& instances, const std::vector<std::string>& ids) {
    std::map<std::string_view, const PairInstance*> by_id;
    for (const auto& d : instances) by_id.emplace(d.id, &d);
    std::vector<PairInstance> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw ConsistencyError("manifest id '" + id + "' not present in the pairs file");
        out.push_back(*it->second);
    }
    return out;
}

std::vector<LabeledImage> rasterize_all(const std::vector<PairInstance>& instances, int side) {
    std::vector<LabeledImage> out(instances.size());
    const RasterConfig cfg{side};
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(instances.size()); ++i)
        out[i] = {rasterize(instances[i], cfg), instances[i].label};
    return out;
}

std::vector<ProbTriple> predict_all(const CnnModel& model, const std::vector<PairInstance>& instances) {
    std::vector<ProbTriple> out(instances.size());
    const RasterConfig cfg{model.arch.input_side};
    for (std::size_t i = 0; i < instances.size(); ++i) out[i] = predict_cnn(model, rasterize(instances[i], cfg));
    return out;
}

std::vector<ProbTriple> predict_all(const BoostedModel& model, const std::vector<PairInstance>& instances) {
    const auto features = extract_all(instances);
    std::vector<ProbTriple> out(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) out[i] = gbc_predict(model, features[i]);
    return out;
}

std::vector<int> labels_of(const std::vector<PairInstance>& instances) {
    std::vector<int> out;
    out.reserve(instances.size());
    for (const auto& d : instances) out.push_back(d.label);
    return out;
}

// ---- ingest ------------------------------------------------------------------

ManifestSet cmd_ingest(const IngestParams& p) {
    const auto instances = read_pairs(p.files);
    const auto parts = split(instances, p.split);
    ManifestSet m{ids_of(parts.train), ids_of(parts.validation), ids_of(parts.test)};

    const auto dir = p.out / kManifestDir;
    io::write_file(dir / "train.txt", ids_text(m.train));
    io::write_file(dir / "val.txt", ids_text(m.validation));
    io::write_file(dir / "test.txt", ids_text(m.test));

    RunMeta meta;
    put_files(meta, p.files);
    put_split(meta, p.split);
    io::write_file(dir / "summary.txt", "instances=" + std::to_string(instances.size()) +
                                            "\ntrain=" + std::to_string(m.train.size()) +
                                            "\nval=" + std::to_string(m.validation.size()) +
                                            "\ntest=" + std::to_string(m.test.size()) + "\n" + meta.format());
    write_meta(p.out, "ingest", meta);
    return m;
}

// ---- rasterize ---------------------------------------------------------------

std::string image_file_name(const std::string& id) {
    std::string name = id;
    for (auto& c : name)
        if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
    return name + ".pgm";
}

std::size_t cmd_rasterize(const RasterizeParams& p) {
    if (p.side < 1) throw ConfigError("--side must be positive");
    const auto m = read_manifests(p.out);
    std::vector<std::string> ids = m.train;
    ids.insert(ids.end(), m.validation.begin(), m.validation.end());
    ids.insert(ids.end(), m.test.begin(), m.test.end());
    const auto instances = select(read_pairs(p.files), ids);

    const RasterConfig cfg{p.side};
    const auto dir = p.out / kImageDir;
    fs::create_directories(dir);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(instances.size()); ++i) {
        try {
            write_image(rasterize(instances[i], cfg), dir / image_file_name(instances[i].id));
        } catch (...) {
#pragma omp critical(cpb_rasterize_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    RunMeta meta;
    put_files(meta, p.files);
    meta.set("side", std::to_string(p.side));
    write_meta(p.out, "rasterize", meta);
    return instances.size();
}

// ---- train -------------------------------------------------------------------

std::string to_string(ModelKind kind) { return kind == ModelKind::Cnn ? "cnn" : "gbc"; }

ModelKind parse_model_kind(const std::string& s) {
    if (s == "cnn") return ModelKind::Cnn;
    if (s == "gbc") return ModelKind::Gbc;
    throw ConfigError("unknown model kind '" + s + "' (expected cnn or gbc)");
}

ModelKind detect_model_kind(const fs::path& model_file) {
    const auto bytes = io::read_file(model_file);
    if (bytes.rfind("CPBM", 0) == 0) return ModelKind::Cnn;
    if (bytes.rfind("CPBG", 0) == 0) return ModelKind::Gbc;
    throw ValidationError(model_file.string() + ": not a cpb model file");
}

TrainSummary cmd_train(const TrainParams& p) {
    const auto manifests = read_manifests(p.out);
    const auto all = read_pairs(p.files);
    const auto train_orig = select(all, manifests.train);
    const auto val = select(all, manifests.validation);
    const auto train = p.augment ? augment_all(train_orig) : train_orig;

    TrainSummary summary;
    summary.original_count = train_orig.size();
    summary.train_count = train.size();
    summary.model_path = p.model_path ? *p.model_path : p.out / kModelDir / (to_string(p.kind) + ".bin");

    std::string log = "kind=" + to_string(p.kind) + "\ntrain_manifest=" + std::to_string(train_orig.size()) +
                      "\ntrain_instances=" + std::to_string(train.size()) +
                      "\naugment=" + bool_str(p.augment) + "\nval_instances=" + std::to_string(val.size()) + "\n";
    log_message("training " + to_string(p.kind) + " on " + std::to_string(train.size()) + " instances" +
                (p.augment ? " (augmented from " + std::to_string(train_orig.size()) + ")" : ""));

    RunMeta meta;
    put_files(meta, p.files);
    meta.set("kind", to_string(p.kind));
    meta.set("augment", bool_str(p.augment));
    meta.set("model", summary.model_path.string());
    meta.set("train_manifest_checksum", file_checksum(p.out / kManifestDir / "train.txt"));
    meta.set("val_manifest_checksum", file_checksum(p.out / kManifestDir / "val.txt"));

    if (p.kind == ModelKind::Cnn) {
        const auto arch = build_cnn_arch(p.side, p.channels);
        const auto train_img = rasterize_all(train, p.side);
        const auto val_img = rasterize_all(val, p.side);
        log += "epoch,train_loss,train_accuracy,val_accuracy\n";
        const auto model = train_cnn(train_img, val_img, arch, p.cnn, [&](const EpochMetrics& e) {
            const auto line = std::to_string(e.epoch) + "," + text::format_fixed(e.train_loss, 6) + "," +
                              text::format_fixed(e.train_accuracy, 6) + "," + text::format_fixed(e.val_accuracy, 6);
            log += line + "\n";
            log_message("epoch " + line);
        });
        log += "best_epoch=" + std::to_string(model.best_epoch) + "\n";
        io::write_file(summary.model_path, model.serialize());
        put_cnn(meta, p.cnn, p.channels, p.side);
    } else {
        const auto features = extract_all(train);
        const auto labels = labels_of(train);
        const auto model = gbc_fit(features, labels, p.gbc);
        log += "n_estimators=" + std::to_string(p.gbc.n_estimators) + "\nmax_depth=" +
               std::to_string(p.gbc.max_depth) + "\nmin_samples_split=" + std::to_string(p.gbc.min_samples_split) +
               "\nround,train_log_loss\n";
        for (std::size_t r = 0; r < model.train_log_loss.size(); ++r)
            log += std::to_string(r) + "," + text::format_fixed(model.train_log_loss[r], 6) + "\n";
        if (!val.empty()) {
            const auto probs = predict_all(model, val);
            std::vector<int> pred;
            for (const auto& pr : probs) pred.push_back(predict_class(pr));
            const auto truth = labels_of(val);
            log += "val_accuracy=" + text::format_fixed(accuracy(pred, truth), 6) + "\n";
        }
        io::write_file(summary.model_path, model.serialize());
        put_gbc(meta, p.gbc);
    }
    io::write_file(p.out / kReportDir / ("train_" + to_string(p.kind) + ".log"), log);
    write_meta(p.out, "train_" + to_string(p.kind), meta);
    return summary;
}

// ---- evaluate ----------------------------------------------------------------

EvalReport cmd_evaluate(const EvaluateParams& p) {
    const auto manifests = read_manifests(p.out);
    const auto all = read_pairs(p.files);
    const auto test = select(all, manifests.test);
    const auto test_truth = labels_of(test);
    const auto test_ids = ids_of(test);
    const AucOptions opts{p.neutral_as_negative};

    RunMeta meta;
    put_files(meta, p.files);
    meta.set("model", p.model.string());
    meta.set("model_checksum", file_checksum(p.model));
    meta.set("neutral_as_negative", bool_str(p.neutral_as_negative));
    meta.set("test_manifest_checksum", file_checksum(p.out / kManifestDir / "test.txt"));

    EvalReport report;
    std::string extra;
    if (!p.model2) {
        if (p.weight) throw ConfigError("--weight needs two models (--model and --model2)");
        report = evaluate(test_ids, predict_with(p.model, test), test_truth, opts);
    } else {
        // The weight multiplies the CNN probabilities; with two models of the same
        // kind it multiplies --model.
        fs::path first = p.model, second = *p.model2;
        if (detect_model_kind(first) == ModelKind::Gbc && detect_model_kind(second) == ModelKind::Cnn)
            std::swap(first, second);
        meta.set("model2", p.model2->string());
        meta.set("model2_checksum", file_checksum(*p.model2));

        const auto pc = predict_with(first, test);
        const auto pg = predict_with(second, test);
        EnsembleWeight w;
        if (p.weight) {
            w = EnsembleWeight(*p.weight);
            meta.set("weight", text::format_double(*p.weight));
        } else {
            const auto val = select(all, manifests.validation);
            const auto val_truth = labels_of(val);
            const auto scan =
                tune_weight_scan(predict_with(first, val), predict_with(second, val), val_truth, p.tune_metric, opts);
            w = scan.best;
            meta.set("weight", "tune");
            meta.set("tune_metric", to_string(p.tune_metric));
            meta.set("val_manifest_checksum", file_checksum(p.out / kManifestDir / "val.txt"));
            for (std::size_t i = 0; i < scan.candidates.size(); ++i)
                extra += "tune_" + text::format_fixed(scan.candidates[i], 1) + "=" +
                         text::format_double(scan.scores[i]) + "\n";
        }
        std::vector<ProbTriple> mixed(pc.size());
        for (std::size_t i = 0; i < pc.size(); ++i) mixed[i] = ensemble(pc[i], pg[i], w);
        report = evaluate(test_ids, mixed, test_truth, opts);
        report.weight = w.value();

        const auto kind1 = to_string(detect_model_kind(first));
        const auto kind2 = to_string(detect_model_kind(second));
        extra += component_lines(kind1 + (kind1 == kind2 ? "1" : "") + "_", evaluate(test_ids, pc, test_truth, opts));
        extra += component_lines(kind2 + (kind1 == kind2 ? "2" : "") + "_", evaluate(test_ids, pg, test_truth, opts));
    }

    io::write_file(p.out / kReportDir / "predictions.csv", format_predictions(report));
    io::write_file(p.out / kReportDir / "report.txt", format_report(report) + extra);
    write_meta(p.out, "evaluate", meta);
    return report;
}

// ---- sparse sweep ------------------------------------------------------------

PairInstance subsample(const PairInstance& d, int count, std::uint64_t seed, bool* clamped) {
    if (count < 2) throw ConfigError("observation count must be >= 2, got " + std::to_string(count));
    const auto n = d.size();
    const bool short_instance = static_cast<std::size_t>(count) >= n;
    if (clamped) *clamped = static_cast<std::size_t>(count) > n;
    if (short_instance) return d;

    // Partial Fisher-Yates over positions, then restore the original order.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(seed, d.id));
    for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
        const auto j = i + rng.uniform_int(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(count));
    std::sort(idx.begin(), idx.end());

    PairInstance out = d;
    out.x.clear();
    out.y.clear();
    for (auto i : idx) {
        out.x.push_back(d.x[i]);
        out.y.push_back(d.y[i]);
    }
    return out;
}

std::vector<SweepRow> cmd_sparse_sweep(const SparseSweepParams& p) {
    if (p.obs_counts.empty()) throw ConfigError("--obs-counts is empty");
    for (int c : p.obs_counts)
        if (c < 2) throw ConfigError("observation counts must be >= 2, got " + std::to_string(c));

    const auto corpus = p.files ? read_pairs(*p.files) : generate_benchmark(p.benchmark);
    const auto parts = split(corpus, p.split);
    const auto arch = build_cnn_arch(p.side, p.channels);

    RunMeta meta;
    if (p.files)
        put_files(meta, *p.files);
    else
        put_benchmark(meta, p.benchmark);
    meta.set("obs_counts", format_counts(p.obs_counts));
    put_split(meta, p.split);
    meta.set("subsample_seed", std::to_string(p.seed));
    meta.set("augment", bool_str(p.augment));
    put_cnn(meta, p.cnn, p.channels, p.side);
    put_gbc(meta, p.gbc);

    std::vector<SweepRow> rows;
    for (int count : p.obs_counts) {
        SweepRow row;
        row.obs = count;
        auto reduce = [&](const std::vector<PairInstance>& v) {
            std::vector<PairInstance> out;
            out.reserve(v.size());
            for (const auto& d : v) {
                bool clamped = false;
                out.push_back(subsample(d, count, p.seed, &clamped));
                if (clamped) ++row.clamped;
            }
            return out;
        };
        const auto train_orig = reduce(parts.train);
        const auto val = reduce(parts.validation);
        const auto test = reduce(parts.test);
        if (row.clamped > 0)
            log_message("warning: " + std::to_string(row.clamped) + " instance(s) have fewer than " +
                        std::to_string(count) + " observations; kept all of theirs");
        const auto train = p.augment ? augment_all(train_orig) : train_orig;
        const auto truth = labels_of(test);
        const auto ids = ids_of(test);

        log_message("sweep obs=" + std::to_string(count) + ": training cnn");
        const auto cnn = train_cnn(rasterize_all(train, p.side), rasterize_all(val, p.side), arch, p.cnn);
        const auto cnn_report = evaluate(ids, predict_all(cnn, test), truth);
        log_message("sweep obs=" + std::to_string(count) + ": training gbc");
        const auto gbc = gbc_fit(extract_all(train), labels_of(train), p.gbc);
        const auto gbc_report = evaluate(ids, predict_all(gbc, test), truth);

        row.cnn_accuracy = cnn_report.accuracy;
        row.cnn_auc = cnn_report.auc.value();
        row.gbc_accuracy = gbc_report.accuracy;
        row.gbc_auc = gbc_report.auc.value();
        rows.push_back(row);
    }

    io::write_file(p.out / kReportDir / "sparse_sweep.csv", format_sweep_table(rows));
    write_meta(p.out, "sparse_sweep", meta);
    return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
    std::string out = "obs,cnn_accuracy,cnn_auc,gbc_accuracy,gbc_auc,clamped\n";
    for (const auto& r : rows)
        out += std::to_string(r.obs) + "," + text::format_fixed(r.cnn_accuracy, 6) + "," +
               text::format_fixed(r.cnn_auc, 6) + "," + text::format_fixed(r.gbc_accuracy, 6) + "," +
               text::format_fixed(r.gbc_auc, 6) + "," + std::to_string(r.clamped) + "\n";
    return out;
}

// ---- synth / features --------------------------------------------------------

PairFiles cmd_synth(const SynthParams& p) {
    if (!(p.categorical_fraction >= 0.0 && p.categorical_fraction <= 1.0))
        throw ConfigError("categorical fraction must lie in [0, 1]");
    auto instances = generate_benchmark(p.benchmark);
    if (p.categorical_fraction > 0.0) {
        // Level counts are drawn per instance from a stream independent of generation.
        Rng rng(derive_seed(p.benchmark.seed, "discretize"));
        for (auto& d : instances) {
            const bool pick = rng.uniform() < p.categorical_fraction;
            const int kx = 2 + static_cast<int>(rng.uniform_int(6));
            const bool both = rng.bernoulli(0.5);
            const int ky = 2 + static_cast<int>(rng.uniform_int(6));
            if (pick) d = discretize_instance(d, kx, both ? ky : 0);
        }
    }
    const PairFiles files{p.out / "data" / "pairs.csv", p.out / "data" / "info.csv", p.out / "data" / "target.csv"};
    write_pairs(instances, files);

    RunMeta meta;
    put_benchmark(meta, p.benchmark);
    meta.set("categorical_fraction", text::format_double(p.categorical_fraction));
    write_meta(p.out, "synth", meta);
    return files;
}

fs::path cmd_features(const FeaturesParams& p) {
    const auto instances = read_pairs(p.files);
    const auto path = p.out / kReportDir / "features.csv";
    io::write_file(path, format_feature_matrix(instances, extract_all(instances)));
    RunMeta meta;
    put_files(meta, p.files);
    write_meta(p.out, "features", meta);
    return path;
}

// ---- rerun -------------------------------------------------------------------

void cmd_rerun(const fs::path& meta_file) {
    const auto m = RunMeta::parse(io::read_file(meta_file), meta_file.string());
    const auto command = m.require("command");
    // run.meta lives at <out>/runs/<command>/run.meta.
    const fs::path out = meta_file.parent_path().parent_path().parent_path();

    if (command == "ingest") {
        cmd_ingest({get_files(m), out, get_split(m)});
    } else if (command == "rasterize") {
        cmd_rasterize({get_files(m), out, static_cast<int>(meta_int(m, "side"))});
    } else if (command == "train_cnn" || command == "train_gbc") {
        TrainParams p;
        p.kind = parse_model_kind(m.require("kind"));
        p.files = get_files(m);
        p.out = out;
        p.augment = parse_bool("augment", m.require("augment"));
        p.model_path = fs::path(m.require("model"));
        if (p.kind == ModelKind::Cnn) {
            p.side = static_cast<int>(meta_int(m, "side"));
            p.channels = parse_channels(m.require("channels"));
            p.cnn = get_cnn(m);
        } else {
            p.gbc = get_gbc(m);
        }
        cmd_train(p);
    } else if (command == "evaluate") {
        EvaluateParams p;
        p.files = get_files(m);
        p.out = out;
        p.model = m.require("model");
        if (auto m2 = m.get("model2")) p.model2 = fs::path(*m2);
        p.neutral_as_negative = parse_bool("neutral_as_negative", m.require("neutral_as_negative"));
        if (auto w = m.get("weight"); w && *w != "tune") p.weight = meta_double(m, "weight");
        if (auto t = m.get("tune_metric")) p.tune_metric = parse_tune_metric(*t);
        cmd_evaluate(p);
    } else if (command == "sparse_sweep") {
        SparseSweepParams p;
        if (m.get("pairs"))
            p.files = get_files(m);
        else
            p.benchmark = get_benchmark(m);
        p.out = out;
        p.obs_counts = parse_counts(m.require("obs_counts"));
        p.split = get_split(m);
        p.seed = meta_u64(m, "subsample_seed");
        p.augment = parse_bool("augment", m.require("augment"));
        p.side = static_cast<int>(meta_int(m, "side"));
        p.channels = parse_channels(m.require("channels"));
        p.cnn = get_cnn(m);
        p.gbc = get_gbc(m);
        cmd_sparse_sweep(p);
    } else if (command == "synth") {
        cmd_synth({get_benchmark(m), out, meta_double(m, "categorical_fraction")});
    } else if (command == "features") {
        cmd_features({get_files(m), out});
    } else {
        throw ConfigError("run.meta: unknown command '" + command + "'");
    }
}

ChannelPlan parse_channel_plan(const std::string& s) { return parse_channels(s); }
std::string format_channel_plan(const ChannelPlan& plan) { return format_channels(plan); }
std::vector<int> parse_obs_counts(const std::string& s) { return parse_counts(s); }

}  // namespace cpb
