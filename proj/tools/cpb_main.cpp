// cpb: ingest, rasterize, train, evaluate and sweep cause-effect pair models.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "cpb/error.hpp"
#include "cpb/kernels.hpp"
#include "cpb/pipeline.hpp"

namespace {

using namespace cpb;

struct DataFlags {
    std::string pairs, info, target;

    void add(CLI::App* app, bool required = true) {
        auto* p = app->add_option("--pairs", pairs, "pairs file (SampleID,A,B)");
        auto* i = app->add_option("--info", info, "attribute types file");
        auto* t = app->add_option("--target", target, "direction labels file");
        if (required) {
            p->required();
            i->required();
            t->required();
        }
    }
    bool given() const { return !pairs.empty() || !info.empty() || !target.empty(); }
    PairFiles files() const {
        if (pairs.empty() || info.empty() || target.empty())
            throw ConfigError("--pairs, --info and --target must be given together");
        return {pairs, info, target};
    }
};

struct CnnFlags {
    int epochs = TrainConfig{}.epochs;
    int batch = TrainConfig{}.batch_size;
    double lr = TrainConfig{}.learning_rate;
    double momentum = TrainConfig{}.momentum;
    std::string channels = format_channel_plan(kDefaultChannelPlan);

    void add(CLI::App* app) {
        app->add_option("--epochs", epochs, "CNN epochs")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--batch", batch, "CNN mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--lr", lr, "CNN learning rate")->capture_default_str();
        app->add_option("--momentum", momentum, "CNN momentum")->capture_default_str();
        app->add_option("--channels", channels, "filters per stage, e.g. 8x8,16x16,16x16,32x32,32x32")
            ->capture_default_str();
    }
    TrainConfig config(std::uint64_t seed, bool deterministic) const {
        TrainConfig c;
        c.epochs = epochs;
        c.batch_size = batch;
        c.learning_rate = lr;
        c.momentum = momentum;
        c.seed = seed;
        c.deterministic = deterministic;
        return c;
    }
};

struct GbcFlags {
    GbcConfig cfg;
    std::optional<double> subsample;

    void add(CLI::App* app) {
        app->add_option("--n-estimators", cfg.n_estimators, "boosting rounds")->capture_default_str();
        app->add_option("--max-depth", cfg.max_depth, "tree depth limit")->capture_default_str();
        app->add_option("--min-samples-split", cfg.min_samples_split, "smallest splittable node")->capture_default_str();
        app->add_option("--gbc-lr", cfg.learning_rate, "shrinkage")->capture_default_str();
        app->add_option("--feature-subsample", subsample, "fraction of features per tree");
    }
    GbcConfig config(std::uint64_t seed) const {
        GbcConfig g = cfg;
        g.feature_subsample = subsample;
        g.seed = seed;
        return g;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Cause-effect pair classification with scatter-image CNNs and boosted trees"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cpb 1.0");

    std::string out = "out";
    std::uint64_t seed = 0;
    int side = 200;
    bool augment = false;
    bool deterministic = true;
    std::string model, model2;
    std::optional<double> weight;
    std::string tune_metric = "auc";
    std::string obs_counts = "100,200,500,1000";
    double train_frac = SplitSpec{}.train_frac, val_frac = SplitSpec{}.val_frac;
    bool neutral_positive_free = false;

    auto add_out = [&](CLI::App* c) { c->add_option("--out", out, "output directory")->capture_default_str(); };
    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "global seed")->capture_default_str(); };
    auto add_det = [&](CLI::App* c) {
        c->add_option("--deterministic", deterministic, "fixed reduction order (true/false)")->capture_default_str();
    };

    DataFlags data;
    CnnFlags cnn;
    GbcFlags gbc;

    auto* ingest = app.add_subcommand("ingest", "validate input files and write train/val/test manifests");
    data.add(ingest);
    add_out(ingest);
    add_seed(ingest);
    ingest->add_option("--train-frac", train_frac, "training share")->capture_default_str();
    ingest->add_option("--val-frac", val_frac, "validation share")->capture_default_str();

    auto* raster = app.add_subcommand("rasterize", "write one greymap per manifest instance");
    data.add(raster);
    add_out(raster);
    raster->add_option("--side", side, "image side in pixels")->capture_default_str()->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "train a model on the training manifest");
    std::string kind;
    train->add_option("kind", kind, "cnn or gbc")->required()->check(CLI::IsMember({"cnn", "gbc"}));
    data.add(train);
    add_out(train);
    add_seed(train);
    add_det(train);
    train->add_option("--side", side, "CNN input side")->capture_default_str();
    train->add_flag("--augment", augment, "add x/y-swapped copies of the training instances");
    train->add_option("--model", model, "model output path (default <out>/models/<kind>.bin)");
    cnn.add(train);
    gbc.add(train);

    auto* eval = app.add_subcommand("evaluate", "score one model or a weighted pair on the test manifest");
    data.add(eval);
    add_out(eval);
    eval->add_option("--model", model, "model file")->required();
    eval->add_option("--model2", model2, "second model for the ensemble");
    eval->add_option("--weight", weight, "CNN weight in the ensemble; omit to tune on validation")
        ->check(CLI::Range(0.0, 1.0));
    eval->add_option("--tune-metric", tune_metric, "auc or accuracy")
        ->capture_default_str()
        ->check(CLI::IsMember({"auc", "accuracy"}));
    eval->add_flag("--drop-neutral", neutral_positive_free, "leave label-0 instances out of the AUC");

    auto* sweep = app.add_subcommand("sparse-sweep", "retrain both models at several observation counts");
    data.add(sweep, false);
    add_out(sweep);
    add_seed(sweep);
    add_det(sweep);
    SparseSweepParams sp;
    sweep->add_option("--obs-counts", obs_counts, "comma-separated observation counts")->capture_default_str();
    sweep->add_option("--side", sp.side, "CNN input side")->capture_default_str();
    sweep->add_option("--count", sp.benchmark.count, "synthetic instances when no corpus is given")
        ->capture_default_str();
    sweep->add_option("--obs", sp.benchmark.max_obs, "observations per synthetic instance")->capture_default_str();
    sweep->add_option("--augment", sp.augment, "x/y swap augmentation (true/false)")->capture_default_str();
    CnnFlags sweep_cnn;
    sweep_cnn.add(sweep);
    gbc.add(sweep);

    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic benchmark");
    add_out(synth);
    add_seed(synth);
    SynthParams syn;
    synth->add_option("--count", syn.benchmark.count, "instances")->capture_default_str();
    synth->add_option("--obs", syn.benchmark.max_obs, "observations per instance")->capture_default_str();
    synth->add_option("--min-obs", syn.benchmark.min_obs, "smallest instance (defaults to --obs)");
    synth->add_option("--categorical-fraction", syn.categorical_fraction, "share discretized to categorical")
        ->capture_default_str();

    auto* feats = app.add_subcommand("features", "export the feature matrix as CSV");
    data.add(feats);
    add_out(feats);

    auto* rerun = app.add_subcommand("rerun", "repeat the run recorded in a run.meta file");
    std::string meta;
    rerun->add_option("--meta", meta, "run.meta path")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::InputError);
    }

    kernels::apply_thread_env();

    if (*ingest) {
        cmd_ingest({data.files(), out, SplitSpec{train_frac, val_frac, seed}});
    } else if (*raster) {
        std::cout << cmd_rasterize({data.files(), out, side}) << " images written\n";
    } else if (*train) {
        TrainParams p;
        p.kind = parse_model_kind(kind);
        p.files = data.files();
        p.out = out;
        p.augment = augment;
        p.side = side;
        p.channels = parse_channel_plan(cnn.channels);
        p.cnn = cnn.config(seed, deterministic);
        p.gbc = gbc.config(seed);
        if (!model.empty()) p.model_path = fs::path(model);
        const auto s = cmd_train(p);
        std::cout << "model written to " << s.model_path.string() << "\n";
    } else if (*eval) {
        EvaluateParams p;
        p.files = data.files();
        p.out = out;
        p.model = model;
        if (!model2.empty()) p.model2 = fs::path(model2);
        p.weight = weight;
        p.tune_metric = parse_tune_metric(tune_metric);
        p.neutral_as_negative = !neutral_positive_free;
        std::cout << format_report(cmd_evaluate(p));
    } else if (*sweep) {
        if (data.given()) sp.files = data.files();
        sp.out = out;
        sp.obs_counts = parse_obs_counts(obs_counts);
        sp.split.seed = seed;
        sp.seed = seed;
        sp.benchmark.seed = seed;
        sp.benchmark.min_obs = sp.benchmark.max_obs;
        sp.channels = parse_channel_plan(sweep_cnn.channels);
        sp.cnn = sweep_cnn.config(seed, deterministic);
        sp.gbc = gbc.config(seed);
        std::cout << format_sweep_table(cmd_sparse_sweep(sp));
    } else if (*synth) {
        syn.benchmark.seed = seed;
        syn.out = out;
        if (synth->count("--min-obs") == 0) syn.benchmark.min_obs = syn.benchmark.max_obs;
        const auto files = cmd_synth(syn);
        std::cout << files.pairs.string() << "\n" << files.info.string() << "\n" << files.target.string() << "\n";
    } else if (*feats) {
        std::cout << cmd_features({data.files(), out}).string() << "\n";
    } else if (*rerun) {
        cmd_rerun(meta);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cpb::Error& e) {
        std::cerr << "cpb: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "cpb: " << e.what() << "\n";
        return static_cast<int>(cpb::ExitCode::InputError);
    }
}
