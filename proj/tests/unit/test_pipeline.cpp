#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cpb/error.hpp"
#include "cpb/pipeline.hpp"
#include "cpb/raster.hpp"
#include "cpb/synth.hpp"
#include "helpers.hpp"

using namespace cpb;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

constexpr ChannelPlan kTiny{{{2, 2}, {2, 2}, {2, 2}, {2, 2}, {2, 2}}};

struct Corpus {
    fs::path root;
    PairFiles files;
};

Corpus make_corpus(const std::string& name, int count, int obs = 60, std::uint64_t seed = 1) {
    Corpus c;
    c.root = cpb::test::temp_dir(name);
    SynthParams p;
    p.benchmark.count = count;
    p.benchmark.min_obs = p.benchmark.max_obs = obs;
    p.benchmark.seed = seed;
    p.out = c.root / "synth";
    p.categorical_fraction = 0.2;
    c.files = cmd_synth(p);
    return c;
}

TrainParams tiny_cnn_params(const Corpus& c, const fs::path& out) {
    TrainParams p;
    p.kind = ModelKind::Cnn;
    p.files = c.files;
    p.out = out;
    p.side = 32;
    p.channels = kTiny;
    p.cnn.epochs = 2;
    p.cnn.batch_size = 8;
    return p;
}

TrainParams small_gbc_params(const Corpus& c, const fs::path& out) {
    TrainParams p;
    p.kind = ModelKind::Gbc;
    p.files = c.files;
    p.out = out;
    p.gbc.n_estimators = 20;
    return p;
}

struct CaptureLog {
    std::vector<std::string> lines;
    CaptureLog() {
        set_logger([this](const std::string& m) { lines.push_back(m); });
    }
    ~CaptureLog() { set_logger({}); }
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("run.meta format round-trips") {
    RunMeta m;
    m.set("command", "ingest");
    m.set("seed", "7");
    m.set("path", "a=b/c");
    m.set("seed", "8");
    const auto back = RunMeta::parse(m.format());
    CHECK(back.entries() == m.entries());
    CHECK(back.require("seed") == "8");
    CHECK(back.require("path") == "a=b/c");
    CHECK_THROWS_AS(back.require("missing"), ConfigError);
    CHECK_THROWS_AS(RunMeta::parse("novalue\n"), ParseError);
}

TEST_CASE("ingest writes 70/15/15 manifests reproducibly") {
    const auto c = make_corpus("pipe_ingest", 100);
    const auto out = c.root / "out";
    const auto m = cmd_ingest({c.files, out, {0.70, 0.15, 3}});
    CHECK(m.train.size() == 70);
    CHECK(m.validation.size() == 15);
    CHECK(m.test.size() == 15);
    const auto first = slurp(out / "manifests" / "train.txt");
    cmd_ingest({c.files, out, {0.70, 0.15, 3}});
    CHECK(slurp(out / "manifests" / "train.txt") == first);
    const auto meta = RunMeta::parse(slurp(out / "runs" / "ingest" / "run.meta"));
    CHECK(meta.require("command") == "ingest");
    CHECK(meta.require("pairs_checksum") == file_checksum(c.files.pairs));

    auto broken = c.files;
    broken.target = c.root / "absent.csv";
    CHECK_THROWS_AS(cmd_ingest({broken, out, {}}), ConsistencyError);
}

TEST_CASE("rasterize writes one image per instance at the configured side") {
    const auto c = make_corpus("pipe_raster", 20);
    const auto out = c.root / "out";
    cmd_ingest({c.files, out, {0.70, 0.15, 0}});
    CHECK(cmd_rasterize({c.files, out}) == 20);
    CHECK(read_image(out / "images" / "syn00000.pgm").side() == 200);
    CHECK(cmd_rasterize({c.files, out, 64}) == 20);
    const auto img = out / "images" / "syn00007.pgm";
    CHECK(read_image(img).side() == 64);
    const auto bytes = slurp(img);
    cmd_rasterize({c.files, out, 64});
    CHECK(slurp(img) == bytes);
    CHECK(image_file_name("a/b c:d") == "a_b_c_d.pgm");
}

TEST_CASE("commands need manifests") {
    const auto c = make_corpus("pipe_nomanifest", 10);
    CHECK_THROWS_AS(cmd_rasterize({c.files, c.root / "empty"}), ConsistencyError);
}

TEST_CASE("train gbc records the default configuration") {
    const auto c = make_corpus("pipe_gbc", 40);
    const auto out = c.root / "out";
    cmd_ingest({c.files, out, {0.70, 0.15, 1}});
    TrainParams p;
    p.kind = ModelKind::Gbc;
    p.files = c.files;
    p.out = out;
    const auto s = cmd_train(p);
    const auto model = BoostedModel::deserialize(slurp(s.model_path));
    CHECK(model.config.n_estimators == 500);
    CHECK(model.config.max_depth == 9);
    CHECK(model.config.min_samples_split == 8);
    const auto meta = RunMeta::parse(slurp(out / "runs" / "train_gbc" / "run.meta"));
    CHECK(meta.require("n_estimators") == "500");
    CHECK(detect_model_kind(s.model_path) == ModelKind::Gbc);
}

TEST_CASE("augment doubles the logged training count") {
    const auto c = make_corpus("pipe_augment", 40);
    const auto out = c.root / "out";
    cmd_ingest({c.files, out, {0.70, 0.15, 1}});
    auto p = small_gbc_params(c, out);
    p.augment = true;
    const auto s = cmd_train(p);
    CHECK(s.original_count == 28);
    CHECK(s.train_count == 56);
    const auto log = slurp(out / "reports" / "train_gbc.log");
    CHECK(log.find("train_manifest=28\n") != std::string::npos);
    CHECK(log.find("train_instances=56\n") != std::string::npos);
}

TEST_CASE("deterministic cnn training reproduces model bytes") {
    const auto c = make_corpus("pipe_cnn", 30);
    const auto out = c.root / "out";
    cmd_ingest({c.files, out, {0.70, 0.15, 2}});
    const auto s = cmd_train(tiny_cnn_params(c, out));
    const auto first = slurp(s.model_path);
    cmd_train(tiny_cnn_params(c, out));
    CHECK(slurp(s.model_path) == first);
    cmd_rerun(out / "runs" / "train_cnn" / "run.meta");
    CHECK(slurp(s.model_path) == first);
    CHECK(detect_model_kind(s.model_path) == ModelKind::Cnn);
}

TEST_CASE("evaluate: single model, fixed weight and tuned weight") {
    const auto c = make_corpus("pipe_eval", 80);
    const auto out = c.root / "out";
    cmd_ingest({c.files, out, {0.60, 0.20, 4}});
    const auto cnn = cmd_train(tiny_cnn_params(c, out)).model_path;
    const auto gbc = cmd_train(small_gbc_params(c, out)).model_path;

    EvaluateParams single;
    single.files = c.files;
    single.out = out;
    single.model = gbc;
    const auto r1 = cmd_evaluate(single);
    CHECK_FALSE(r1.weight.has_value());
    auto report = slurp(out / "reports" / "report.txt");
    CHECK(report.find("w=") == std::string::npos);
    CHECK(report.find("accuracy=") == 0);
    CHECK(slurp(out / "reports" / "predictions.csv").rfind("id,p1,p0,p_neg1,score,predicted_label\n", 0) == 0);

    auto fixed = single;
    fixed.model = gbc;
    fixed.model2 = cnn;
    fixed.weight = 0.4;
    CHECK(cmd_evaluate(fixed).weight == 0.4);
    CHECK(slurp(out / "reports" / "report.txt").find("w=0.4\n") != std::string::npos);

    auto tuned = fixed;
    tuned.weight.reset();
    const auto r3 = cmd_evaluate(tuned);
    REQUIRE(r3.weight.has_value());
    const auto grid = weight_grid();
    CHECK(std::find(grid.begin(), grid.end(), *r3.weight) != grid.end());
    report = slurp(out / "reports" / "report.txt");
    CHECK(report.find("tune_0.5=") != std::string::npos);
    CHECK(report.find("cnn_auc=") != std::string::npos);
    CHECK(report.find("gbc_auc=") != std::string::npos);

    const auto before = slurp(out / "reports" / "report.txt");
    cmd_rerun(out / "runs" / "evaluate" / "run.meta");
    CHECK(slurp(out / "reports" / "report.txt") == before);
}

TEST_CASE("evaluate surfaces an undefined metric") {
    const auto c = make_corpus("pipe_undefined", 40);
    const auto out = c.root / "out";
    cmd_ingest({c.files, out, {0.70, 0.15, 1}});
    const auto gbc = cmd_train(small_gbc_params(c, out)).model_path;
    const auto all = read_pairs(c.files);
    std::string neutral;
    for (const auto& d : all)
        if (d.label == 0) neutral += d.id + "\n";
    std::ofstream(out / "manifests" / "test.txt") << neutral;
    EvaluateParams p;
    p.files = c.files;
    p.out = out;
    p.model = gbc;
    CHECK_THROWS_AS(cmd_evaluate(p), UndefinedMetricError);
}

TEST_CASE("subsample draws without replacement and keeps order") {
    const auto d = cpb::test::random_pair(5, 100);
    bool clamped = true;
    const auto s = subsample(d, 30, 9, &clamped);
    CHECK_FALSE(clamped);
    CHECK(s.size() == 30);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        while (pos < d.size() && !(d.x[pos] == s.x[i] && d.y[pos] == s.y[i])) ++pos;
        CHECK(pos < d.size());
        ++pos;
    }
    CHECK(subsample(d, 30, 9) == s);
    CHECK_FALSE(subsample(d, 30, 10) == s);
    auto other = d;
    other.id = "other";
    CHECK_FALSE(subsample(other, 30, 9).x == s.x);
    CHECK(subsample(d, 500, 9, &clamped) == d);
    CHECK(clamped);
    CHECK(subsample(d, 100, 9, &clamped) == d);
    CHECK_FALSE(clamped);
    CHECK_THROWS_AS(subsample(d, 1, 9), ConfigError);
}

TEST_CASE("sparse sweep emits one row per count, clamps and reproduces") {
    const auto root = cpb::test::temp_dir("pipe_sweep");
    SparseSweepParams p;
    p.benchmark.count = 40;
    p.benchmark.min_obs = p.benchmark.max_obs = 120;
    p.out = root;
    p.obs_counts = {20, 50, 100, 300};
    p.side = 32;
    p.channels = kTiny;
    p.cnn.epochs = 1;
    p.cnn.batch_size = 8;
    p.gbc.n_estimators = 5;
    CaptureLog log;
    const auto rows = cmd_sparse_sweep(p);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].obs == 20);
    CHECK(rows[3].clamped == 40);
    CHECK(rows[0].clamped == 0);
    CHECK(std::any_of(log.lines.begin(), log.lines.end(),
                      [](const std::string& l) { return l.find("warning") != std::string::npos; }));
    const auto table = slurp(root / "reports" / "sparse_sweep.csv");
    CHECK(table.rfind("obs,cnn_accuracy,cnn_auc,gbc_accuracy,gbc_auc", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);
    cmd_rerun(root / "runs" / "sparse_sweep" / "run.meta");
    CHECK(slurp(root / "reports" / "sparse_sweep.csv") == table);
    p.obs_counts = {1};
    CHECK_THROWS_AS(cmd_sparse_sweep(p), ConfigError);
}

TEST_CASE("features export") {
    const auto c = make_corpus("pipe_features", 12);
    const auto path = cmd_features({c.files, c.root / "out"});
    const auto csv = slurp(path);
    CHECK(csv.rfind("id,log_n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}

TEST_CASE("channel plans and counts parse") {
    CHECK(parse_channel_plan("8x8,16x16,16x16,32x32,32x32")[3] == std::pair<std::size_t, std::size_t>{32, 32});
    CHECK(format_channel_plan(kDefaultChannelPlan) == "32x32,64x64,128x128,256x256,256x256");
    CHECK_THROWS_AS(parse_channel_plan("8x8"), ConfigError);
    CHECK(parse_obs_counts("100, 200,500") == std::vector<int>{100, 200, 500});
    CHECK_THROWS_AS(parse_obs_counts("100,abc"), ConfigError);
}

}
