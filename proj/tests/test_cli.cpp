#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "afex/basis.hpp"
#include "afex/checkpoint.hpp"
#include "afex/cli.hpp"
#include "afex/csv.hpp"
#include "afex/ioutil.hpp"
#include "afex/rng.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using afex::cli::ConfigError;
using nlohmann::json;
using testutil::bit_equal;

namespace {

/// Scratch directory removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        static int counter = 0;
        path = fs::path("/tmp") / ("afex-cli-" + std::to_string(::getpid()) + "-" +
                                   std::to_string(counter++) + "-" + name);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    std::string file(const std::string& name, const std::string& contents) const {
        const std::string p = (path / name).string();
        std::ofstream out(p);
        out << contents;
        return p;
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
    bool has(const std::string& name) const { return fs::exists(path / name); }
};

std::string small_train_config(const std::string& out_dir, std::size_t iterations = 2) {
    json config;
    config["oracle"] = {{"kind", "analytic"}, {"name", "conditional"}};
    config["train"] = {{"batch_size", 64}, {"iterations", iterations}, {"k", 2},
                       {"seed", 5}};
    config["out_dir"] = out_dir;
    return config.dump(2);
}

}  // namespace

TEST_CASE("run configs parse with defaults and reject junk") {
    TempDir dir("config");
    const std::string path = dir.file("run.json", small_train_config(dir.sub("out")));
    const afex::cli::RunConfig config = afex::cli::load_run_config(path);
    CHECK(config.oracle.kind == "analytic");
    CHECK(config.oracle.name == "conditional");
    CHECK(config.train.batch_size == 64);
    CHECK(config.train.iterations == 2);
    CHECK(config.train.learning_rate == 1e-3);  // untouched default
    CHECK(config.methods.size() == 5);          // default: every method
    CHECK(config.emit_svg);

    const std::string junk = dir.file("junk.json", R"({"oracle":{"kind":"analytic","name":"conditional"},"momentum":1})");
    CHECK_THROWS_WITH_AS(afex::cli::load_run_config(junk),
                         doctest::Contains("unknown key 'momentum'"), ConfigError);

    const std::string no_oracle = dir.file("none.json", R"({"out_dir":"x"})");
    CHECK_THROWS_AS(afex::cli::load_run_config(no_oracle), ConfigError);

    const std::string bad_method = dir.file(
        "method.json",
        R"({"oracle":{"kind":"analytic","name":"conditional"},"methods":["sorcery"]})");
    CHECK_THROWS_AS(afex::cli::load_run_config(bad_method), ConfigError);

    CHECK_THROWS_AS(afex::cli::load_run_config(dir.sub("absent.json")), ConfigError);
}

TEST_CASE("explain specs parse neighborhoods and pair lists") {
    TempDir dir("spec");
    const std::string path = dir.file("request.json", R"({
      "oracle": {"kind": "analytic", "name": "product"},
      "center": [0.0, 0.5, 0.0, 0.0, 0.0],
      "neighborhood": {"kind": "box", "half_width": 1.0},
      "sample_count": 200,
      "pairs": [[0, 1], [2, 4]],
      "seed": 11
    })");
    const afex::cli::ExplainSpec spec = afex::cli::load_explain_spec(path);
    CHECK(spec.request.center.size() == 5);
    CHECK(spec.request.sample_count == 200);
    CHECK_FALSE(spec.request.all_pairs);
    REQUIRE(spec.request.pairs.size() == 2);
    CHECK(spec.request.pairs[1].first == 2);
    CHECK(spec.request.pairs[1].second == 4);
    CHECK(spec.request.seed == 11);
    const auto hw = spec.request.neighborhood.resolve(5);
    for (double h : hw) CHECK(h == 1.0);

    const std::string all = dir.file("all.json", R"({
      "oracle": {"kind": "analytic", "name": "conditional"},
      "center": [0.0, 2.0],
      "pairs": "all"
    })");
    CHECK(afex::cli::load_explain_spec(all).request.all_pairs);

    const std::string bad = dir.file("bad.json", R"({
      "oracle": {"kind": "analytic", "name": "conditional"},
      "center": [0.0, 2.0],
      "neighborhood": {"kind": "sphere", "half_width": 1.0}
    })");
    CHECK_THROWS_AS(afex::cli::load_explain_spec(bad), ConfigError);
}

TEST_CASE("oracle specs map onto the oracle factories") {
    afex::cli::OracleSpec analytic;
    analytic.kind = "analytic";
    analytic.name = "chessboard";
    CHECK(afex::cli::make_oracle(analytic)->dim() == 5);

    analytic.name = "no-such-function";
    CHECK_THROWS_AS(afex::cli::make_oracle(analytic), ConfigError);

    afex::cli::OracleSpec file;
    file.kind = "file";
    file.path = "/nonexistent/data.csv";
    CHECK_THROWS_AS(afex::cli::make_oracle(file), ConfigError);
}

TEST_CASE("csv datasets split the trailing target column") {
    TempDir dir("data");
    const std::string path = dir.file("data.csv", "1,2\n3,4\n");
    const auto [x, y] = afex::cli::load_csv_dataset(path);
    CHECK(x.rows() == 2);
    CHECK(x.cols() == 1);
    CHECK(x.at(0, 0) == 1.0);
    CHECK(x.at(1, 0) == 3.0);
    CHECK(y[0] == 2.0);
    CHECK(y[1] == 4.0);

    const std::string headed = dir.file("headed.csv", "a,b,target\n1,2,3\n");
    const auto [hx, hy] = afex::cli::load_csv_dataset(headed);
    CHECK(hx.cols() == 2);
    CHECK(hy[0] == 3.0);

    const std::string thin = dir.file("thin.csv", "1\n2\n");
    CHECK_THROWS_AS(afex::cli::load_csv_dataset(thin), ConfigError);
}

TEST_CASE("train command writes checkpoint, trace, manifest and plot") {
    TempDir dir("train");
    const std::string config =
        dir.file("run.json", small_train_config(dir.sub("out")));
    CHECK(afex::cli::run_train(config, std::nullopt, std::nullopt) == 0);

    CHECK(dir.has("out/checkpoint.json"));
    CHECK(dir.has("out/trace.csv"));
    CHECK(dir.has("out/manifest.json"));
    CHECK(dir.has("out/loss_trace.svg"));
    CHECK_FALSE(dir.has("out/checkpoint.json.tmp"));

    const json manifest = json::parse(afex::read_file(dir.sub("out/manifest.json")));
    CHECK(manifest.at("kind") == "afex-run-manifest");
    CHECK(manifest.at("method") == "linear-regression");
    CHECK(manifest.at("iterations") == 2);
    CHECK(manifest.at("seed") == 5);
    CHECK(manifest.at("qr_steps").get<std::size_t>() +
              manifest.at("ridge_steps").get<std::size_t>() ==
          2);
}

TEST_CASE("trace csv carries one labeled row per iteration") {
    TempDir dir("trace");
    const std::string config =
        dir.file("run.json", small_train_config(dir.sub("out"), 3));
    REQUIRE(afex::cli::run_train(config, std::nullopt, std::nullopt) == 0);
    const std::string text = afex::read_file(dir.sub("out/trace.csv"));
    CHECK(text.rfind("iteration,method,mse\n", 0) == 0);
    CHECK(text.find("0,linear-regression,") != std::string::npos);
    CHECK(text.find("2,linear-regression,") != std::string::npos);
    CHECK(text.find("3,linear-regression,") == std::string::npos);
}

TEST_CASE("same config and seed produce byte-identical checkpoints") {
    TempDir dir("determinism");
    const std::string config_a =
        dir.file("a.json", small_train_config(dir.sub("out-a")));
    const std::string config_b =
        dir.file("b.json", small_train_config(dir.sub("out-b")));
    REQUIRE(afex::cli::run_train(config_a, std::nullopt, std::nullopt) == 0);
    REQUIRE(afex::cli::run_train(config_b, std::nullopt, std::nullopt) == 0);
    CHECK(afex::read_file(dir.sub("out-a/checkpoint.json")) ==
          afex::read_file(dir.sub("out-b/checkpoint.json")));

    // A different seed changes the bytes.
    REQUIRE(afex::cli::run_train(config_a, dir.sub("out-c"), 99) == 0);
    CHECK(afex::read_file(dir.sub("out-a/checkpoint.json")) !=
          afex::read_file(dir.sub("out-c/checkpoint.json")));
}

TEST_CASE("zero-iteration training checkpoints the fresh initialization") {
    TempDir dir("fresh");
    const std::string config =
        dir.file("run.json", small_train_config(dir.sub("out"), 0));
    REQUIRE(afex::cli::run_train(config, std::nullopt, std::nullopt) == 0);

    const afex::TrainedModel model =
        afex::load_checkpoint(dir.sub("out/checkpoint.json"));
    afex::Rng rng(5);
    const afex::BasisBank fresh = afex::BasisBank::initialize(2, 2, rng);
    auto stored = model.bank.parameters();
    auto expected = fresh.parameters();
    REQUIRE(stored.size() == expected.size());
    for (std::size_t i = 0; i < stored.size(); ++i) {
        CHECK(bit_equal(*stored[i], *expected[i]));
    }
    CHECK(afex::read_file(dir.sub("out/trace.csv")) == "iteration,method,mse\n");
    CHECK_FALSE(dir.has("out/loss_trace.svg"));  // nothing to plot
}

TEST_CASE("config problems and runtime failures use distinct exit codes") {
    TempDir dir("codes");
    CHECK(afex::cli::run_train(dir.sub("missing.json"), std::nullopt, std::nullopt) == 1);

    const std::string junk = dir.file("junk.json", R"({"oracle":{"kind":"analytic","name":"conditional"},"bogus":1})");
    CHECK(afex::cli::run_train(junk, std::nullopt, std::nullopt) == 1);

    const std::string tiny = dir.file("tiny.json", R"({
      "oracle": {"kind": "analytic", "name": "conditional"},
      "train": {"batch_size": 4, "k": 2},
      "out_dir": ")" + dir.sub("out") + R"("
    })");
    CHECK(afex::cli::run_train(tiny, std::nullopt, std::nullopt) == 1);

    // The oracle command dies at the first sampled batch: a runtime failure.
    json broken;
    broken["oracle"] = {{"kind", "command"}, {"argv", {"false"}}, {"dim", 2}};
    broken["train"] = {{"batch_size", 64}, {"iterations", 1}, {"k", 2}};
    broken["out_dir"] = dir.sub("out2");
    const std::string cmd = dir.file("cmd.json", broken.dump());
    CHECK(afex::cli::run_train(cmd, std::nullopt, std::nullopt) == 2);
}

TEST_CASE("explain command emits one curve file per feature") {
    TempDir dir("explain");
    const std::string config =
        dir.file("run.json", small_train_config(dir.sub("model")));
    REQUIRE(afex::cli::run_train(config, std::nullopt, std::nullopt) == 0);

    const std::string request = dir.file("request.json", R"({
      "oracle": {"kind": "analytic", "name": "conditional"},
      "center": [0.0, 2.0],
      "neighborhood": {"kind": "box", "half_width": 0.5},
      "sample_count": 80,
      "grid_resolution": 21,
      "seed": 7
    })");
    CHECK(afex::cli::run_explain(dir.sub("model/checkpoint.json"), request,
                                 dir.sub("exp"), std::nullopt) == 0);
    CHECK(dir.has("exp/explanation.json"));
    CHECK(dir.has("exp/curve_0.csv"));
    CHECK(dir.has("exp/curve_1.csv"));
    CHECK_FALSE(dir.has("exp/curve_2.csv"));
    CHECK(dir.has("exp/curve_0.svg"));

    const json doc = json::parse(afex::read_file(dir.sub("exp/explanation.json")));
    CHECK(doc.at("kind") == "afex-explanation");
    CHECK(doc.at("residual_mse").get<double>() >= 0.0);
    CHECK(doc.at("weights").size() == 5);  // k d singles plus bias
    CHECK(doc.at("importances").size() == 2);

    const afex::csv::Table curve =
        afex::csv::read_numeric_file(dir.sub("exp/curve_0.csv"));
    CHECK(curve.header == std::vector<std::string>{"x", "contribution"});
    CHECK(curve.rows.size() == 21);
}

TEST_CASE("pair requests against a pairs-free checkpoint fail as config errors") {
    TempDir dir("capability");
    const std::string config =
        dir.file("run.json", small_train_config(dir.sub("model")));
    REQUIRE(afex::cli::run_train(config, std::nullopt, std::nullopt) == 0);

    const std::string request = dir.file("request.json", R"({
      "oracle": {"kind": "analytic", "name": "conditional"},
      "center": [0.0, 2.0],
      "sample_count": 80,
      "pairs": [[0, 1]]
    })");
    CHECK(afex::cli::run_explain(dir.sub("model/checkpoint.json"), request,
                                 dir.sub("exp"), std::nullopt) == 1);

    // Unreadable checkpoint: also a config problem.
    CHECK(afex::cli::run_explain(dir.sub("model/none.json"), request, dir.sub("exp2"),
                                 std::nullopt) == 1);
}

TEST_CASE("comparison runs are aligned, deterministic and ordered by config") {
    TempDir dir("compare");
    json config;
    config["oracle"] = {{"kind", "analytic"}, {"name", "conditional"}};
    config["train"] = {{"batch_size", 64}, {"iterations", 2}, {"k", 2}, {"seed", 3}};
    config["methods"] = {"linear-regression", "cosine"};
    config["out_dir"] = dir.sub("out");
    const std::string path = dir.file("run.json", config.dump());

    REQUIRE(afex::cli::run_compare(path, std::nullopt, std::nullopt) == 0);
    const std::string once = afex::read_file(dir.sub("out/compare.csv"));
    CHECK(once.find("0,linear-regression,") != std::string::npos);
    CHECK(once.find("1,cosine,") != std::string::npos);
    CHECK(dir.has("out/compare.svg"));

    REQUIRE(afex::cli::run_compare(path, dir.sub("again"), std::nullopt) == 0);
    CHECK(afex::read_file(dir.sub("again/compare.csv")) == once);

    json empty = config;
    empty["methods"] = json::array();
    const std::string none = dir.file("empty.json", empty.dump());
    CHECK(afex::cli::run_compare(none, std::nullopt, std::nullopt) == 1);
}

TEST_CASE("oracle-eval annotates a point file with predictions") {
    TempDir dir("eval");
    const std::string data = dir.file("points.csv", "x0,x1\n2,1\n2,-1\n3,0\n");
    json config;
    config["oracle"] = {{"kind", "analytic"}, {"name", "conditional"}};
    config["data"] = data;
    config["out_dir"] = dir.sub("out");
    const std::string path = dir.file("eval.json", config.dump());

    REQUIRE(afex::cli::run_oracle_eval(path, std::nullopt) == 0);
    const std::string text = afex::read_file(dir.sub("out/predictions.csv"));
    CHECK(text == "x0,x1,prediction\n2,1,4\n2,-1,2\n3,0,9\n");

    const std::string fat = dir.file("fat.csv", "1,2,3\n");
    json bad = config;
    bad["data"] = fat;
    const std::string bad_path = dir.file("bad.json", bad.dump());
    CHECK(afex::cli::run_oracle_eval(bad_path, std::nullopt) == 1);
}
