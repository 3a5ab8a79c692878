#include "resgp/benchmarks.hpp"
#include "resgp/commands.hpp"
#include "resgp/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace resgp;
using namespace resgp::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("resgp_cli_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

ExperimentConfig quick_config(const std::string& out) {
    return parse_config({{"benchmark", "currin"}, {"budgets", {12, 4}}, {"seed", 3}, {"test_size", 50},
                         {"optimizer", {{"restarts", 2}}}, {"out", out}});
}

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "resgp");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config parsing") {
    CHECK_THROWS_AS(parse_config({{"benchmark", "currin"}, {"bogus", 1}}), UsageError);
    CHECK_THROWS_AS(parse_config({{"optimizer", {{"restart", 2}}}}), UsageError);
    CHECK_THROWS_AS(parse_config({{"benchmark", "nope"}}), UsageError);
    CHECK_THROWS_AS(parse_config({{"budgets", {4, 9}}}), UsageError);
    CHECK_THROWS_AS(parse_config({{"acquisition", "greedy"}}), UsageError);
    CHECK_THROWS_AS(parse_config({{"seed", "x"}}), UsageError);

    ExperimentConfig c = parse_config({{"train_data", "d.csv"}, {"out", "o"}}, "/base");
    CHECK(c.train_data == "/base/d.csv");
    CHECK(c.out_dir == "/base/o");

    ExperimentConfig a = quick_config("x"), b = quick_config("y");
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 4;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("result records round trip, infinities included") {
    ResultRecord r;
    r.config_hash = "abc";
    r.benchmark = "currin";
    r.seed = 7;
    r.budgets = {20, 5};
    r.metrics = {{"rmse", 0.5}, {"mnll", std::numeric_limits<double>::infinity()}};
    r.level_nll = {1.5, -2.25};
    r.residuals = {{1, 20, 3.0, 1.0}, {2, 5, 0.5, 0.25}};
    ResultRecord back = record_from_json(json::parse(record_to_json(r).dump()));
    CHECK(back.metrics.at("mnll") == std::numeric_limits<double>::infinity());
    CHECK(back.metrics.at("rmse") == 0.5);
    CHECK(back.level_nll == r.level_nll);
    CHECK(back.residuals[1].max_abs == 0.5);
    CHECK(record_to_csv(r).find("20-5") != std::string::npos);
    CHECK_THROWS_AS(record_from_json(json::object()), DataError);
}

TEST_CASE("train is reproducible and predict reproduces training data") {
    TempDir dir;
    ExperimentConfig cfg = quick_config(dir / "run");
    ResultRecord first = cmd_train(cfg, Format::structured);
    ResultRecord second = cmd_train(cfg, Format::csv);
    CHECK(first.metrics == second.metrics);
    CHECK(fs::exists(dir / "run/model.json"));
    CHECK(fs::exists(dir / "run/result.json"));
    CHECK(fs::exists(dir / "run/result.csv"));

    // Query the highest-fidelity training inputs.
    MultiFidelityData data = benchmark_training_data("currin", {12, 4}, 3);
    const FidelityData& top = data.levels.back();
    write_file_atomic(dir / "q.csv", format_csv({"x1", "x2"}, top.inputs));
    const std::string path = cmd_predict(dir / "run/model.json", dir / "q.csv", dir / "pred", Format::csv);
    CsvTable t = read_csv(path);
    REQUIRE(t.values.rows() == top.inputs.rows());
    CHECK(t.header == std::vector<std::string>{"y1", "var"});
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        CHECK(std::abs(t.values(i, 0) - top.outputs(i, 0)) <= 1e-4 * (1 + std::abs(top.outputs(i, 0))));
    }

    write_file_atomic(dir / "empty.csv", "x1,x2\n");
    CsvTable e = read_csv(cmd_predict(dir / "run/model.json", dir / "empty.csv", dir / "pred2", Format::csv));
    CHECK(e.values.rows() == 0);
    CHECK(e.header.size() == 2);

    write_file_atomic(dir / "bad.csv", "x1\n0.5\n");
    CHECK_THROWS_AS(cmd_predict(dir / "run/model.json", dir / "bad.csv", dir / "pred3", Format::csv), DimensionError);
}

TEST_CASE("train from a dataset CSV with identical fidelities") {
    TempDir dir;
    MultiFidelityData d;
    Eigen::MatrixXd x(6, 1);
    x << 0.0, 0.2, 0.4, 0.6, 0.8, 1.0;
    Eigen::MatrixXd y = x.array().sin().matrix();
    d.levels.push_back({x, y});
    d.levels.push_back({x.topRows(3), y.topRows(3)});
    write_file_atomic(dir / "train.csv", dataset_to_csv(d));
    ExperimentConfig cfg = parse_config({{"train_data", "train.csv"}, {"out", "out"}}, dir.path.string());
    ResultRecord r = cmd_train(cfg, Format::structured);
    REQUIRE(r.residuals.size() == 2);
    CHECK(r.residuals[1].max_abs == 0.0);
    CHECK(r.metrics.empty());
    CHECK(r.budgets == std::vector<int>{6, 3});
}

TEST_CASE("active writes an audit log that replays") {
    TempDir dir;
    ExperimentConfig cfg = parse_config({{"benchmark", "currin"}, {"budgets", {8, 3}}, {"test_size", 20},
                                         {"pool_size", 40}, {"optimizer", {{"restarts", 1}}}, {"out", dir / "a"}});
    ResultRecord r = cmd_active(cfg, Format::structured);
    CHECK(r.budgets == std::vector<int>{8, 3});
    const auto audit = audit_from_jsonl(read_file(dir / "a/audit.jsonl"));
    CHECK(audit.size() == 11);
    const BenchmarkSpec spec = benchmark_spec("currin");
    CHECK(replay_audit(design_uniform(spec.domain, 40, pool_seed(0)), audit, spec.domain) == 9);
}

TEST_CASE("bounds report") {
    TempDir dir;
    MultiFidelityData d;
    Eigen::MatrixXd x(8, 1);
    for (int i = 0; i < 8; ++i) x(i, 0) = i / 7.0;
    d.levels.push_back({x, (3 * x).array().sin().matrix()});
    write_file_atomic(dir / "train.csv", dataset_to_csv(d));
    cmd_train(parse_config({{"train_data", "train.csv"}, {"out", "m"}}, dir.path.string()), Format::structured);

    Eigen::MatrixXd tx(50, 1);
    for (int i = 0; i < 50; ++i) tx(i, 0) = i / 49.0;
    Eigen::MatrixXd truth(50, 2);
    truth << tx, (3 * tx).array().sin().matrix();
    write_file_atomic(dir / "truth.csv", format_csv({"x1", "y1"}, truth));

    json base = {{"out", "b"}, {"bounds", {{"delta", 0.05}, {"l_y", 3.0}, {"samples", 25}, {"truth_data", "truth.csv"}}}};
    BoundReport r1 = cmd_bounds(dir / "m/model.json", parse_config(base, dir.path.string()), Format::structured);
    CHECK(r1.constants.covering == covering_number_bound(DomainBox::unit(1), r1.tau));
    CHECK(r1.curve_x.rows() == 25);
    REQUIRE(r1.coverage.has_value());
    CHECK(*r1.coverage >= 0.95);
    CHECK(fs::exists(dir / "b/bounds.json"));

    base["bounds"]["delta"] = 0.1;
    BoundReport r2 = cmd_bounds(dir / "m/model.json", parse_config(base, dir.path.string()), Format::csv);
    CHECK(r2.constants.beta < r1.constants.beta);
    CHECK(fs::exists(dir / "b/bounds.csv"));
    CHECK(fs::exists(dir / "b/bounds_curve.csv"));
}

TEST_CASE("bench repeats are deterministic and validated") {
    TempDir dir;
    json base = {{"seed", 11}, {"test_size", 30}, {"optimizer", {{"restarts", 1}}},
                 {"bench", {{"benchmarks", {"currin"}}, {"repeats", 1}, {"budgets", {{"currin", {10, 3}}}}}}};
    base["out"] = dir / "one";
    auto one = cmd_bench(parse_config(base), Format::structured, 1);
    base["out"] = dir / "three";
    base["bench"]["repeats"] = 3;
    auto three = cmd_bench(parse_config(base), Format::csv, 2);
    REQUIRE(one.size() == 1);
    REQUIRE(three.size() == 3);
    CHECK(one[0].record.metrics == three[0].record.metrics);
    CHECK(fs::exists(dir / "three/summary.csv"));
    CHECK(fs::exists(dir / "three/series.csv"));
    CHECK(fs::exists(dir / "three/datasets/currin_r0.csv"));

    base["bench"]["repeats"] = 0;
    CHECK_THROWS_AS(cmd_bench(parse_config(base), Format::csv, 1), UsageError);
}

TEST_CASE("exit codes") {
    TempDir dir;
    CHECK(run_args({"frobnicate"}) == 1);
    CHECK(run_args({"train"}) == 1);
    std::ofstream(dir / "bad.json") << R"({"benchmark": "currin", "colour": 1})";
    CHECK(run_args({"train", "--config", dir / "bad.json"}) == 1);
    std::ofstream(dir / "ok.json") << R"({"benchmark": "currin", "budgets": [6, 2], "test_size": 5})";
    CHECK(run_args({"predict", "--model", dir / "missing.json", "--queries", dir / "q.csv"}) == 2);
    CHECK(run_args({"train", "--config", dir / "ok.json", "--out", dir / "o", "--format", "csv"}) == 0);
    CHECK(fs::exists(dir / "o/result.csv"));
}
