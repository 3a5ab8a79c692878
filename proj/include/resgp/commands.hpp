#pragma once

#include "resgp/active.hpp"
#include "resgp/bounds.hpp"
#include "resgp/error.hpp"
#include "resgp/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace resgp::cli {

// Bad flags or an invalid configuration. Exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class Format { csv, structured };

struct BoundSettings {
    double delta = 0.05;
    double tau = 1e-3;
    double l_y = 1.0;
    int samples = 200;                 // points on the reported g curve
    std::string truth_data;            // optional CSV x1..xl, y1 for coverage
    std::optional<DomainBox> domain;   // defaults to the model's domain
};

struct BenchSettings {
    std::vector<std::string> benchmarks;  // defaults to the five analytic problems plus pendulum
    int repeats = 1;
    std::vector<std::uint64_t> seeds;     // per repeat; defaults to seed + r
    std::map<std::string, std::vector<int>> budgets;  // overrides of the reference budgets
    bool export_datasets = true;
};

// One experiment, read from a JSON file. Relative paths resolve against the
// directory of that file.
struct ExperimentConfig {
    std::string benchmark;    // built-in problem, or empty when train_data is given
    std::string train_data;   // CSV x1..xl, y1..yd, fidelity
    std::string test_data;    // CSV x1..xl, y1..yd at the highest fidelity
    std::vector<int> budgets;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;
    bool parallel_levels = false;
    bool allow_non_nested = false;
    Acquisition acquisition = Acquisition::variance;
    int pool_size = 0;        // 0 means 10 x budgets[0]
    int test_size = 1000;
    std::vector<std::string> metrics = {"rmse", "r2", "mnll", "nrmse"};
    std::string out_dir = ".";
    BoundSettings bounds;
    BenchSettings bench;

    nlohmann::json source;    // normalised input, hashed into records
};

ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// FNV-1a over the canonical JSON of the config (with the effective seed).
std::string config_hash(const ExperimentConfig& cfg);

struct ResidualSummary {
    int fidelity = 0;
    long points = 0;
    double max_abs = 0.0;
    double rms = 0.0;
};

struct ResultRecord {
    std::string config_hash;
    std::string benchmark;
    std::uint64_t seed = 0;
    std::vector<int> budgets;
    std::map<std::string, double> metrics;  // +inf is a valid mnll value
    double wall_time = 0.0;                 // seconds
    std::vector<double> level_nll;
    std::string model_path;
    std::vector<ResidualSummary> residuals;
};

nlohmann::json record_to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);
std::string record_to_csv(const ResultRecord& r);

// Seeds of the held-out test design and of the active-learning pool.
std::uint64_t test_seed(std::uint64_t seed);
std::uint64_t pool_seed(std::uint64_t seed);

// Training data and a highest-fidelity test set for a configured benchmark.
MultiFidelityData benchmark_training_data(const std::string& name, const std::vector<int>& budgets, std::uint64_t seed);
FidelityData benchmark_test_data(const std::string& name, int test_size, std::uint64_t seed);

ResultRecord cmd_train(const ExperimentConfig& cfg, Format fmt);

// Writes predictions.{csv,json} into out_dir and returns its path.
std::string cmd_predict(const std::string& model_path, const std::string& query_path, const std::string& out_dir,
                        Format fmt);

ResultRecord cmd_active(const ExperimentConfig& cfg, Format fmt);

struct BoundReport {
    UniformBound constants;
    double delta = 0.0, tau = 0.0, l_y = 0.0;
    Eigen::MatrixXd curve_x;   // samples x l
    Eigen::VectorXd curve_mean, curve_sd, curve_g;
    std::optional<double> coverage;
    long coverage_points = 0;
};

BoundReport cmd_bounds(const std::string& model_path, const ExperimentConfig& cfg, Format fmt);

struct BenchRow {
    std::string benchmark;
    int repeat = 0;
    ResultRecord record;
};

// Runs every (benchmark, repeat) pair, `threads` at a time, and writes the
// results table, the summary and a long-format series file.
std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg, Format fmt, int threads);

// Full command line. Returns the process exit code: 0 success, 1 usage,
// 2 data error, 3 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace resgp::cli
