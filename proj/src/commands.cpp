#include "resgp/commands.hpp"

#include "resgp/benchmarks.hpp"
#include "resgp/bounds.hpp"
#include "resgp/io.hpp"
#include "resgp/model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

namespace resgp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kAllMetrics = {"rmse", "r2", "mnll", "nrmse"};

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base) / path).lexically_normal().string();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (!allowed.count(k)) throw UsageError("unknown key '" + k + "' in " + where);
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw UsageError(std::string("config key '") + key + "' has the wrong type");
    }
}

DomainBox domain_from_json(const json& j) {
    check_keys(j, {"lower", "upper"}, "domain");
    auto lo = j.at("lower").get<std::vector<double>>();
    auto hi = j.at("upper").get<std::vector<double>>();
    if (lo.size() != hi.size() || lo.empty()) throw UsageError("domain lower/upper must have equal non-zero length");
    try {
        return DomainBox(Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                         Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())));
    } catch (const Error& e) {
        throw UsageError(std::string("domain: ") + e.what());
    }
}

void check_budgets(const std::vector<int>& b, const std::string& where) {
    for (std::size_t f = 0; f < b.size(); ++f) {
        if (b[f] < 1) throw UsageError(where + ": budgets must be >= 1");
        if (f > 0 && b[f] > b[f - 1]) throw UsageError(where + ": budgets must be non-increasing");
    }
}

json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double number_from(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw DataError("bad numeric value '" + s + "' in result record");
}

std::string fmt_double(double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}

std::string budgets_label(const std::vector<int>& b) {
    std::string s;
    for (std::size_t i = 0; i < b.size(); ++i) s += (i ? "-" : "") + std::to_string(b[i]);
    return s;
}

std::string format_ext(Format fmt) {
    return fmt == Format::csv ? ".csv" : ".json";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::vector<ResidualSummary> summarize_residuals(const ResGPModel& model) {
    std::vector<ResidualSummary> out;
    for (int f = 1; f <= model.fidelities(); ++f) {
        const TrainedLevel& lv = model.level(f);
        const Eigen::MatrixXd raw = lv.residuals().rowwise() + lv.column_means();
        ResidualSummary s;
        s.fidelity = f;
        s.points = static_cast<long>(lv.size());
        s.max_abs = raw.size() ? raw.cwiseAbs().maxCoeff() : 0.0;
        s.rms = raw.size() ? std::sqrt(raw.squaredNorm() / double(raw.size())) : 0.0;
        out.push_back(s);
    }
    return out;
}

std::map<std::string, double> selected_metrics(const Metrics& m, const std::vector<std::string>& names) {
    std::map<std::string, double> out;
    for (const auto& n : names) {
        if (n == "rmse") out[n] = m.rmse;
        else if (n == "r2") out[n] = m.r2;
        else if (n == "mnll") out[n] = m.mnll;
        else if (n == "nrmse") out[n] = m.nrmse;
    }
    return out;
}

FidelityData read_test_csv(const std::string& path, Eigen::Index l, Eigen::Index d) {
    CsvTable t = read_csv(path);
    FidelityData out;
    out.inputs = inputs_from_csv(t, l);
    out.outputs.resize(t.values.rows(), d);
    for (Eigen::Index i = 1; i <= d; ++i) {
        long c = t.column("y" + std::to_string(i));
        if (c < 0) throw DimensionError("test CSV lacks column y" + std::to_string(i));
        out.outputs.col(i - 1) = t.values.col(c);
    }
    return out;
}

TrainOptions train_options(const ExperimentConfig& cfg, std::optional<DomainBox> domain) {
    TrainOptions o;
    o.optimizer = cfg.optimizer;
    o.optimizer.seed = cfg.seed;
    o.domain = std::move(domain);
    o.parallel = cfg.parallel_levels;
    o.allow_non_nested = cfg.allow_non_nested;
    return o;
}

void write_record(const ResultRecord& r, const std::string& dir, const std::string& stem, Format fmt) {
    const std::string path = (fs::path(dir) / (stem + format_ext(fmt))).string();
    write_file_atomic(path, fmt == Format::csv ? record_to_csv(r) : record_to_json(r).dump(2) + "\n");
}

Metrics score(const ResGPModel& model, const FidelityData& test) {
    Eigen::MatrixXd mu;
    Eigen::VectorXd var;
    model.predict_rows(test.inputs, mu, var);
    return metrics(mu, var, test.outputs);
}

// Trains one configured experiment and scores it on its test set, if any.
ResultRecord run_experiment(const ExperimentConfig& cfg, const std::string& model_path,
                            const std::string& dataset_path) {
    const auto t0 = std::chrono::steady_clock::now();
    ResultRecord rec;
    rec.seed = cfg.seed;
    rec.config_hash = config_hash(cfg);

    MultiFidelityData data;
    std::optional<DomainBox> domain;
    std::optional<FidelityData> test;
    if (!cfg.benchmark.empty()) {
        const BenchmarkSpec spec = benchmark_spec(cfg.benchmark);
        rec.benchmark = cfg.benchmark;
        rec.budgets = cfg.budgets.empty() ? reference_budgets(spec.name) : cfg.budgets;
        data = benchmark_training_data(cfg.benchmark, rec.budgets, cfg.seed);
        domain = spec.domain;
        test = benchmark_test_data(cfg.benchmark, cfg.test_size, test_seed(cfg.seed));
    } else {
        data = dataset_from_csv(read_csv(cfg.train_data));
        data.validate();
        rec.benchmark = fs::path(cfg.train_data).stem().string();
        for (const auto& lv : data.levels) rec.budgets.push_back(static_cast<int>(lv.inputs.rows()));
        if (!cfg.test_data.empty()) test = read_test_csv(cfg.test_data, data.input_dim(), data.output_dim());
    }
    if (!dataset_path.empty()) write_file_atomic(dataset_path, dataset_to_csv(data));

    const ResGPModel model = train(data, train_options(cfg, domain));
    for (int f = 1; f <= model.fidelities(); ++f) rec.level_nll.push_back(model.level(f).fit_nll());
    rec.residuals = summarize_residuals(model);
    if (test && test->inputs.rows() > 0) rec.metrics = selected_metrics(score(model, *test), cfg.metrics);
    if (!model_path.empty()) {
        save_model(model, model_path);
        rec.model_path = model_path;
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace

ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
    check_keys(j,
               {"benchmark", "train_data", "test_data", "budgets", "seed", "optimizer", "parallel_levels",
                "allow_non_nested", "acquisition", "pool_size", "test_size", "metrics", "out", "bounds", "bench"},
               "config");
    ExperimentConfig c;
    c.benchmark = get_or<std::string>(j, "benchmark", "");
    c.train_data = resolve(base_dir, get_or<std::string>(j, "train_data", ""));
    c.test_data = resolve(base_dir, get_or<std::string>(j, "test_data", ""));
    if (!c.benchmark.empty() && !c.train_data.empty()) throw UsageError("config: give either benchmark or train_data");
    if (!c.benchmark.empty()) {
        try {
            benchmark_spec(c.benchmark);
        } catch (const DataError& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
    }
    c.budgets = get_or<std::vector<int>>(j, "budgets", {});
    check_budgets(c.budgets, "config");
    c.seed = get_or<std::uint64_t>(j, "seed", 0);

    if (auto it = j.find("optimizer"); it != j.end()) {
        check_keys(*it, {"restarts", "max_iters", "grad_tol", "jitter", "learn_noise", "center", "log_lower", "log_upper"},
                   "optimizer");
        auto& o = c.optimizer;
        o.restarts = get_or(*it, "restarts", o.restarts);
        o.max_iters = get_or(*it, "max_iters", o.max_iters);
        o.grad_tol = get_or(*it, "grad_tol", o.grad_tol);
        o.jitter = get_or(*it, "jitter", o.jitter);
        o.learn_noise = get_or(*it, "learn_noise", o.learn_noise);
        o.center = get_or(*it, "center", o.center);
        o.log_lower = get_or(*it, "log_lower", o.log_lower);
        o.log_upper = get_or(*it, "log_upper", o.log_upper);
        if (o.restarts < 1 || o.max_iters < 1 || !(o.grad_tol > 0) || !(o.jitter >= 0) || !(o.log_lower < o.log_upper)) {
            throw UsageError("optimizer: restarts, max_iters >= 1, grad_tol > 0, jitter >= 0, log_lower < log_upper");
        }
    }
    c.parallel_levels = get_or(j, "parallel_levels", false);
    c.allow_non_nested = get_or(j, "allow_non_nested", false);

    const auto acq = get_or<std::string>(j, "acquisition", "variance");
    if (acq == "variance") c.acquisition = Acquisition::variance;
    else if (acq == "random") c.acquisition = Acquisition::random;
    else throw UsageError("acquisition must be 'variance' or 'random'");
    c.pool_size = get_or(j, "pool_size", 0);
    c.test_size = get_or(j, "test_size", 1000);
    if (c.pool_size < 0 || c.test_size < 0) throw UsageError("pool_size and test_size must be >= 0");

    c.metrics = get_or<std::vector<std::string>>(j, "metrics", kAllMetrics);
    for (const auto& m : c.metrics) {
        if (std::find(kAllMetrics.begin(), kAllMetrics.end(), m) == kAllMetrics.end()) {
            throw UsageError("unknown metric '" + m + "'");
        }
    }
    c.out_dir = resolve(base_dir, get_or<std::string>(j, "out", "."));

    if (auto it = j.find("bounds"); it != j.end()) {
        check_keys(*it, {"delta", "tau", "l_y", "samples", "truth_data", "domain"}, "bounds");
        auto& b = c.bounds;
        b.delta = get_or(*it, "delta", b.delta);
        b.tau = get_or(*it, "tau", b.tau);
        b.l_y = get_or(*it, "l_y", b.l_y);
        b.samples = get_or(*it, "samples", b.samples);
        b.truth_data = resolve(base_dir, get_or<std::string>(*it, "truth_data", ""));
        if (auto d = it->find("domain"); d != it->end()) b.domain = domain_from_json(*d);
        if (b.samples < 0) throw UsageError("bounds: samples must be >= 0");
    }

    if (auto it = j.find("bench"); it != j.end()) {
        check_keys(*it, {"benchmarks", "repeats", "seeds", "budgets", "export_datasets"}, "bench");
        auto& b = c.bench;
        b.benchmarks = get_or<std::vector<std::string>>(*it, "benchmarks", {});
        for (const auto& n : b.benchmarks) {
            try {
                benchmark_spec(n);
            } catch (const DataError& e) {
                throw UsageError(std::string("bench: ") + e.what());
            }
        }
        b.repeats = get_or(*it, "repeats", 1);
        b.seeds = get_or<std::vector<std::uint64_t>>(*it, "seeds", {});
        b.budgets = get_or<std::map<std::string, std::vector<int>>>(*it, "budgets", {});
        for (const auto& [name, bud] : b.budgets) check_budgets(bud, "bench budgets for " + name);
        b.export_datasets = get_or(*it, "export_datasets", true);
    }
    c.source = j;
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    return parse_config(j, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = cfg.source.is_null() ? json::object() : cfg.source;
    j["seed"] = cfg.seed;
    j.erase("out");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

json record_to_json(const ResultRecord& r) {
    json j;
    j["config_hash"] = r.config_hash;
    j["benchmark"] = r.benchmark;
    j["seed"] = r.seed;
    j["budgets"] = r.budgets;
    json m = json::object();
    for (const auto& [k, v] : r.metrics) m[k] = number(v);
    j["metrics"] = m;
    j["wall_time"] = r.wall_time;
    json nll = json::array();
    for (double v : r.level_nll) nll.push_back(number(v));
    j["level_nll"] = nll;
    j["model_path"] = r.model_path;
    json res = json::array();
    for (const auto& s : r.residuals) {
        res.push_back({{"fidelity", s.fidelity}, {"points", s.points}, {"max_abs", s.max_abs}, {"rms", s.rms}});
    }
    j["residuals"] = res;
    return j;
}

ResultRecord record_from_json(const json& j) {
    try {
        ResultRecord r;
        r.config_hash = j.at("config_hash").get<std::string>();
        r.benchmark = j.at("benchmark").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.budgets = j.at("budgets").get<std::vector<int>>();
        for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = number_from(v);
        r.wall_time = j.at("wall_time").get<double>();
        for (const auto& v : j.at("level_nll")) r.level_nll.push_back(number_from(v));
        r.model_path = j.at("model_path").get<std::string>();
        for (const auto& s : j.at("residuals")) {
            r.residuals.push_back({s.at("fidelity").get<int>(), s.at("points").get<long>(),
                                   s.at("max_abs").get<double>(), s.at("rms").get<double>()});
        }
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("result record: ") + e.what());
    }
}

std::string record_to_csv(const ResultRecord& r) {
    std::vector<std::pair<std::string, std::string>> cols = {
        {"config_hash", r.config_hash}, {"benchmark", r.benchmark}, {"seed", std::to_string(r.seed)},
        {"budgets", budgets_label(r.budgets)}};
    for (const auto& name : kAllMetrics) {
        auto it = r.metrics.find(name);
        if (it != r.metrics.end()) cols.emplace_back(name, fmt_double(it->second));
    }
    cols.emplace_back("wall_time", fmt_double(r.wall_time));
    for (std::size_t f = 0; f < r.level_nll.size(); ++f) {
        cols.emplace_back("nll_f" + std::to_string(f + 1), fmt_double(r.level_nll[f]));
    }
    for (const auto& s : r.residuals) {
        cols.emplace_back("residual_max_f" + std::to_string(s.fidelity), fmt_double(s.max_abs));
    }
    cols.emplace_back("model_path", r.model_path);
    std::string head, row;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        head += (i ? "," : "") + cols[i].first;
        row += (i ? "," : "") + cols[i].second;
    }
    return head + "\n" + row + "\n";
}

std::uint64_t test_seed(std::uint64_t seed) {
    return level_seed(seed, 1001);
}

std::uint64_t pool_seed(std::uint64_t seed) {
    return level_seed(seed, 1002);
}

MultiFidelityData benchmark_training_data(const std::string& name, const std::vector<int>& budgets,
                                          std::uint64_t seed) {
    const BenchmarkSpec spec = benchmark_spec(name);
    if (spec.name != BenchmarkName::pendulum) return benchmark_dataset(spec, budgets, seed);
    // The pendulum design is an equispaced grid; the seed plays no part.
    if (budgets.size() == 2 && budgets[1] >= 2) {
        for (int stride = 1; stride < budgets[0]; ++stride) {
            if ((budgets[0] - 1) / stride + 1 == budgets[1]) return pendulum_dataset(budgets[0], stride);
        }
    }
    throw UsageError("pendulum budgets [n_low, n_high] must take every k-th of n_low grid points");
}

FidelityData benchmark_test_data(const std::string& name, int test_size, std::uint64_t seed) {
    const BenchmarkSpec spec = benchmark_spec(name);
    FidelityData t;
    if (test_size == 0) {
        t.inputs.resize(0, spec.input_dim);
        t.outputs.resize(0, spec.output_dim);
        return t;
    }
    t.inputs = design_uniform(spec.domain, test_size, seed);
    t.outputs = evaluate_rows(spec, spec.fidelities, t.inputs);
    return t;
}

ResultRecord cmd_train(const ExperimentConfig& cfg, Format fmt) {
    if (cfg.benchmark.empty() && cfg.train_data.empty()) throw UsageError("train: config needs benchmark or train_data");
    ensure_dir(cfg.out_dir);
    const std::string model_path = (fs::path(cfg.out_dir) / "model.json").string();
    ResultRecord rec = run_experiment(cfg, model_path, "");
    write_record(rec, cfg.out_dir, "result", fmt);
    return rec;
}

std::string cmd_predict(const std::string& model_path, const std::string& query_path, const std::string& out_dir,
                        Format fmt) {
    const ResGPModel model = load_model(model_path);
    const CsvTable table = read_csv(query_path);
    const Eigen::MatrixXd q = inputs_from_csv(table, model.input_dim());
    Eigen::MatrixXd mu(q.rows(), model.output_dim());
    Eigen::VectorXd var(q.rows());
    if (q.rows() > 0) model.predict_rows(q, mu, var);

    ensure_dir(out_dir);
    const std::string path = (fs::path(out_dir) / ("predictions" + format_ext(fmt))).string();
    if (fmt == Format::csv) {
        std::vector<std::string> header;
        for (Eigen::Index i = 1; i <= model.output_dim(); ++i) header.push_back("y" + std::to_string(i));
        header.push_back("var");
        Eigen::MatrixXd m(q.rows(), model.output_dim() + 1);
        m << mu, var;
        write_file_atomic(path, format_csv(header, m));
    } else {
        json rows = json::array();
        for (Eigen::Index r = 0; r < q.rows(); ++r) {
            std::vector<double> m(static_cast<std::size_t>(mu.cols()));
            for (Eigen::Index c = 0; c < mu.cols(); ++c) m[static_cast<std::size_t>(c)] = mu(r, c);
            rows.push_back({{"mean", m}, {"var", var[r]}});
        }
        write_file_atomic(path, json{{"predictions", rows}}.dump(2) + "\n");
    }
    return path;
}

ResultRecord cmd_active(const ExperimentConfig& cfg, Format fmt) {
    if (cfg.benchmark.empty()) throw UsageError("active: config must name a built-in benchmark as the simulator");
    const auto t0 = std::chrono::steady_clock::now();
    const BenchmarkSpec spec = benchmark_spec(cfg.benchmark);
    ResultRecord rec;
    rec.benchmark = cfg.benchmark;
    rec.seed = cfg.seed;
    rec.config_hash = config_hash(cfg);
    rec.budgets = cfg.budgets.empty() ? reference_budgets(spec.name) : cfg.budgets;
    if (static_cast<int>(rec.budgets.size()) != spec.fidelities) {
        throw UsageError("active: " + cfg.benchmark + " needs " + std::to_string(spec.fidelities) + " budgets");
    }

    const int pool_n = cfg.pool_size > 0 ? cfg.pool_size : 10 * rec.budgets[0];
    const Eigen::MatrixXd pool = design_uniform(spec.domain, pool_n, pool_seed(cfg.seed));
    ActiveOptions opts;
    opts.budgets = rec.budgets;
    opts.optimizer = cfg.optimizer;
    opts.optimizer.seed = cfg.seed;
    opts.seed = cfg.seed;
    opts.acquisition = cfg.acquisition;
    opts.domain = spec.domain;
    SimulatorOracle oracle = [&spec](int f, const Eigen::VectorXd& x) { return evaluate(spec, f, x); };

    ensure_dir(cfg.out_dir);
    const std::string audit_path = (fs::path(cfg.out_dir) / "audit.jsonl").string();
    ActiveResult res;
    try {
        res = sequential_construct(pool, oracle, opts);
    } catch (const ActiveLearningError& e) {
        write_file_atomic(audit_path, audit_to_jsonl(e.partial_audit()));
        throw;
    }
    write_file_atomic(audit_path, audit_to_jsonl(res.audit));

    rec.model_path = (fs::path(cfg.out_dir) / "model.json").string();
    save_model(res.model, rec.model_path);
    for (int f = 1; f <= res.model.fidelities(); ++f) rec.level_nll.push_back(res.model.level(f).fit_nll());
    rec.residuals = summarize_residuals(res.model);
    const FidelityData test = benchmark_test_data(cfg.benchmark, cfg.test_size, test_seed(cfg.seed));
    if (test.inputs.rows() > 0) rec.metrics = selected_metrics(score(res.model, test), cfg.metrics);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_record(rec, cfg.out_dir, "result", fmt);
    return rec;
}

BoundReport cmd_bounds(const std::string& model_path, const ExperimentConfig& cfg, Format fmt) {
    const ResGPModel model = load_model(model_path);
    const BoundSettings& bs = cfg.bounds;
    BoundConfig bc;
    bc.delta = bs.delta;
    bc.tau = bs.tau;
    bc.l_y = bs.l_y;
    bc.domain = bs.domain ? *bs.domain : model.domain();
    const BoundResult br = uniform_bound(model, bc);

    BoundReport rep;
    rep.constants = br.constants;
    rep.delta = bc.delta;
    rep.tau = bc.tau;
    rep.l_y = bc.l_y;
    const Eigen::Index l = bc.domain.dim();
    if (l == 1) {
        rep.curve_x.resize(bs.samples, 1);
        for (int i = 0; i < bs.samples; ++i) {
            const double t = bs.samples == 1 ? 0.5 : double(i) / double(bs.samples - 1);
            rep.curve_x(i, 0) = bc.domain.lower[0] + t * (bc.domain.upper[0] - bc.domain.lower[0]);
        }
    } else {
        rep.curve_x = bs.samples > 0 ? design_uniform(bc.domain, bs.samples, cfg.seed) : Eigen::MatrixXd(0, l);
    }
    rep.curve_mean.resize(rep.curve_x.rows());
    rep.curve_sd.resize(rep.curve_x.rows());
    rep.curve_g.resize(rep.curve_x.rows());
    for (Eigen::Index i = 0; i < rep.curve_x.rows(); ++i) {
        const Posterior p = model.predict(rep.curve_x.row(i).transpose());
        rep.curve_mean[i] = p.mean[0];
        rep.curve_sd[i] = std::sqrt(p.var);
        rep.curve_g[i] = br.bound(rep.curve_x.row(i).transpose());
    }

    if (!bs.truth_data.empty()) {
        const FidelityData truth = read_test_csv(bs.truth_data, model.input_dim(), 1);
        long covered = 0;
        for (Eigen::Index i = 0; i < truth.inputs.rows(); ++i) {
            const Eigen::VectorXd x = truth.inputs.row(i).transpose();
            if (std::abs(truth.outputs(i, 0) - model.predict(x).mean[0]) <= br.bound(x)) ++covered;
        }
        rep.coverage_points = static_cast<long>(truth.inputs.rows());
        if (rep.coverage_points > 0) rep.coverage = double(covered) / double(rep.coverage_points);
    }

    ensure_dir(cfg.out_dir);
    const auto& c = rep.constants;
    if (fmt == Format::structured) {
        json j = {{"beta", c.beta},       {"gamma", c.gamma}, {"l_mu", c.l_mu},   {"omega_coeff", number(c.omega_coeff)},
                  {"covering", c.covering}, {"delta", rep.delta}, {"tau", rep.tau}, {"l_y", rep.l_y}};
        json curve = json::array();
        for (Eigen::Index i = 0; i < rep.curve_x.rows(); ++i) {
            std::vector<double> x(static_cast<std::size_t>(l));
            for (Eigen::Index k = 0; k < l; ++k) x[static_cast<std::size_t>(k)] = rep.curve_x(i, k);
            curve.push_back({{"x", x}, {"mean", rep.curve_mean[i]}, {"sd", rep.curve_sd[i]}, {"g", rep.curve_g[i]}});
        }
        j["curve"] = curve;
        j["coverage"] = rep.coverage ? json(*rep.coverage) : json(nullptr);
        j["coverage_points"] = rep.coverage_points;
        write_file_atomic((fs::path(cfg.out_dir) / "bounds.json").string(), j.dump(2) + "\n");
    } else {
        std::ostringstream s;
        s << std::setprecision(17) << "beta,gamma,l_mu,omega_coeff,covering,delta,tau,l_y,coverage,coverage_points\n"
          << c.beta << ',' << c.gamma << ',' << c.l_mu << ',' << c.omega_coeff << ',' << c.covering << ',' << rep.delta
          << ',' << rep.tau << ',' << rep.l_y << ',' << (rep.coverage ? fmt_double(*rep.coverage) : "") << ','
          << rep.coverage_points << '\n';
        write_file_atomic((fs::path(cfg.out_dir) / "bounds.csv").string(), s.str());
        std::vector<std::string> header;
        for (Eigen::Index k = 1; k <= l; ++k) header.push_back("x" + std::to_string(k));
        header.insert(header.end(), {"mean", "sd", "g"});
        Eigen::MatrixXd m(rep.curve_x.rows(), l + 3);
        m << rep.curve_x, rep.curve_mean, rep.curve_sd, rep.curve_g;
        write_file_atomic((fs::path(cfg.out_dir) / "bounds_curve.csv").string(), format_csv(header, m));
    }
    return rep;
}

std::vector<BenchRow> cmd_bench(const ExperimentConfig& cfg, Format fmt, int threads) {
    const BenchSettings& bs = cfg.bench;
    if (bs.repeats < 1) throw UsageError("bench: repeats must be >= 1");
    if (!bs.seeds.empty() && static_cast<int>(bs.seeds.size()) != bs.repeats) {
        throw UsageError("bench: seeds must list one seed per repeat");
    }
    std::vector<std::string> names = bs.benchmarks;
    if (names.empty()) {
        for (auto b : synthetic_benchmarks()) names.push_back(to_string(b));
        names.push_back(to_string(BenchmarkName::pendulum));
    }

    ensure_dir(cfg.out_dir);
    const fs::path models = fs::path(cfg.out_dir) / "models";
    const fs::path datasets = fs::path(cfg.out_dir) / "datasets";
    ensure_dir(models.string());
    if (bs.export_datasets) ensure_dir(datasets.string());

    std::vector<BenchRow> rows;
    std::vector<ExperimentConfig> jobs;
    for (const auto& name : names) {
        for (int r = 0; r < bs.repeats; ++r) {
            ExperimentConfig c = cfg;
            c.benchmark = name;
            c.train_data.clear();
            c.test_data.clear();
            c.seed = bs.seeds.empty() ? cfg.seed + static_cast<std::uint64_t>(r) : bs.seeds[static_cast<std::size_t>(r)];
            auto it = bs.budgets.find(name);
            c.budgets = it != bs.budgets.end() ? it->second : reference_budgets(benchmark_spec(name).name);
            json src = cfg.source.is_null() ? json::object() : cfg.source;
            src.erase("bench");
            src["benchmark"] = name;
            src["budgets"] = c.budgets;
            c.source = src;
            jobs.push_back(std::move(c));
            rows.push_back({name, r, {}});
        }
    }

    auto run_job = [&](std::size_t k) {
        const ExperimentConfig& c = jobs[k];
        const std::string stem = rows[k].benchmark + "_r" + std::to_string(rows[k].repeat);
        const std::string data_path = bs.export_datasets ? (datasets / (stem + ".csv")).string() : "";
        rows[k].record = run_experiment(c, (models / (stem + ".json")).string(), data_path);
        if (bs.export_datasets) {
            json side = {{"benchmark", c.benchmark}, {"seed", c.seed},        {"budgets", c.budgets},
                         {"test_seed", test_seed(c.seed)}, {"test_size", c.test_size}, {"config_hash", config_hash(c)}};
            write_file_atomic((datasets / (stem + ".json")).string(), side.dump(2) + "\n");
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
    if (workers == 1) {
        for (std::size_t k = 0; k < jobs.size(); ++k) run_job(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> futs;
        for (int w = 0; w < workers; ++w) {
            futs.push_back(std::async(std::launch::async, [&] {
                for (std::size_t k = next++; k < jobs.size(); k = next++) run_job(k);
            }));
        }
        for (auto& f : futs) f.get();
    }

    // Results table, per-benchmark means and a long-format series.
    const std::vector<std::string> metric_names = cfg.metrics;
    std::map<std::string, std::map<std::string, double>> sums;
    for (const auto& row : rows) {
        for (const auto& [k, v] : row.record.metrics) sums[row.benchmark][k] += v / bs.repeats;
    }
    if (fmt == Format::structured) {
        json table = json::array();
        for (const auto& row : rows) {
            json j = record_to_json(row.record);
            j["repeat"] = row.repeat;
            table.push_back(j);
        }
        json summary = json::array();
        for (const auto& name : names) {
            json m = json::object();
            for (const auto& [k, v] : sums[name]) m[k] = number(v);
            summary.push_back({{"benchmark", name}, {"repeats", bs.repeats}, {"mean", m}});
        }
        write_file_atomic((fs::path(cfg.out_dir) / "results.json").string(),
                          json{{"rows", table}, {"summary", summary}}.dump(2) + "\n");
    } else {
        std::ostringstream t;
        t << std::setprecision(17) << "benchmark,repeat,seed,budgets,config_hash";
        for (const auto& m : metric_names) t << ',' << m;
        t << ",wall_time\n";
        for (const auto& row : rows) {
            t << row.benchmark << ',' << row.repeat << ',' << row.record.seed << ',' << budgets_label(row.record.budgets)
              << ',' << row.record.config_hash;
            for (const auto& m : metric_names) t << ',' << row.record.metrics.at(m);
            t << ',' << row.record.wall_time << '\n';
        }
        write_file_atomic((fs::path(cfg.out_dir) / "results.csv").string(), t.str());
        std::ostringstream s;
        s << std::setprecision(17) << "benchmark,repeats";
        for (const auto& m : metric_names) s << ",mean_" << m;
        s << '\n';
        for (const auto& name : names) {
            s << name << ',' << bs.repeats;
            for (const auto& m : metric_names) s << ',' << sums[name][m];
            s << '\n';
        }
        write_file_atomic((fs::path(cfg.out_dir) / "summary.csv").string(), s.str());
    }
    std::ostringstream series;
    series << std::setprecision(17) << "benchmark,repeat,seed,metric,value\n";
    for (const auto& row : rows) {
        for (const auto& [k, v] : row.record.metrics) {
            series << row.benchmark << ',' << row.repeat << ',' << row.record.seed << ',' << k << ',' << v << '\n';
        }
    }
    write_file_atomic((fs::path(cfg.out_dir) / "series.csv").string(), series.str());
    return rows;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Residual Gaussian process multi-fidelity emulator"};
    app.require_subcommand(1);

    std::string config_path, model_path, query_path, out_dir, format = "structured";
    std::optional<std::uint64_t> seed;
    auto common = [&](CLI::App* sub, bool need_config) {
        auto* c = sub->add_option("--config", config_path, "Experiment config (JSON)");
        if (need_config) c->required();
        sub->add_option("--seed", seed, "Override the config seed");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "structured"}));
    };
    auto* train_cmd = app.add_subcommand("train", "Train a model from a benchmark or a dataset CSV");
    common(train_cmd, true);
    auto* predict_cmd = app.add_subcommand("predict", "Predict mean and variance at query points");
    common(predict_cmd, false);
    predict_cmd->add_option("--model", model_path, "Model file")->required();
    predict_cmd->add_option("--queries", query_path, "Query CSV with columns x1..xl")->required();
    auto* active_cmd = app.add_subcommand("active", "Sequential construction against a built-in benchmark");
    common(active_cmd, true);
    auto* bounds_cmd = app.add_subcommand("bounds", "Uniform error bound report for a scalar model");
    common(bounds_cmd, false);
    bounds_cmd->add_option("--model", model_path, "Model file")->required();
    auto* bench_cmd = app.add_subcommand("bench", "Benchmark suite with repeats");
    common(bench_cmd, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? parse_config(json::object()) : load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        const Format fmt = format == "csv" ? Format::csv : Format::structured;

        if (train_cmd->parsed()) {
            ResultRecord r = cmd_train(cfg, fmt);
            std::cout << record_to_json(r).dump(2) << '\n';
        } else if (predict_cmd->parsed()) {
            std::cout << cmd_predict(model_path, query_path, cfg.out_dir, fmt) << '\n';
        } else if (active_cmd->parsed()) {
            ResultRecord r = cmd_active(cfg, fmt);
            std::cout << record_to_json(r).dump(2) << '\n';
        } else if (bounds_cmd->parsed()) {
            BoundReport r = cmd_bounds(model_path, cfg, fmt);
            std::cout << "beta " << r.constants.beta << "\ngamma " << r.constants.gamma << "\nl_mu " << r.constants.l_mu
                      << "\ncovering " << r.constants.covering << '\n';
            if (r.coverage) std::cout << "coverage " << *r.coverage << '\n';
        } else if (bench_cmd->parsed()) {
            int threads = 1;
            if (const char* env = std::getenv("RESGP_THREADS")) {
                try {
                    threads = std::stoi(env);
                } catch (const std::exception&) {
                    throw UsageError("RESGP_THREADS must be an integer");
                }
                if (threads < 1) throw UsageError("RESGP_THREADS must be >= 1");
            }
            auto rows = cmd_bench(cfg, fmt, threads);
            std::cout << rows.size() << " runs written to " << cfg.out_dir << '\n';
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const ConditioningError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const ActiveLearningError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace resgp::cli
