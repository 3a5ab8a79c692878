#include "resgp/active.hpp"
#include "resgp/benchmarks.hpp"
#include "resgp/bounds.hpp"
#include "resgp/error.hpp"
#include "resgp/metrics.hpp"
#include "resgp/model.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <tuple>
#include <vector>

namespace py = pybind11;
using namespace resgp;

namespace {

using Matrix = Eigen::MatrixXd;
using LevelPair = std::tuple<Matrix, Matrix>;

MultiFidelityData to_data(const std::vector<LevelPair>& levels) {
    MultiFidelityData d;
    for (const auto& [x, y] : levels) d.levels.push_back({x, y});
    return d;
}

std::vector<LevelPair> from_data(const MultiFidelityData& d) {
    std::vector<LevelPair> out;
    for (const auto& lv : d.levels) out.emplace_back(lv.inputs, lv.outputs);
    return out;
}

std::tuple<Matrix, Eigen::VectorXd> predict(const ResGPModel& m, const Matrix& x, int fidelity) {
    Matrix mu;
    Eigen::VectorXd var;
    m.predict_rows(x, mu, var, fidelity);
    return {mu, var};
}

Acquisition parse_acquisition(const std::string& s) {
    if (s == "variance") return Acquisition::variance;
    if (s == "random") return Acquisition::random;
    throw DataError("acquisition must be 'variance' or 'random'");
}

}  // namespace

PYBIND11_MODULE(_resgp, m) {
    m.doc() = "Residual Gaussian process multi-fidelity emulation";

    auto base = py::register_exception<Error>(m, "ResGPError", PyExc_RuntimeError);
    auto data_err = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NestingError>(m, "NestingError", data_err.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ConditioningError>(m, "ConditioningError", base.ptr());
    py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
    py::register_exception<ActiveLearningError>(m, "ActiveLearningError", base.ptr());

    py::class_<DomainBox>(m, "DomainBox")
        .def(py::init<Eigen::VectorXd, Eigen::VectorXd>(), py::arg("lower"), py::arg("upper"))
        .def_static("unit", &DomainBox::unit, py::arg("dim"))
        .def_readonly("lower", &DomainBox::lower)
        .def_readonly("upper", &DomainBox::upper)
        .def_property_readonly("dim", &DomainBox::dim);

    py::class_<KernelHyperparams>(m, "KernelHyperparams")
        .def(py::init<double, Eigen::VectorXd, double>(), py::arg("amplitude"), py::arg("weights"),
             py::arg("noise") = 0.0)
        .def_readonly("amplitude", &KernelHyperparams::amplitude)
        .def_readonly("weights", &KernelHyperparams::weights)
        .def_readonly("noise", &KernelHyperparams::noise)
        .def("__repr__", [](const KernelHyperparams& p) {
            return "KernelHyperparams(amplitude=" + std::to_string(p.amplitude) + ", dim=" + std::to_string(p.dim()) +
                   ", noise=" + std::to_string(p.noise) + ")";
        });

    py::class_<OptimizerConfig>(m, "OptimizerConfig")
        .def(py::init<>())
        .def_readwrite("restarts", &OptimizerConfig::restarts)
        .def_readwrite("max_iters", &OptimizerConfig::max_iters)
        .def_readwrite("grad_tol", &OptimizerConfig::grad_tol)
        .def_readwrite("seed", &OptimizerConfig::seed)
        .def_readwrite("log_lower", &OptimizerConfig::log_lower)
        .def_readwrite("log_upper", &OptimizerConfig::log_upper)
        .def_readwrite("jitter", &OptimizerConfig::jitter)
        .def_readwrite("learn_noise", &OptimizerConfig::learn_noise)
        .def_readwrite("center", &OptimizerConfig::center);

    py::class_<ResGPModel>(m, "Model")
        .def_property_readonly("fidelities", &ResGPModel::fidelities)
        .def_property_readonly("input_dim", &ResGPModel::input_dim)
        .def_property_readonly("output_dim", &ResGPModel::output_dim)
        .def_property_readonly("domain", &ResGPModel::domain)
        .def("joint_nll", &ResGPModel::joint_nll)
        .def("level_nll", [](const ResGPModel& self, int f) { return self.level(f).fit_nll(); }, py::arg("fidelity"))
        .def("level_params", [](const ResGPModel& self, int f) { return self.level(f).params(); }, py::arg("fidelity"))
        .def("predict", &predict, py::arg("x"), py::arg("fidelity") = 0,
             "Posterior means (Q x d) and shared variances (Q) at the rows of x. fidelity 0 means the highest.")
        .def(
            "predict_noisy",
            [](const ResGPModel& self, const Matrix& x) {
                Matrix mu(x.rows(), self.output_dim());
                Eigen::VectorXd var(x.rows());
                for (Eigen::Index i = 0; i < x.rows(); ++i) {
                    const Posterior p = self.predict_noisy(x.row(i).transpose());
                    mu.row(i) = p.mean.transpose();
                    var[i] = p.var;
                }
                return std::make_tuple(mu, var);
            },
            py::arg("x"))
        .def(
            "select_next",
            [](const ResGPModel& self, int f, const Matrix& candidates) {
                const Selection s = select_next(self.level(f), self.domain().to_unit_rows(candidates));
                return std::make_tuple(s.index, s.gain);
            },
            py::arg("fidelity"), py::arg("candidates"), "Index and gain of the candidate with the largest level variance.")
        .def("to_json", &model_to_json)
        .def_static("from_json", &model_from_json, py::arg("text"))
        .def("save", [](const ResGPModel& self, const std::string& path) { save_model(self, path); }, py::arg("path"))
        .def_static("load", &load_model, py::arg("path"));

    m.def(
        "train",
        [](const std::vector<LevelPair>& levels, std::optional<DomainBox> domain, std::optional<OptimizerConfig> optimizer,
           bool parallel, bool allow_non_nested) {
            TrainOptions o;
            o.domain = std::move(domain);
            if (optimizer) o.optimizer = *optimizer;
            o.parallel = parallel;
            o.allow_non_nested = allow_non_nested;
            const MultiFidelityData data = to_data(levels);
            py::gil_scoped_release release;
            return train(data, o);
        },
        py::arg("levels"), py::arg("domain") = py::none(), py::arg("optimizer") = py::none(),
        py::arg("parallel") = false, py::arg("allow_non_nested") = false,
        "Train on [(X1, Y1), ..., (XF, YF)], lowest fidelity first.");

    m.def(
        "neg_log_likelihood",
        [](const KernelHyperparams& p, const Matrix& x, const Matrix& r, double jitter) {
            return neg_log_likelihood(p, {x, r}, jitter);
        },
        py::arg("params"), py::arg("inputs"), py::arg("residuals"), py::arg("jitter") = kDefaultJitter);
    m.def(
        "nll_gradient",
        [](const KernelHyperparams& p, const Matrix& x, const Matrix& r, bool with_noise, double jitter) {
            return nll_gradient(p, {x, r}, with_noise, jitter);
        },
        py::arg("params"), py::arg("inputs"), py::arg("residuals"), py::arg("with_noise") = false,
        py::arg("jitter") = kDefaultJitter);

    m.def(
        "metrics",
        [](const Matrix& mu, const Eigen::VectorXd& var, const Matrix& truth) {
            const Metrics r = metrics(mu, var, truth);
            py::dict d;
            d["rmse"] = r.rmse;
            d["r2"] = r.r2;
            d["mnll"] = r.mnll;
            d["nrmse"] = r.nrmse;
            return d;
        },
        py::arg("means"), py::arg("variances"), py::arg("truth"));

    m.def("benchmark_names", [] {
        std::vector<std::string> out;
        for (auto b : synthetic_benchmarks()) out.push_back(to_string(b));
        out.push_back(to_string(BenchmarkName::pendulum));
        return out;
    });
    m.def(
        "benchmark_info",
        [](const std::string& name) {
            const BenchmarkSpec s = benchmark_spec(name);
            py::dict d;
            d["fidelities"] = s.fidelities;
            d["input_dim"] = s.input_dim;
            d["output_dim"] = s.output_dim;
            d["domain"] = s.domain;
            d["reference_budgets"] = reference_budgets(s.name);
            return d;
        },
        py::arg("name"));
    m.def(
        "evaluate",
        [](const std::string& name, int fidelity, const Matrix& x) {
            return evaluate_rows(benchmark_spec(name), fidelity, x);
        },
        py::arg("name"), py::arg("fidelity"), py::arg("x"));
    m.def(
        "benchmark_dataset",
        [](const std::string& name, const std::vector<int>& budgets, std::uint64_t seed) {
            return from_data(benchmark_dataset(benchmark_spec(name), budgets, seed));
        },
        py::arg("name"), py::arg("budgets"), py::arg("seed") = 0);
    m.def("design_uniform", &design_uniform, py::arg("domain"), py::arg("n"), py::arg("seed") = 0);

    m.def(
        "sequential_construct",
        [](const Matrix& pool, const std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)>& oracle,
           const std::vector<int>& budgets, std::uint64_t seed, const std::string& acquisition,
           std::optional<DomainBox> domain, std::optional<OptimizerConfig> optimizer) {
            ActiveOptions o;
            o.budgets = budgets;
            o.seed = seed;
            o.acquisition = parse_acquisition(acquisition);
            o.domain = std::move(domain);
            if (optimizer) o.optimizer = *optimizer;
            ActiveResult r = sequential_construct(pool, oracle, o);
            py::dict d;
            d["model"] = std::move(r.model);
            d["selected"] = r.selected;
            d["audit"] = audit_to_jsonl(r.audit);
            d["levels"] = from_data(r.data);
            return d;
        },
        py::arg("pool"), py::arg("oracle"), py::arg("budgets"), py::arg("seed") = 0,
        py::arg("acquisition") = "variance", py::arg("domain") = py::none(), py::arg("optimizer") = py::none(),
        "Active construction from a candidate pool; oracle(fidelity, x) returns the output vector.");
    m.def(
        "replay_audit",
        [](const Matrix& pool, const std::string& jsonl, const DomainBox& domain) {
            return replay_audit(pool, audit_from_jsonl(jsonl), domain);
        },
        py::arg("pool"), py::arg("audit"), py::arg("domain"));

    m.def(
        "uniform_bound",
        [](const ResGPModel& model, double delta, double tau, double l_y, std::optional<DomainBox> domain,
           std::optional<Matrix> x) {
            BoundConfig c;
            c.delta = delta;
            c.tau = tau;
            c.l_y = l_y;
            c.domain = domain ? *domain : model.domain();
            const BoundResult r = uniform_bound(model, c);
            py::dict d;
            d["beta"] = r.constants.beta;
            d["gamma"] = r.constants.gamma;
            d["l_mu"] = r.constants.l_mu;
            d["omega_coeff"] = r.constants.omega_coeff;
            d["covering"] = r.constants.covering;
            if (x) {
                Eigen::VectorXd g(x->rows());
                for (Eigen::Index i = 0; i < x->rows(); ++i) g[i] = r.bound(x->row(i).transpose());
                d["g"] = g;
            }
            return d;
        },
        py::arg("model"), py::arg("delta") = 0.05, py::arg("tau") = 1e-3, py::arg("l_y") = 1.0,
        py::arg("domain") = py::none(), py::arg("x") = py::none());
    m.def("covering_number_bound", &covering_number_bound, py::arg("domain"), py::arg("tau"));
    m.def("fill_distance", &fill_distance, py::arg("design"), py::arg("domain"), py::arg("grid_resolution"));
}
