#include "resgp/model.hpp"

#include "resgp/error.hpp"
#include "resgp/io.hpp"

#include <json.hpp>

#include <future>
#include <string>

namespace resgp {

namespace {

using nlohmann::json;

void check_dims(const MultiFidelityData& data) {
    if (data.levels.empty()) throw DataError("multi-fidelity data has no fidelities");
    const Eigen::Index l = data.input_dim(), d = data.output_dim();
    if (l < 1 || d < 1) throw DimensionError("input and output dimension must be >= 1");
    for (int f = 0; f < data.fidelities(); ++f) {
        const auto& lv = data.levels[static_cast<std::size_t>(f)];
        if (lv.inputs.cols() != l || lv.outputs.cols() != d) {
            throw DimensionError("fidelity " + std::to_string(f + 1) + " has mismatched input/output dimension");
        }
        if (lv.inputs.rows() != lv.outputs.rows()) {
            throw DimensionError("fidelity " + std::to_string(f + 1) + " has different input and output row counts");
        }
    }
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) throw DataError("model file: ragged matrix row");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

}  // namespace

void MultiFidelityData::validate() const {
    check_dims(*this);
    for (int f = 0; f < fidelities(); ++f) {
        const auto& lv = levels[static_cast<std::size_t>(f)];
        if (lv.inputs.rows() < 1) throw DataError("fidelity " + std::to_string(f + 1) + " has no observations");
        if (!lv.inputs.allFinite() || !lv.outputs.allFinite()) {
            throw DataError("fidelity " + std::to_string(f + 1) + " has non-finite values");
        }
        if (f > 0 && lv.inputs.rows() > levels[static_cast<std::size_t>(f - 1)].inputs.rows()) {
            throw DataError("fidelity " + std::to_string(f + 1) + " has more points than fidelity " + std::to_string(f));
        }
    }
}

ResGPModel::ResGPModel(std::vector<TrainedLevel> levels, DomainBox domain)
    : levels_(std::move(levels)), domain_(std::move(domain)) {
    if (levels_.empty()) throw DataError("model needs at least one level");
    for (const auto& lv : levels_) {
        if (lv.input_dim() != domain_.dim() || lv.output_dim() != levels_.front().output_dim()) {
            throw DimensionError("levels disagree on input or output dimension");
        }
    }
}

const TrainedLevel& ResGPModel::level(int f) const {
    if (f < 1 || f > fidelities()) {
        throw DataError("fidelity " + std::to_string(f) + " outside [1, " + std::to_string(fidelities()) + "]");
    }
    return levels_[static_cast<std::size_t>(f - 1)];
}

double ResGPModel::joint_nll() const {
    double s = 0.0;
    for (const auto& lv : levels_) s += lv.fit_nll();
    return s;
}

KernelHyperparams ResGPModel::raw_kernel(int f) const {
    KernelHyperparams p = level(f).params();
    Eigen::VectorXd w = domain_.width();
    p.weights = p.weights.cwiseQuotient(w.cwiseProduct(w));
    return p;
}

Posterior ResGPModel::accumulate(const Eigen::Ref<const Eigen::VectorXd>& query, int upto, bool noisy) const {
    if (query.size() != input_dim()) {
        throw DimensionError("query has dimension " + std::to_string(query.size()) + ", model expects " +
                             std::to_string(input_dim()));
    }
    const Eigen::VectorXd u = domain_.to_unit(query);
    Posterior post;
    post.mean = Eigen::VectorXd::Zero(output_dim());
    for (int f = 0; f < upto; ++f) {
        const auto& lv = levels_[static_cast<std::size_t>(f)];
        LevelPrediction p = noisy ? level_predict_noisy(lv, u) : level_predict(lv, u);
        post.mean += p.mean + lv.column_means().transpose();
        post.var += p.var;
    }
    return post;
}

Posterior ResGPModel::predict(const Eigen::Ref<const Eigen::VectorXd>& query) const {
    return accumulate(query, fidelities(), false);
}

Posterior ResGPModel::predict_fidelity(const Eigen::Ref<const Eigen::VectorXd>& query, int f) const {
    if (f < 1 || f > fidelities()) {
        throw DataError("fidelity " + std::to_string(f) + " outside [1, " + std::to_string(fidelities()) + "]");
    }
    return accumulate(query, f, false);
}

Posterior ResGPModel::predict_noisy(const Eigen::Ref<const Eigen::VectorXd>& query) const {
    return accumulate(query, fidelities(), true);
}

void ResGPModel::predict_rows(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::MatrixXd& means,
                              Eigen::VectorXd& vars, int f) const {
    const int upto = f == 0 ? fidelities() : f;
    means.resize(queries.rows(), output_dim());
    vars.resize(queries.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        Posterior p = predict_fidelity(queries.row(i).transpose(), upto);
        means.row(i) = p.mean.transpose();
        vars[i] = p.var;
    }
}

DomainBox bounding_domain(const MultiFidelityData& data) {
    check_dims(data);
    Eigen::VectorXd lo = data.levels.front().inputs.colwise().minCoeff().transpose();
    Eigen::VectorXd hi = data.levels.front().inputs.colwise().maxCoeff().transpose();
    for (const auto& lv : data.levels) {
        if (lv.inputs.rows() == 0) continue;
        lo = lo.cwiseMin(lv.inputs.colwise().minCoeff().transpose());
        hi = hi.cwiseMax(lv.inputs.colwise().maxCoeff().transpose());
    }
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (!(hi[i] > lo[i])) {
            lo[i] -= 0.5;
            hi[i] += 0.5;
        }
    }
    return DomainBox(lo, hi);
}

ExtractionIndex nesting_check(const MultiFidelityData& data, const std::optional<DomainBox>& domain, double tol) {
    data.validate();
    ExtractionIndex idx;
    idx.parents.resize(data.levels.size());
    auto norm = [&](const Eigen::MatrixXd& x) { return domain ? domain->to_unit_rows(x) : x; };
    for (int f = 1; f < data.fidelities(); ++f) {
        const Eigen::MatrixXd child = norm(data.levels[static_cast<std::size_t>(f)].inputs);
        const Eigen::MatrixXd parent = norm(data.levels[static_cast<std::size_t>(f - 1)].inputs);
        std::vector<bool> used(static_cast<std::size_t>(parent.rows()), false);
        auto& e = idx.parents[static_cast<std::size_t>(f)];
        e.reserve(static_cast<std::size_t>(child.rows()));
        for (Eigen::Index n = 0; n < child.rows(); ++n) {
            Eigen::Index hit = -1;
            for (Eigen::Index m = 0; m < parent.rows(); ++m) {
                if (used[static_cast<std::size_t>(m)]) continue;
                if ((parent.row(m) - child.row(n)).cwiseAbs().maxCoeff() <= tol) {
                    hit = m;
                    break;
                }
            }
            if (hit < 0) {
                throw NestingError("fidelity " + std::to_string(f + 1) + " point " + std::to_string(n) +
                                       " is not an input of fidelity " + std::to_string(f),
                                   f + 1, static_cast<long>(n));
            }
            used[static_cast<std::size_t>(hit)] = true;
            e.push_back(hit);
        }
    }
    return idx;
}

std::vector<ResidualDataset> compute_residuals(const MultiFidelityData& data, const ExtractionIndex& idx) {
    std::vector<ResidualDataset> out;
    out.reserve(data.levels.size());
    for (int f = 0; f < data.fidelities(); ++f) {
        const auto& lv = data.levels[static_cast<std::size_t>(f)];
        ResidualDataset r{lv.inputs, lv.outputs};
        if (f > 0) {
            const auto& e = idx.parents.at(static_cast<std::size_t>(f));
            const auto& prev = data.levels[static_cast<std::size_t>(f - 1)].outputs;
            if (static_cast<Eigen::Index>(e.size()) != lv.inputs.rows()) {
                throw DimensionError("extraction index size mismatch at fidelity " + std::to_string(f + 1));
            }
            for (Eigen::Index n = 0; n < lv.inputs.rows(); ++n) r.residuals.row(n) -= prev.row(e[static_cast<std::size_t>(n)]);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::uint64_t level_seed(std::uint64_t base, int fidelity) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(fidelity);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

TrainedLevel fit_one(ResidualDataset ds, const OptimizerConfig& base, int fidelity, bool learn_noise) {
    OptimizerConfig opt = base;
    opt.seed = level_seed(base.seed, fidelity);
    opt.learn_noise = base.learn_noise || learn_noise;
    try {
        return fit_level(ds, opt);
    } catch (const ConditioningError& e) {
        throw ConditioningError("fidelity " + std::to_string(fidelity) + ": " + e.what());
    }
}

ResGPModel train_non_nested(const MultiFidelityData& data, const TrainOptions& opts, const DomainBox& domain) {
    std::vector<TrainedLevel> levels;
    for (int f = 0; f < data.fidelities(); ++f) {
        const auto& lv = data.levels[static_cast<std::size_t>(f)];
        ResidualDataset ds{domain.to_unit_rows(lv.inputs), lv.outputs};
        bool approximated = false;
        if (f > 0) {
            const auto& prev = data.levels[static_cast<std::size_t>(f - 1)];
            const Eigen::MatrixXd prev_u = domain.to_unit_rows(prev.inputs);
            ResGPModel partial(levels, domain);
            for (Eigen::Index n = 0; n < ds.size(); ++n) {
                Eigen::Index hit = -1;
                for (Eigen::Index m = 0; m < prev_u.rows() && hit < 0; ++m) {
                    if ((prev_u.row(m) - ds.inputs.row(n)).cwiseAbs().maxCoeff() <= opts.match_tol) hit = m;
                }
                if (hit >= 0) {
                    ds.residuals.row(n) -= prev.outputs.row(hit);
                } else {
                    ds.residuals.row(n) -= partial.predict(lv.inputs.row(n).transpose()).mean.transpose();
                    approximated = true;
                }
            }
        }
        levels.push_back(fit_one(std::move(ds), opts.optimizer, f + 1, approximated));
    }
    return ResGPModel(std::move(levels), domain);
}

}  // namespace

ResGPModel train(const MultiFidelityData& data, const TrainOptions& opts) {
    data.validate();
    const DomainBox domain = opts.domain ? *opts.domain : bounding_domain(data);
    if (domain.dim() != data.input_dim()) throw DimensionError("domain dimension != input dimension");
    if (opts.allow_non_nested) return train_non_nested(data, opts, domain);

    const ExtractionIndex idx = nesting_check(data, domain, opts.match_tol);
    std::vector<ResidualDataset> res = compute_residuals(data, idx);
    for (auto& r : res) r.inputs = domain.to_unit_rows(r.inputs);

    std::vector<TrainedLevel> levels(res.size());
    if (opts.parallel && res.size() > 1) {
        std::vector<std::future<TrainedLevel>> jobs;
        for (std::size_t f = 0; f < res.size(); ++f) {
            jobs.push_back(std::async(std::launch::async, fit_one, res[f], std::cref(opts.optimizer),
                                      static_cast<int>(f) + 1, false));
        }
        for (std::size_t f = 0; f < res.size(); ++f) levels[f] = jobs[f].get();
    } else {
        for (std::size_t f = 0; f < res.size(); ++f) {
            levels[f] = fit_one(std::move(res[f]), opts.optimizer, static_cast<int>(f) + 1, false);
        }
    }
    return ResGPModel(std::move(levels), domain);
}

std::string model_to_json(const ResGPModel& model) {
    json j;
    j["format"] = "resgp-model";
    j["version"] = 1;
    j["input_dim"] = model.input_dim();
    j["output_dim"] = model.output_dim();
    j["domain"] = {{"lower", vector_to_json(model.domain().lower)}, {"upper", vector_to_json(model.domain().upper)}};
    json levels = json::array();
    for (const auto& lv : model.levels()) {
        json e;
        e["amplitude"] = lv.params().amplitude;
        e["weights"] = vector_to_json(lv.params().weights);
        e["noise"] = lv.params().noise;
        e["rel_jitter"] = lv.rel_jitter();
        e["inputs"] = matrix_to_json(lv.inputs());
        e["residuals"] = matrix_to_json(lv.residuals());
        e["column_means"] = vector_to_json(lv.column_means().transpose());
        e["fit_nll"] = lv.fit_nll();
        levels.push_back(std::move(e));
    }
    j["levels"] = std::move(levels);
    return j.dump(1);
}

ResGPModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
    try {
        if (j.at("format") != "resgp-model") throw DataError("model file: unknown format tag");
        const auto l = j.at("input_dim").get<Eigen::Index>();
        const auto d = j.at("output_dim").get<Eigen::Index>();
        DomainBox domain(vector_from_json(j.at("domain").at("lower")), vector_from_json(j.at("domain").at("upper")));
        std::vector<TrainedLevel> levels;
        for (const auto& e : j.at("levels")) {
            KernelHyperparams p(e.at("amplitude").get<double>(), vector_from_json(e.at("weights")),
                                e.at("noise").get<double>());
            ResidualDataset ds{matrix_from_json(e.at("inputs"), l), matrix_from_json(e.at("residuals"), d)};
            Eigen::RowVectorXd means = vector_from_json(e.at("column_means")).transpose();
            levels.push_back(TrainedLevel::build(p, std::move(ds), std::move(means), e.at("rel_jitter").get<double>()));
        }
        return ResGPModel(std::move(levels), std::move(domain));
    } catch (const json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

void save_model(const ResGPModel& model, const std::string& path) {
    write_file_atomic(path, model_to_json(model));
}

ResGPModel load_model(const std::string& path) {
    return model_from_json(read_file(path));
}

}  // namespace resgp
