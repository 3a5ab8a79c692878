#include "resgp/active.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace resgp {

namespace {

using nlohmann::json;

Eigen::MatrixXd gather_rows(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

// Candidate pool indices in ascending order: `universe` minus `taken`.
std::vector<Eigen::Index> remaining(const std::vector<Eigen::Index>& universe, const std::vector<Eigen::Index>& taken) {
    std::set<Eigen::Index> t(taken.begin(), taken.end());
    std::vector<Eigen::Index> out;
    for (auto i : universe) {
        if (!t.count(i)) out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void validate_budgets(const std::vector<int>& b, Eigen::Index pool_size) {
    if (b.empty()) throw DataError("active learning needs at least one budget");
    for (std::size_t f = 0; f < b.size(); ++f) {
        if (b[f] < 1) throw DataError("budget for fidelity " + std::to_string(f + 1) + " must be >= 1");
        if (f > 0 && b[f] > b[f - 1]) {
            throw DataError("budget for fidelity " + std::to_string(f + 1) + " exceeds the size of fidelity " +
                            std::to_string(f));
        }
    }
    if (b[0] > pool_size) throw DataError("fidelity-1 budget exceeds the candidate pool size");
}

}  // namespace

double information_gain(const TrainedLevel& level, const Eigen::Ref<const Eigen::VectorXd>& query) {
    return level_predict(level, query).var;
}

double gain_floor(const TrainedLevel& level) {
    const double amp = level.params().amplitude;
    return 10.0 * std::max(level.exact_factor().jitter, 1e-12 * amp);
}

Selection select_next(const TrainedLevel& level, const Eigen::Ref<const Eigen::MatrixXd>& candidates) {
    if (candidates.rows() == 0) throw DataError("select_next: empty candidate pool");
    const double floor = gain_floor(level);
    Selection best;
    double best_key = -1.0;
    for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
        double g = information_gain(level, candidates.row(i).transpose());
        double key = g > floor ? g : 0.0;
        if (key > best_key) {
            best_key = key;
            best.index = i;
            best.gain = g;
        }
    }
    return best;
}

ActiveResult sequential_construct(const Eigen::Ref<const Eigen::MatrixXd>& pool, const SimulatorOracle& oracle,
                                  const ActiveOptions& opts) {
    if (pool.rows() == 0) throw DataError("empty candidate pool");
    validate_budgets(opts.budgets, pool.rows());
    const int fidelities = static_cast<int>(opts.budgets.size());

    DomainBox domain;
    if (opts.domain) {
        domain = *opts.domain;
    } else {
        MultiFidelityData tmp;
        tmp.levels.push_back({pool, Eigen::MatrixXd::Zero(pool.rows(), 1)});
        domain = bounding_domain(tmp);
    }
    if (domain.dim() != pool.cols()) throw DimensionError("domain dimension != pool dimension");
    const Eigen::MatrixXd unit_pool = domain.to_unit_rows(pool);

    ActiveResult result;
    result.selected.resize(static_cast<std::size_t>(fidelities));
    std::mt19937_64 rng(opts.seed);
    std::vector<TrainedLevel> levels;
    // outputs[f][pool index] for points already simulated at fidelity f
    std::vector<std::map<Eigen::Index, Eigen::VectorXd>> outputs(static_cast<std::size_t>(fidelities));
    Eigen::Index d = -1;

    auto simulate = [&](int f, Eigen::Index idx) {
        Eigen::VectorXd y;
        try {
            y = oracle(f, pool.row(idx).transpose());
        } catch (const std::exception& e) {
            throw ActiveLearningError(std::string("oracle failed at fidelity ") + std::to_string(f) + ": " + e.what(),
                                      result.audit);
        }
        if (d < 0) d = y.size();
        if (y.size() != d || d < 1 || !y.allFinite()) {
            throw ActiveLearningError("oracle returned a malformed output at fidelity " + std::to_string(f),
                                      result.audit);
        }
        outputs[static_cast<std::size_t>(f - 1)][idx] = y;
    };

    auto level_data = [&](int f) {
        const auto& sel = result.selected[static_cast<std::size_t>(f - 1)];
        ResidualDataset ds;
        ds.inputs = gather_rows(unit_pool, sel);
        ds.residuals.resize(static_cast<Eigen::Index>(sel.size()), d);
        for (std::size_t n = 0; n < sel.size(); ++n) {
            Eigen::VectorXd r = outputs[static_cast<std::size_t>(f - 1)].at(sel[n]);
            if (f > 1) r -= outputs[static_cast<std::size_t>(f - 2)].at(sel[n]);
            ds.residuals.row(static_cast<Eigen::Index>(n)) = r.transpose();
        }
        return ds;
    };

    for (int f = 1; f <= fidelities; ++f) {
        auto& sel = result.selected[static_cast<std::size_t>(f - 1)];
        std::vector<Eigen::Index> universe;
        if (f == 1) {
            for (Eigen::Index i = 0; i < pool.rows(); ++i) universe.push_back(i);
        } else {
            universe = result.selected[static_cast<std::size_t>(f - 2)];
            std::sort(universe.begin(), universe.end());
        }

        std::uniform_int_distribution<std::size_t> pick0(0, universe.size() - 1);
        const Eigen::Index first = universe[pick0(rng)];
        sel.push_back(first);
        simulate(f, first);
        result.audit.push_back({f, 0, first, pool.row(first).transpose(), std::nullopt, std::nullopt, std::nullopt});

        OptimizerConfig opt = opts.optimizer;
        opt.seed = level_seed(opts.optimizer.seed, f);
        std::optional<TrainedLevel> fitted;
        const int budget = opts.budgets[static_cast<std::size_t>(f - 1)];
        for (int step = 1; static_cast<int>(sel.size()) < budget; ++step) {
            const auto cand = remaining(universe, sel);
            AuditRecord rec;
            rec.fidelity = f;
            rec.step = step;
            if (opts.acquisition == Acquisition::variance) {
                if (fitted) opt.warm_start = fitted->params();
                fitted = fit_level(level_data(f), opt);
                Selection s = select_next(*fitted, gather_rows(unit_pool, cand));
                rec.pool_index = cand[static_cast<std::size_t>(s.index)];
                rec.gain = s.gain;
                rec.params = fitted->params();
                rec.nll = fitted->fit_nll();
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
                rec.pool_index = cand[pick(rng)];
            }
            rec.point = pool.row(rec.pool_index).transpose();
            sel.push_back(rec.pool_index);
            result.audit.push_back(rec);
            simulate(f, rec.pool_index);
        }
        if (fitted) opt.warm_start = fitted->params();
        levels.push_back(fit_level(level_data(f), opt));
    }

    result.model = ResGPModel(std::move(levels), domain);
    for (int f = 1; f <= fidelities; ++f) {
        const auto& sel = result.selected[static_cast<std::size_t>(f - 1)];
        FidelityData fd;
        fd.inputs = gather_rows(pool, sel);
        fd.outputs.resize(static_cast<Eigen::Index>(sel.size()), d);
        for (std::size_t n = 0; n < sel.size(); ++n) {
            fd.outputs.row(static_cast<Eigen::Index>(n)) = outputs[static_cast<std::size_t>(f - 1)].at(sel[n]).transpose();
        }
        result.data.levels.push_back(std::move(fd));
    }
    return result;
}

std::string audit_to_jsonl(const std::vector<AuditRecord>& audit) {
    std::ostringstream out;
    for (const auto& r : audit) {
        json j;
        j["fidelity"] = r.fidelity;
        j["step"] = r.step;
        j["pool_index"] = r.pool_index;
        j["point"] = std::vector<double>(r.point.data(), r.point.data() + r.point.size());
        j["gain"] = r.gain ? json(*r.gain) : json(nullptr);
        j["nll"] = r.nll ? json(*r.nll) : json(nullptr);
        if (r.params) {
            const auto& p = *r.params;
            j["params"] = {{"amplitude", p.amplitude},
                           {"weights", std::vector<double>(p.weights.data(), p.weights.data() + p.weights.size())},
                           {"noise", p.noise}};
        } else {
            j["params"] = nullptr;
        }
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<AuditRecord> audit_from_jsonl(const std::string& text) {
    std::vector<AuditRecord> out;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            AuditRecord r;
            r.fidelity = j.at("fidelity").get<int>();
            r.step = j.at("step").get<int>();
            r.pool_index = j.at("pool_index").get<Eigen::Index>();
            auto pt = j.at("point").get<std::vector<double>>();
            r.point = Eigen::Map<Eigen::VectorXd>(pt.data(), static_cast<Eigen::Index>(pt.size()));
            if (!j.at("gain").is_null()) r.gain = j["gain"].get<double>();
            if (!j.at("nll").is_null()) r.nll = j["nll"].get<double>();
            if (!j.at("params").is_null()) {
                auto w = j["params"].at("weights").get<std::vector<double>>();
                r.params = KernelHyperparams(j["params"].at("amplitude").get<double>(),
                                             Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
                                             j["params"].at("noise").get<double>());
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw DataError("audit log line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

int replay_audit(const Eigen::Ref<const Eigen::MatrixXd>& pool, const std::vector<AuditRecord>& audit,
                 const DomainBox& domain, double rel_jitter) {
    const Eigen::MatrixXd unit_pool = domain.to_unit_rows(pool);
    // Final per-fidelity sets define the universes of the next fidelity.
    std::map<int, std::vector<Eigen::Index>> chosen;
    for (const auto& r : audit) chosen[r.fidelity].push_back(r.pool_index);
    std::map<int, std::vector<Eigen::Index>> so_far;

    int checked = 0;
    for (const auto& r : audit) {
        auto& sel = so_far[r.fidelity];
        if (r.gain && r.params) {
            std::vector<Eigen::Index> universe;
            if (r.fidelity == 1) {
                for (Eigen::Index i = 0; i < pool.rows(); ++i) universe.push_back(i);
            } else {
                universe = chosen.at(r.fidelity - 1);
            }
            const auto cand = remaining(universe, sel);
            ResidualDataset ds{gather_rows(unit_pool, sel), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sel.size()), 1)};
            TrainedLevel lvl = TrainedLevel::build(*r.params, ds, Eigen::RowVectorXd::Zero(1), rel_jitter);
            Selection s = select_next(lvl, gather_rows(unit_pool, cand));
            const Eigen::Index expect = cand[static_cast<std::size_t>(s.index)];
            if (expect != r.pool_index) {
                throw DataError("replay mismatch at fidelity " + std::to_string(r.fidelity) + " step " +
                                std::to_string(r.step) + ": logged " + std::to_string(r.pool_index) + ", recomputed " +
                                std::to_string(expect));
            }
            ++checked;
        }
        sel.push_back(r.pool_index);
    }
    return checked;
}

}  // namespace resgp
