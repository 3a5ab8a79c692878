#pragma once

#include "resgp/error.hpp"
#include "resgp/gp_level.hpp"
#include "resgp/model.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace resgp {

// Deterministic simulator: (fidelity 1..F, raw input) -> output row of length d.
using SimulatorOracle = std::function<Eigen::VectorXd(int fidelity, const Eigen::VectorXd& x)>;

// Posterior variance of the level at `query` (level coordinates). >= 0.
double information_gain(const TrainedLevel& level, const Eigen::Ref<const Eigen::VectorXd>& query);

// Gains at or below this are numerically zero and compare as ties.
double gain_floor(const TrainedLevel& level);

struct Selection {
    Eigen::Index index = -1;  // row of the candidate matrix
    double gain = 0.0;
};

// Argmax of information_gain over the candidate rows; ties go to the lowest index.
Selection select_next(const TrainedLevel& level, const Eigen::Ref<const Eigen::MatrixXd>& candidates);

enum class Acquisition { variance, random };

struct ActiveOptions {
    std::vector<int> budgets;         // N_1 >= N_2 >= ... >= N_F >= 1
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;           // initial picks (and random acquisition)
    Acquisition acquisition = Acquisition::variance;
    std::optional<DomainBox> domain;  // defaults to the pool's bounding box
};

struct AuditRecord {
    int fidelity = 0;
    int step = 0;                              // 0 is the random initial point
    Eigen::Index pool_index = -1;
    Eigen::VectorXd point;
    std::optional<double> gain;                // absent for random picks
    std::optional<KernelHyperparams> params;   // hyperparameters used for the selection
    std::optional<double> nll;                 // NLL of the refit used for the selection
};

struct ActiveResult {
    ResGPModel model;
    MultiFidelityData data;    // observations in acquisition order
    std::vector<AuditRecord> audit;
    std::vector<std::vector<Eigen::Index>> selected;  // pool indices per fidelity
};

class ActiveLearningError : public Error {
public:
    ActiveLearningError(const std::string& what, std::vector<AuditRecord> partial)
        : Error(what), partial_(std::move(partial)) {}
    const std::vector<AuditRecord>& partial_audit() const { return partial_; }

private:
    std::vector<AuditRecord> partial_;
};

// Greedy variance-reduction construction from the lowest fidelity upwards.
// Fidelity 1 draws from the whole pool; fidelity f draws from the points
// already simulated at f-1, so the design stays nested. Hyperparameters are
// refit (warm-started) before every selection and once more after the last.
ActiveResult sequential_construct(const Eigen::Ref<const Eigen::MatrixXd>& pool, const SimulatorOracle& oracle,
                                  const ActiveOptions& opts);

std::string audit_to_jsonl(const std::vector<AuditRecord>& audit);
std::vector<AuditRecord> audit_from_jsonl(const std::string& text);

// Re-derives every logged variance selection from the pool and the logged
// hyperparameters. Returns the number of records checked; throws DataError
// describing the first mismatch.
int replay_audit(const Eigen::Ref<const Eigen::MatrixXd>& pool, const std::vector<AuditRecord>& audit,
                 const DomainBox& domain, double rel_jitter = kDefaultJitter);

}  // namespace resgp
