#pragma once

#include "resgp/gp_level.hpp"
#include "resgp/kernel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace resgp {

// Observations at one fidelity: one row per input point.
struct FidelityData {
    Eigen::MatrixXd inputs;   // N_f x l
    Eigen::MatrixXd outputs;  // N_f x d
};

// Fidelity 1 (lowest) first. Nested designs: X^f is a subset of X^{f-1}.
struct MultiFidelityData {
    std::vector<FidelityData> levels;

    int fidelities() const { return static_cast<int>(levels.size()); }
    Eigen::Index input_dim() const { return levels.empty() ? 0 : levels.front().inputs.cols(); }
    Eigen::Index output_dim() const { return levels.empty() ? 0 : levels.front().outputs.cols(); }

    // Shapes, finiteness and N_1 >= N_2 >= ... >= N_F >= 1.
    void validate() const;
};

// parents[f][n] is the row of fidelity f-1 holding the input of row n of
// fidelity f (0-based fidelities; parents[0] is empty).
struct ExtractionIndex {
    std::vector<std::vector<Eigen::Index>> parents;
};

struct Posterior {
    Eigen::VectorXd mean;
    double var = 0.0;  // shared by all output components
};

struct TrainOptions {
    OptimizerConfig optimizer;
    std::optional<DomainBox> domain;  // defaults to the bounding box of the inputs
    bool parallel = false;            // fit levels on separate threads
    // Residuals at inputs missing from the previous fidelity use that
    // fidelity's posterior mean, and those levels learn a noise variance.
    bool allow_non_nested = false;
    double match_tol = 1e-12;         // on normalised coordinates
};

// Sum of independently trained residual GPs over normalised inputs.
class ResGPModel {
public:
    ResGPModel() = default;
    ResGPModel(std::vector<TrainedLevel> levels, DomainBox domain);

    int fidelities() const { return static_cast<int>(levels_.size()); }
    Eigen::Index input_dim() const { return domain_.dim(); }
    Eigen::Index output_dim() const { return levels_.empty() ? 0 : levels_.front().output_dim(); }
    const DomainBox& domain() const { return domain_; }
    const std::vector<TrainedLevel>& levels() const { return levels_; }
    const TrainedLevel& level(int f) const;  // 1-based fidelity

    // Sum of per-level fitted negative log-likelihoods.
    double joint_nll() const;

    // Kernel of fidelity f expressed in raw input coordinates.
    KernelHyperparams raw_kernel(int f) const;

    Posterior predict(const Eigen::Ref<const Eigen::VectorXd>& query) const;
    Posterior predict_fidelity(const Eigen::Ref<const Eigen::VectorXd>& query, int f) const;
    Posterior predict_noisy(const Eigen::Ref<const Eigen::VectorXd>& query) const;

    // Row-wise convenience: means (Q x d) and variances (Q).
    void predict_rows(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::MatrixXd& means,
                      Eigen::VectorXd& vars, int f = 0) const;

private:
    Posterior accumulate(const Eigen::Ref<const Eigen::VectorXd>& query, int upto, bool noisy) const;

    std::vector<TrainedLevel> levels_;
    DomainBox domain_;
};

DomainBox bounding_domain(const MultiFidelityData& data);

// Matches every input of fidelity f to one of fidelity f-1 (coordinates
// compared within `tol` after mapping through `domain`, if given).
ExtractionIndex nesting_check(const MultiFidelityData& data, const std::optional<DomainBox>& domain = std::nullopt,
                              double tol = 1e-12);

// R^1 = Y^1, R^f[n] = Y^f[n] - Y^{f-1}[e_f[n]]. Inputs stay in raw coordinates.
std::vector<ResidualDataset> compute_residuals(const MultiFidelityData& data, const ExtractionIndex& idx);

ResGPModel train(const MultiFidelityData& data, const TrainOptions& opts = {});

// Per-level seed derived from the base seed, independent of training order.
std::uint64_t level_seed(std::uint64_t base, int fidelity);

// Structured-text (JSON) persistence. Factors are recomputed on load.
std::string model_to_json(const ResGPModel& model);
ResGPModel model_from_json(const std::string& text);
void save_model(const ResGPModel& model, const std::string& path);
ResGPModel load_model(const std::string& path);

}  // namespace resgp
