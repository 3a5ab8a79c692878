#pragma once

#include "resgp/kernel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace resgp {

// Default diagonal jitter, relative to the kernel amplitude.
inline constexpr double kDefaultJitter = 1e-10;
// Jitter escalates x10 per failed factorisation up to this fraction of the amplitude.
inline constexpr double kMaxJitter = 1e-2;

// Settings for maximum-likelihood fitting of one residual level.
struct OptimizerConfig {
    int restarts = 5;            // one unit-scale start plus (restarts - 1) random starts
    int max_iters = 200;
    double grad_tol = 1e-6;
    std::uint64_t seed = 0;
    // Box on every log-hyperparameter. Amplitude and noise are boxed relative to
    // the mean square of the centred residuals.
    double log_lower = -10.0;
    double log_upper = 10.0;
    double jitter = kDefaultJitter;
    bool learn_noise = false;
    bool center = true;          // column-centre residuals, re-add means at prediction
    std::optional<KernelHyperparams> warm_start;  // extra start, tried first
};

// Inputs X^f (one row per point) and residuals R^f (N_f x d).
struct ResidualDataset {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd residuals;

    Eigen::Index size() const { return inputs.rows(); }
    Eigen::Index input_dim() const { return inputs.cols(); }
    Eigen::Index output_dim() const { return residuals.cols(); }
    void validate() const;
};

// Cholesky of a Gram matrix plus the solve against the (centred) residuals.
struct LevelFactor {
    Eigen::MatrixXd chol;   // lower triangular
    Eigen::MatrixXd alpha;  // K^{-1} R
    double jitter = 0.0;    // absolute jitter that made the factorisation succeed

    Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& rhs) const;
    double log_det() const;
};

struct LevelPrediction {
    Eigen::VectorXd mean;  // centred: the level's column means are not included
    double var = 0.0;
};

// A fitted residual GP. Immutable once built.
class TrainedLevel {
public:
    TrainedLevel() = default;

    // Factorises K + (jitter + noise) I over `centred.inputs` and solves for alpha.
    // `rel_jitter` is relative to the amplitude and escalates on failure.
    static TrainedLevel build(const KernelHyperparams& params, ResidualDataset centred,
                              Eigen::RowVectorXd column_means, double rel_jitter);

    const KernelHyperparams& params() const { return params_; }
    const Eigen::MatrixXd& inputs() const { return data_.inputs; }
    const Eigen::MatrixXd& residuals() const { return data_.residuals; }  // centred
    const Eigen::RowVectorXd& column_means() const { return column_means_; }
    const LevelFactor& factor() const { return factor_; }
    // Factor of the noise-free K (+ jitter); same as factor() when noise == 0.
    const LevelFactor& exact_factor() const { return exact_ ? *exact_ : factor_; }
    double rel_jitter() const { return rel_jitter_; }
    double fit_nll() const { return fit_nll_; }
    Eigen::Index size() const { return data_.size(); }
    Eigen::Index input_dim() const { return data_.input_dim(); }
    Eigen::Index output_dim() const { return data_.output_dim(); }

private:
    KernelHyperparams params_;
    ResidualDataset data_;
    Eigen::RowVectorXd column_means_;
    LevelFactor factor_;
    std::optional<LevelFactor> exact_;
    double rel_jitter_ = kDefaultJitter;
    double fit_nll_ = 0.0;
};

// Factorises `k_no_diag + (jitter) I` escalating jitter x10 up to kMaxJitter * amplitude.
LevelFactor factorize(const Eigen::MatrixXd& k, double amplitude, double rel_jitter,
                      const Eigen::MatrixXd& rhs);

// Negative marginal log-likelihood summed over the d output columns:
//   (d/2) log|K| + 1/2 tr(R^T K^{-1} R) + (N d / 2) log 2 pi
// `rel_jitter` is relative to the amplitude.
double neg_log_likelihood(const KernelHyperparams& params, const ResidualDataset& data,
                          double rel_jitter = kDefaultJitter);

// Gradient of neg_log_likelihood with respect to KernelHyperparams::to_log(with_noise).
Eigen::VectorXd nll_gradient(const KernelHyperparams& params, const ResidualDataset& data, bool with_noise,
                             double rel_jitter = kDefaultJitter);

// Multi-start maximum-likelihood fit in log-hyperparameter space.
TrainedLevel fit_level(const ResidualDataset& data, const OptimizerConfig& opt);

// Posterior of the (noise-free) residual GP: mean = k^T K^{-1} R, var = k(x,x) - k^T K^{-1} k.
LevelPrediction level_predict(const TrainedLevel& level, const Eigen::Ref<const Eigen::VectorXd>& query);

// Same with the noisy Gram K + noise I in the solves.
LevelPrediction level_predict_noisy(const TrainedLevel& level, const Eigen::Ref<const Eigen::VectorXd>& query);

}  // namespace resgp
