#pragma once

#include <Eigen/Dense>

namespace resgp {

// Axis-aligned box of admissible inputs. lower[i] < upper[i] for every i.
struct DomainBox {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    DomainBox() = default;
    DomainBox(Eigen::VectorXd lo, Eigen::VectorXd hi);

    static DomainBox unit(Eigen::Index dim);

    Eigen::Index dim() const { return lower.size(); }
    Eigen::VectorXd width() const { return upper - lower; }
    bool contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol = 0.0) const;

    // Affine maps between the box and [0,1]^l.
    Eigen::VectorXd to_unit(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::MatrixXd to_unit_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
    Eigen::VectorXd from_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const;
};

// ARD squared-exponential hyperparameters:
//   k(a, b) = amplitude * exp(-sum_i weights[i] * (a_i - b_i)^2)
// plus an optional i.i.d. noise variance added on the Gram diagonal.
struct KernelHyperparams {
    double amplitude = 1.0;
    Eigen::VectorXd weights;
    double noise = 0.0;

    KernelHyperparams() = default;
    KernelHyperparams(double amp, Eigen::VectorXd w, double tau = 0.0);

    Eigen::Index dim() const { return weights.size(); }

    // Packs [log amplitude, log weights..., (log noise)] for optimisation.
    Eigen::VectorXd to_log(bool with_noise) const;
    static KernelHyperparams from_log(const Eigen::Ref<const Eigen::VectorXd>& logp,
                                      Eigen::Index dim, bool with_noise);

    void validate() const;
};

double ard_eval(const KernelHyperparams& params,
                const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b);

// Gram matrix over the rows of `points`, with (jitter + noise) on the diagonal.
Eigen::MatrixXd gram(const KernelHyperparams& params,
                     const Eigen::Ref<const Eigen::MatrixXd>& points,
                     double jitter);

// Covariances between `query` and each row of `points`. No noise or jitter.
Eigen::VectorXd cross_vec(const KernelHyperparams& params,
                          const Eigen::Ref<const Eigen::VectorXd>& query,
                          const Eigen::Ref<const Eigen::MatrixXd>& points);

// Cross-covariance block between the rows of `queries` and `points`.
Eigen::MatrixXd cross_matrix(const KernelHyperparams& params,
                             const Eigen::Ref<const Eigen::MatrixXd>& queries,
                             const Eigen::Ref<const Eigen::MatrixXd>& points);

// Upper bound on sup ||grad_a k(a, b)||_2 over a, b in `domain`.
//
// Analytic: with q = sum_i w_i d_i^2, ||grad|| = 2 amp e^{-q} sqrt(sum_i w_i^2 d_i^2)
// <= 2 amp e^{-q} sqrt(w_max q), maximised at q = 1/2, giving amp sqrt(2 w_max / e).
// The returned value carries a 1.01 safety factor and is never below a
// 10^4-point grid estimate of the same supremum.
double kernel_lipschitz(const KernelHyperparams& params, const DomainBox& domain);

// Grid estimate of the gradient-norm supremum (used as the cross-check above).
double kernel_lipschitz_grid(const KernelHyperparams& params, const DomainBox& domain,
                             long max_points = 10000);

}  // namespace resgp
