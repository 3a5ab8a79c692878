#include "resgp/kernel.hpp"

#include "resgp/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace resgp {

namespace {

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
    if (expected != got) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                             ", got " + std::to_string(got));
    }
}

}  // namespace

DomainBox::DomainBox(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require_dim(lower.size(), upper.size(), "DomainBox");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
            throw DataError("DomainBox: need finite lower < upper in coordinate " + std::to_string(i));
        }
    }
}

DomainBox DomainBox::unit(Eigen::Index dim) {
    return DomainBox(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

bool DomainBox::contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol) const {
    if (x.size() != dim()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double slack = tol * (upper[i] - lower[i]);
        if (!(x[i] >= lower[i] - slack && x[i] <= upper[i] + slack)) return false;
    }
    return true;
}

Eigen::VectorXd DomainBox::to_unit(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    require_dim(dim(), x.size(), "DomainBox::to_unit");
    return ((x - lower).array() / (upper - lower).array()).matrix();
}

Eigen::MatrixXd DomainBox::to_unit_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    require_dim(dim(), x.cols(), "DomainBox::to_unit_rows");
    Eigen::MatrixXd out(x.rows(), x.cols());
    Eigen::RowVectorXd inv_w = (upper - lower).cwiseInverse().transpose();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        out.row(r) = (x.row(r) - lower.transpose()).cwiseProduct(inv_w);
    }
    return out;
}

Eigen::VectorXd DomainBox::from_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    require_dim(dim(), u.size(), "DomainBox::from_unit");
    return lower + u.cwiseProduct(upper - lower);
}

KernelHyperparams::KernelHyperparams(double amp, Eigen::VectorXd w, double tau)
    : amplitude(amp), weights(std::move(w)), noise(tau) {
    validate();
}

void KernelHyperparams::validate() const {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw DataError("kernel amplitude must be positive");
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) throw DataError("kernel weights must be positive");
    }
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw DataError("kernel noise must be non-negative");
}

Eigen::VectorXd KernelHyperparams::to_log(bool with_noise) const {
    Eigen::VectorXd out(1 + weights.size() + (with_noise ? 1 : 0));
    out[0] = std::log(amplitude);
    out.segment(1, weights.size()) = weights.array().log().matrix();
    if (with_noise) out[out.size() - 1] = std::log(noise);
    return out;
}

KernelHyperparams KernelHyperparams::from_log(const Eigen::Ref<const Eigen::VectorXd>& logp, Eigen::Index dim,
                                              bool with_noise) {
    require_dim(1 + dim + (with_noise ? 1 : 0), logp.size(), "KernelHyperparams::from_log");
    KernelHyperparams p;
    p.amplitude = std::exp(logp[0]);
    p.weights = logp.segment(1, dim).array().exp().matrix();
    p.noise = with_noise ? std::exp(logp[logp.size() - 1]) : 0.0;
    return p;
}

double ard_eval(const KernelHyperparams& params, const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b) {
    require_dim(params.dim(), a.size(), "ard_eval");
    require_dim(params.dim(), b.size(), "ard_eval");
    double q = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        q += params.weights[i] * d * d;
    }
    return params.amplitude * std::exp(-q);
}

Eigen::MatrixXd gram(const KernelHyperparams& params, const Eigen::Ref<const Eigen::MatrixXd>& points,
                     double jitter) {
    require_dim(params.dim(), points.cols(), "gram");
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = params.amplitude + jitter + params.noise;
        for (Eigen::Index j = 0; j < i; ++j) {
            double v = ard_eval(params, points.row(i).transpose(), points.row(j).transpose());
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::VectorXd cross_vec(const KernelHyperparams& params, const Eigen::Ref<const Eigen::VectorXd>& query,
                          const Eigen::Ref<const Eigen::MatrixXd>& points) {
    require_dim(params.dim(), query.size(), "cross_vec");
    require_dim(params.dim(), points.cols(), "cross_vec");
    Eigen::VectorXd out(points.rows());
    for (Eigen::Index n = 0; n < points.rows(); ++n) {
        out[n] = ard_eval(params, query, points.row(n).transpose());
    }
    return out;
}

Eigen::MatrixXd cross_matrix(const KernelHyperparams& params, const Eigen::Ref<const Eigen::MatrixXd>& queries,
                             const Eigen::Ref<const Eigen::MatrixXd>& points) {
    require_dim(params.dim(), queries.cols(), "cross_matrix");
    require_dim(params.dim(), points.cols(), "cross_matrix");
    Eigen::MatrixXd out(queries.rows(), points.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        for (Eigen::Index n = 0; n < points.rows(); ++n) {
            out(i, n) = ard_eval(params, queries.row(i).transpose(), points.row(n).transpose());
        }
    }
    return out;
}

double kernel_lipschitz_grid(const KernelHyperparams& params, const DomainBox& domain, long max_points) {
    require_dim(params.dim(), domain.dim(), "kernel_lipschitz_grid");
    const Eigen::Index l = params.dim();
    // The gradient norm depends only on |a - b|, which ranges over [0, width]^l.
    long per_dim = std::max<long>(2, static_cast<long>(std::floor(std::pow(double(max_points), 1.0 / double(l)))));
    Eigen::VectorXd width = domain.width();
    std::vector<long> idx(static_cast<std::size_t>(l), 0);
    double best = 0.0;
    while (true) {
        double q = 0.0, g2 = 0.0;
        for (Eigen::Index i = 0; i < l; ++i) {
            double d = width[i] * double(idx[static_cast<std::size_t>(i)]) / double(per_dim - 1);
            q += params.weights[i] * d * d;
            g2 += params.weights[i] * params.weights[i] * d * d;
        }
        best = std::max(best, 2.0 * params.amplitude * std::exp(-q) * std::sqrt(g2));
        Eigen::Index k = 0;
        while (k < l && ++idx[static_cast<std::size_t>(k)] == per_dim) {
            idx[static_cast<std::size_t>(k)] = 0;
            ++k;
        }
        if (k == l) break;
    }
    return best;
}

double kernel_lipschitz(const KernelHyperparams& params, const DomainBox& domain) {
    require_dim(params.dim(), domain.dim(), "kernel_lipschitz");
    double w_max = params.weights.size() ? params.weights.maxCoeff() : 0.0;
    double analytic = params.amplitude * std::sqrt(2.0 * w_max / std::exp(1.0));
    double grid = kernel_lipschitz_grid(params, domain);
    return std::max(1.01 * analytic, grid);
}

}  // namespace resgp
