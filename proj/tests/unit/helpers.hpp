#pragma once

#include "resgp/kernel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace testing {

inline Eigen::MatrixXd uniform_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index l, double lo = 0.0,
                                    double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd x(n, l);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    return x;
}

inline Eigen::MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

inline resgp::KernelHyperparams random_params(std::mt19937_64& rng, Eigen::Index l, double noise = 0.0) {
    std::uniform_real_distribution<double> u(std::log(0.3), std::log(5.0));
    Eigen::VectorXd w(l);
    for (Eigen::Index i = 0; i < l; ++i) w[i] = std::exp(u(rng));
    return resgp::KernelHyperparams(std::exp(u(rng)), w, noise);
}

// Kernel written out independently of the library.
inline double se_kernel(double amp, const Eigen::VectorXd& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double q = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) q += w[i] * (a[i] - b[i]) * (a[i] - b[i]);
    return amp * std::exp(-q);
}

inline Eigen::MatrixXd se_gram(double amp, const Eigen::VectorXd& w, const Eigen::MatrixXd& x, double diag) {
    Eigen::MatrixXd k(x.rows(), x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            k(i, j) = se_kernel(amp, w, x.row(i).transpose(), x.row(j).transpose()) + (i == j ? diag : 0.0);
    return k;
}

// Matrix-normal NLL by explicit inverse and determinant (LU), column by column.
inline double brute_nll(double amp, const Eigen::VectorXd& w, const Eigen::MatrixXd& x, const Eigen::MatrixXd& r,
                        double diag) {
    const Eigen::MatrixXd k = se_gram(amp, w, x, diag);
    const Eigen::MatrixXd kinv = k.fullPivLu().inverse();
    const double logdet = std::log(k.fullPivLu().determinant());
    const double pi = 3.14159265358979323846;
    double total = 0.0;
    for (Eigen::Index c = 0; c < r.cols(); ++c) {
        const Eigen::VectorXd y = r.col(c);
        total += 0.5 * logdet + 0.5 * y.dot(kinv * y) + 0.5 * double(x.rows()) * std::log(2.0 * pi);
    }
    return total;
}

}  // namespace testing
