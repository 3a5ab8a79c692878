#pragma once

#include "resgp/kernel.hpp"
#include "resgp/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

namespace resgp {

struct BoundConfig {
    double delta = 0.05;  // failure probability, in (0, 1)
    double tau = 1e-3;    // grid constant of the covering argument, > 0
    double l_y = 1.0;     // Lipschitz constant of the true function, > 0
    DomainBox domain;     // raw coordinates, hypercubic

    void validate() const;
};

struct UniformBound {
    double beta = 0.0;        // 2 log(M / delta)
    double gamma = 0.0;       // (L_mu + L_y) tau + sqrt(beta) omega_sigma(tau)
    double l_mu = 0.0;        // Lipschitz bound of the posterior mean
    double omega_coeff = 0.0; // omega_sigma(r) = sqrt(omega_coeff * r)
    std::uint64_t covering = 0;
};

// Sum_f L_k^f sqrt(N_f) ||K_f^{-1} R_f||, with L_k^f in raw coordinates. d = 1 only.
double mean_lipschitz_bound(const ResGPModel& model);

// Sum_f 2 L_k^f (1 + N_f max k^f ||K_f^{-1}||_2); the modulus is sqrt(coeff * r).
double sigma_modulus_coefficient(const ResGPModel& model);

// Modulus of continuity of the posterior standard deviation. d = 1 only.
double sigma_modulus(const ResGPModel& model, double r);

// 2 log(M / delta).
double beta_from_covering(std::uint64_t covering, double delta);

// ceil((1 + e / tau)^l) for a hypercube of edge e in dimension l.
std::uint64_t covering_number_bound(const DomainBox& domain, double tau);

// Sup over a grid_resolution^l grid of the distance to the nearest design point.
double fill_distance(const Eigen::Ref<const Eigen::MatrixXd>& design, const DomainBox& domain, int grid_resolution);

struct BoundResult {
    UniformBound constants;
    std::function<double(const Eigen::VectorXd&)> bound;  // g(x) = sqrt(beta) sigma(x) + gamma
};

BoundResult uniform_bound(const ResGPModel& model, const BoundConfig& cfg);

}  // namespace resgp
