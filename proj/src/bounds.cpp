#include "resgp/bounds.hpp"

#include "resgp/error.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

namespace resgp {

namespace {

void require_scalar_output(const ResGPModel& model, const char* what) {
    if (model.output_dim() != 1) {
        throw UnsupportedError(std::string(what) + ": error bounds support scalar outputs only (d = 1), model has d = " +
                               std::to_string(model.output_dim()));
    }
}

}  // namespace

void BoundConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw DataError("bound config: delta must lie in (0, 1)");
    if (!(tau > 0.0)) throw DataError("bound config: tau must be positive");
    if (!(l_y > 0.0)) throw DataError("bound config: l_y must be positive");
    if (domain.dim() < 1) throw DataError("bound config: domain is empty");
}

double mean_lipschitz_bound(const ResGPModel& model) {
    require_scalar_output(model, "mean_lipschitz_bound");
    double total = 0.0;
    for (int f = 1; f <= model.fidelities(); ++f) {
        const TrainedLevel& lv = model.level(f);
        const double lk = kernel_lipschitz(model.raw_kernel(f), model.domain());
        total += lk * std::sqrt(double(lv.size())) * lv.exact_factor().alpha.norm();
    }
    return total;
}

double sigma_modulus_coefficient(const ResGPModel& model) {
    require_scalar_output(model, "sigma_modulus");
    double total = 0.0;
    for (int f = 1; f <= model.fidelities(); ++f) {
        const TrainedLevel& lv = model.level(f);
        const double lk = kernel_lipschitz(model.raw_kernel(f), model.domain());
        const Eigen::MatrixXd& l = lv.exact_factor().chol;
        const Eigen::MatrixXd k = l * l.transpose();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(k);
        const double smin = svd.singularValues().minCoeff();
        const double inv_norm = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
        total += 2.0 * lk * (1.0 + double(lv.size()) * lv.params().amplitude * inv_norm);
    }
    return total;
}

double sigma_modulus(const ResGPModel& model, double r) {
    if (!(r >= 0.0)) throw DataError("sigma_modulus: r must be non-negative");
    return std::sqrt(sigma_modulus_coefficient(model) * r);
}

double beta_from_covering(std::uint64_t covering, double delta) {
    return 2.0 * std::log(double(covering) / delta);
}

std::uint64_t covering_number_bound(const DomainBox& domain, double tau) {
    if (!(tau > 0.0)) throw DataError("covering_number_bound: tau must be positive");
    const Eigen::VectorXd w = domain.width();
    const double e = w[0];
    for (Eigen::Index i = 1; i < w.size(); ++i) {
        if (std::abs(w[i] - e) > 1e-12 * std::max(1.0, e)) {
            throw UnsupportedError("covering_number_bound: domain is not hypercubic");
        }
    }
    const double v = std::pow(1.0 + e / tau, double(domain.dim()));
    if (!(v < 9.2e18)) throw UnsupportedError("covering_number_bound: covering number overflows 64 bits");
    const double r = std::round(v);
    // Absorb representation error so that e.g. (1 + 1/0.1) gives exactly 11.
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, v)) return static_cast<std::uint64_t>(r);
    return static_cast<std::uint64_t>(std::ceil(v));
}

double fill_distance(const Eigen::Ref<const Eigen::MatrixXd>& design, const DomainBox& domain, int grid_resolution) {
    if (design.rows() == 0) throw DataError("fill_distance: design is empty");
    if (design.cols() != domain.dim()) throw DimensionError("fill_distance: design dimension != domain dimension");
    if (grid_resolution < 1) throw DataError("fill_distance: grid_resolution must be >= 1");
    const Eigen::Index l = domain.dim();
    if (std::pow(double(grid_resolution), double(l)) > 1e7) {
        throw UnsupportedError("fill_distance: grid_resolution^l exceeds 1e7 points");
    }
    std::vector<int> idx(static_cast<std::size_t>(l), 0);
    Eigen::VectorXd x(l);
    double worst = 0.0;
    while (true) {
        for (Eigen::Index i = 0; i < l; ++i) {
            const double t = grid_resolution == 1 ? 0.5 : double(idx[static_cast<std::size_t>(i)]) / (grid_resolution - 1);
            x[i] = domain.lower[i] + t * (domain.upper[i] - domain.lower[i]);
        }
        const double nearest = (design.rowwise() - x.transpose()).rowwise().norm().minCoeff();
        worst = std::max(worst, nearest);
        Eigen::Index k = 0;
        while (k < l && ++idx[static_cast<std::size_t>(k)] == grid_resolution) {
            idx[static_cast<std::size_t>(k)] = 0;
            ++k;
        }
        if (k == l) break;
    }
    return worst;
}

BoundResult uniform_bound(const ResGPModel& model, const BoundConfig& cfg) {
    cfg.validate();
    require_scalar_output(model, "uniform_bound");
    if (cfg.domain.dim() != model.input_dim()) throw DimensionError("bound domain dimension != model input dimension");

    BoundResult out;
    UniformBound& c = out.constants;
    c.covering = covering_number_bound(cfg.domain, cfg.tau);
    c.beta = beta_from_covering(c.covering, cfg.delta);
    c.l_mu = mean_lipschitz_bound(model);
    c.omega_coeff = sigma_modulus_coefficient(model);
    c.gamma = (c.l_mu + cfg.l_y) * cfg.tau + std::sqrt(c.beta) * std::sqrt(c.omega_coeff * cfg.tau);

    auto shared = std::make_shared<const ResGPModel>(model);
    const double sb = std::sqrt(c.beta), gamma = c.gamma;
    out.bound = [shared, sb, gamma](const Eigen::VectorXd& x) {
        return sb * std::sqrt(shared->predict(x).var) + gamma;
    };
    return out;
}

}  // namespace resgp
