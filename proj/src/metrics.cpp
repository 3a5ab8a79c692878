#include "resgp/metrics.hpp"

#include "resgp/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace resgp {

Metrics metrics(const Eigen::Ref<const Eigen::MatrixXd>& means, const Eigen::Ref<const Eigen::VectorXd>& vars,
                const Eigen::Ref<const Eigen::MatrixXd>& truth) {
    if (means.rows() != truth.rows() || means.cols() != truth.cols()) {
        throw DimensionError("metrics: prediction and truth shapes differ");
    }
    if (vars.size() != truth.rows()) throw DimensionError("metrics: one variance per row is required");
    if (truth.size() == 0) throw DataError("metrics: no test points");
    if ((vars.array() < 0.0).any() || !vars.allFinite()) throw DataError("metrics: variances must be finite and >= 0");

    const double n = double(truth.size());
    const Eigen::ArrayXXd err = (means - truth).array();
    const double sse = err.square().sum();
    const double sst = (truth.array() - truth.mean()).square().sum();
    if (!(sst > 0.0)) throw DataError("metrics: r2 is undefined for a constant truth");

    Metrics m;
    m.rmse = std::sqrt(sse / n);
    m.r2 = 1.0 - sse / sst;
    const double norm = truth.array().square().sum();
    m.nrmse = std::sqrt(sse / norm);

    double total = 0.0;
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
        for (Eigen::Index j = 0; j < truth.cols(); ++j) {
            const double e2 = err(i, j) * err(i, j);
            const double v = vars[i];
            if (v == 0.0) {
                if (e2 > 0.0) {
                    m.mnll = std::numeric_limits<double>::infinity();
                    return m;
                }
                // exact hit with a point mass: use the smallest normal variance
                total += 0.5 * std::log(2.0 * std::numbers::pi * std::numeric_limits<double>::min());
                continue;
            }
            total += 0.5 * std::log(2.0 * std::numbers::pi * v) + 0.5 * e2 / v;
        }
    }
    m.mnll = total / n;
    return m;
}

}  // namespace resgp
