#pragma once

#include <Eigen/Dense>

namespace resgp {

struct Metrics {
    double rmse = 0.0;
    double r2 = 0.0;
    double mnll = 0.0;  // +inf when some zero-variance prediction misses the truth
    double nrmse = 0.0;
};

// All four metrics over the N x d flattened entries. Each row shares the
// predictive variance vars[i]. Throws DataError on a constant truth (r2 undefined).
Metrics metrics(const Eigen::Ref<const Eigen::MatrixXd>& means, const Eigen::Ref<const Eigen::VectorXd>& vars,
                const Eigen::Ref<const Eigen::MatrixXd>& truth);

}  // namespace resgp
