#pragma once

#include <Eigen/Dense>

#include <functional>

namespace resgp {

// Objective returning f(x) and writing grad. May throw; a throwing trial
// point is treated as +inf by the line search.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsSettings {
    int max_iters = 200;
    double grad_tol = 1e-6;   // on the infinity norm of the projected gradient
    int history = 10;
    double lower = -10.0;
    double upper = 10.0;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd grad;
    double projected_grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Box-constrained limited-memory BFGS: two-loop recursion over the free
// variables, projection onto the box, Armijo backtracking along the
// projected path. Returns a point no worse than the (clamped) start.
LbfgsResult minimize_box_lbfgs(const Objective& fn, Eigen::VectorXd x0, const LbfgsSettings& settings);

}  // namespace resgp
