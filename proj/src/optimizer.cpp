#include "resgp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>
#include <limits>

namespace resgp {

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& x, double lo, double hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

// Zero the components that sit on a bound and point out of the box.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g, double lo, double hi) {
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if ((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0)) pg[i] = 0.0;
    }
    return pg;
}

double safe_eval(const Objective& fn, const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    try {
        double v = fn(x, g);
        if (!std::isfinite(v) || !g.allFinite()) return std::numeric_limits<double>::infinity();
        return v;
    } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

LbfgsResult minimize_box_lbfgs(const Objective& fn, Eigen::VectorXd x0, const LbfgsSettings& s) {
    const double lo = s.lower, hi = s.upper;
    LbfgsResult res;
    res.x = clamp(x0, lo, hi);
    res.grad = Eigen::VectorXd::Zero(res.x.size());
    res.value = fn(res.x, res.grad);  // the start point must be evaluable

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    int stalls = 0;

    for (int iter = 0; iter < s.max_iters; ++iter) {
        Eigen::VectorXd pg = projected_gradient(res.x, res.grad, lo, hi);
        res.projected_grad_norm = pg.cwiseAbs().maxCoeff();
        res.iterations = iter;
        if (res.projected_grad_norm < s.grad_tol) {
            res.converged = true;
            return res;
        }

        // Two-loop recursion restricted to free variables.
        Eigen::VectorXd free = (pg.array() != 0.0).cast<double>().matrix();
        Eigen::VectorXd q = pg;
        const std::size_t m = s_hist.size();
        std::vector<double> alpha(m), rho(m);
        for (std::size_t k = m; k-- > 0;) {
            rho[k] = 1.0 / y_hist[k].cwiseProduct(free).dot(s_hist[k].cwiseProduct(free));
            alpha[k] = rho[k] * s_hist[k].cwiseProduct(free).dot(q);
            q -= alpha[k] * y_hist[k].cwiseProduct(free);
        }
        double gamma = 1.0;
        if (m > 0) {
            double yy = y_hist.back().cwiseProduct(free).squaredNorm();
            double sy = y_hist.back().cwiseProduct(free).dot(s_hist.back().cwiseProduct(free));
            if (yy > 0.0 && sy > 0.0) gamma = sy / yy;
        }
        q *= gamma;
        for (std::size_t k = 0; k < m; ++k) {
            double beta = rho[k] * y_hist[k].cwiseProduct(free).dot(q);
            q += (alpha[k] - beta) * s_hist[k].cwiseProduct(free);
        }
        Eigen::VectorXd dir = -q.cwiseProduct(free);
        if (!dir.allFinite() || dir.dot(pg) >= 0.0) {
            dir = -pg;
            s_hist.clear();
            y_hist.clear();
        }

        double step = 1.0;
        if (m == 0) step = std::min(1.0, 1.0 / std::max(1e-12, dir.cwiseAbs().maxCoeff()));

        Eigen::VectorXd g_new(res.x.size());
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            x_new = clamp(res.x + step * dir, lo, hi);
            f_new = safe_eval(fn, x_new, g_new);
            double decrease = res.grad.dot(x_new - res.x);
            if (f_new <= res.value + 1e-4 * decrease && decrease < 0.0) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!s_hist.empty()) {
                s_hist.clear();
                y_hist.clear();
                continue;
            }
            return res;
        }

        Eigen::VectorXd sv = x_new - res.x;
        Eigen::VectorXd yv = g_new - res.grad;
        double rel = (res.value - f_new) / std::max(1.0, std::abs(res.value));
        res.x = x_new;
        res.value = f_new;
        res.grad = g_new;
        if (sv.dot(yv) > 1e-12 * sv.norm() * yv.norm()) {
            s_hist.push_back(sv);
            y_hist.push_back(yv);
            if (static_cast<int>(s_hist.size()) > s.history) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        stalls = rel < 1e-15 ? stalls + 1 : 0;
        if (stalls >= 3) break;
    }
    res.projected_grad_norm = projected_gradient(res.x, res.grad, lo, hi).cwiseAbs().maxCoeff();
    res.converged = res.projected_grad_norm < s.grad_tol;
    return res;
}

}  // namespace resgp
