#include "resgp/gp_level.hpp"

#include "resgp/error.hpp"
#include "resgp/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

namespace resgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

// Negative log-likelihood and its gradient for one residual level. The data
// enter only through S = R R^T, so each evaluation is O(N^3) whatever d is.
class LevelObjective {
public:
    LevelObjective(const ResidualDataset& data, bool with_noise, double rel_jitter)
        : inputs_(data.inputs),
          outer_(data.residuals * data.residuals.transpose()),
          d_(double(data.output_dim())),
          with_noise_(with_noise),
          rel_jitter_(rel_jitter) {
        const Eigen::Index n = inputs_.rows();
        sqdiff_.reserve(static_cast<std::size_t>(inputs_.cols()));
        for (Eigen::Index i = 0; i < inputs_.cols(); ++i) {
            Eigen::MatrixXd dm(n, n);
            for (Eigen::Index a = 0; a < n; ++a) {
                for (Eigen::Index b = 0; b < n; ++b) {
                    double diff = inputs_(a, i) - inputs_(b, i);
                    dm(a, b) = diff * diff;
                }
            }
            sqdiff_.push_back(std::move(dm));
        }
    }

    double operator()(const Eigen::VectorXd& logp, Eigen::VectorXd& grad) const {
        const Eigen::Index l = inputs_.cols();
        const Eigen::Index n = inputs_.rows();
        KernelHyperparams p = KernelHyperparams::from_log(logp, l, with_noise_);

        Eigen::MatrixXd expo = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < l; ++i) expo.noalias() -= p.weights[i] * sqdiff_[static_cast<std::size_t>(i)];
        Eigen::MatrixXd kern = p.amplitude * expo.array().exp().matrix();
        Eigen::MatrixXd k = kern;
        k.diagonal().array() += p.noise;

        LevelFactor f = factorize(k, p.amplitude, rel_jitter_, Eigen::MatrixXd(n, 0));
        Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
        f.chol.triangularView<Eigen::Lower>().solveInPlace(kinv);
        f.chol.triangularView<Eigen::Lower>().transpose().solveInPlace(kinv);

        Eigen::MatrixXd kinv_s = kinv * outer_;
        double value = 0.5 * d_ * f.log_det() + 0.5 * kinv_s.trace() + 0.5 * double(n) * d_ * kLog2Pi;

        // dNLL/dp = 1/2 tr(W dK/dp) with W = d K^{-1} - K^{-1} S K^{-1}.
        Eigen::MatrixXd w = d_ * kinv - kinv_s * kinv;
        grad.resize(logp.size());
        Eigen::MatrixXd damp = kern;
        damp.diagonal().array() += f.jitter;  // jitter is proportional to the amplitude
        grad[0] = 0.5 * w.cwiseProduct(damp).sum();
        for (Eigen::Index i = 0; i < l; ++i) {
            grad[1 + i] = -0.5 * p.weights[i] *
                          w.cwiseProduct(sqdiff_[static_cast<std::size_t>(i)].cwiseProduct(kern)).sum();
        }
        if (with_noise_) grad[1 + l] = 0.5 * p.noise * w.trace();
        return value;
    }

private:
    Eigen::MatrixXd inputs_;
    Eigen::MatrixXd outer_;
    std::vector<Eigen::MatrixXd> sqdiff_;
    double d_;
    bool with_noise_;
    double rel_jitter_;
};

ResidualDataset centre(const ResidualDataset& data, bool enabled, Eigen::RowVectorXd& means) {
    ResidualDataset out = data;
    means = Eigen::RowVectorXd::Zero(data.output_dim());
    if (enabled && data.size() > 0) {
        means = data.residuals.colwise().mean();
        out.residuals.rowwise() -= means;
    }
    return out;
}

}  // namespace

void ResidualDataset::validate() const {
    if (inputs.rows() < 1) throw DataError("residual dataset is empty");
    if (residuals.rows() != inputs.rows()) {
        throw DimensionError("residual rows (" + std::to_string(residuals.rows()) + ") != input rows (" +
                             std::to_string(inputs.rows()) + ")");
    }
    if (!inputs.allFinite() || !residuals.allFinite()) throw DataError("residual dataset has non-finite entries");
}

Eigen::VectorXd LevelFactor::solve(const Eigen::Ref<const Eigen::VectorXd>& rhs) const {
    Eigen::VectorXd x = rhs;
    chol.triangularView<Eigen::Lower>().solveInPlace(x);
    chol.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
    return x;
}

double LevelFactor::log_det() const {
    return 2.0 * chol.diagonal().array().log().sum();
}

LevelFactor factorize(const Eigen::MatrixXd& k, double amplitude, double rel_jitter, const Eigen::MatrixXd& rhs) {
    double jitter = rel_jitter * amplitude;
    const double cap = kMaxJitter * amplitude * (1.0 + 1e-12);
    while (true) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) {
            LevelFactor f;
            f.chol = llt.matrixL();
            if (f.chol.diagonal().minCoeff() > 0.0 && f.chol.allFinite()) {
                f.jitter = jitter;
                f.alpha = rhs.cols() > 0 ? Eigen::MatrixXd(llt.solve(rhs)) : Eigen::MatrixXd(k.rows(), 0);
                return f;
            }
        }
        jitter = jitter > 0.0 ? jitter * 10.0 : 1e-10 * amplitude;
        if (jitter > cap) {
            std::ostringstream msg;
            msg << "Cholesky failed with jitter up to " << kMaxJitter << " x amplitude (amplitude=" << amplitude
                << ", N=" << k.rows() << ")";
            throw ConditioningError(msg.str());
        }
    }
}

TrainedLevel TrainedLevel::build(const KernelHyperparams& params, ResidualDataset centred,
                                 Eigen::RowVectorXd column_means, double rel_jitter) {
    centred.validate();
    params.validate();
    if (params.dim() != centred.input_dim()) throw DimensionError("hyperparameter dimension != input dimension");
    TrainedLevel lvl;
    lvl.params_ = params;
    lvl.rel_jitter_ = rel_jitter;
    lvl.column_means_ = std::move(column_means);
    lvl.data_ = std::move(centred);

    const Eigen::MatrixXd k = gram(params, lvl.data_.inputs, 0.0);
    lvl.factor_ = factorize(k, params.amplitude, rel_jitter, lvl.data_.residuals);
    if (params.noise > 0.0) {
        Eigen::MatrixXd k_exact = k;
        k_exact.diagonal().array() -= params.noise;
        lvl.exact_ = factorize(k_exact, params.amplitude, rel_jitter, lvl.data_.residuals);
    }
    const double n = double(lvl.size()), d = double(lvl.output_dim());
    lvl.fit_nll_ = 0.5 * d * lvl.factor_.log_det() + 0.5 * lvl.data_.residuals.cwiseProduct(lvl.factor_.alpha).sum() +
                   0.5 * n * d * kLog2Pi;
    return lvl;
}

double neg_log_likelihood(const KernelHyperparams& params, const ResidualDataset& data, double rel_jitter) {
    data.validate();
    params.validate();
    if (params.dim() != data.input_dim()) throw DimensionError("hyperparameter dimension != input dimension");
    const Eigen::MatrixXd k = gram(params, data.inputs, 0.0);
    LevelFactor f = factorize(k, params.amplitude, rel_jitter, data.residuals);
    const double n = double(data.size()), d = double(data.output_dim());
    return 0.5 * d * f.log_det() + 0.5 * data.residuals.cwiseProduct(f.alpha).sum() + 0.5 * n * d * kLog2Pi;
}

Eigen::VectorXd nll_gradient(const KernelHyperparams& params, const ResidualDataset& data, bool with_noise,
                             double rel_jitter) {
    data.validate();
    params.validate();
    if (params.dim() != data.input_dim()) throw DimensionError("hyperparameter dimension != input dimension");
    if (with_noise && !(params.noise > 0.0)) throw DataError("log-noise gradient needs a positive noise variance");
    LevelObjective obj(data, with_noise, rel_jitter);
    Eigen::VectorXd grad;
    obj(params.to_log(with_noise), grad);
    return grad;
}

TrainedLevel fit_level(const ResidualDataset& data, const OptimizerConfig& opt) {
    data.validate();
    Eigen::RowVectorXd means;
    ResidualDataset centred = centre(data, opt.center, means);
    const bool with_noise = opt.learn_noise;
    const Eigen::Index l = data.input_dim();
    const Eigen::Index np = 1 + l + (with_noise ? 1 : 0);
    const double noise_start = std::log(1e-4);

    std::vector<Eigen::VectorXd> starts;
    if (opt.warm_start) {
        if (opt.warm_start->dim() != l) throw DimensionError("warm start dimension != input dimension");
        KernelHyperparams ws = *opt.warm_start;
        if (with_noise && !(ws.noise > 0.0)) ws.noise = std::exp(noise_start);
        starts.push_back(ws.to_log(with_noise));
    }
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(np);
    if (with_noise) unit[np - 1] = noise_start;
    starts.push_back(unit);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(std::log(1e-2), std::log(1e2));
    for (int r = 1; r < opt.restarts; ++r) {
        Eigen::VectorXd s(np);
        for (Eigen::Index i = 0; i < np; ++i) s[i] = unif(rng);
        starts.push_back(s);
    }

    // Fit on unit-RMS residuals so the amplitude bounds are relative to the data scale;
    // the likelihood is equivariant under this rescaling.
    const double scale = std::sqrt(centred.residuals.squaredNorm() / double(centred.residuals.size()));
    ResidualDataset scaled = centred;
    if (scale > 0.0 && std::isfinite(scale)) scaled.residuals /= scale;
    const double amp_scale = scale > 0.0 && std::isfinite(scale) ? scale * scale : 1.0;
    if (opt.warm_start) {
        starts.front()[0] -= std::log(amp_scale);
        if (with_noise) starts.front()[np - 1] -= std::log(amp_scale);
    }

    LevelObjective obj(scaled, with_noise, opt.jitter);
    LbfgsSettings settings;
    settings.max_iters = opt.max_iters;
    settings.grad_tol = opt.grad_tol;
    settings.lower = opt.log_lower;
    settings.upper = opt.log_upper;

    bool found = false;
    LbfgsResult best;
    std::string last_error;
    for (const auto& s : starts) {
        try {
            LbfgsResult r = minimize_box_lbfgs(std::cref(obj), s, settings);
            if (!found || r.value < best.value) {
                best = std::move(r);
                found = true;
            }
        } catch (const ConditioningError& e) {
            last_error = e.what();
        }
    }
    if (!found) throw ConditioningError("every restart failed to factorise: " + last_error);

    KernelHyperparams p = KernelHyperparams::from_log(best.x, l, with_noise);
    p.amplitude *= amp_scale;
    p.noise *= amp_scale;
    return TrainedLevel::build(p, std::move(centred), std::move(means), opt.jitter);
}

namespace {

LevelPrediction predict_with(const TrainedLevel& level, const LevelFactor& f,
                             const Eigen::Ref<const Eigen::VectorXd>& query) {
    Eigen::VectorXd k = cross_vec(level.params(), query, level.inputs());
    LevelPrediction out;
    out.mean = f.alpha.transpose() * k;
    Eigen::VectorXd v = k;
    f.chol.triangularView<Eigen::Lower>().solveInPlace(v);
    out.var = std::max(0.0, level.params().amplitude - v.squaredNorm());
    return out;
}

}  // namespace

LevelPrediction level_predict(const TrainedLevel& level, const Eigen::Ref<const Eigen::VectorXd>& query) {
    return predict_with(level, level.exact_factor(), query);
}

LevelPrediction level_predict_noisy(const TrainedLevel& level, const Eigen::Ref<const Eigen::VectorXd>& query) {
    return predict_with(level, level.factor(), query);
}

}  // namespace resgp
