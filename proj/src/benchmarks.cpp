#include "resgp/benchmarks.hpp"

#include "resgp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace resgp {

namespace fn {

namespace {
constexpr double pi = std::numbers::pi;
}

double currin_high(double x1, double x2) {
    // exp(-1/(2 x2)) -> 0 as x2 -> 0+, which IEEE arithmetic gives directly.
    const double factor = 1.0 - std::exp(-1.0 / (2.0 * x2));
    const double num = 2300.0 * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    const double den = 100.0 * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    return factor * num / den;
}

double currin_low(double x1, double x2) {
    const double lo2 = std::max(0.0, x2 - 0.05);
    return 0.25 * (currin_high(x1 + 0.05, x2 + 0.05) + currin_high(x1 + 0.05, lo2)) +
           0.25 * (currin_high(x1 - 0.05, x2 + 0.05) + currin_high(x1 - 0.05, lo2));
}

double park_high(const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3];
    double first;
    if (x1 == 0.0) {
        first = 0.5 * std::sqrt((x2 + x3 * x3) * x4);  // limit as x1 -> 0
    } else {
        first = 0.5 * x1 * (std::sqrt(1.0 + (x2 + x3 * x3) * x4 / (x1 * x1)) - 1.0);
    }
    return first + (x1 + 3.0 * x4) * std::exp(1.0 + std::sin(x3));
}

double park_low(const Eigen::Ref<const Eigen::VectorXd>& x) {
    return (1.0 + std::sin(x[0]) / 10.0) * park_high(x) - 2.0 * x[0] + x[1] * x[1] + x[2] * x[2] + 0.5;
}

namespace {

double borehole(const Eigen::Ref<const Eigen::VectorXd>& x, double lead, double offset) {
    const double rw = x[0], r = x[1], tu = x[2], hu = x[3], tl = x[4], hl = x[5], len = x[6], kw = x[7];
    const double lg = std::log(r / rw);
    return lead * tu * (hu - hl) / (lg * (offset + 2.0 * len * tu / (lg * rw * rw * kw)) + tu / tl);
}

}  // namespace

double borehole_high(const Eigen::Ref<const Eigen::VectorXd>& x) {
    return borehole(x, 2.0 * pi, 1.0);
}

double borehole_low(const Eigen::Ref<const Eigen::VectorXd>& x) {
    return borehole(x, 5.0, 1.5);
}

double branin(int fidelity, double x1, double x2) {
    switch (fidelity) {
        case 1: {
            const double t = -1.275 * x1 * x1 / (pi * pi) + 5.0 * x1 / pi + x2 - 6.0;
            return t * t + (10.0 - 5.0 / (4.0 * pi)) * std::cos(x1) + 10.0;
        }
        case 2:
            return 10.0 * std::sqrt(branin(1, x1 - 2.0, x2 - 2.0)) + 2.0 * (x1 - 0.5) - 3.0 * (3.0 * x2 - 1.0) - 1.0;
        case 3:
            return branin(2, 1.2 * (x1 + 2.0), 1.2 * (x2 + 2.0)) - 3.0 * x2 + 1.0;
        default:
            throw DataError("branin: fidelity must be 1, 2 or 3");
    }
}

Eigen::Vector4d hartmann3_alpha(int fidelity) {
    if (fidelity < 1 || fidelity > 3) throw DataError("hartmann3: fidelity must be 1, 2 or 3");
    const Eigen::Vector4d alpha(1.0, 1.2, 3.0, 3.2);
    const Eigen::Vector4d delta(0.01, -0.01, -0.1, 0.1);
    return alpha + double(3 - fidelity) * delta;
}

double hartmann3(int fidelity, const Eigen::Ref<const Eigen::VectorXd>& x) {
    static const double a[4][3] = {{3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}};
    static const double p[4][3] = {{0.3689, 0.1170, 0.2673},
                                   {0.4699, 0.4387, 0.7470},
                                   {0.1091, 0.8732, 0.5547},
                                   {0.0381, 0.5743, 0.8828}};
    const Eigen::Vector4d alpha = hartmann3_alpha(fidelity);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 3; ++j) inner += a[i][j] * (x[j] - p[i][j]) * (x[j] - p[i][j]);
        s += alpha[i] * std::exp(-inner);
    }
    return s;
}

}  // namespace fn

namespace {

DomainBox box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
    Eigen::VectorXd l(static_cast<Eigen::Index>(lo.size())), h(static_cast<Eigen::Index>(hi.size()));
    std::copy(lo.begin(), lo.end(), l.data());
    std::copy(hi.begin(), hi.end(), h.data());
    return DomainBox(l, h);
}

}  // namespace

BenchmarkSpec benchmark_spec(BenchmarkName name) {
    switch (name) {
        case BenchmarkName::currin: return {name, 2, 2, 1, DomainBox::unit(2)};
        case BenchmarkName::park: return {name, 2, 4, 1, DomainBox::unit(4)};
        case BenchmarkName::borehole:
            return {name, 2, 8, 1,
                    box({0.05, 100.0, 63070.0, 990.0, 63.1, 700.0, 1120.0, 9855.0},
                        {0.15, 50000.0, 115600.0, 1110.0, 115.0, 820.0, 1680.0, 12045.0})};
        case BenchmarkName::branin3: return {name, 3, 2, 1, box({-5.0, 0.0}, {10.0, 15.0})};
        case BenchmarkName::hartmann3: return {name, 3, 3, 1, DomainBox::unit(3)};
        case BenchmarkName::pendulum: return {name, 2, 1, 2, box({1.25}, {1.57})};
    }
    throw DataError("unknown benchmark");
}

std::string to_string(BenchmarkName name) {
    switch (name) {
        case BenchmarkName::currin: return "currin";
        case BenchmarkName::park: return "park";
        case BenchmarkName::borehole: return "borehole";
        case BenchmarkName::branin3: return "branin3";
        case BenchmarkName::hartmann3: return "hartmann3";
        case BenchmarkName::pendulum: return "pendulum";
    }
    return "unknown";
}

BenchmarkSpec benchmark_spec(const std::string& name) {
    for (auto b : {BenchmarkName::currin, BenchmarkName::park, BenchmarkName::borehole, BenchmarkName::branin3,
                   BenchmarkName::hartmann3, BenchmarkName::pendulum}) {
        if (to_string(b) == name) return benchmark_spec(b);
    }
    throw DataError("unknown benchmark '" + name + "'");
}

const std::vector<BenchmarkName>& synthetic_benchmarks() {
    static const std::vector<BenchmarkName> all = {BenchmarkName::currin, BenchmarkName::park, BenchmarkName::borehole,
                                                   BenchmarkName::branin3, BenchmarkName::hartmann3};
    return all;
}

std::vector<int> reference_budgets(BenchmarkName name) {
    switch (name) {
        case BenchmarkName::currin: return {20, 5};
        case BenchmarkName::park: return {30, 5};
        case BenchmarkName::borehole: return {60, 10};
        case BenchmarkName::branin3: return {80, 30, 10};
        case BenchmarkName::hartmann3: return {80, 30, 10};
        case BenchmarkName::pendulum: return {41, 14};
    }
    return {};
}

Eigen::VectorXd evaluate(const BenchmarkSpec& spec, int fidelity, const Eigen::Ref<const Eigen::VectorXd>& query) {
    if (fidelity < 1 || fidelity > spec.fidelities) {
        throw DataError(to_string(spec.name) + ": fidelity " + std::to_string(fidelity) + " out of range");
    }
    if (query.size() != spec.input_dim) {
        throw DimensionError(to_string(spec.name) + ": expected input dimension " + std::to_string(spec.input_dim));
    }
    if (!spec.domain.contains(query, 1e-12)) throw DataError(to_string(spec.name) + ": query outside the domain");

    Eigen::VectorXd out(spec.output_dim);
    switch (spec.name) {
        case BenchmarkName::currin:
            out[0] = fidelity == 2 ? fn::currin_high(query[0], query[1]) : fn::currin_low(query[0], query[1]);
            break;
        case BenchmarkName::park: out[0] = fidelity == 2 ? fn::park_high(query) : fn::park_low(query); break;
        case BenchmarkName::borehole: out[0] = fidelity == 2 ? fn::borehole_high(query) : fn::borehole_low(query); break;
        case BenchmarkName::branin3: out[0] = fn::branin(fidelity, query[0], query[1]); break;
        case BenchmarkName::hartmann3: out[0] = fn::hartmann3(fidelity, query); break;
        case BenchmarkName::pendulum: {
            auto a = pendulum_solve(query[0], pendulum_step(fidelity));
            out << a[0], a[1];
            break;
        }
    }
    return out;
}

Eigen::MatrixXd evaluate_rows(const BenchmarkSpec& spec, int fidelity, const Eigen::Ref<const Eigen::MatrixXd>& x) {
    Eigen::MatrixXd y(x.rows(), spec.output_dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) y.row(i) = evaluate(spec, fidelity, x.row(i).transpose()).transpose();
    return y;
}

namespace {

constexpr double kG = 9.81, kL1 = 1.0, kL2 = 2.0, kM1 = 2.0, kM2 = 1.0, kTheta2_0 = 2.2;

// Solves the 2x2 mass-matrix system for the angular accelerations.
PendulumState derivative(const PendulumState& s) {
    const double delta = s.theta1 - s.theta2;
    const double c = std::cos(delta), sn = std::sin(delta);
    const double a11 = (kM1 + kM2) * kL1, a12 = kM2 * kL2 * c;
    const double a21 = kM2 * kL1 * c, a22 = kM2 * kL2;
    const double b1 = -kM2 * kL2 * s.omega2 * s.omega2 * sn - kG * (kM1 + kM2) * std::sin(s.theta1);
    const double b2 = kM2 * kL1 * s.omega1 * s.omega1 * sn - kM2 * kG * std::sin(s.theta2);
    const double det = a11 * a22 - a12 * a21;
    if (!(std::abs(det) > 1e-12)) throw ConditioningError("pendulum: singular mass matrix");
    PendulumState d;
    d.theta1 = s.omega1;
    d.theta2 = s.omega2;
    d.omega1 = (b1 * a22 - a12 * b2) / det;
    d.omega2 = (a11 * b2 - a21 * b1) / det;
    return d;
}

PendulumState axpy(const PendulumState& s, double h, const PendulumState& d) {
    return {s.theta1 + h * d.theta1, s.theta2 + h * d.theta2, s.omega1 + h * d.omega1, s.omega2 + h * d.omega2};
}

}  // namespace

PendulumState pendulum_integrate(double theta1_0, double dt, double t_end) {
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw DataError("pendulum: dt must be positive and t_end non-negative");
    const long steps = std::lround(t_end / dt);
    if (std::abs(double(steps) * dt - t_end) > 1e-9 * std::max(1.0, t_end)) {
        throw DataError("pendulum: t_end must be a whole number of steps");
    }
    PendulumState s{theta1_0, kTheta2_0, 0.0, 0.0};
    for (long i = 0; i < steps; ++i) {
        const PendulumState k1 = derivative(s);
        const PendulumState k2 = derivative(axpy(s, 0.5 * dt, k1));
        const PendulumState k3 = derivative(axpy(s, 0.5 * dt, k2));
        const PendulumState k4 = derivative(axpy(s, dt, k3));
        s.theta1 += dt / 6.0 * (k1.theta1 + 2.0 * k2.theta1 + 2.0 * k3.theta1 + k4.theta1);
        s.theta2 += dt / 6.0 * (k1.theta2 + 2.0 * k2.theta2 + 2.0 * k3.theta2 + k4.theta2);
        s.omega1 += dt / 6.0 * (k1.omega1 + 2.0 * k2.omega1 + 2.0 * k3.omega1 + k4.omega1);
        s.omega2 += dt / 6.0 * (k1.omega2 + 2.0 * k2.omega2 + 2.0 * k3.omega2 + k4.omega2);
    }
    return s;
}

double pendulum_energy(const PendulumState& s) {
    const double c = std::cos(s.theta1 - s.theta2);
    const double kinetic = 0.5 * (kM1 + kM2) * kL1 * kL1 * s.omega1 * s.omega1 +
                           0.5 * kM2 * kL2 * kL2 * s.omega2 * s.omega2 + kM2 * kL1 * kL2 * s.omega1 * s.omega2 * c;
    const double potential = -(kM1 + kM2) * kG * kL1 * std::cos(s.theta1) - kM2 * kG * kL2 * std::cos(s.theta2);
    return kinetic + potential;
}

std::array<double, 2> pendulum_solve(double theta1_0, double dt) {
    PendulumState s = pendulum_integrate(theta1_0, dt, 5.0);
    return {s.theta1, s.theta2};
}

double pendulum_step(int fidelity) {
    if (fidelity == 1) return 0.1;
    if (fidelity == 2) return 0.01;
    throw DataError("pendulum: fidelity must be 1 or 2");
}

Eigen::MatrixXd design_uniform(const DomainBox& domain, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw DataError("design_uniform: n must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd x(n, domain.dim());
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < domain.dim(); ++c) {
            x(r, c) = domain.lower[c] + u(rng) * (domain.upper[c] - domain.lower[c]);
        }
    }
    return x;
}

NestedSubset nested_subsample(const Eigen::Ref<const Eigen::MatrixXd>& design, Eigen::Index n_sub, std::uint64_t seed) {
    if (n_sub < 0 || n_sub > design.rows()) {
        throw DataError("nested_subsample: n_sub must lie in [0, " + std::to_string(design.rows()) + "]");
    }
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(design.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n_sub entries are a uniform sample.
    for (Eigen::Index i = 0; i < n_sub; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, design.rows() - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(n_sub));
    std::sort(idx.begin(), idx.end());
    NestedSubset out;
    out.parents = idx;
    out.points.resize(n_sub, design.cols());
    for (Eigen::Index i = 0; i < n_sub; ++i) out.points.row(i) = design.row(idx[static_cast<std::size_t>(i)]);
    return out;
}

MultiFidelityData benchmark_dataset(const BenchmarkSpec& spec, const std::vector<int>& budgets, std::uint64_t seed) {
    if (static_cast<int>(budgets.size()) != spec.fidelities) {
        throw DataError(to_string(spec.name) + ": expected " + std::to_string(spec.fidelities) + " budgets");
    }
    for (std::size_t f = 1; f < budgets.size(); ++f) {
        if (budgets[f] > budgets[f - 1]) throw DataError("budgets must be non-increasing");
    }
    MultiFidelityData data;
    Eigen::MatrixXd x = design_uniform(spec.domain, budgets[0], seed);
    for (int f = 1; f <= spec.fidelities; ++f) {
        if (f > 1) x = nested_subsample(x, budgets[static_cast<std::size_t>(f - 1)], seed + 7919ULL * f).points;
        data.levels.push_back({x, evaluate_rows(spec, f, x)});
    }
    return data;
}

MultiFidelityData pendulum_dataset(Eigen::Index n_low, Eigen::Index stride) {
    if (n_low < 2 || stride < 1) throw DataError("pendulum_dataset: need n_low >= 2 and stride >= 1");
    const BenchmarkSpec spec = benchmark_spec(BenchmarkName::pendulum);
    Eigen::MatrixXd low(n_low, 1);
    for (Eigen::Index i = 0; i < n_low; ++i) {
        low(i, 0) = spec.domain.lower[0] + (spec.domain.upper[0] - spec.domain.lower[0]) * double(i) / double(n_low - 1);
    }
    const Eigen::Index n_high = (n_low - 1) / stride + 1;
    Eigen::MatrixXd high(n_high, 1);
    for (Eigen::Index i = 0; i < n_high; ++i) high(i, 0) = low(i * stride, 0);
    MultiFidelityData data;
    data.levels.push_back({low, evaluate_rows(spec, 1, low)});
    data.levels.push_back({high, evaluate_rows(spec, 2, high)});
    return data;
}

}  // namespace resgp
