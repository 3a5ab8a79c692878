#pragma once

#include "resgp/kernel.hpp"
#include "resgp/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace resgp {

enum class BenchmarkName { currin, park, borehole, branin3, hartmann3, pendulum };

struct BenchmarkSpec {
    BenchmarkName name;
    int fidelities;
    Eigen::Index input_dim;
    Eigen::Index output_dim;
    DomainBox domain;
};

BenchmarkSpec benchmark_spec(BenchmarkName name);
BenchmarkSpec benchmark_spec(const std::string& name);  // "currin", "park", ...
std::string to_string(BenchmarkName name);
const std::vector<BenchmarkName>& synthetic_benchmarks();  // the five analytic problems

// Training budgets N_1-...-N_F used for the synthetic comparison table.
std::vector<int> reference_budgets(BenchmarkName name);

// Output of fidelity `fidelity` (1 = lowest) at `query`. Throws DataError
// outside the benchmark domain.
Eigen::VectorXd evaluate(const BenchmarkSpec& spec, int fidelity, const Eigen::Ref<const Eigen::VectorXd>& query);

// Raw analytic functions, no domain checks.
namespace fn {
double currin_high(double x1, double x2);
double currin_low(double x1, double x2);
double park_high(const Eigen::Ref<const Eigen::VectorXd>& x);
double park_low(const Eigen::Ref<const Eigen::VectorXd>& x);
double borehole_high(const Eigen::Ref<const Eigen::VectorXd>& x);
double borehole_low(const Eigen::Ref<const Eigen::VectorXd>& x);
double branin(int fidelity, double x1, double x2);
double hartmann3(int fidelity, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::Vector4d hartmann3_alpha(int fidelity);
}  // namespace fn

// Double pendulum, theta2(0) = 2.2 rad, zero initial angular velocities,
// l1 = 1 m, l2 = 2 m, m1 = 2 kg, m2 = 1 kg, g = 9.81 m/s^2.
struct PendulumState {
    double theta1 = 0.0, theta2 = 0.0, omega1 = 0.0, omega2 = 0.0;
};

// Classic RK4 with fixed step dt from t = 0 to t_end.
PendulumState pendulum_integrate(double theta1_0, double dt, double t_end = 5.0);
double pendulum_energy(const PendulumState& s);
// (theta1(5), theta2(5)).
std::array<double, 2> pendulum_solve(double theta1_0, double dt);
// Fidelity 1 uses dt = 0.1 s, fidelity 2 dt = 0.01 s.
double pendulum_step(int fidelity);

// n i.i.d. uniform points in the box (one per row), deterministic per seed.
Eigen::MatrixXd design_uniform(const DomainBox& domain, Eigen::Index n, std::uint64_t seed);

struct NestedSubset {
    Eigen::MatrixXd points;
    std::vector<Eigen::Index> parents;  // ascending rows of the parent design
};

// Uniformly random subset of n_sub rows without replacement.
NestedSubset nested_subsample(const Eigen::Ref<const Eigen::MatrixXd>& design, Eigen::Index n_sub, std::uint64_t seed);

// Nested uniform-random training data with the given budgets, outputs from `evaluate`.
MultiFidelityData benchmark_dataset(const BenchmarkSpec& spec, const std::vector<int>& budgets, std::uint64_t seed);

// Equally spaced pendulum design: n_low points over the domain, every
// `stride`-th of them at the high fidelity.
MultiFidelityData pendulum_dataset(Eigen::Index n_low = 41, Eigen::Index stride = 3);

// evaluate() applied to each row of `x`.
Eigen::MatrixXd evaluate_rows(const BenchmarkSpec& spec, int fidelity, const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace resgp
