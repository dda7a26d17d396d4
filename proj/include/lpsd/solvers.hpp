#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lpsd/forward_model.hpp"
#include "lpsd/grid.hpp"

// Proximal-gradient baselines for l1-regularized least squares
// min 0.5 |y - A x|^2 + gamma r(x): ISTA, FISTA (Nesterov momentum), and
// plain gradient descent with the smooth l2 penalty r = 0.5 |x|^2. These are
// both the comparison baselines and the reference behavior the learned
// network is tested against.

namespace lpsd::solvers {

enum class Method {
    ista,
    fista,
    gd_l2,
};

struct SolverConfig {
    Method method = Method::ista;
    double gamma = 0.0;
    // Step size; defaults to 0.9 / L with L = lambda_max(A^T A) estimated by
    // power iteration.
    std::optional<double> eta;
    std::int64_t max_iters = 1000;
    double tol = 1e-8; // relative iterate-change stop; 0 disables

    void validate() const;
};

struct SolveReport {
    Grid x_hat;
    std::int64_t iterations_run = 0;
    // Objective 0.5 |y - A x_k|^2 + gamma r(x_k) after each update; length
    // equals iterations_run.
    std::vector<double> objective_trace;
};

// Elementwise sign(v) max(|v| - lambda, 0). lambda < 0 is invalid.
Grid soft_threshold(const Grid& v, double lambda);

// Largest eigenvalue of A^T A (squared spectral norm of A) by power
// iteration.
double operator_norm_sq(const ConvOperator& op, int iters = 20,
                        std::uint64_t seed = 0x9e3779b9u);

// Runs the configured method from x_0 = A^T y. Columns of a multi-trace y
// are deconvolved jointly (A acts per column, the penalty is separable).
// Throws lpsd::DivergedError, naming the iteration, if the objective exceeds
// 1e12.
SolveReport solve(const Grid& y, const ConvOperator& op,
                  const SolverConfig& cfg);

} // namespace lpsd::solvers
