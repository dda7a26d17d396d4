#include "lpsd/solvers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lpsd/errors.hpp"
#include "lpsd/kernels.hpp"
#include "lpsd/rng.hpp"

namespace lpsd::solvers {

namespace {

constexpr double kDivergenceCap = 1e12;

double l1_norm(const Grid& g) {
    double acc = 0.0;
    for (double v : g.v) acc += std::fabs(v);
    return acc;
}

double objective(const Grid& y, const ConvOperator& op, const Grid& x,
                 double gamma, Method method) {
    Grid r = op.apply(x);
    kernels::sub(y.v.data(), r.v.data(), r.v.data(), r.size());
    double obj = 0.5 * kernels::sumsq(r.v.data(), r.size());
    if (gamma > 0.0) {
        obj += gamma * (method == Method::gd_l2
                            ? 0.5 * kernels::sumsq(x.v.data(), x.size())
                            : l1_norm(x));
    }
    return obj;
}

// x + eta * A^T (y - A x), the shared gradient step on the data term.
Grid gradient_step(const Grid& y, const ConvOperator& op, const Grid& x,
                   double eta) {
    Grid r = op.apply(x);
    kernels::sub(y.v.data(), r.v.data(), r.v.data(), r.size());
    Grid g = op.apply_adjoint(r);
    kernels::scale(eta, g.v.data(), g.size());
    kernels::add(x.v.data(), g.v.data(), g.v.data(), g.size());
    return g;
}

double rel_change(const Grid& next, const Grid& prev) {
    double diff = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        const double d = next.v[i] - prev.v[i];
        diff += d * d;
    }
    const double base = kernels::sumsq(prev.v.data(), prev.size());
    if (base == 0.0) return diff == 0.0 ? 0.0 : 1.0;
    return std::sqrt(diff / base);
}

} // namespace

void SolverConfig::validate() const {
    if (gamma < 0.0)
        throw std::invalid_argument("SolverConfig: gamma must be >= 0");
    if (eta && *eta <= 0.0)
        throw std::invalid_argument("SolverConfig: eta must be > 0");
    if (max_iters < 1)
        throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (tol < 0.0)
        throw std::invalid_argument("SolverConfig: tol must be >= 0");
}

Grid soft_threshold(const Grid& v, double lambda) {
    if (lambda < 0.0)
        throw std::invalid_argument("soft_threshold: lambda must be >= 0");
    Grid out(v.n, v.m);
    kernels::soft_threshold(v.v.data(), lambda, out.v.data(), v.size());
    return out;
}

double operator_norm_sq(const ConvOperator& op, int iters,
                        std::uint64_t seed) {
    rng::Stream s(seed);
    Grid v(op.n(), 1);
    for (auto& e : v.v) e = s.normal();
    double norm = std::sqrt(kernels::sumsq(v.v.data(), v.size()));
    kernels::scale(1.0 / norm, v.v.data(), v.size());

    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        Grid w = op.apply_adjoint(op.apply(v));
        lambda = std::sqrt(kernels::sumsq(w.v.data(), w.size()));
        if (lambda == 0.0) return 0.0;
        kernels::scale(1.0 / lambda, w.v.data(), w.size());
        v = std::move(w);
    }
    return lambda; // |A^T A v| with |v| = 1
}

SolveReport solve(const Grid& y, const ConvOperator& op,
                  const SolverConfig& cfg) {
    cfg.validate();
    if (y.n != op.n())
        throw std::invalid_argument("solve: y leading dim " +
                                    std::to_string(y.n) + " != operator n = " +
                                    std::to_string(op.n()));

    const double eta =
        cfg.eta ? *cfg.eta : 0.9 / operator_norm_sq(op);

    SolveReport rep;
    Grid x = op.apply_adjoint(y);
    Grid momentum = x; // fista extrapolation point
    double t = 1.0;

    for (std::int64_t k = 0; k < cfg.max_iters; ++k) {
        Grid x_next(0, 0);
        switch (cfg.method) {
        case Method::ista:
            x_next = soft_threshold(gradient_step(y, op, x, eta),
                                    eta * cfg.gamma);
            break;
        case Method::fista: {
            x_next = soft_threshold(gradient_step(y, op, momentum, eta),
                                    eta * cfg.gamma);
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            // momentum = x_next + ((t - 1) / t_next) (x_next - x)
            const double beta = (t - 1.0) / t_next;
            momentum = x_next;
            kernels::scale(1.0 + beta, momentum.v.data(), momentum.size());
            kernels::axpy(-beta, x.v.data(), momentum.v.data(),
                          momentum.size());
            t = t_next;
            break;
        }
        case Method::gd_l2: {
            x_next = gradient_step(y, op, x, eta);
            kernels::axpy(-eta * cfg.gamma, x.v.data(), x_next.v.data(),
                          x_next.size());
            break;
        }
        }

        const double obj = objective(y, op, x_next, cfg.gamma, cfg.method);
        rep.objective_trace.push_back(obj);
        ++rep.iterations_run;
        if (!(obj < kDivergenceCap))
            throw DivergedError("solve: objective " + std::to_string(obj) +
                                " exceeded " + std::to_string(kDivergenceCap) +
                                " at iteration " + std::to_string(k));

        const double change = rel_change(x_next, x);
        x = std::move(x_next);
        if (cfg.tol > 0.0 && change < cfg.tol) break;
    }

    rep.x_hat = std::move(x);
    return rep;
}

} // namespace lpsd::solvers
