#pragma once

#include <functional>
#include <vector>

#include "pegsim/model.hpp"
#include "pegsim/transform.hpp"

namespace pegsim {

/// Uniform grid on [beta_minus, beta_plus] including both endpoints.
struct Grid {
    int n = 0;
    double beta_minus = 0.0;
    double beta_plus = 0.0;
    double h = 0.0;

    static Grid uniform(double beta_minus, double beta_plus, int n);

    double node(int i) const {
        if (i == n - 1) return beta_plus;
        return beta_minus + h * static_cast<double>(i);
    }
};

struct SolverConfig {
    int grid_n = 2001;
    double tolerance = 1e-9;          // max-norm of the discrete residual
    int max_newton_iters = 60;
    double min_line_search_step = 1.0 / (1 << 20);
    // Continuation stages. The flat initial guess converges directly at the
    // default regularization level; warm-started stages are for reaching
    // smaller epsilon, where the cold start does not converge.
    std::vector<double> epsilon_schedule = {0.00176};
};

struct StageInfo {
    double epsilon = 0.0;
    int iterations = 0;
    double residual_norm = 0.0;
};

/// Discrete solution of the U boundary-value problem.
struct GridSolution {
    Grid grid;
    std::vector<double> values;             // U at nodes; both ends pinned to 2 sigma^2 eta / gamma^2
    std::vector<double> derivative_values;  // U' from the same stencil as the solve
    double residual_norm = 0.0;
    int newton_iterations = 0;
    double epsilon_used = 0.0;
    std::vector<StageInfo> stages;          // continuation history, one entry per epsilon stage

    /// Central second difference at an interior node.
    double second_difference(int i) const {
        return (values[static_cast<size_t>(i) + 1] - 2.0 * values[static_cast<size_t>(i)] +
                values[static_cast<size_t>(i) - 1]) / (grid.h * grid.h);
    }
};

/// Discrete solution of the finite-boundary-value problem
///   -W'' + (W')^2 + (2 lambda/sigma^2) W = f,  W(beta_pm) = boundary_value.
struct TruncatedSolution {
    Grid grid;
    double boundary_value = 0.0;
    std::vector<double> values;
    double residual_norm = 0.0;
    int newton_iterations = 0;
};

/// Tridiagonal matrix in banded storage; lower[i] multiplies x[i-1],
/// upper[i] multiplies x[i+1]; lower[0] and upper[m-1] are ignored.
struct Tridiagonal {
    std::vector<double> lower, diag, upper;
    void resize(size_t m) { lower.resize(m); diag.resize(m); upper.resize(m); }
};

/// Thomas algorithm, in place over rhs. Throws std::runtime_error naming the
/// node index on a zero pivot.
void solve_tridiagonal(const Tridiagonal& J, std::vector<double>& rhs);

/// Interior residual and tridiagonal Jacobian of a pinned-boundary system.
/// The iterate vector has n entries; residual/jacobian cover the n-2
/// interior rows.
struct NewtonSystem {
    std::function<void(const std::vector<double>&, std::vector<double>&)> residual;
    std::function<void(const std::vector<double>&, Tridiagonal&)> jacobian;
};

struct NewtonStepResult {
    double residual_before = 0.0;
    double residual_after = 0.0;
    double step_scale = 0.0;   // accepted line-search fraction of the full Newton step
    bool accepted = false;
};

/// One damped Newton step: solve the linearized tridiagonal system, then
/// halve the step until the residual max-norm decreases. Boundary entries
/// of the iterate are never touched.
NewtonStepResult newton_step(const NewtonSystem& sys, std::vector<double>& u, double min_step);

/// Solves the U-equation with d_eps in the coefficients (eps taken from df)
/// at the flat initial guess U = 2 sigma^2 eta/gamma^2. Throws on
/// non-convergence.
GridSolution solve_u_bvp(const ModelParams& p, const DistanceFn& df, const SolverConfig& cfg);

/// Same, warm-started from a previous iterate (sizes must match grid_n).
GridSolution solve_u_bvp(const ModelParams& p, const DistanceFn& df, const SolverConfig& cfg,
                         const std::vector<double>& initial);

/// Solves the finite-boundary-value problem for W. An optional warm start
/// supports continuation in the boundary value, which the plain constant
/// initial guess cannot reach for large values.
TruncatedSolution solve_truncated_w(const ModelParams& p, const TransformAnchor& a, double boundary_value,
                                    const SolverConfig& cfg, const std::vector<double>* warm_start = nullptr);

/// Solves at each epsilon of cfg.epsilon_schedule in order, warm-starting
/// every stage from the previous one; returns the final-stage solution with
/// the full stage history attached.
GridSolution continuation_solve(const ModelParams& p, const DistanceFn& df, const SolverConfig& cfg);

}  // namespace pegsim
