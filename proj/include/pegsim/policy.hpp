#pragma once

#include "pegsim/bvp.hpp"
#include "pegsim/model.hpp"
#include "pegsim/transform.hpp"

namespace pegsim {

/// Value function and feedback control reconstructed from a grid solution.
///
/// Only the smooth factor U is interpolated (cubic Hermite from the solver's
/// values and stencil derivatives); the log singularity at the barriers is
/// carried analytically by -log d with the unregularized distance. All
/// evaluations are restricted to the open interval.
class PolicyFn {
public:
    PolicyFn(GridSolution solution, DistanceFn distance, ModelParams params);

    double u_at(double x) const;
    double u_derivative_at(double x) const;

    /// V(x) = -U(x) log d(x)
    double value_at(double x) const;

    /// V'(x) = -U'(x) log d(x) - U(x) d'(x)/d(x)
    double value_derivative_at(double x) const;

    /// u_hat(x) = -(gamma V'(x) + 1) / (2 eta)
    double control_at(double x) const;

    /// V'' at an interior grid node, with U'' taken from the solver's
    /// central-difference stencil rather than from the interpolant.
    double value_second_derivative_at_node(int i) const;

    /// Residual of the control-eliminated equation at an interior node,
    /// assembled from the node reconstruction above.
    double reduced_hjb_residual_at_node(int i) const;

    const GridSolution& solution() const { return solution_; }
    const DistanceFn& distance() const { return distance_; }
    const ModelParams& params() const { return params_; }

private:
    void interpolate(double x, double& u, double& up) const;
    void require_interior(double x) const;

    GridSolution solution_;
    DistanceFn distance_;
    ModelParams params_;
};

/// The expression under the infimum of the dynamic-programming equation:
///   V'(b(x) + gamma u) + (sigma^2/2) V'' + u + eta u^2 - lambda V
double hamiltonian(const ModelParams& p, double x, double u, double V, double Vp, double Vpp);

enum class Side { Lower, Upper };

struct BlowupFit {
    double coefficient = 0.0;              // V(beta -+ eps)/(-log eps) at the smallest eps
    double max_relative_deviation = 0.0;   // vs 2 sigma^2 eta/gamma^2 over the sampled range
};

/// Samples V(beta_pm -+ eps)/(-log eps) on a log-spaced grid of eps in
/// [eps_lo, eps_hi] and compares with the expected coefficient
/// 2 sigma^2 eta / gamma^2. Throws if the range dips below grid resolution
/// or reaches a quarter of the interval width.
BlowupFit fit_blowup_rate(const PolicyFn& pf, Side side, double eps_lo, double eps_hi, int samples = 25);

}  // namespace pegsim
