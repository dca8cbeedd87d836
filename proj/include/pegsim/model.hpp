#pragma once

#include <string>
#include <vector>

namespace pegsim {

/// Polynomial drift b(x) = sum_k c_k x^k in the monomial basis.
///
/// Restricting the drift to polynomials keeps b twice continuously
/// differentiable with exact first/second derivatives and an exact
/// antiderivative, all of which the source-term assembly needs.
struct DriftSpec {
    std::vector<double> coefficients;  // ascending degree, c_0 .. c_m

    /// b(x) by Horner recurrence.
    double operator()(double x) const;

    /// b'(x) (order 1) or b''(x) (order 2), differentiated analytically.
    double derivative(double x, int order) const;

    /// Integral of b over [x0, x], integrated term by term.
    double antiderivative(double x0, double x) const;

    int degree() const { return coefficients.empty() ? 0 : static_cast<int>(coefficients.size()) - 1; }
};

/// Market and preference constants of the target-zone problem.
struct ModelParams {
    double beta_minus = 0.0;  // lower barrier
    double beta_plus = 1.0;   // upper barrier
    double sigma = 0.25;      // volatility
    double eta = 6.0;         // temporary-impact coefficient
    double gamma = 1.0;       // permanent-impact coefficient
    double rho = 0.5;         // discount rate
    double theta = 0.0;       // horizon intensity
    double lambda = 0.5;      // effective discount, rho + theta
    DriftSpec drift;

    double width() const { return beta_plus - beta_minus; }

    /// 2*sigma^2*eta/gamma^2, the boundary value of U and the blow-up
    /// coefficient of V at both barriers.
    double boundary_u() const { return 2.0 * sigma * sigma * eta / (gamma * gamma); }

    bool contains(double x) const { return x > beta_minus && x < beta_plus; }
};

/// Checks every ModelParams invariant and fills lambda = rho + theta.
/// Throws std::invalid_argument naming the violated invariant.
ModelParams validate_params(ModelParams p);

}  // namespace pegsim
