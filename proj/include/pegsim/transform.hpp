#pragma once

#include "pegsim/model.hpp"

namespace pegsim {

enum class DistanceKind { Quadratic, Sine };

struct DistanceEval {
    double d;    // d(x) or d_eps(x)
    double d1;   // first derivative
    double d2;   // second derivative
};

/// Boundary distance function on [beta_minus, beta_plus].
///
/// Both kinds vanish at the barriers with slopes +1 / -1 and are positive
/// inside. The regularized variant d_eps = eps + (1-eps)*d is bounded away
/// from zero; it enters the U-equation coefficients but never the
/// V = -U*log(d) reconstruction.
class DistanceFn {
public:
    DistanceFn(DistanceKind kind, double beta_minus, double beta_plus, double epsilon);

    /// Value and first two derivatives at x; the regularized flag selects
    /// d_eps. Throws std::domain_error for x outside the closed interval.
    DistanceEval eval(double x, bool regularized) const;

    DistanceKind kind() const { return kind_; }
    double epsilon() const { return epsilon_; }
    double beta_minus() const { return beta_minus_; }
    double beta_plus() const { return beta_plus_; }

    /// Same function with a different regularization level.
    DistanceFn with_epsilon(double eps) const { return DistanceFn(kind_, beta_minus_, beta_plus_, eps); }

private:
    DistanceKind kind_;
    double beta_minus_;
    double beta_plus_;
    double epsilon_;
};

/// Anchor point x0 for the antiderivative terms of the V<->W maps.
struct TransformAnchor {
    double x0;
};

TransformAnchor default_anchor(const ModelParams& p);

/// Source term of the transformed equation:
///   f(x) = -gamma/(sigma^4 eta) b + b'/sigma^2 + b^2/sigma^4
///          + gamma lambda x/(sigma^4 eta) - 2 lambda/sigma^4 * int_{x0}^x b.
double source_term(const ModelParams& p, const TransformAnchor& a, double x);

/// W(x) = gamma/(2 eta sigma^2) * (gamma V + x - (2 eta/gamma) int_{x0}^x b)
double w_from_v(const ModelParams& p, const TransformAnchor& a, double x, double V);

/// Inverse of w_from_v at fixed x.
double v_from_w(const ModelParams& p, const TransformAnchor& a, double x, double W);

/// V = -U log d(x), with the unregularized d. Throws std::domain_error on
/// the boundary (log d undefined).
double v_from_u(const DistanceFn& df, double x, double U);

/// U = V / (-log d(x)). Throws std::domain_error on the boundary and at a
/// degenerate point with d(x) = 1 exactly.
double u_from_v(const DistanceFn& df, double x, double V);

/// Left-hand side of the control-eliminated equation:
///   (sigma^2/2) V'' + V' b - lambda V - (gamma V' + 1)^2 / (4 eta)
double residual_reduced_hjb(const ModelParams& p, double x, double V, double Vp, double Vpp);

/// Left-hand side of the transformed equation: -W'' + (W')^2 + (2 lambda/sigma^2) W - f
double residual_ll(const ModelParams& p, double W, double Wp, double Wpp, double f);

/// Left-hand side of the U-equation with the regularized distance in all
/// coefficients:
///   4 eta b (U d d' + U' d^2 log d) + (gamma U d' + gamma U' d log d - d)^2
///   + 2 eta sigma^2 (2 d d' U' + U'' d^2 log d + U (d d'' - d'^2))
///   - 4 eta lambda U d^2 log d
double residual_u_ode(const ModelParams& p, const DistanceFn& df, double x, double U, double Up, double Upp);

/// residual_u_ode as above given a precomputed distance evaluation and drift
/// value; the grid solver calls this in its assembly loop.
double residual_u_ode_at(const ModelParams& p, const DistanceEval& de, double log_d, double b,
                         double U, double Up, double Upp);

}  // namespace pegsim
