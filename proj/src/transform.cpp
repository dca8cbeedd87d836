#include "pegsim/transform.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pegsim {

DistanceFn::DistanceFn(DistanceKind kind, double beta_minus, double beta_plus, double epsilon)
    : kind_(kind), beta_minus_(beta_minus), beta_plus_(beta_plus), epsilon_(epsilon) {
    if (!(beta_minus < beta_plus))
        throw std::invalid_argument("DistanceFn: beta_minus must be < beta_plus");
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw std::invalid_argument("DistanceFn: epsilon must lie in [0, 1)");
}

DistanceEval DistanceFn::eval(double x, bool regularized) const {
    if (x < beta_minus_ || x > beta_plus_)
        throw std::domain_error("DistanceFn::eval: x outside [beta_minus, beta_plus]");
    const double w = beta_plus_ - beta_minus_;
    DistanceEval e{};
    if (kind_ == DistanceKind::Quadratic) {
        e.d = (-beta_minus_ * beta_plus_ + (beta_minus_ + beta_plus_) * x - x * x) / w;
        e.d1 = (beta_minus_ + beta_plus_ - 2.0 * x) / w;
        e.d2 = -2.0 / w;
    } else {
        const double s = std::numbers::pi / w;
        const double t = s * (x - beta_minus_);
        e.d = std::sin(t) / s;
        e.d1 = std::cos(t);
        e.d2 = -s * std::sin(t);
    }
    if (regularized && epsilon_ > 0.0) {
        e.d = epsilon_ + (1.0 - epsilon_) * e.d;
        e.d1 *= (1.0 - epsilon_);
        e.d2 *= (1.0 - epsilon_);
    }
    return e;
}

TransformAnchor default_anchor(const ModelParams& p) {
    return TransformAnchor{0.5 * (p.beta_minus + p.beta_plus)};
}

double source_term(const ModelParams& p, const TransformAnchor& a, double x) {
    const double s2 = p.sigma * p.sigma;
    const double s4 = s2 * s2;
    const double b = p.drift(x);
    const double bp = p.drift.derivative(x, 1);
    const double ib = p.drift.antiderivative(a.x0, x);
    return -p.gamma / (s4 * p.eta) * b + bp / s2 + b * b / s4
           + p.gamma * p.lambda / (s4 * p.eta) * x - 2.0 * p.lambda / s4 * ib;
}

double w_from_v(const ModelParams& p, const TransformAnchor& a, double x, double V) {
    const double s2 = p.sigma * p.sigma;
    const double ib = p.drift.antiderivative(a.x0, x);
    return p.gamma / (2.0 * p.eta * s2) * (p.gamma * V + x - 2.0 * p.eta / p.gamma * ib);
}

double v_from_w(const ModelParams& p, const TransformAnchor& a, double x, double W) {
    const double s2 = p.sigma * p.sigma;
    const double ib = p.drift.antiderivative(a.x0, x);
    return 2.0 * p.eta * s2 / (p.gamma * p.gamma) * W - x / p.gamma
           + 2.0 * p.eta / (p.gamma * p.gamma) * ib;
}

double v_from_u(const DistanceFn& df, double x, double U) {
    const DistanceEval e = df.eval(x, false);
    if (e.d <= 0.0)
        throw std::domain_error("v_from_u: x on the boundary, log d undefined");
    return -U * std::log(e.d);
}

double u_from_v(const DistanceFn& df, double x, double V) {
    const DistanceEval e = df.eval(x, false);
    if (e.d <= 0.0)
        throw std::domain_error("u_from_v: x on the boundary, log d undefined");
    const double L = std::log(e.d);
    if (L == 0.0)
        throw std::domain_error("u_from_v: degenerate point d(x) = 1, division by log d = 0");
    return V / (-L);
}

double residual_reduced_hjb(const ModelParams& p, double x, double V, double Vp, double Vpp) {
    const double s2 = p.sigma * p.sigma;
    const double q = p.gamma * Vp + 1.0;
    return 0.5 * s2 * Vpp + Vp * p.drift(x) - p.lambda * V - q * q / (4.0 * p.eta);
}

double residual_ll(const ModelParams& p, double W, double Wp, double Wpp, double f) {
    const double s2 = p.sigma * p.sigma;
    return -Wpp + Wp * Wp + 2.0 * p.lambda / s2 * W - f;
}

double residual_u_ode_at(const ModelParams& p, const DistanceEval& de, double log_d, double b,
                         double U, double Up, double Upp) {
    const double s2 = p.sigma * p.sigma;
    const double d = de.d, d1 = de.d1, d2 = de.d2;
    const double bracket = p.gamma * U * d1 + p.gamma * Up * d * log_d - d;
    return 4.0 * p.eta * b * (U * d * d1 + Up * d * d * log_d)
           + bracket * bracket
           + 2.0 * p.eta * s2 * (2.0 * d * d1 * Up + Upp * d * d * log_d + U * (d * d2 - d1 * d1))
           - 4.0 * p.eta * p.lambda * U * d * d * log_d;
}

double residual_u_ode(const ModelParams& p, const DistanceFn& df, double x, double U, double Up, double Upp) {
    const DistanceEval e = df.eval(x, true);
    return residual_u_ode_at(p, e, std::log(e.d), p.drift(x), U, Up, Upp);
}

}  // namespace pegsim
