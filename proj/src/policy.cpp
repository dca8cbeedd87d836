#include "pegsim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pegsim {

PolicyFn::PolicyFn(GridSolution solution, DistanceFn distance, ModelParams params)
    : solution_(std::move(solution)), distance_(std::move(distance)), params_(std::move(params)) {
    if (solution_.values.size() != static_cast<size_t>(solution_.grid.n) ||
        solution_.derivative_values.size() != solution_.values.size())
        throw std::invalid_argument("PolicyFn: malformed grid solution");
}

void PolicyFn::require_interior(double x) const {
    if (!(x > params_.beta_minus && x < params_.beta_plus))
        throw std::domain_error("PolicyFn: evaluation outside the open interval");
}

void PolicyFn::interpolate(double x, double& u, double& up) const {
    const Grid& g = solution_.grid;
    int j = static_cast<int>((x - g.beta_minus) / g.h);
    j = std::clamp(j, 0, g.n - 2);
    const double t = (x - g.node(j)) / g.h;
    const size_t k = static_cast<size_t>(j);
    const double u0 = solution_.values[k], u1 = solution_.values[k + 1];
    const double m0 = g.h * solution_.derivative_values[k], m1 = g.h * solution_.derivative_values[k + 1];
    const double t2 = t * t, t3 = t2 * t;
    u = u0 * (2.0 * t3 - 3.0 * t2 + 1.0) + m0 * (t3 - 2.0 * t2 + t)
        + u1 * (-2.0 * t3 + 3.0 * t2) + m1 * (t3 - t2);
    up = (u0 * (6.0 * t2 - 6.0 * t) + m0 * (3.0 * t2 - 4.0 * t + 1.0)
          + u1 * (-6.0 * t2 + 6.0 * t) + m1 * (3.0 * t2 - 2.0 * t)) / g.h;
}

double PolicyFn::u_at(double x) const {
    require_interior(x);
    double u, up;
    interpolate(x, u, up);
    return u;
}

double PolicyFn::u_derivative_at(double x) const {
    require_interior(x);
    double u, up;
    interpolate(x, u, up);
    return up;
}

double PolicyFn::value_at(double x) const {
    require_interior(x);
    double u, up;
    interpolate(x, u, up);
    const DistanceEval e = distance_.eval(x, false);
    return -u * std::log(e.d);
}

double PolicyFn::value_derivative_at(double x) const {
    require_interior(x);
    double u, up;
    interpolate(x, u, up);
    const DistanceEval e = distance_.eval(x, false);
    return -up * std::log(e.d) - u * e.d1 / e.d;
}

double PolicyFn::control_at(double x) const {
    return -(params_.gamma * value_derivative_at(x) + 1.0) / (2.0 * params_.eta);
}

double PolicyFn::value_second_derivative_at_node(int i) const {
    if (i <= 0 || i >= solution_.grid.n - 1)
        throw std::domain_error("value_second_derivative_at_node: interior nodes only");
    const double x = solution_.grid.node(i);
    const DistanceEval e = distance_.eval(x, false);
    const size_t k = static_cast<size_t>(i);
    const double u = solution_.values[k];
    const double up = solution_.derivative_values[k];
    const double upp = solution_.second_difference(i);
    const double L = std::log(e.d);
    return -upp * L - 2.0 * up * e.d1 / e.d - u * (e.d2 * e.d - e.d1 * e.d1) / (e.d * e.d);
}

double PolicyFn::reduced_hjb_residual_at_node(int i) const {
    const double x = solution_.grid.node(i);
    return residual_reduced_hjb(params_, x, value_at(x), value_derivative_at(x),
                                value_second_derivative_at_node(i));
}

double hamiltonian(const ModelParams& p, double x, double u, double V, double Vp, double Vpp) {
    return Vp * (p.drift(x) + p.gamma * u) + 0.5 * p.sigma * p.sigma * Vpp + u + p.eta * u * u
           - p.lambda * V;
}

BlowupFit fit_blowup_rate(const PolicyFn& pf, Side side, double eps_lo, double eps_hi, int samples) {
    const ModelParams& p = pf.params();
    if (!(eps_lo > 0.0 && eps_lo < eps_hi && eps_hi < 0.25 * p.width()))
        throw std::invalid_argument("fit_blowup_rate: eps range must lie in (0, width/4)");
    if (eps_lo < pf.solution().grid.h)
        throw std::invalid_argument("fit_blowup_rate: eps range below grid resolution");
    if (samples < 2) throw std::invalid_argument("fit_blowup_rate: need at least 2 samples");

    const double expected = p.boundary_u();
    const double ratio = std::pow(eps_hi / eps_lo, 1.0 / static_cast<double>(samples - 1));
    BlowupFit fit;
    double eps = eps_lo;
    for (int s = 0; s < samples; ++s, eps *= ratio) {
        const double x = (side == Side::Lower) ? p.beta_minus + eps : p.beta_plus - eps;
        const double coef = pf.value_at(x) / (-std::log(eps));
        if (s == 0) fit.coefficient = coef;
        fit.max_relative_deviation = std::max(fit.max_relative_deviation,
                                              std::abs(coef / expected - 1.0));
    }
    return fit;
}

}  // namespace pegsim
