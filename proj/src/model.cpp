#include "pegsim/model.hpp"

#include <cmath>
#include <stdexcept>

namespace pegsim {

double DriftSpec::operator()(double x) const {
    double r = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it)
        r = r * x + *it;
    return r;
}

double DriftSpec::derivative(double x, int order) const {
    if (order != 1 && order != 2)
        throw std::invalid_argument("DriftSpec::derivative: order must be 1 or 2");
    const int m = static_cast<int>(coefficients.size());
    double r = 0.0;
    if (order == 1) {
        for (int k = m - 1; k >= 1; --k)
            r = r * x + static_cast<double>(k) * coefficients[static_cast<size_t>(k)];
    } else {
        for (int k = m - 1; k >= 2; --k)
            r = r * x + static_cast<double>(k) * static_cast<double>(k - 1) * coefficients[static_cast<size_t>(k)];
    }
    return r;
}

double DriftSpec::antiderivative(double x0, double x) const {
    // Horner on the term-wise antiderivative sum c_k t^{k+1}/(k+1),
    // evaluated at both ends.
    auto primitive = [this](double t) {
        double r = 0.0;
        const int m = static_cast<int>(coefficients.size());
        for (int k = m - 1; k >= 0; --k)
            r = r * t + coefficients[static_cast<size_t>(k)] / static_cast<double>(k + 1);
        return r * t;
    };
    return primitive(x) - primitive(x0);
}

ModelParams validate_params(ModelParams p) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid model parameters: " + what); };

    if (!std::isfinite(p.beta_minus) || !std::isfinite(p.beta_plus))
        fail("barriers must be finite");
    if (p.beta_minus >= p.beta_plus)
        fail("degenerate interval: beta_minus must be < beta_plus");
    if (!(p.sigma > 0.0)) fail("sigma must be positive");
    if (!(p.eta > 0.0)) fail("eta must be positive");
    if (!(p.gamma > 0.0)) fail("gamma must be positive");
    if (p.rho < 0.0) fail("rho must be nonnegative");
    if (p.theta < 0.0) fail("theta must be nonnegative");
    p.lambda = p.rho + p.theta;
    if (!(p.lambda > 0.0)) fail("lambda = rho + theta must be positive");
    for (double c : p.drift.coefficients)
        if (!std::isfinite(c)) fail("drift coefficients must be finite");
    return p;
}

}  // namespace pegsim
