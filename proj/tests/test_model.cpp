#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "doctest.h"
#include "pegsim/model.hpp"

using namespace pegsim;

namespace {

// deterministic uniforms for the property checks
struct Rng {
    std::uint64_t s;
    double next() {
        s += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }
    double range(double lo, double hi) { return lo + (hi - lo) * next(); }
};

DriftSpec fig2_drift() { return DriftSpec{{-0.5, 0.0, 0.5}}; }
DriftSpec fig3_drift() { return DriftSpec{{-1.0, 0, 0, 0, 0, 0, 1.0}}; }

}  // namespace

TEST_CASE("drift evaluation matches the caption polynomials") {
    CHECK(fig2_drift()(0.0) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(fig3_drift()(1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(DriftSpec{{}}(3.7) == 0.0);
    CHECK(DriftSpec{{0.0}}(-2.0) == 0.0);
}

TEST_CASE("drift derivatives are analytic") {
    CHECK(fig2_drift().derivative(0.4, 1) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(fig2_drift().derivative(123.0, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(DriftSpec{{}}.derivative(1.0, 1) == 0.0);
    CHECK(DriftSpec{{}}.derivative(1.0, 2) == 0.0);
    CHECK_THROWS_AS(fig2_drift().derivative(0.0, 3), std::invalid_argument);
}

TEST_CASE("drift antiderivative") {
    CHECK(DriftSpec{{}}.antiderivative(-1.0, 2.0) == 0.0);
    CHECK(fig2_drift().antiderivative(0.0, 1.0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
    CHECK(fig2_drift().antiderivative(0.7, 0.7) == 0.0);
}

TEST_CASE("horner evaluation agrees with the naive power sum") {
    Rng rng{42};
    for (int trial = 0; trial < 1000; ++trial) {
        const int deg = static_cast<int>(rng.next() * 9);
        DriftSpec d;
        for (int k = 0; k <= deg; ++k) d.coefficients.push_back(rng.range(-1.0, 1.0));
        const double x = rng.range(-2.0, 2.0);
        double naive = 0.0;
        for (int k = 0; k <= deg; ++k) naive += d.coefficients[static_cast<size_t>(k)] * std::pow(x, k);
        CHECK(d(x) == doctest::Approx(naive).epsilon(1e-12));
    }
}

TEST_CASE("analytic first derivative agrees with central differences") {
    Rng rng{43};
    const double h = 1e-6;
    for (int trial = 0; trial < 1000; ++trial) {
        const int deg = static_cast<int>(rng.next() * 9);
        DriftSpec d;
        for (int k = 0; k <= deg; ++k) d.coefficients.push_back(rng.range(-1.0, 1.0));
        const double x = rng.range(-2.0, 2.0);
        const double fd = (d(x + h) - d(x - h)) / (2.0 * h);
        CHECK(std::abs(d.derivative(x, 1) - fd) <= 1e-6);
    }
}

TEST_CASE("antiderivative is additive over adjacent intervals") {
    Rng rng{44};
    for (int trial = 0; trial < 1000; ++trial) {
        const int deg = static_cast<int>(rng.next() * 9);
        DriftSpec d;
        for (int k = 0; k <= deg; ++k) d.coefficients.push_back(rng.range(-1.0, 1.0));
        const double x0 = rng.range(-2.0, 2.0);
        const double x = rng.range(-2.0, 2.0);
        const double x1 = rng.range(-2.0, 2.0);
        const double split = d.antiderivative(x0, x) + d.antiderivative(x, x1);
        CHECK(std::abs(split - d.antiderivative(x0, x1)) <= 1e-12);
    }
}

TEST_CASE("validate_params accepts the fig2 constants") {
    ModelParams p;
    p.beta_minus = 0.0;
    p.beta_plus = 1.0;
    p.sigma = 0.25;
    p.eta = 6.0;
    p.gamma = 1.0;
    p.rho = 0.5;
    p.theta = 0.0;
    p.drift = fig2_drift();
    const ModelParams v = validate_params(p);
    CHECK(v.lambda == 0.5);
    CHECK(v.boundary_u() == 0.75);
}

TEST_CASE("validate_params rejects bad parameters with a named reason") {
    ModelParams p;
    p.beta_minus = 1.0;
    p.beta_plus = 1.0;
    CHECK_THROWS_WITH_AS(validate_params(p), doctest::Contains("degenerate interval"), std::invalid_argument);
    p.beta_plus = 2.0;
    p.eta = 0.0;
    CHECK_THROWS_WITH_AS(validate_params(p), doctest::Contains("eta must be positive"), std::invalid_argument);
    p.eta = 1.0;
    p.rho = 0.0;
    p.theta = 0.0;
    CHECK_THROWS_WITH_AS(validate_params(p), doctest::Contains("lambda"), std::invalid_argument);
}
