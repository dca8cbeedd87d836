#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "doctest.h"
#include "pegsim/bvp.hpp"
#include "pegsim/policy.hpp"

using namespace pegsim;

namespace {

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

ModelParams fig2() {
    ModelParams p;
    p.beta_minus = 0.0;
    p.beta_plus = 1.0;
    p.sigma = 0.25;
    p.eta = 6.0;
    p.gamma = 1.0;
    p.rho = 0.5;
    p.drift = DriftSpec{{-0.5, 0.0, 0.5}};
    return validate_params(p);
}

const PolicyFn& fig2_policy() {
    static const PolicyFn pf = [] {
        const ModelParams p = fig2();
        const DistanceFn df(DistanceKind::Quadratic, 0.0, 1.0, 0.00176);
        SolverConfig cfg;  // grid_n 2001, schedule down to 0.00176
        return PolicyFn(continuation_solve(p, df, cfg), df, p);
    }();
    return pf;
}

}  // namespace

TEST_CASE("interpolant reproduces the grid nodes exactly") {
    const PolicyFn& pf = fig2_policy();
    const GridSolution& sol = pf.solution();
    const DistanceFn& df = pf.distance();
    for (int i = 100; i + 100 < sol.grid.n; i += 97) {
        const double x = sol.grid.node(i);
        const double expected = -sol.values[static_cast<size_t>(i)] * std::log(df.eval(x, false).d);
        CHECK(pf.value_at(x) == expected);
    }
}

TEST_CASE("evaluation outside the open interval is an error") {
    const PolicyFn& pf = fig2_policy();
    CHECK_THROWS_AS(pf.value_at(0.0), std::domain_error);
    CHECK_THROWS_AS(pf.value_at(1.0), std::domain_error);
    CHECK_THROWS_AS(pf.value_derivative_at(-0.2), std::domain_error);
    CHECK_THROWS_AS(pf.control_at(1.7), std::domain_error);
    CHECK_THROWS_AS(pf.value_second_derivative_at_node(0), std::domain_error);
}

TEST_CASE("value derivative agrees with finite differences of the value") {
    const PolicyFn& pf = fig2_policy();
    const double h = 1e-6;
    for (int k = 0; k < 100; ++k) {
        const double x = 0.02 + (0.98 - 0.02) * (static_cast<double>(k) + 0.5) / 100.0;
        const double fd = (pf.value_at(x + h) - pf.value_at(x - h)) / (2.0 * h);
        CHECK(std::abs(pf.value_derivative_at(x) - fd) <= 1e-4);
    }
}

TEST_CASE("value derivative signs at the barriers") {
    const PolicyFn& pf = fig2_policy();
    CHECK(pf.value_derivative_at(1e-3) < 0.0);
    CHECK(pf.value_derivative_at(1.0 - 1e-3) > 0.0);
}

TEST_CASE("control blows up toward the barriers with the right signs") {
    const PolicyFn& pf = fig2_policy();
    CHECK(pf.control_at(1e-3) > 10.0);
    CHECK(pf.control_at(1.0 - 1e-3) < -10.0);
}

TEST_CASE("the two control formulas agree") {
    const PolicyFn& pf = fig2_policy();
    const ModelParams& p = pf.params();
    const DistanceFn& df = pf.distance();
    Rng rng{21};
    for (int t = 0; t < 1000; ++t) {
        const double x = rng.range(1e-3, 1.0 - 1e-3);
        const DistanceEval e = df.eval(x, false);
        const double alt = p.gamma / (2.0 * p.eta) *
                           (pf.u_at(x) * e.d1 / e.d + pf.u_derivative_at(x) * std::log(e.d) - 1.0 / p.gamma);
        CHECK(std::abs(pf.control_at(x) - alt) <= 1e-10 * std::max(1.0, std::abs(alt)));
    }
}

TEST_CASE("hamiltonian is minimized by the feedback control") {
    const PolicyFn& pf = fig2_policy();
    const ModelParams& p = pf.params();
    const Grid& g = pf.solution().grid;
    Rng rng{22};
    for (int t = 0; t < 1000; ++t) {
        const int i = 1 + static_cast<int>(rng.next() * static_cast<double>(g.n - 2));
        const int node = std::min(i, g.n - 2);
        const double x = g.node(node);
        const double V = pf.value_at(x);
        const double Vp = pf.value_derivative_at(x);
        const double Vpp = pf.value_second_derivative_at_node(node);
        const double u_hat = -(p.gamma * Vp + 1.0) / (2.0 * p.eta);
        const double u = rng.range(-20.0, 20.0);
        CHECK(hamiltonian(p, x, u, V, Vp, Vpp) >= hamiltonian(p, x, u_hat, V, Vp, Vpp) - 1e-9);

        const double res = residual_reduced_hjb(p, x, V, Vp, Vpp);
        CHECK(std::abs(hamiltonian(p, x, u_hat, V, Vp, Vpp) - res) <= 1e-12 * std::max(1.0, std::abs(res)));
    }
}

TEST_CASE("hamiltonian vanishes at the origin of its arguments") {
    ModelParams p = fig2();
    p.drift = DriftSpec{{}};
    CHECK(hamiltonian(p, 0.3, 0.0, 0.0, 0.0, 0.0) == 0.0);
}

TEST_CASE("value stays above the cost lower bound") {
    const PolicyFn& pf = fig2_policy();
    const ModelParams& p = pf.params();
    const Grid& g = pf.solution().grid;
    const double bound = -1.0 / (4.0 * p.eta * p.lambda);
    CHECK(bound == doctest::Approx(-1.0 / 12.0).epsilon(1e-15));
    for (int i = 1; i + 1 < g.n; ++i) CHECK(pf.value_at(g.node(i)) >= bound - 1e-6);
}

TEST_CASE("blow-up fit on the upper side matches the expected coefficient") {
    const PolicyFn& pf = fig2_policy();
    const BlowupFit fit = fit_blowup_rate(pf, Side::Upper, 1e-3, 1e-2);
    CHECK(fit.max_relative_deviation <= 0.05);
    CHECK(fit.coefficient == doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("blow-up fit sides agree within twice the individual deviations") {
    const PolicyFn& pf = fig2_policy();
    const BlowupFit lo = fit_blowup_rate(pf, Side::Lower, 1e-3, 1e-2);
    const BlowupFit up = fit_blowup_rate(pf, Side::Upper, 1e-3, 1e-2);
    const double cb = pf.params().boundary_u();
    CHECK(std::abs(lo.coefficient - up.coefficient) <=
          2.0 * cb * (lo.max_relative_deviation + up.max_relative_deviation) + 1e-12);
}

TEST_CASE("control diverges monotonically in sign near each barrier") {
    // u_hat stays positive in a band above beta- and negative below beta+;
    // the band width differs per parameter set
    struct Case {
        ModelParams params;
        double delta;
    };
    ModelParams p3;
    p3.beta_minus = 0.0;
    p3.beta_plus = 1.0;
    p3.sigma = 0.4;
    p3.eta = 0.6;
    p3.gamma = 2.0;
    p3.rho = 1.0;
    p3.drift = DriftSpec{{-1.0, 0, 0, 0, 0, 0, 1.0}};
    const Case cases[] = {{fig2(), 0.05}, {validate_params(p3), 0.01}};
    for (const Case& c : cases) {
        const DistanceFn df(DistanceKind::Quadratic, 0.0, 1.0, 0.00176);
        SolverConfig cfg;
        cfg.grid_n = 1001;
        const PolicyFn pf(continuation_solve(c.params, df, cfg), df, c.params);
        for (int k = 1; k <= 20; ++k) {
            const double off = c.delta * static_cast<double>(k) / 20.0;
            CHECK(pf.control_at(c.params.beta_minus + off) > 0.0);
            CHECK(pf.control_at(c.params.beta_plus - off) < 0.0);
        }
    }
}

TEST_CASE("blow-up fit rejects invalid ranges") {
    const PolicyFn& pf = fig2_policy();
    const double h = pf.solution().grid.h;
    CHECK_THROWS_AS(fit_blowup_rate(pf, Side::Lower, 0.5 * h, 1e-2), std::invalid_argument);
    CHECK_THROWS_AS(fit_blowup_rate(pf, Side::Lower, 1e-3, 0.3), std::invalid_argument);
}
