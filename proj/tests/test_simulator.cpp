#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "pegsim/bvp.hpp"
#include "pegsim/simulator.hpp"

using namespace pegsim;

namespace {

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

const PolicyFn& coarse_policy() {
    static const PolicyFn pf = [] {
        const ModelParams p = fig2();
        const DistanceFn df(DistanceKind::Quadratic, 0.0, 1.0, 0.00176);
        SolverConfig cfg;
        cfg.grid_n = 501;
        return PolicyFn(continuation_solve(p, df, cfg), df, p);
    }();
    return pf;
}

SimConfig base_cfg() {
    SimConfig cfg;
    cfg.x_start = 0.4;
    cfg.horizon_T = 0.01;
    cfg.dt = 1e-4;
    cfg.seed = 99;
    cfg.n_paths = 4;
    cfg.clamp_margin = 1e-4;
    cfg.record_stride = 1;
    return cfg;
}

}  // namespace

TEST_CASE("gaussian streams are deterministic and independent") {
    GaussianStream a(123, 5), b(123, 5), c(123, 6);
    bool all_equal_c = true;
    for (int i = 0; i < 64; ++i) {
        const double x = a.next();
        CHECK(x == b.next());
        all_equal_c = all_equal_c && (x == c.next());
    }
    CHECK_FALSE(all_equal_c);
}

TEST_CASE("gaussian stream moments") {
    GaussianStream g(2024, 0);
    const int n = 100000;
    double sum = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = g.next();
        sum += z;
        ss += z * z;
    }
    const double mean = sum / n;
    const double var = ss / n - mean * mean;
    CHECK(std::abs(mean) <= 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("euler step arithmetic with the control forced to zero") {
    const ModelParams p = fig2();
    const EulerStepResult r = euler_step(p, coarse_policy(), 0.4, 1e-3, 0.0, 0.0, 0.0);
    // b(0.4) = -0.42, so x moves to 0.4 - 0.42e-3
    CHECK(r.u_used == 0.0);
    CHECK_FALSE(r.clamped);
    CHECK(r.x_next == doctest::Approx(0.39958).epsilon(1e-14));
}

TEST_CASE("euler step at the zero of the control is drift-only") {
    const ModelParams p = fig2();
    const PolicyFn& pf = coarse_policy();
    // bisect for the interior point where u_hat vanishes
    double lo = 0.1, hi = 0.9;
    REQUIRE(pf.control_at(lo) > 0.0);
    REQUIRE(pf.control_at(hi) < 0.0);
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pf.control_at(mid) > 0.0 ? lo : hi) = mid;
    }
    const double x0 = 0.5 * (lo + hi);
    const EulerStepResult r = euler_step(p, pf, x0, 1e-3, 0.0, 0.0);
    CHECK(std::abs(r.u_used) <= 1e-12);
    CHECK(r.x_next == doctest::Approx(x0 + p.drift(x0) * 1e-3).epsilon(1e-12));
}

TEST_CASE("euler step clamps to the band edge and reports it") {
    const ModelParams p = fig2();
    const EulerStepResult r = euler_step(p, coarse_policy(), 0.001, 1e-3, -0.5, 1e-4, 0.0);
    CHECK(r.clamped);
    CHECK(r.x_next == p.beta_minus + 1e-4);
}

TEST_CASE("paths are bit-identical for the same seed and index") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    const PathRecord a = simulate_path(p, coarse_policy(), cfg, 3);
    const PathRecord b = simulate_path(p, coarse_policy(), cfg, 3);
    REQUIRE(a.x.size() == b.x.size());
    for (size_t i = 0; i < a.x.size(); ++i) {
        CHECK(a.x[i] == b.x[i]);
        CHECK(a.u[i] == b.u[i]);
        CHECK(a.cost[i] == b.cost[i]);
    }
    const PathRecord c = simulate_path(p, coarse_policy(), cfg, 4);
    CHECK(c.x.back() != a.x.back());
}

TEST_CASE("zero volatility and zero control freeze the state") {
    ModelParams p = fig2();
    p.sigma = 0.0;  // test hook: bypasses validation on purpose
    p.drift = DriftSpec{{}};
    SimConfig cfg = base_cfg();
    cfg.control_override = 0.0;
    const PathRecord rec = simulate_path(p, coarse_policy(), cfg, 0);
    for (size_t i = 0; i < rec.x.size(); ++i) {
        CHECK(rec.x[i] == 0.4);
        CHECK(rec.inventory[i] == 0.0);
        CHECK(rec.cost[i] == 0.0);
    }
}

TEST_CASE("recorded samples reproduce the cost by left-endpoint quadrature") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    cfg.horizon_T = 0.05;
    const PathRecord rec = simulate_path(p, coarse_policy(), cfg, 1);
    double cost = 0.0;
    for (size_t j = 0; j + 1 < rec.times.size(); ++j) {
        const double u = rec.u[j];
        cost += std::exp(-p.lambda * rec.times[j]) * (u + p.eta * u * u) * cfg.dt;
    }
    CHECK(std::abs(cost - rec.final_cost) <= 1e-10);

    for (size_t j = 0; j + 1 < rec.times.size(); ++j) {
        const double inc = rec.inventory[j + 1] - rec.inventory[j];
        CHECK(std::abs(inc - rec.u[j] * cfg.dt) <= 1e-12);
    }
}

TEST_CASE("constant control has a closed-form discounted cost") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    cfg.horizon_T = 2.0;
    cfg.dt = 1e-4;
    cfg.record_stride = 1000000;
    const double c = 0.3;
    cfg.control_override = c;
    const PathRecord rec = simulate_path(p, coarse_policy(), cfg, 0);
    const double rate = c + p.eta * c * c;
    const double exact = rate * (1.0 - std::exp(-p.lambda * cfg.horizon_T)) / p.lambda;
    CHECK(std::abs(rec.final_cost - exact) <= rate * cfg.dt);
}

TEST_CASE("zero forced control gives a zero cost estimate") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    cfg.control_override = 0.0;
    cfg.n_paths = 8;
    const CostEstimate est = estimate_cost(p, coarse_policy(), cfg);
    CHECK(est.mean == 0.0);
    CHECK(est.stderr_of_mean == 0.0);
    CHECK(est.tail_bound == doctest::Approx(std::exp(-p.lambda * cfg.horizon_T) / (4.0 * p.eta * p.lambda))
                                .epsilon(1e-14));
}

TEST_CASE("parallel and serial cost estimates are bit-identical") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    cfg.horizon_T = 0.5;
    cfg.dt = 1e-3;
    cfg.n_paths = 16;
    cfg.record_stride = 1000000;
    const CostEstimate par = estimate_cost(p, coarse_policy(), cfg);
    const CostEstimate ser = estimate_cost_serial(p, coarse_policy(), cfg);
    CHECK(par.mean == ser.mean);
    CHECK(par.stderr_of_mean == ser.stderr_of_mean);
    CHECK(par.n_paths == ser.n_paths);
}

TEST_CASE("record thinning row count") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();  // T = 0.01, dt = 1e-4 -> 100 steps
    cfg.record_stride = 7;
    CHECK(simulate_path(p, coarse_policy(), cfg, 0).times.size() == 16);  // ceil(100/7) + 1
    cfg.record_stride = 10;
    CHECK(simulate_path(p, coarse_policy(), cfg, 0).times.size() == 11);
    cfg.record_stride = 1;
    CHECK(simulate_path(p, coarse_policy(), cfg, 0).times.size() == 101);
}

TEST_CASE("empirical moments of the uncontrolled free diffusion") {
    ModelParams p = fig2();
    p.drift = DriftSpec{{}};
    p.beta_minus = -1e6;
    p.beta_plus = 1e6;  // effectively no barriers
    SimConfig cfg;
    cfg.x_start = 0.0;
    cfg.horizon_T = 1.0;
    cfg.dt = 1e-2;
    cfg.seed = 31337;
    cfg.clamp_margin = 0.0;
    cfg.record_stride = 1000;
    cfg.control_override = 0.0;
    const int n = 10000;
    double sum = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const PathRecord rec = simulate_path(p, coarse_policy(), cfg, i);
        const double xf = rec.x.back();
        sum += xf;
        ss += xf * xf;
    }
    const double mean = sum / n;
    const double var = ss / n - mean * mean;
    const double s2T = p.sigma * p.sigma * cfg.horizon_T;
    CHECK(std::abs(mean) <= 4.0 * p.sigma * std::sqrt(cfg.horizon_T / n));
    CHECK(var == doctest::Approx(s2T).epsilon(0.10));
}

TEST_CASE("unprotected paths terminate with the exited flag when reaching a barrier") {
    ModelParams p = fig2();
    p.drift = DriftSpec{{-100.0}};  // strong adverse drift
    SimConfig cfg = base_cfg();
    cfg.clamp_margin = 0.0;
    cfg.x_start = 0.05;
    cfg.control_override = 0.0;
    cfg.horizon_T = 0.01;
    const PathRecord rec = simulate_path(p, coarse_policy(), cfg, 0);
    CHECK(rec.exited);
    CHECK(rec.total_steps < 100);
    CHECK(rec.x.back() == p.beta_minus);
}

TEST_CASE("breach statistics") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    cfg.horizon_T = 0.02;
    std::vector<PathRecord> recs;
    for (int i = 0; i < 3; ++i) recs.push_back(simulate_path(p, coarse_policy(), cfg, i));
    const BreachStats st = breach_stats(p, recs);
    CHECK(st.per_path.size() == 3);
    CHECK(st.total_clamp_events == 0);
    CHECK(st.clamped_fraction == 0.0);
    for (const auto& b : st.per_path) {
        CHECK(b.lower_gap > 0.0);
        CHECK(b.upper_gap > 0.0);
    }
    CHECK_THROWS_AS(breach_stats(p, std::span<const PathRecord>{}), std::invalid_argument);
}

TEST_CASE("oversized steps clamp and are reported, not raised") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    cfg.dt = 0.1;  // large enough to jump at the barriers
    cfg.horizon_T = 10.0;
    cfg.record_stride = 1000000;
    const PathRecord rec = simulate_path(p, coarse_policy(), cfg, 2);
    CHECK(rec.clamp_events > 0);
    CHECK_FALSE(rec.exited);
}

TEST_CASE("sim config validation") {
    const ModelParams p = fig2();
    SimConfig cfg = base_cfg();
    cfg.x_start = 1.5;
    CHECK_THROWS_AS(validate_sim_config(p, cfg), std::invalid_argument);
    cfg = base_cfg();
    cfg.dt = 1.0;
    cfg.horizon_T = 0.5;
    CHECK_THROWS_AS(validate_sim_config(p, cfg), std::invalid_argument);
    cfg = base_cfg();
    cfg.n_paths = 1;
    CHECK_THROWS_WITH_AS(estimate_cost(p, coarse_policy(), cfg), doctest::Contains("n_paths"),
                         std::invalid_argument);
}
