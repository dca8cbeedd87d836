#include "pegsim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace pegsim {

namespace {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct UniformStream {
    std::uint64_t key, counter = 0;
    explicit UniformStream(std::uint64_t seed) : key(splitmix64(seed)) {}
    double next() { return (static_cast<double>(splitmix64(key + counter++) >> 11) + 1.0) * 0x1.0p-53; }
    double range(double lo, double hi) { return lo + (hi - lo) * next(); }
};

SolverConfig refined_config() {
    SolverConfig cfg;
    cfg.grid_n = 20001;
    cfg.tolerance = 1e-7;
    cfg.epsilon_schedule = {0.00176, 2e-4, 2e-5};
    return cfg;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

VerifyContext::VerifyContext(Problem problem, std::string preset_label, bool refine_simulation_policy)
    : problem_(std::move(problem)), preset_label_(std::move(preset_label)),
      refine_simulation_(refine_simulation_policy) {}

VerifyContext::~VerifyContext() = default;

const PolicyFn& VerifyContext::default_policy() {
    if (!default_policy_) {
        GridSolution sol = continuation_solve(problem_.params, problem_.distance, problem_.solver);
        default_policy_ = std::make_unique<PolicyFn>(std::move(sol), problem_.distance, problem_.params);
    }
    return *default_policy_;
}

const PolicyFn& VerifyContext::refined_policy() {
    if (!refined_policy_) {
        GridSolution sol = continuation_solve(problem_.params, problem_.distance, refined_config());
        refined_policy_ = std::make_unique<PolicyFn>(std::move(sol), problem_.distance, problem_.params);
    }
    return *refined_policy_;
}

const PolicyFn& VerifyContext::simulation_policy() {
    return refine_simulation_ ? refined_policy() : default_policy();
}

std::span<const PathRecord> VerifyContext::figure_paths() {
    if (figure_paths_.empty()) {
        const PolicyFn& pf = simulation_policy();
        SimConfig cfg = problem_.sim;
        cfg.dt = 1.6e-6;
        cfg.horizon_T = 1.0;
        cfg.seed = 7;
        cfg.n_paths = 10;
        cfg.record_stride = 1'000'000;
        validate_sim_config(problem_.params, cfg);
        figure_paths_.resize(10);
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < 10; ++i)
            figure_paths_[static_cast<size_t>(i)] = simulate_path(problem_.params, pf, cfg, i);
    }
    return figure_paths_;
}

CheckResult check_boundary_value(VerifyContext& ctx, double) {
    const PolicyFn& pf = ctx.default_policy();
    const ModelParams& p = ctx.problem().params;
    const auto& vals = pf.solution().values;
    const double cb = p.boundary_u();
    const bool pinned = vals.front() == cb && vals.back() == cb;

    double caption_error = 0.0;
    if (ctx.preset() == "fig2") caption_error = std::abs(cb - 0.75);
    if (ctx.preset() == "fig3") caption_error = std::abs(cb - 0.048);
    const bool caption_ok = caption_error <= 1e-12;

    CheckResult r;
    r.name = "boundary_value";
    r.measured = std::max({std::abs(vals.front() - cb), std::abs(vals.back() - cb), caption_error});
    r.threshold = 0.0;
    r.pass = pinned && caption_ok;
    r.detail = "U(beta-)=" + format_full(vals.front()) + " U(beta+)=" + format_full(vals.back()) +
               " expected " + format_full(cb);
    return r;
}

CheckResult check_hjb_residual(VerifyContext& ctx, double scale) {
    Problem pr = ctx.problem();
    pr.solver.grid_n = 2001;
    GridSolution sol = continuation_solve(pr.params, pr.distance, pr.solver);
    const PolicyFn pf(std::move(sol), pr.distance, pr.params);

    const ModelParams& p = pr.params;
    const Grid& g = pf.solution().grid;
    const double band = 0.02 * p.width();
    double worst = 0.0, worst_x = 0.0;
    for (int i = 1; i + 1 < g.n; ++i) {
        const double x = g.node(i);
        if (x < p.beta_minus + band || x > p.beta_plus - band) continue;
        const double ratio = std::abs(pf.reduced_hjb_residual_at_node(i)) / (1.0 + std::abs(pf.value_at(x)));
        if (ratio > worst) {
            worst = ratio;
            worst_x = x;
        }
    }
    CheckResult r;
    r.name = "hjb_residual";
    r.measured = worst;
    r.threshold = 1e-3 * scale;
    r.pass = worst <= r.threshold;
    r.detail = "max |residual|/(1+|V|) outside 2% band, grid_n=2001, worst at x=" + fmt(worst_x);
    return r;
}

std::vector<CheckResult> check_blowup_rate(VerifyContext& ctx, double scale) {
    const PolicyFn& pf = ctx.default_policy();
    std::vector<CheckResult> out;
    for (Side side : {Side::Lower, Side::Upper}) {
        const BlowupFit fit = fit_blowup_rate(pf, side, 1e-3, 1e-2, 25);
        CheckResult r;
        r.name = side == Side::Lower ? "blowup_lower" : "blowup_upper";
        r.measured = fit.max_relative_deviation;
        r.threshold = 0.05 * scale;
        r.pass = r.measured <= r.threshold;
        r.detail = "coefficient at eps=1e-3: " + fmt(fit.coefficient) + ", expected " +
                   fmt(ctx.problem().params.boundary_u());
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CheckResult> check_transform_consistency(VerifyContext& ctx, double scale) {
    const ModelParams& p = ctx.problem().params;
    const TransformAnchor a = ctx.problem().anchor;
    const DistanceFn& df = ctx.problem().distance;
    const double s2 = p.sigma * p.sigma;
    const double k = -(p.gamma * p.gamma) / (s2 * s2 * p.eta);
    const double c = p.gamma / (2.0 * p.eta * s2);

    UniformStream rng(0x5eedULL);
    double worst_prop = 0.0, worst_vw = 0.0, worst_uv = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        // random quintic test function evaluated at a random interior point
        double coef[6];
        for (double& cc : coef) cc = rng.range(-1.0, 1.0);
        const double x = rng.range(p.beta_minus + 0.05 * p.width(), p.beta_plus - 0.05 * p.width());
        double V = 0.0, Vp = 0.0, Vpp = 0.0;
        for (int j = 5; j >= 0; --j) V = V * x + coef[j];
        for (int j = 5; j >= 1; --j) Vp = Vp * x + static_cast<double>(j) * coef[j];
        for (int j = 5; j >= 2; --j)
            Vpp = Vpp * x + static_cast<double>(j * (j - 1)) * coef[j];

        const double b = p.drift(x);
        const double bp = p.drift.derivative(x, 1);
        const double W = w_from_v(p, a, x, V);
        const double Wp = c * (p.gamma * Vp + 1.0 - 2.0 * p.eta / p.gamma * b);
        const double Wpp = c * (p.gamma * Vpp - 2.0 * p.eta / p.gamma * bp);
        const double f = source_term(p, a, x);
        const double lhs = residual_ll(p, W, Wp, Wpp, f);
        const double rhs = k * residual_reduced_hjb(p, x, V, Vp, Vpp);
        worst_prop = std::max(worst_prop, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));

        const double v_rt = v_from_w(p, a, x, w_from_v(p, a, x, V));
        worst_vw = std::max(worst_vw, std::abs(v_rt - V) / std::max(1.0, std::abs(V)));
        const double u0 = rng.range(-3.0, 3.0);
        const double u_rt = u_from_v(df, x, v_from_u(df, x, u0));
        worst_uv = std::max(worst_uv, std::abs(u_rt - u0) / std::max(1.0, std::abs(u0)));
    }

    std::vector<CheckResult> out;
    CheckResult prop;
    prop.name = "transform_proportionality";
    prop.measured = worst_prop;
    prop.threshold = 1e-10 * scale;
    prop.pass = worst_prop <= prop.threshold;
    prop.detail = "1000 random quintics; |R_ll - k R_hjb| / max(1,|k R_hjb|)";
    out.push_back(std::move(prop));

    CheckResult rt;
    rt.name = "transform_roundtrips";
    rt.measured = std::max(worst_vw, worst_uv);
    rt.threshold = 1e-13 * scale;
    rt.pass = rt.measured <= rt.threshold;
    rt.detail = "v_from_w(w_from_v) dev " + fmt(worst_vw) + ", u_from_v(v_from_u) dev " + fmt(worst_uv);
    out.push_back(std::move(rt));
    return out;
}

std::vector<CheckResult> check_truncation_monotonicity(VerifyContext& ctx, double scale) {
    const ModelParams& p = ctx.problem().params;
    const TransformAnchor a = ctx.problem().anchor;

    // The discrete layer of the finite-boundary problem supports a jump of
    // roughly -2 log h per cell, so boundary value 16 needs the fine grid.
    SolverConfig wcfg;
    wcfg.grid_n = 200001;
    wcfg.tolerance = 5e-4;
    wcfg.max_newton_iters = 80;

    std::vector<double> chain = {4.0, 6.0, 8.0, 10.0, 12.0, 13.0, 14.0, 15.0, 16.0};
    std::vector<TruncatedSolution> kept;
    std::string failure;
    const std::vector<double>* warm = nullptr;
    for (double R : chain) {
        try {
            TruncatedSolution sol = solve_truncated_w(p, a, R, wcfg, warm);
            kept.push_back(std::move(sol));
            warm = &kept.back().values;
        } catch (const std::runtime_error& e) {
            failure = e.what();
            break;
        }
    }

    auto find = [&kept](double R) -> const TruncatedSolution* {
        for (const auto& s : kept)
            if (s.boundary_value == R) return &s;
        return nullptr;
    };
    const TruncatedSolution* w4 = find(4.0);
    const TruncatedSolution* w8 = find(8.0);
    const TruncatedSolution* w16 = find(16.0);

    std::vector<CheckResult> out;
    CheckResult mono;
    mono.name = "truncation_monotonicity";
    mono.threshold = wcfg.tolerance * scale;
    if (w4 && w8 && w16) {
        double worst = 0.0;
        for (size_t i = 0; i < w4->values.size(); ++i) {
            worst = std::max(worst, w4->values[i] - w8->values[i]);
            worst = std::max(worst, w8->values[i] - w16->values[i]);
        }
        mono.measured = worst;
        mono.pass = worst <= mono.threshold;
        mono.detail = "max pointwise decrease across boundary values {4,8,16}";
    } else {
        mono.measured = std::numeric_limits<double>::infinity();
        mono.pass = false;
        mono.detail = "solve failed: " + failure;
    }
    out.push_back(std::move(mono));

    CheckResult dom;
    dom.name = "truncation_domination";
    dom.threshold = wcfg.tolerance * scale;
    if (w16) {
        const PolicyFn& pf = ctx.refined_policy();
        const Grid& g = w16->grid;
        const double lo = p.beta_minus + 0.1 * p.width();
        const double hi = p.beta_plus - 0.1 * p.width();
        double worst = -std::numeric_limits<double>::infinity();
        double worst_x = 0.0;
        for (int i = 1; i + 1 < g.n; ++i) {
            const double x = g.node(i);
            if (x < lo || x > hi) continue;
            const double w_from_u = w_from_v(p, a, x, pf.value_at(x));
            const double excess = w16->values[static_cast<size_t>(i)] - w_from_u;
            if (excess > worst) {
                worst = excess;
                worst_x = x;
            }
        }
        dom.measured = worst;
        dom.pass = worst <= dom.threshold;
        const double mid = 0.5 * (p.beta_minus + p.beta_plus);
        dom.detail = "max of W_16 - W(from U-solution) on middle 80%, at x=" + fmt(worst_x) +
                     "; midpoint values " + fmt(w16->values[static_cast<size_t>(g.n / 2)]) + " vs " +
                     fmt(w_from_v(p, a, mid, pf.value_at(mid)));
    } else {
        dom.measured = std::numeric_limits<double>::infinity();
        dom.pass = false;
        dom.detail = "W_16 solve failed: " + failure;
    }
    out.push_back(std::move(dom));
    return out;
}

CheckResult check_value_lower_bound(VerifyContext& ctx, double scale) {
    const PolicyFn& pf = ctx.default_policy();
    const ModelParams& p = ctx.problem().params;
    const Grid& g = pf.solution().grid;
    const double bound = -1.0 / (4.0 * p.eta * p.lambda);
    double vmin = std::numeric_limits<double>::infinity();
    for (int i = 1; i + 1 < g.n; ++i) vmin = std::min(vmin, pf.value_at(g.node(i)));
    CheckResult r;
    r.name = "value_lower_bound";
    r.measured = vmin;
    r.threshold = bound - 1e-6 * scale;
    r.pass = vmin >= r.threshold;
    r.detail = "min V over interior nodes vs -1/(4 eta lambda) = " + fmt(bound);
    return r;
}

std::vector<CheckResult> check_minimizer_property(VerifyContext& ctx, double scale) {
    const PolicyFn& pf = ctx.default_policy();
    const ModelParams& p = ctx.problem().params;
    const Grid& g = pf.solution().grid;

    UniformStream rng(0xbeefULL);
    double worst_gap = -std::numeric_limits<double>::infinity();
    double worst_eq = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int i = 1 + static_cast<int>(rng.next() * static_cast<double>(g.n - 2));
        const double x = g.node(std::min(i, g.n - 2));
        const double V = pf.value_at(x);
        const double Vp = pf.value_derivative_at(x);
        const double Vpp = pf.value_second_derivative_at_node(std::min(i, g.n - 2));
        const double u_hat = -(p.gamma * Vp + 1.0) / (2.0 * p.eta);
        const double u_rand = rng.range(-20.0, 20.0);
        const double h_hat = hamiltonian(p, x, u_hat, V, Vp, Vpp);
        const double h_rand = hamiltonian(p, x, u_rand, V, Vp, Vpp);
        worst_gap = std::max(worst_gap, h_hat - h_rand);
        const double res = residual_reduced_hjb(p, x, V, Vp, Vpp);
        worst_eq = std::max(worst_eq, std::abs(h_hat - res) / std::max(1.0, std::abs(res)));
    }

    std::vector<CheckResult> out;
    CheckResult min;
    min.name = "minimizer_property";
    min.measured = worst_gap;
    min.threshold = 1e-9 * scale;
    min.pass = worst_gap <= min.threshold;
    min.detail = "max over 1000 draws of H(u_hat) - H(u_random)";
    out.push_back(std::move(min));

    CheckResult eq;
    eq.name = "hamiltonian_identity";
    eq.measured = worst_eq;
    eq.threshold = 1e-12 * scale;
    eq.pass = worst_eq <= eq.threshold;
    eq.detail = "H at the minimizer vs the control-eliminated residual";
    out.push_back(std::move(eq));
    return out;
}

CheckResult check_mc_policy_optimality(VerifyContext& ctx, double scale) {
    const ModelParams& p = ctx.problem().params;
    const PolicyFn& pf = ctx.refined_policy();

    SimConfig cfg = ctx.problem().sim;
    cfg.dt = 1e-4;
    cfg.horizon_T = 7.0 / p.lambda;
    cfg.n_paths = 400;
    cfg.seed = 20240;
    cfg.record_stride = 1'000'000'000;
    // Clamp band scaled to this step size (10 dt |gamma u + b| with the
    // near-boundary control level); the 1e-4 band belongs to the much
    // smaller path-plot step and lets single-step overshoots sample the
    // near-singular control, inflating the cost estimate.
    cfg.clamp_margin = 1e-3 * p.width();
    validate_sim_config(p, cfg);

    const double v_ref = pf.value_at(cfg.x_start);
    const CostEstimate est = estimate_cost(p, pf, cfg);

    CheckResult r;
    r.name = "mc_policy_optimality";
    r.measured = std::abs(est.mean - v_ref);
    r.threshold = std::max(3.0 * est.stderr_of_mean, 0.05 * std::abs(v_ref) + 0.01) * scale;
    r.pass = r.measured <= r.threshold;
    r.detail = "J_hat=" + fmt(est.mean) + " (stderr " + fmt(est.stderr_of_mean) + ") vs V(" +
               fmt(cfg.x_start) + ")=" + fmt(v_ref) + ", n_paths=400, dt=1e-4, lambda*T=7";
    return r;
}

CheckResult check_containment(VerifyContext& ctx, double) {
    const auto paths = ctx.figure_paths();
    const BreachStats st = breach_stats(ctx.problem().params, paths);
    bool exited = false;
    for (const auto& rec : paths) exited = exited || rec.exited;
    CheckResult r;
    r.name = "containment";
    r.measured = static_cast<double>(st.total_clamp_events);
    r.threshold = 0.0;
    r.pass = st.total_clamp_events == 0 && !exited;
    std::ostringstream os;
    os << "clamp events over 10 paths at dt=1.6e-6, T=1 (clamped fraction " << fmt(st.clamped_fraction)
       << ")";
    r.detail = os.str();
    return r;
}

std::vector<CheckResult> check_figure_regime(VerifyContext& ctx, double scale) {
    const auto paths = ctx.figure_paths();
    const ModelParams& p = ctx.problem().params;
    std::vector<CheckResult> out;

    if (ctx.preset() == "fig2") {
        int far_enough = 0;
        for (const auto& rec : paths) {
            const double gap = std::min(rec.min_x - p.beta_minus, p.beta_plus - rec.max_x);
            if (gap > 0.05) ++far_enough;
        }
        CheckResult r;
        r.name = "regime_distance";
        r.measured = static_cast<double>(far_enough);
        r.threshold = 8.0;
        r.pass = far_enough >= 8;
        r.detail = "paths keeping min barrier distance > 0.05 over T=1, out of 10";
        out.push_back(std::move(r));
    } else if (ctx.preset() == "fig3") {
        int occupied = 0;
        double min_u = std::numeric_limits<double>::infinity();
        for (const auto& rec : paths) {
            const double frac =
                static_cast<double>(rec.near_lower_steps) / static_cast<double>(rec.total_steps);
            if (frac >= 0.05) ++occupied;
            if (rec.near_lower_steps > 0) min_u = std::min(min_u, rec.near_lower_min_u);
        }
        CheckResult occ;
        occ.name = "regime_occupation";
        occ.measured = static_cast<double>(occupied);
        occ.threshold = 8.0;
        occ.pass = occupied >= 8;
        occ.detail = "paths spending >= 5% of steps within 0.05 of beta-, out of 10";
        out.push_back(std::move(occ));

        CheckResult inv;
        inv.name = "regime_inventory";
        inv.measured = min_u;
        inv.threshold = -1e-12 * scale;
        inv.pass = min_u >= inv.threshold;
        inv.detail = "min control during near-boundary steps (>= 0 means inventory non-decreasing)";
        out.push_back(std::move(inv));
    }
    return out;
}

CheckResult check_grid_convergence(VerifyContext& ctx, double) {
    const Problem& pr = ctx.problem();
    std::vector<int> ns = {501, 1001, 2001};
    std::vector<GridSolution> sols;
    for (int n : ns) {
        SolverConfig cfg = pr.solver;
        cfg.grid_n = n;
        // Scheme-order measurement: at the default regularization the
        // boundary layer is about one coarse-grid cell wide, which keeps the
        // coarsest solve outside the asymptotic regime. 0.03 is wide enough
        // for every grid in the refinement chain.
        cfg.epsilon_schedule = {0.03};
        cfg.max_newton_iters = 200;
        sols.push_back(continuation_solve(pr.params, pr.distance, cfg));
    }
    auto diff = [](const GridSolution& coarse, const GridSolution& fine) {
        double d = 0.0;
        for (int i = 0; i < coarse.grid.n; ++i)
            d = std::max(d, std::abs(fine.values[static_cast<size_t>(2 * i)] -
                                     coarse.values[static_cast<size_t>(i)]));
        return d;
    };
    const double d1 = diff(sols[0], sols[1]);
    const double d2 = diff(sols[1], sols[2]);
    const double order = std::log2(d1 / d2);
    CheckResult r;
    r.name = "grid_convergence";
    r.measured = order;
    r.threshold = 1.6;  // lower edge; upper edge 2.4 checked too
    r.pass = order >= 1.6 && order <= 2.4;
    r.detail = "observed order from n in {501,1001,2001} at epsilon 0.03: diffs " + fmt(d1) + ", " + fmt(d2);
    return r;
}

std::vector<CheckResult> run_checks(VerifyContext& ctx, const VerifyOptions& opts) {
    const double s = opts.tolerance_scale;
    const bool fig3 = ctx.preset() == "fig3";

    struct Entry {
        std::vector<std::string> names;
        std::function<std::vector<CheckResult>(VerifyContext&, double)> run;
        bool enabled;
    };
    auto one = [](CheckResult (*f)(VerifyContext&, double)) {
        return [f](VerifyContext& c, double sc) { return std::vector<CheckResult>{f(c, sc)}; };
    };

    const std::vector<Entry> entries = {
        {{"boundary_value"}, one(check_boundary_value), true},
        {{"hjb_residual"}, one(check_hjb_residual), true},
        {{"blowup_lower", "blowup_upper"}, check_blowup_rate, true},
        {{"transform_proportionality", "transform_roundtrips"}, check_transform_consistency, true},
        {{"truncation_monotonicity", "truncation_domination"}, check_truncation_monotonicity, !fig3},
        {{"value_lower_bound"}, one(check_value_lower_bound), true},
        {{"minimizer_property", "hamiltonian_identity"}, check_minimizer_property, true},
        {{"mc_policy_optimality"}, one(check_mc_policy_optimality), !fig3},
        {{"containment"}, one(check_containment), true},
        {{"regime_distance", "regime_occupation", "regime_inventory"}, check_figure_regime,
         !ctx.preset().empty()},
        {{"grid_convergence"}, one(check_grid_convergence), true},
    };

    auto requested = [&opts](const Entry& e) {
        if (opts.only.empty()) return true;
        for (const auto& needle : opts.only)
            for (const auto& name : e.names)
                if (name.find(needle) != std::string::npos) return true;
        return false;
    };

    std::vector<CheckResult> out;
    for (const auto& e : entries) {
        if (!e.enabled || !requested(e)) continue;
        for (auto& r : e.run(ctx, s)) out.push_back(std::move(r));
    }
    return out;
}

std::string format_check_line(const CheckResult& r) {
    std::ostringstream os;
    os << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  measured " << r.measured << "  threshold "
       << r.threshold;
    if (!r.detail.empty()) os << "  (" << r.detail << ")";
    return os.str();
}

}  // namespace pegsim
