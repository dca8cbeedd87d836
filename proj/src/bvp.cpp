#include "pegsim/bvp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pegsim {

Grid Grid::uniform(double beta_minus, double beta_plus, int n) {
    if (n < 3) throw std::invalid_argument("Grid: need at least 3 nodes");
    if (!(beta_minus < beta_plus)) throw std::invalid_argument("Grid: empty interval");
    Grid g;
    g.n = n;
    g.beta_minus = beta_minus;
    g.beta_plus = beta_plus;
    g.h = (beta_plus - beta_minus) / static_cast<double>(n - 1);
    return g;
}

void solve_tridiagonal(const Tridiagonal& J, std::vector<double>& rhs) {
    const size_t m = J.diag.size();
    static thread_local std::vector<double> cp;
    cp.resize(m);
    double pivot = J.diag[0];
    if (pivot == 0.0) throw std::runtime_error("tridiagonal solve breakdown: zero pivot at row 0");
    cp[0] = J.upper[0] / pivot;
    rhs[0] /= pivot;
    for (size_t i = 1; i < m; ++i) {
        pivot = J.diag[i] - J.lower[i] * cp[i - 1];
        if (pivot == 0.0) {
            std::ostringstream os;
            os << "tridiagonal solve breakdown: zero pivot at row " << i;
            throw std::runtime_error(os.str());
        }
        cp[i] = J.upper[i] / pivot;
        rhs[i] = (rhs[i] - J.lower[i] * rhs[i - 1]) / pivot;
    }
    for (size_t i = m - 1; i-- > 0;)
        rhs[i] -= cp[i] * rhs[i + 1];
}

namespace {

double max_abs(const std::vector<double>& v) {
    double r = 0.0;
    for (double x : v) r = std::max(r, std::abs(x));
    return r;
}

}  // namespace

NewtonStepResult newton_step(const NewtonSystem& sys, std::vector<double>& u, double min_step) {
    const size_t n = u.size();
    const size_t m = n - 2;
    std::vector<double> f(m);
    sys.residual(u, f);
    NewtonStepResult r;
    r.residual_before = max_abs(f);

    Tridiagonal jac;
    jac.resize(m);
    sys.jacobian(u, jac);
    std::vector<double> delta(m);
    for (size_t i = 0; i < m; ++i) delta[i] = -f[i];
    solve_tridiagonal(jac, delta);

    std::vector<double> trial(n), ftrial(m);
    double alpha = 1.0;
    while (true) {
        trial = u;
        for (size_t i = 0; i < m; ++i) trial[i + 1] += alpha * delta[i];
        sys.residual(trial, ftrial);
        const double rn = max_abs(ftrial);
        if (rn < r.residual_before) {
            u = trial;
            r.residual_after = rn;
            r.step_scale = alpha;
            r.accepted = true;
            return r;
        }
        if (alpha <= min_step) {
            r.residual_after = r.residual_before;
            r.step_scale = 0.0;
            r.accepted = false;
            return r;
        }
        alpha *= 0.5;
    }
}

namespace {

struct NewtonOutcome {
    double residual_norm;
    int iterations;
};

NewtonOutcome damped_newton(const NewtonSystem& sys, std::vector<double>& u, const SolverConfig& cfg,
                            const std::string& what) {
    std::vector<double> f(u.size() - 2);
    int it = 0;
    for (; it <= cfg.max_newton_iters; ++it) {
        sys.residual(u, f);
        const double rn = max_abs(f);
        if (rn <= cfg.tolerance) return {rn, it};
        if (it == cfg.max_newton_iters) break;
        const NewtonStepResult st = newton_step(sys, u, cfg.min_line_search_step);
        if (!st.accepted) {
            std::ostringstream os;
            os << what << ": Newton stalled at iteration " << it << ", residual " << st.residual_before
               << " above tolerance " << cfg.tolerance;
            throw std::runtime_error(os.str());
        }
    }
    sys.residual(u, f);
    std::ostringstream os;
    os << what << ": Newton did not converge in " << cfg.max_newton_iters << " iterations, residual "
       << max_abs(f) << " above tolerance " << cfg.tolerance;
    throw std::runtime_error(os.str());
}

/// Precomputed node data for the U-equation assembly.
struct UNodeData {
    std::vector<double> d, d1, d2, logd, b;
};

UNodeData precompute_u_nodes(const ModelParams& p, const DistanceFn& df, const Grid& g) {
    UNodeData nd;
    nd.d.resize(static_cast<size_t>(g.n));
    nd.d1.resize(static_cast<size_t>(g.n));
    nd.d2.resize(static_cast<size_t>(g.n));
    nd.logd.resize(static_cast<size_t>(g.n));
    nd.b.resize(static_cast<size_t>(g.n));
    for (int i = 1; i + 1 < g.n; ++i) {
        const double x = g.node(i);
        const DistanceEval e = df.eval(x, true);
        const size_t k = static_cast<size_t>(i);
        nd.d[k] = e.d;
        nd.d1[k] = e.d1;
        nd.d2[k] = e.d2;
        nd.logd[k] = std::log(e.d);
        nd.b[k] = p.drift(x);
    }
    return nd;
}

NewtonSystem make_u_system(const ModelParams& p, const UNodeData& nd, const Grid& g) {
    const double h = g.h;
    const double eta = p.eta;
    const double gam = p.gamma;
    const double s2 = p.sigma * p.sigma;
    const double lam = p.lambda;
    NewtonSystem sys;
    sys.residual = [&nd, h, eta, gam, s2, lam](const std::vector<double>& u, std::vector<double>& f) {
        const size_t m = u.size() - 2;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = i + 1;
            const double D1 = (u[k + 1] - u[k - 1]) / (2.0 * h);
            const double D2 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (h * h);
            const double d = nd.d[k], d1 = nd.d1[k], d2 = nd.d2[k], L = nd.logd[k], b = nd.b[k];
            const double bracket = gam * u[k] * d1 + gam * D1 * d * L - d;
            f[i] = 4.0 * eta * b * (u[k] * d * d1 + D1 * d * d * L) + bracket * bracket
                   + 2.0 * eta * s2 * (2.0 * d * d1 * D1 + D2 * d * d * L + u[k] * (d * d2 - d1 * d1))
                   - 4.0 * eta * lam * u[k] * d * d * L;
        }
    };
    sys.jacobian = [&nd, h, eta, gam, s2, lam](const std::vector<double>& u, Tridiagonal& jac) {
        const size_t m = u.size() - 2;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = i + 1;
            const double D1 = (u[k + 1] - u[k - 1]) / (2.0 * h);
            const double d = nd.d[k], d1 = nd.d1[k], d2 = nd.d2[k], L = nd.logd[k], b = nd.b[k];
            const double bracket = gam * u[k] * d1 + gam * D1 * d * L - d;
            const double dF_dU = 4.0 * eta * b * d * d1 + 2.0 * bracket * gam * d1
                                 + 2.0 * eta * s2 * (d * d2 - d1 * d1) - 4.0 * eta * lam * d * d * L;
            const double dF_dD1 = 4.0 * eta * b * d * d * L + 2.0 * bracket * gam * d * L
                                  + 4.0 * eta * s2 * d * d1;
            const double dF_dD2 = 2.0 * eta * s2 * d * d * L;
            jac.lower[i] = -dF_dD1 / (2.0 * h) + dF_dD2 / (h * h);
            jac.diag[i] = dF_dU - 2.0 * dF_dD2 / (h * h);
            jac.upper[i] = dF_dD1 / (2.0 * h) + dF_dD2 / (h * h);
        }
    };
    return sys;
}

std::vector<double> stencil_derivatives(const std::vector<double>& u, double h) {
    const size_t n = u.size();
    std::vector<double> du(n);
    for (size_t i = 1; i + 1 < n; ++i)
        du[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    du[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    du[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    return du;
}

GridSolution solve_u_stage(const ModelParams& p, const DistanceFn& df, const SolverConfig& cfg,
                           std::vector<double> u) {
    const Grid g = Grid::uniform(p.beta_minus, p.beta_plus, cfg.grid_n);
    const double cb = p.boundary_u();
    u[0] = cb;
    u[static_cast<size_t>(g.n) - 1] = cb;

    const UNodeData nd = precompute_u_nodes(p, df, g);
    const NewtonSystem sys = make_u_system(p, nd, g);
    std::ostringstream what;
    what << "solve_u_bvp (epsilon " << df.epsilon() << ")";
    const NewtonOutcome out = damped_newton(sys, u, cfg, what.str());

    GridSolution sol;
    sol.grid = g;
    sol.derivative_values = stencil_derivatives(u, g.h);
    sol.values = std::move(u);
    sol.residual_norm = out.residual_norm;
    sol.newton_iterations = out.iterations;
    sol.epsilon_used = df.epsilon();
    return sol;
}

}  // namespace

GridSolution solve_u_bvp(const ModelParams& p, const DistanceFn& df, const SolverConfig& cfg) {
    if (cfg.grid_n < 101) throw std::invalid_argument("solve_u_bvp: grid_n must be at least 101");
    std::vector<double> u(static_cast<size_t>(cfg.grid_n), p.boundary_u());
    return solve_u_stage(p, df, cfg, std::move(u));
}

GridSolution solve_u_bvp(const ModelParams& p, const DistanceFn& df, const SolverConfig& cfg,
                         const std::vector<double>& initial) {
    if (cfg.grid_n < 101) throw std::invalid_argument("solve_u_bvp: grid_n must be at least 101");
    if (initial.size() != static_cast<size_t>(cfg.grid_n))
        throw std::invalid_argument("solve_u_bvp: warm start size does not match grid_n");
    return solve_u_stage(p, df, cfg, initial);
}

TruncatedSolution solve_truncated_w(const ModelParams& p, const TransformAnchor& a, double boundary_value,
                                    const SolverConfig& cfg, const std::vector<double>* warm_start) {
    if (!std::isfinite(boundary_value))
        throw std::invalid_argument("solve_truncated_w: boundary value must be finite");
    const Grid g = Grid::uniform(p.beta_minus, p.beta_plus, cfg.grid_n);
    const size_t n = static_cast<size_t>(g.n);
    const double s2 = p.sigma * p.sigma;
    const double lam = p.lambda;
    const double h = g.h;

    std::vector<double> fx(n);
    for (int i = 0; i < g.n; ++i) fx[static_cast<size_t>(i)] = source_term(p, a, g.node(i));

    std::vector<double> w;
    if (warm_start) {
        if (warm_start->size() != n)
            throw std::invalid_argument("solve_truncated_w: warm start size does not match grid_n");
        w = *warm_start;
    } else {
        const double fmean = std::accumulate(fx.begin(), fx.end(), 0.0) / static_cast<double>(n);
        w.assign(n, std::min(s2 * fmean / (2.0 * lam), boundary_value));
    }
    w[0] = boundary_value;
    w[n - 1] = boundary_value;

    NewtonSystem sys;
    sys.residual = [&fx, h, s2, lam](const std::vector<double>& u, std::vector<double>& f) {
        const size_t m = u.size() - 2;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = i + 1;
            const double D1 = (u[k + 1] - u[k - 1]) / (2.0 * h);
            const double D2 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (h * h);
            f[i] = -D2 + D1 * D1 + 2.0 * lam / s2 * u[k] - fx[k];
        }
    };
    sys.jacobian = [h, s2, lam](const std::vector<double>& u, Tridiagonal& jac) {
        const size_t m = u.size() - 2;
        for (size_t i = 0; i < m; ++i) {
            const size_t k = i + 1;
            const double D1 = (u[k + 1] - u[k - 1]) / (2.0 * h);
            jac.lower[i] = -D1 / h - 1.0 / (h * h);
            jac.diag[i] = 2.0 * lam / s2 + 2.0 / (h * h);
            jac.upper[i] = D1 / h - 1.0 / (h * h);
        }
    };

    std::ostringstream what;
    what << "solve_truncated_w (boundary value " << boundary_value << ")";
    const NewtonOutcome out = damped_newton(sys, w, cfg, what.str());

    TruncatedSolution sol;
    sol.grid = g;
    sol.boundary_value = boundary_value;
    sol.values = std::move(w);
    sol.residual_norm = out.residual_norm;
    sol.newton_iterations = out.iterations;
    return sol;
}

GridSolution continuation_solve(const ModelParams& p, const DistanceFn& df, const SolverConfig& cfg) {
    const auto& sched = cfg.epsilon_schedule;
    if (sched.empty())
        throw std::invalid_argument("continuation_solve: empty epsilon schedule");
    for (size_t i = 1; i < sched.size(); ++i)
        if (!(sched[i] < sched[i - 1]))
            throw std::invalid_argument("continuation_solve: epsilon schedule must be strictly decreasing");

    std::vector<StageInfo> stages;
    GridSolution sol;
    std::vector<double> warm;
    for (size_t s = 0; s < sched.size(); ++s) {
        const DistanceFn stage_df = df.with_epsilon(sched[s]);
        try {
            sol = (s == 0) ? solve_u_bvp(p, stage_df, cfg) : solve_u_bvp(p, stage_df, cfg, warm);
        } catch (const std::runtime_error& e) {
            std::ostringstream os;
            os << "continuation_solve failed at epsilon stage " << sched[s] << ": " << e.what();
            throw std::runtime_error(os.str());
        }
        warm = sol.values;
        stages.push_back({sched[s], sol.newton_iterations, sol.residual_norm});
    }
    sol.stages = std::move(stages);
    int total = 0;
    for (const auto& st : sol.stages) total += st.iterations;
    sol.newton_iterations = total;
    return sol;
}

}  // namespace pegsim
