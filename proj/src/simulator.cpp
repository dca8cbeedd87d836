#include "pegsim/simulator.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pegsim {

namespace {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double to_unit(std::uint64_t r) {
    // (0, 1]; keeps log() finite
    return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

GaussianStream::GaussianStream(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 0x6a09e667f3bcc909ULL))) {}

double GaussianStream::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = to_unit(splitmix64(key_ + counter_));
    const double u2 = to_unit(splitmix64(key_ + counter_ + 1));
    counter_ += 2;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

void validate_sim_config(const ModelParams& p, const SimConfig& cfg) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid sim config: " + what); };
    if (!(cfg.dt > 0.0)) fail("dt must be positive");
    if (!(cfg.horizon_T > 0.0)) fail("horizon_T must be positive");
    if (cfg.dt > cfg.horizon_T) fail("dt must not exceed horizon_T");
    if (cfg.n_paths < 1) fail("n_paths must be at least 1");
    if (cfg.record_stride < 1) fail("record_stride must be at least 1");
    if (cfg.clamp_margin < 0.0) fail("clamp_margin must be nonnegative");
    if (!(cfg.x_start > p.beta_minus + cfg.clamp_margin && cfg.x_start < p.beta_plus - cfg.clamp_margin))
        fail("x_start must lie strictly inside the clamp band");
}

EulerStepResult euler_step(const ModelParams& p, const PolicyFn& pf, double x, double dt, double dB,
                           double clamp_margin, std::optional<double> control_override) {
    EulerStepResult r;
    r.u_used = control_override ? *control_override : pf.control_at(x);
    double proposal = x + (p.drift(x) + p.gamma * r.u_used) * dt + p.sigma * dB;
    if (clamp_margin > 0.0) {
        const double lo = p.beta_minus + clamp_margin;
        const double hi = p.beta_plus - clamp_margin;
        if (proposal < lo) {
            proposal = lo;
            r.clamped = true;
        } else if (proposal > hi) {
            proposal = hi;
            r.clamped = true;
        }
    }
    r.x_next = proposal;
    return r;
}

namespace {

long step_count(const SimConfig& cfg) {
    return static_cast<long>(std::ceil(cfg.horizon_T / cfg.dt - 1e-9));
}

}  // namespace

PathRecord simulate_path(const ModelParams& p, const PolicyFn& pf, const SimConfig& cfg, int path_index) {
    validate_sim_config(p, cfg);
    const long steps = step_count(cfg);
    const double dt = cfg.dt;
    const double sqrt_dt = std::sqrt(dt);
    const double decay = std::exp(-p.lambda * dt);

    GaussianStream rng(cfg.seed, static_cast<std::uint64_t>(path_index));
    PathRecord rec;
    rec.times.reserve(static_cast<size_t>(steps / cfg.record_stride + 2));

    double x = cfg.x_start;
    double inventory = 0.0;
    double cost = 0.0;
    double discount = 1.0;

    auto record = [&](long k, double u) {
        rec.times.push_back(static_cast<double>(k) * dt);
        rec.x.push_back(x);
        rec.u.push_back(u);
        rec.inventory.push_back(inventory);
        rec.cost.push_back(cost);
    };

    for (long k = 0; k < steps; ++k) {
        if (k % 4096 == 0) discount = std::exp(-p.lambda * static_cast<double>(k) * dt);
        const double u = cfg.control_override ? *cfg.control_override : pf.control_at(x);

        rec.min_x = std::min(rec.min_x, x);
        rec.max_x = std::max(rec.max_x, x);
        if (x <= p.beta_minus + cfg.near_band) {
            ++rec.near_lower_steps;
            rec.near_lower_min_u = std::min(rec.near_lower_min_u, u);
        }
        if (k % cfg.record_stride == 0) record(k, u);

        cost += discount * (u + p.eta * u * u) * dt;
        inventory += u * dt;
        discount *= decay;

        const double dB = sqrt_dt * rng.next();
        double proposal = x + (p.drift(x) + p.gamma * u) * dt + p.sigma * dB;
        if (cfg.clamp_margin > 0.0) {
            const double lo = p.beta_minus + cfg.clamp_margin;
            const double hi = p.beta_plus - cfg.clamp_margin;
            if (proposal < lo) {
                proposal = lo;
                ++rec.clamp_events;
            } else if (proposal > hi) {
                proposal = hi;
                ++rec.clamp_events;
            }
        } else if (proposal <= p.beta_minus || proposal >= p.beta_plus) {
            // Unprotected step reached a barrier: terminate early.
            x = (proposal <= p.beta_minus) ? p.beta_minus : p.beta_plus;
            rec.exited = true;
            rec.total_steps = k + 1;
            rec.min_x = std::min(rec.min_x, x);
            rec.max_x = std::max(rec.max_x, x);
            rec.final_inventory = inventory;
            rec.final_cost = cost;
            record(k + 1, u);
            return rec;
        }
        x = proposal;
    }

    rec.total_steps = steps;
    rec.min_x = std::min(rec.min_x, x);
    rec.max_x = std::max(rec.max_x, x);
    rec.final_inventory = inventory;
    rec.final_cost = cost;
    const double u_final = cfg.control_override ? *cfg.control_override : pf.control_at(x);
    record(steps, u_final);
    return rec;
}

namespace {

CostEstimate reduce_costs(const std::vector<double>& costs, const ModelParams& p, const SimConfig& cfg) {
    const int n = static_cast<int>(costs.size());
    double sum = 0.0;
    for (double c : costs) sum += c;
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    CostEstimate est;
    est.mean = mean;
    est.stderr_of_mean = sd / std::sqrt(static_cast<double>(n));
    est.n_paths = n;
    est.horizon_T = cfg.horizon_T;
    est.dt = cfg.dt;
    est.tail_bound = std::exp(-p.lambda * cfg.horizon_T) / (4.0 * p.eta * p.lambda);
    return est;
}

}  // namespace

CostEstimate estimate_cost(const ModelParams& p, const PolicyFn& pf, const SimConfig& cfg) {
    validate_sim_config(p, cfg);
    if (cfg.n_paths < 2) throw std::invalid_argument("estimate_cost: n_paths must be >= 2 for stderr");
    std::vector<double> costs(static_cast<size_t>(cfg.n_paths));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < cfg.n_paths; ++i)
        costs[static_cast<size_t>(i)] = simulate_path(p, pf, cfg, i).final_cost;
    return reduce_costs(costs, p, cfg);
}

CostEstimate estimate_cost_serial(const ModelParams& p, const PolicyFn& pf, const SimConfig& cfg) {
    validate_sim_config(p, cfg);
    if (cfg.n_paths < 2) throw std::invalid_argument("estimate_cost: n_paths must be >= 2 for stderr");
    std::vector<double> costs(static_cast<size_t>(cfg.n_paths));
    for (int i = 0; i < cfg.n_paths; ++i)
        costs[static_cast<size_t>(i)] = simulate_path(p, pf, cfg, i).final_cost;
    return reduce_costs(costs, p, cfg);
}

BreachStats breach_stats(const ModelParams& p, std::span<const PathRecord> records) {
    if (records.empty()) throw std::invalid_argument("breach_stats: empty record list");
    BreachStats st;
    st.per_path.reserve(records.size());
    for (const PathRecord& r : records) {
        st.total_clamp_events += r.clamp_events;
        st.total_steps += r.total_steps;
        st.per_path.push_back({r.clamp_events, r.min_x - p.beta_minus, p.beta_plus - r.max_x});
    }
    st.clamped_fraction = st.total_steps > 0
                              ? static_cast<double>(st.total_clamp_events) / static_cast<double>(st.total_steps)
                              : 0.0;
    return st;
}

}  // namespace pegsim
