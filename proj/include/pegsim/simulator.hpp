#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pegsim/model.hpp"
#include "pegsim/policy.hpp"

namespace pegsim {

/// Counter-based Gaussian stream. All state is derived from (seed, stream),
/// so stream i can be created and consumed independently of every other
/// stream; parallel path generation is reproducible by construction.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream);

    /// Next standard normal draw (Box-Muller over counter-indexed uniforms).
    double next();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

struct SimConfig {
    double x_start = 0.4;
    double horizon_T = 14.0;
    double dt = 1e-4;
    std::uint64_t seed = 1;
    int n_paths = 200;
    double clamp_margin = 1e-4;   // half-width of the safety band inside each barrier; 0 disables clamping
    int record_stride = 1000;     // thinning for recorded samples
    double near_band = 0.05;      // occupancy diagnostic: distance-from-lower-barrier band

    std::optional<double> control_override;  // test hook: forces the control to a constant
};

/// Throws std::invalid_argument on any violated SimConfig invariant.
void validate_sim_config(const ModelParams& p, const SimConfig& cfg);

struct PathRecord {
    // thinned samples: every record_stride-th step plus the final one
    std::vector<double> times, x, u, inventory, cost;

    long clamp_events = 0;
    bool exited = false;

    // whole-path diagnostics, accumulated over every step
    long total_steps = 0;
    double min_x = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    long near_lower_steps = 0;
    double near_lower_min_u = std::numeric_limits<double>::infinity();
    double final_inventory = 0.0;
    double final_cost = 0.0;
};

struct CostEstimate {
    double mean = 0.0;
    double stderr_of_mean = 0.0;
    int n_paths = 0;
    double horizon_T = 0.0;
    double dt = 0.0;
    double tail_bound = 0.0;  // e^{-lambda T} / (4 eta lambda)
};

struct EulerStepResult {
    double x_next = 0.0;
    double u_used = 0.0;
    bool clamped = false;
};

/// One Euler step of dX = (b + gamma u) dt + sigma dB under the feedback
/// control (or its override). With a positive clamp margin the proposal is
/// projected onto the nearest band edge and the event recorded; clamping is
/// never an error.
EulerStepResult euler_step(const ModelParams& p, const PolicyFn& pf, double x, double dt, double dB,
                           double clamp_margin, std::optional<double> control_override = {});

/// Simulates one path over ceil(T/dt) steps with Gaussian increments from
/// the stream (seed, path_index). Inventory and discounted cost accumulate
/// by left-endpoint quadrature. With clamp_margin = 0 a step reaching a
/// barrier terminates the path with exited set.
PathRecord simulate_path(const ModelParams& p, const PolicyFn& pf, const SimConfig& cfg, int path_index);

/// Monte Carlo estimate of the discounted cost over n_paths paths. Paths run
/// in parallel (OpenMP); per-path costs are stored by index and reduced in
/// index order, so the result is independent of thread count and identical
/// to estimate_cost_serial.
CostEstimate estimate_cost(const ModelParams& p, const PolicyFn& pf, const SimConfig& cfg);

/// Serial reference implementation of estimate_cost, kept for testing and
/// benchmarking against the parallel kernel.
CostEstimate estimate_cost_serial(const ModelParams& p, const PolicyFn& pf, const SimConfig& cfg);

struct PathBreach {
    long clamp_events = 0;
    double lower_gap = 0.0;  // min x - beta_minus
    double upper_gap = 0.0;  // beta_plus - max x
};

struct BreachStats {
    long total_clamp_events = 0;
    long total_steps = 0;
    double clamped_fraction = 0.0;
    std::vector<PathBreach> per_path;
};

BreachStats breach_stats(const ModelParams& p, std::span<const PathRecord> records);

}  // namespace pegsim
