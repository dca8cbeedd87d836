#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pegsim/bvp.hpp"
#include "pegsim/model.hpp"
#include "pegsim/policy.hpp"
#include "pegsim/simulator.hpp"
#include "pegsim/transform.hpp"

namespace pegsim {

/// Flat key=value configuration with provenance tracking. Values arrive from
/// (in order of increasing precedence) a preset, a config file, and command
/// line overrides; a preset never overwrites an explicitly set key.
class KeyValueConfig {
public:
    /// Explicit assignment (file or flag). Later assignments win.
    void set(const std::string& key, const std::string& value);

    /// Preset assignment; skipped when the key is already set explicitly,
    /// with a note appended to the override log.
    void set_default(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws if missing
    std::string get_or(const std::string& key, const std::string& fallback) const;

    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    const std::vector<std::string>& override_log() const { return override_log_; }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> override_log_;
};

/// Parses `key = value` lines with `#` comments into cfg. Throws
/// std::invalid_argument with the offending line on malformed input or an
/// unknown key.
void load_config_file(KeyValueConfig& cfg, const std::string& path);

/// Checks a single key against the known-key list; throws on unknown keys.
void require_known_key(const std::string& key);

/// Fills the model keys and x_start of the named preset ("fig2" or "fig3").
void apply_preset(KeyValueConfig& cfg, const std::string& preset);

/// Fully resolved problem: validated parameters plus all module configs.
struct Problem {
    ModelParams params;
    DistanceFn distance;
    TransformAnchor anchor;
    SolverConfig solver;
    SimConfig sim;
    std::string output_dir = ".";
};

/// Resolves a KeyValueConfig into a validated Problem. Missing mandatory
/// model keys produce std::invalid_argument naming the key.
Problem build_problem(const KeyValueConfig& cfg);

// CSV emission. All files use ',' separators, '.' decimal points, LF line
// endings, and 17 significant digits.

/// Header `x,U,V,V_prime,u_hat,residual`; boundary rows carry empty
/// V/V_prime/u_hat/residual fields.
void write_value_function_csv(std::ostream& os, const PolicyFn& pf);

/// Header `t,x,u,inventory,cost`, one row per recorded sample.
void write_path_csv(std::ostream& os, const PathRecord& rec);

/// Per-path clamp counts and barrier gaps, then a `total` row.
void write_breach_summary_csv(std::ostream& os, const ModelParams& p, std::span<const PathRecord> records);

/// Single-line record `mean,stderr,n_paths,T,dt,tail_bound,V_at_start`.
void write_cost_estimate(std::ostream& os, const CostEstimate& est, double v_at_start);

std::string format_full(double v);  // %.17g

}  // namespace pegsim
