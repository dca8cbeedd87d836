#include "pegsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pegsim {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        // model
        "beta_minus", "beta_plus", "sigma", "eta", "gamma", "rho", "theta", "lambda", "drift_coeffs",
        // transform
        "distance_kind", "epsilon", "x0",
        // solver
        "grid_n", "solver_tolerance", "max_newton_iters", "epsilon_schedule",
        // simulation
        "x_start", "horizon_T", "dt", "seed", "n_paths", "clamp_margin", "record_stride",
        // io
        "output_dir", "preset"};
    return keys;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_double_list(const std::string& key, const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw std::invalid_argument("config key '" + key + "': empty list entry");
        size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size())
            throw std::invalid_argument("config key '" + key + "': bad number '" + item + "'");
    }
    if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

}  // namespace

void require_known_key(const std::string& key) {
    if (!known_keys().count(key))
        throw std::invalid_argument("unknown config key '" + key + "'");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    require_known_key(key);
    values_[key] = value;
}

void KeyValueConfig::set_default(const std::string& key, const std::string& value) {
    require_known_key(key);
    auto it = values_.find(key);
    if (it != values_.end()) {
        if (it->second != value)
            override_log_.push_back("preset value for '" + key + "' (" + value + ") overridden by explicit " +
                                    it->second);
        return;
    }
    values_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& KeyValueConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("missing config key '" + key + "'");
    return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string& s = get(key);
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("config key '" + key + "': bad number '" + s + "'");
    return v;
}

int KeyValueConfig::get_int(const std::string& key) const {
    const std::string& s = get(key);
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("config key '" + key + "': bad integer '" + s + "'");
    return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const {
    const std::string& s = get(key);
    size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("config key '" + key + "': bad integer '" + s + "'");
    return v;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) const {
    return parse_double_list(key, get(key));
}

void load_config_file(KeyValueConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config file " + path + ":" + std::to_string(lineno) +
                                        ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config file " + path + ":" + std::to_string(lineno) +
                                        ": empty key or value");
        cfg.set(key, value);
    }
}

void apply_preset(KeyValueConfig& cfg, const std::string& preset) {
    if (preset == "fig2") {
        cfg.set_default("beta_minus", "0");
        cfg.set_default("beta_plus", "1");
        cfg.set_default("sigma", "0.25");
        cfg.set_default("eta", "6");
        cfg.set_default("gamma", "1");
        cfg.set_default("lambda", "0.5");
        cfg.set_default("drift_coeffs", "-0.5,0,0.5");
        cfg.set_default("x_start", "0.4");
    } else if (preset == "fig3") {
        cfg.set_default("beta_minus", "0");
        cfg.set_default("beta_plus", "1");
        cfg.set_default("sigma", "0.4");
        cfg.set_default("eta", "0.6");
        cfg.set_default("gamma", "2");
        cfg.set_default("lambda", "1");
        cfg.set_default("drift_coeffs", "-1,0,0,0,0,0,1");
        cfg.set_default("x_start", "0.2");
    } else {
        throw std::invalid_argument("unknown preset '" + preset + "' (expected fig2 or fig3)");
    }
}

Problem build_problem(const KeyValueConfig& raw) {
    KeyValueConfig cfg = raw;
    if (cfg.has("preset")) apply_preset(cfg, cfg.get("preset"));

    ModelParams p;
    p.beta_minus = cfg.get_double("beta_minus");
    p.beta_plus = cfg.get_double("beta_plus");
    p.sigma = cfg.get_double("sigma");
    p.eta = cfg.get_double("eta");
    p.gamma = cfg.get_double("gamma");
    if (cfg.has("lambda")) {
        p.rho = cfg.get_double("lambda");
        p.theta = 0.0;
    } else {
        p.rho = cfg.has("rho") ? cfg.get_double("rho") : 0.0;
        p.theta = cfg.has("theta") ? cfg.get_double("theta") : 0.0;
        if (!cfg.has("rho") && !cfg.has("theta"))
            throw std::invalid_argument("missing config key 'lambda' (or 'rho'/'theta')");
    }
    p.drift.coefficients = cfg.get_double_list("drift_coeffs");
    p = validate_params(p);

    const std::string kind_s = cfg.get_or("distance_kind", "quadratic");
    DistanceKind kind;
    if (kind_s == "quadratic")
        kind = DistanceKind::Quadratic;
    else if (kind_s == "sine")
        kind = DistanceKind::Sine;
    else
        throw std::invalid_argument("config key 'distance_kind': expected quadratic or sine");
    const double eps = cfg.has("epsilon") ? cfg.get_double("epsilon") : 0.00176;

    Problem pr{p,
               DistanceFn(kind, p.beta_minus, p.beta_plus, eps),
               cfg.has("x0") ? TransformAnchor{cfg.get_double("x0")} : default_anchor(p),
               SolverConfig{},
               SimConfig{},
               cfg.get_or("output_dir", ".")};
    if (!(pr.anchor.x0 > p.beta_minus && pr.anchor.x0 < p.beta_plus))
        throw std::invalid_argument("config key 'x0': anchor must lie strictly inside the interval");

    if (cfg.has("grid_n")) pr.solver.grid_n = cfg.get_int("grid_n");
    if (cfg.has("solver_tolerance")) pr.solver.tolerance = cfg.get_double("solver_tolerance");
    if (cfg.has("max_newton_iters")) pr.solver.max_newton_iters = cfg.get_int("max_newton_iters");
    if (cfg.has("epsilon_schedule")) {
        pr.solver.epsilon_schedule = cfg.get_double_list("epsilon_schedule");
    } else {
        pr.solver.epsilon_schedule = {eps};
    }

    pr.sim.x_start = cfg.has("x_start") ? cfg.get_double("x_start") : 0.5 * (p.beta_minus + p.beta_plus);
    pr.sim.horizon_T = cfg.has("horizon_T") ? cfg.get_double("horizon_T") : 7.0 / p.lambda;
    if (cfg.has("dt")) pr.sim.dt = cfg.get_double("dt");
    if (cfg.has("seed")) pr.sim.seed = cfg.get_u64("seed");
    if (cfg.has("n_paths")) pr.sim.n_paths = cfg.get_int("n_paths");
    pr.sim.clamp_margin = cfg.has("clamp_margin") ? cfg.get_double("clamp_margin") : 1e-4 * p.width();
    if (cfg.has("record_stride")) pr.sim.record_stride = cfg.get_int("record_stride");

    return pr;
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_value_function_csv(std::ostream& os, const PolicyFn& pf) {
    const GridSolution& sol = pf.solution();
    os << "x,U,V,V_prime,u_hat,residual\n";
    for (int i = 0; i < sol.grid.n; ++i) {
        const double x = sol.grid.node(i);
        os << format_full(x) << ',' << format_full(sol.values[static_cast<size_t>(i)]);
        if (i == 0 || i == sol.grid.n - 1) {
            os << ",,,,\n";
            continue;
        }
        os << ',' << format_full(pf.value_at(x)) << ',' << format_full(pf.value_derivative_at(x)) << ','
           << format_full(pf.control_at(x)) << ',' << format_full(pf.reduced_hjb_residual_at_node(i)) << '\n';
    }
}

void write_path_csv(std::ostream& os, const PathRecord& rec) {
    os << "t,x,u,inventory,cost\n";
    for (size_t i = 0; i < rec.times.size(); ++i)
        os << format_full(rec.times[i]) << ',' << format_full(rec.x[i]) << ',' << format_full(rec.u[i]) << ','
           << format_full(rec.inventory[i]) << ',' << format_full(rec.cost[i]) << '\n';
}

void write_breach_summary_csv(std::ostream& os, const ModelParams& p, std::span<const PathRecord> records) {
    const BreachStats st = breach_stats(p, records);
    os << "path,clamp_events,min_gap_lower,min_gap_upper,clamped_fraction\n";
    for (size_t i = 0; i < st.per_path.size(); ++i) {
        const PathBreach& b = st.per_path[i];
        const long steps = records[i].total_steps;
        const double frac = steps > 0 ? static_cast<double>(b.clamp_events) / static_cast<double>(steps) : 0.0;
        os << i << ',' << b.clamp_events << ',' << format_full(b.lower_gap) << ',' << format_full(b.upper_gap)
           << ',' << format_full(frac) << '\n';
    }
    os << "total," << st.total_clamp_events << ",,," << format_full(st.clamped_fraction) << '\n';
}

void write_cost_estimate(std::ostream& os, const CostEstimate& est, double v_at_start) {
    os << format_full(est.mean) << ',' << format_full(est.stderr_of_mean) << ',' << est.n_paths << ','
       << format_full(est.horizon_T) << ',' << format_full(est.dt) << ',' << format_full(est.tail_bound) << ','
       << format_full(v_at_start) << '\n';
}

}  // namespace pegsim
