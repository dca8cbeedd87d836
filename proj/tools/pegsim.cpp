#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pegsim/config.hpp"
#include "pegsim/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerify = 4;

void usage(std::ostream& os) {
    os << "pegsim -- target-zone intervention solver and simulator\n"
          "\n"
          "usage: pegsim <command> [options]\n"
          "\n"
          "commands:\n"
          "  solve        solve the boundary-value problem, write value_function.csv\n"
          "  simulate     simulate controlled paths, write path_<i>.csv + breach_summary.csv\n"
          "  evaluate     Monte Carlo cost estimate vs the computed value function\n"
          "  verify       run the verification suite, one PASS/FAIL line per check\n"
          "  dump-config  print the resolved configuration\n"
          "\n"
          "options:\n"
          "  --config <path>        flat key = value file ('#' comments)\n"
          "  --preset <fig2|fig3>   parameter preset; explicit keys override it\n"
          "  --output <dir>         output directory (default '.')\n"
          "  --<key> <value>        override any config key, e.g. --sigma 0.3 --grid_n=4001\n"
          "  --T <value>            alias for --horizon_T\n"
          "  --check <name>         verify: run only checks whose name contains <name>\n"
          "  --tolerance-scale <f>  verify: multiply check thresholds by <f>\n"
          "  --force-zero-control   evaluate/simulate: force the control to zero\n";
}

struct CliArgs {
    std::string command;
    pegsim::KeyValueConfig config;
    pegsim::VerifyOptions verify;
    bool force_zero_control = false;
};

CliArgs parse_args(int argc, char** argv) {
    CliArgs args;
    if (argc < 2) throw std::invalid_argument("missing command");
    args.command = argv[1];

    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    for (int i = 2; i < argc; ++i) {
        std::string flag = argv[i];
        if (flag == "--force-zero-control") {
            args.force_zero_control = true;
            continue;
        }
        if (flag.rfind("--", 0) != 0) throw std::invalid_argument("unexpected argument '" + flag + "'");
        std::string key, value;
        const auto eq = flag.find('=');
        if (eq != std::string::npos) {
            key = flag.substr(2, eq - 2);
            value = flag.substr(eq + 1);
        } else {
            if (i + 1 >= argc) throw std::invalid_argument("flag '" + flag + "' needs a value");
            value = argv[++i];
            key = flag.substr(2);
        }
        if (key == "config") {
            config_path = value;
        } else if (key == "output") {
            overrides.emplace_back("output_dir", value);
        } else if (key == "T") {
            overrides.emplace_back("horizon_T", value);
        } else if (key == "check") {
            args.verify.only.push_back(value);
        } else if (key == "tolerance-scale") {
            args.verify.tolerance_scale = std::stod(value);
        } else {
            overrides.emplace_back(key, value);
        }
    }
    if (!config_path.empty()) pegsim::load_config_file(args.config, config_path);
    for (const auto& [k, v] : overrides) args.config.set(k, v);  // flags override file values
    return args;
}

int cmd_dump_config(const CliArgs& args) {
    pegsim::KeyValueConfig cfg = args.config;
    if (cfg.has("preset")) pegsim::apply_preset(cfg, cfg.get("preset"));
    for (const auto& [k, v] : cfg.entries()) std::cout << k << " = " << v << "\n";
    for (const auto& note : cfg.override_log()) std::cout << "# " << note << "\n";
    return kExitOk;
}

std::filesystem::path ensure_output_dir(const pegsim::Problem& pr) {
    std::filesystem::path dir(pr.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

pegsim::PolicyFn solve_policy(const pegsim::Problem& pr, bool report) {
    pegsim::GridSolution sol = pegsim::continuation_solve(pr.params, pr.distance, pr.solver);
    if (report) {
        std::cout << "solved: grid_n=" << sol.grid.n << " residual=" << sol.residual_norm
                  << " epsilon=" << sol.epsilon_used << "\n";
        for (const auto& st : sol.stages)
            std::cout << "  stage epsilon=" << st.epsilon << ": " << st.iterations
                      << " Newton iterations, residual " << st.residual_norm << "\n";
    }
    return pegsim::PolicyFn(std::move(sol), pr.distance, pr.params);
}

int cmd_solve(const CliArgs& args) {
    const pegsim::Problem pr = pegsim::build_problem(args.config);
    const pegsim::PolicyFn pf = solve_policy(pr, true);
    const auto dir = ensure_output_dir(pr);

    std::ofstream out(dir / "value_function.csv");
    pegsim::write_value_function_csv(out, pf);
    std::cout << "wrote " << (dir / "value_function.csv").string() << "\n";

    const double width = pr.params.width();
    const double fit_lo = std::max(1e-3 * width, pf.solution().grid.h);
    const double fit_hi = std::min(1e-2 * width, 0.2 * width);
    if (fit_lo < fit_hi) {
        for (pegsim::Side side : {pegsim::Side::Lower, pegsim::Side::Upper}) {
            const auto fit = pegsim::fit_blowup_rate(pf, side, fit_lo, fit_hi);
            std::cout << "blow-up fit (" << (side == pegsim::Side::Lower ? "lower" : "upper")
                      << "): coefficient " << fit.coefficient << ", expected " << pr.params.boundary_u()
                      << ", max relative deviation " << fit.max_relative_deviation << "\n";
        }
    } else {
        std::cout << "blow-up fit: grid too coarse for the near-boundary sample range\n";
    }
    return kExitOk;
}

int cmd_simulate(const CliArgs& args) {
    pegsim::Problem pr = pegsim::build_problem(args.config);
    if (args.force_zero_control) pr.sim.control_override = 0.0;
    pegsim::validate_sim_config(pr.params, pr.sim);
    const pegsim::PolicyFn pf = solve_policy(pr, false);
    const auto dir = ensure_output_dir(pr);

    std::vector<pegsim::PathRecord> records;
    records.reserve(static_cast<size_t>(pr.sim.n_paths));
    for (int i = 0; i < pr.sim.n_paths; ++i) {
        records.push_back(pegsim::simulate_path(pr.params, pf, pr.sim, i));
        std::ofstream out(dir / ("path_" + std::to_string(i) + ".csv"));
        pegsim::write_path_csv(out, records.back());
    }
    std::ofstream bout(dir / "breach_summary.csv");
    pegsim::write_breach_summary_csv(bout, pr.params, records);

    const pegsim::BreachStats st = pegsim::breach_stats(pr.params, records);
    std::cout << "simulated " << pr.sim.n_paths << " path(s), " << st.total_steps << " steps total, "
              << st.total_clamp_events << " clamp event(s), clamped fraction " << st.clamped_fraction
              << "\n"
              << "wrote path_<i>.csv and breach_summary.csv under " << dir.string() << "\n";
    return kExitOk;
}

int cmd_evaluate(const CliArgs& args) {
    pegsim::Problem pr = pegsim::build_problem(args.config);
    if (args.force_zero_control) pr.sim.control_override = 0.0;
    pegsim::validate_sim_config(pr.params, pr.sim);
    if (pr.sim.n_paths < 2) throw std::invalid_argument("n_paths must be >= 2 for stderr");
    const pegsim::PolicyFn pf = solve_policy(pr, false);
    const auto dir = ensure_output_dir(pr);

    const pegsim::CostEstimate est = pegsim::estimate_cost(pr.params, pf, pr.sim);
    const double v_start = pf.value_at(pr.sim.x_start);

    std::ofstream out(dir / "cost_estimate.csv");
    pegsim::write_cost_estimate(out, est, v_start);
    pegsim::write_cost_estimate(std::cout, est, v_start);
    std::cout << "mean " << est.mean << " +- " << est.stderr_of_mean << " (stderr), V(" << pr.sim.x_start
              << ") = " << v_start << ", tail bound " << est.tail_bound << "\n";
    return kExitOk;
}

int cmd_verify(const CliArgs& args) {
    const pegsim::Problem pr = pegsim::build_problem(args.config);
    const std::string preset = args.config.has("preset") ? args.config.get("preset") : "";
    pegsim::VerifyContext ctx(pr, preset, preset != "fig3");
    const auto results = pegsim::run_checks(ctx, args.verify);
    bool all_pass = true;
    for (const auto& r : results) {
        std::cout << pegsim::format_check_line(r) << "\n";
        all_pass = all_pass && r.pass;
    }
    std::cout << (all_pass ? "all checks passed" : "some checks FAILED") << " (" << results.size()
              << " run)\n";
    return all_pass ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CliArgs args;
    try {
        args = parse_args(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        usage(std::cerr);
        return kExitUsage;
    }

    try {
        if (args.command == "solve") return cmd_solve(args);
        if (args.command == "simulate") return cmd_simulate(args);
        if (args.command == "evaluate") return cmd_evaluate(args);
        if (args.command == "verify") return cmd_verify(args);
        if (args.command == "dump-config") return cmd_dump_config(args);
        if (args.command == "help" || args.command == "--help" || args.command == "-h") {
            usage(std::cout);
            return kExitOk;
        }
        std::cerr << "error: unknown command '" << args.command << "'\n\n";
        usage(std::cerr);
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::runtime_error& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
}
