#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pegsim/config.hpp"

namespace pegsim {

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerifyOptions {
    double tolerance_scale = 1.0;        // multiplies check thresholds
    std::vector<std::string> only;       // run only checks whose name contains one of these
};

/// Caches the solves shared between checks for one parameter set.
///
/// The simulation-facing checks can run on a refined solve (finer grid,
/// deeper regularization continuation) instead of the standard
/// configuration; see README for when that matters.
class VerifyContext {
public:
    VerifyContext(Problem problem, std::string preset_label, bool refine_simulation_policy);
    ~VerifyContext();

    const Problem& problem() const { return problem_; }
    const std::string& preset() const { return preset_label_; }

    /// Solution at the problem's own solver configuration.
    const PolicyFn& default_policy();

    /// Solution at the refined configuration (grid_n 20001, continuation to
    /// epsilon 2e-5, tolerance 1e-7).
    const PolicyFn& refined_policy();

    /// Policy used for path simulation checks.
    const PolicyFn& simulation_policy();

    /// Ten paths at step size 1.6e-6 over T = 1 under simulation_policy().
    std::span<const PathRecord> figure_paths();

private:
    Problem problem_;
    std::string preset_label_;
    bool refine_simulation_;
    std::unique_ptr<PolicyFn> default_policy_;
    std::unique_ptr<PolicyFn> refined_policy_;
    std::vector<PathRecord> figure_paths_;
};

CheckResult check_boundary_value(VerifyContext& ctx, double scale);
CheckResult check_hjb_residual(VerifyContext& ctx, double scale);
std::vector<CheckResult> check_blowup_rate(VerifyContext& ctx, double scale);
std::vector<CheckResult> check_transform_consistency(VerifyContext& ctx, double scale);
std::vector<CheckResult> check_truncation_monotonicity(VerifyContext& ctx, double scale);
CheckResult check_value_lower_bound(VerifyContext& ctx, double scale);
std::vector<CheckResult> check_minimizer_property(VerifyContext& ctx, double scale);
CheckResult check_mc_policy_optimality(VerifyContext& ctx, double scale);
CheckResult check_containment(VerifyContext& ctx, double scale);
std::vector<CheckResult> check_figure_regime(VerifyContext& ctx, double scale);
CheckResult check_grid_convergence(VerifyContext& ctx, double scale);

/// Runs the checks applicable to the context's preset, honoring the name
/// filter. Results come back in criterion order.
std::vector<CheckResult> run_checks(VerifyContext& ctx, const VerifyOptions& opts);

std::string format_check_line(const CheckResult& r);

}  // namespace pegsim
