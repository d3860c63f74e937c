#pragma once

#include "gorder/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gorder {

struct McConfig {
    std::size_t n_paths = 100000;
    std::size_t n_steps = 100;
    std::uint64_t seed = 12345;
    int basis_degree = 4;
    /// Paths come in pairs (2i, 2i+1) driven by negated increments.
    bool antithetic = false;

    /// Throws InputError unless n_paths >= 2 (even when antithetic),
    /// n_steps >= 1 and basis_degree >= 1.
    void validate() const;
};

/// Simulated forward paths; arrays are step-major, entry (k, p) at k * n_paths + p.
struct PathEnsemble {
    std::vector<double> times;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::vector<double> states;
    std::vector<double> increments;
    std::uint64_t seed = 0;
    bool antithetic = false;
    /// True when the log-state scheme was used.
    bool log_scheme = false;

    std::span<const double> states_at(std::size_t step) const {
        return std::span<const double>(states).subspan(step * n_paths, n_paths);
    }
    std::span<const double> increments_at(std::size_t step) const {
        return std::span<const double>(increments).subspan(step * n_paths, n_paths);
    }
    double dt() const { return times[1] - times[0]; }
};

/// Euler-Maruyama with dt = T / n_steps. Positive-halfline diffusions whose
/// mu/x and sigma/x stay bounded are simulated in log-state; otherwise states
/// are floored at 1e-8 x0. Throws NonFinite naming step and path.
PathEnsemble simulate_forward(const DiffusionSpec& d, double T, const McConfig& cfg);

/// Same scheme driven by the Brownian increments of `noise` (common random numbers).
PathEnsemble simulate_forward(const DiffusionSpec& d, double T, const PathEnsemble& noise);

/// Brownian increments only, laid out like PathEnsemble::increments.
std::vector<double> brownian_increments(const McConfig& cfg, double dt);

struct StepFit {
    double center = 0.0;
    double scale = 1.0;
    std::vector<double> y_coef;
    std::vector<double> z_coef;
};

struct BsdeEstimate {
    double y0_mean = 0.0;
    double y0_stderr = 0.0;
    double z0_mean = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    /// Pathwise Y_0 samples; their mean is y0_mean.
    std::vector<double> y0_paths;
    /// Regression coefficients per step (empty for the closed form).
    std::vector<StepFit> fits;
    /// Regressions that fell back to a lower degree or the plain mean.
    std::size_t fallbacks = 0;
};

/// Backward least-squares regression scheme: Y_N = phi(X_N), then per step
/// Yhat = E[Y_{k+1} | X_k], Zhat = E[(Y_{k+1} - Yhat) dB_k / dt | X_k] and the
/// pathwise update Y_k = Y_{k+1} + g(t_k, X_k, Yhat, Zhat) dt.
BsdeEstimate solve_bsde_lsmc(const PathEnsemble& paths, const GeneratorSpec& g, const PayoffSpec& phi,
                             const McConfig& cfg);

/// Convenience: simulate then solve.
BsdeEstimate solve_bsde_lsmc(const ProblemSpec& p, const McConfig& cfg);

/// Y_0 = E[Gamma_T phi(X_T) + int_0^T (a X + k) Gamma ds] for the linear
/// generator a X + b Y + c Z + k, with d log Gamma = (b - c^2/2) dt + c dB.
/// a, b, c, k are expressions in (t, x).
BsdeEstimate linear_bsde_closed_form(const DiffusionSpec& d, const Expr& a, const Expr& b, const Expr& c,
                                     const Expr& k, const PayoffSpec& phi, double T, const McConfig& cfg);
BsdeEstimate linear_bsde_closed_form(const PathEnsemble& paths, const Expr& a, const Expr& b, const Expr& c,
                                     const Expr& k, const PayoffSpec& phi);

/// Mean and standard error of the pathwise difference rhs - lhs (the two
/// estimates must share paths).
struct Difference {
    double mean = 0.0;
    double std_error = 0.0;
};
Difference pathwise_difference(const BsdeEstimate& lhs, const BsdeEstimate& rhs);

/// Fraction of (path, step) pairs with X^{x_hi} < X^{x_lo} under shared increments.
double monotone_coupling_check(const DiffusionSpec& d, double x_lo, double x_hi, double T, const McConfig& cfg);

struct DependenceRow {
    std::string label;
    std::optional<double> size;
    double y0 = 0.0;
    double mean_sq = 0.0;
    double std_error = 0.0;
    bool assumptions_certified = true;
};

struct DependenceTable {
    double base_y0 = 0.0;
    double base_stderr = 0.0;
    std::vector<DependenceRow> rows;
    /// Least-squares slope of log(mean_sq) against log(size).
    std::optional<double> fitted_slope;
    /// Largest fitted Lipschitz constant over all specs.
    std::optional<double> shared_constant;
    std::string note;
};

/// |Y_{n,0} - Y_0|^2 for each perturbed spec, all driven by the same
/// increments. Throws PreconditionViolation when a spec fails (A1), (A2) or (A4).
DependenceTable continuous_dependence_experiment(const ProblemSpec& base, const std::vector<ProblemSpec>& perturbed,
                                                 const McConfig& cfg, const std::vector<double>& sizes = {},
                                                 const std::vector<std::string>& labels = {});

void to_json(nlohmann::json& j, const McConfig& c);
void to_json(nlohmann::json& j, const BsdeEstimate& e);
void to_json(nlohmann::json& j, const DependenceTable& t);

}  // namespace gorder
