#pragma once

#include "gorder/model.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gorder {

enum class Spacing { uniform, log };
/// second_derivative_zero: linear extrapolation at both ends.
/// third_derivative_zero: quadratic extrapolation; exact for quadratic payoffs.
/// dirichlet_payoff: boundary values held at phi.
enum class Boundary { second_derivative_zero, third_derivative_zero, dirichlet_payoff };

std::string_view to_string(Spacing s) noexcept;
std::string_view to_string(Boundary b) noexcept;
Spacing parse_spacing(std::string_view s);
Boundary parse_boundary(std::string_view s);

struct GridSpec {
    double x_min = -1.0;
    double x_max = 1.0;
    std::size_t nx = 401;
    std::size_t nt = 400;
    Spacing spacing = Spacing::uniform;
    Boundary boundary = Boundary::second_derivative_zero;

    /// Throws InputError unless x_min < x_max, nx >= 3, nt >= 1 and, for log
    /// spacing, x_min > 0.
    void validate() const;
    std::vector<double> nodes() const;
};

/// Grid over state_range(p, L): log spacing on the positive halfline,
/// uniform otherwise. With odd nx, x0 is a node.
GridSpec default_grid(const ProblemSpec& p, double L = 5.0, std::size_t nx = 401, std::size_t nt = 400);

/// Time-major arrays of u, ux, uxx on (nt+1) x nx points. Layer n is t_n = n T / nt.
class PdeSolution {
public:
    PdeSolution(ProblemSpec problem, GridSpec grid, std::vector<double> times, std::vector<double> nodes,
                std::vector<double> u, std::vector<double> ux, std::vector<double> uxx);

    const ProblemSpec& problem() const noexcept { return problem_; }
    const GridSpec& grid() const noexcept { return grid_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    std::size_t layers() const noexcept { return times_.size(); }
    std::size_t nx() const noexcept { return nodes_.size(); }

    std::span<const double> u(std::size_t layer) const { return row(u_, layer); }
    std::span<const double> ux(std::size_t layer) const { return row(ux_, layer); }
    std::span<const double> uxx(std::size_t layer) const { return row(uxx_, layer); }

    /// Linear interpolation of u(t_layer, .) at x. Throws OutOfGrid.
    double value_at(std::size_t layer, double x) const;

private:
    std::span<const double> row(const std::vector<double>& a, std::size_t layer) const;

    ProblemSpec problem_;
    GridSpec grid_;
    std::vector<double> times_;
    std::vector<double> nodes_;
    std::vector<double> u_;
    std::vector<double> ux_;
    std::vector<double> uxx_;
};

/// Backward march of u_t + mu u_x + sigma^2/2 u_xx + g(t,x,u,sigma u_x) = 0
/// from u(T,.) = phi: implicit linear part, explicit g from the previous
/// layer. Throws GridTooCoarse, NonFinite.
PdeSolution solve(const ProblemSpec& p, const GridSpec& grid);
PdeSolution solve(const ProblemSpec& p);

/// u(0, x0). Throws OutOfGrid.
double g_expectation(const PdeSolution& sol);

struct Extremum {
    double value = 0.0;
    double t = 0.0;
    double x = 0.0;
    std::size_t layer = 0;
    std::size_t node = 0;
};

/// Minimum of uxx over all layers and interior nodes (two boundary nodes
/// excluded on each side).
Extremum convexity_profile(const PdeSolution& sol);

/// Minimum of ux over all layers and interior nodes.
Extremum monotonicity_profile(const PdeSolution& sol);

enum class Sign { negative, zero, positive, mixed };
std::string_view to_string(Sign s) noexcept;

struct SignProfile {
    /// One entry per layer, indexed like times().
    std::vector<Sign> layers;
    double dead_band = 0.0;
    /// First mixed layer found walking backward from T.
    std::optional<std::size_t> first_mixed;
    /// Sign never decreases (in the order - < 0 < +) as t decreases.
    bool nondecreasing_toward_zero = true;
};

/// Classifies uxx per layer with dead band 1e-6 max(1, max|u|).
SignProfile sign_constancy_profile(const PdeSolution& sol);

double dead_band(const PdeSolution& sol);

/// Header "t,x,u,ux,uxx", one row per (layer, node), time-major.
void write_csv(const PdeSolution& sol, std::ostream& os);

void to_json(nlohmann::json& j, const GridSpec& g);
void to_json(nlohmann::json& j, const Extremum& e);
void to_json(nlohmann::json& j, const SignProfile& s);

}  // namespace gorder
