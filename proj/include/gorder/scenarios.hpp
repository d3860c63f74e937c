#pragma once

#include "gorder/ordering.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace gorder {

enum class ScenarioId { misspecified_vol, alpha_abs_z, borrow_one_side, borrow_both, short_sell };

std::string_view to_string(ScenarioId id) noexcept;
ScenarioId parse_scenario_id(std::string_view s);
const std::vector<ScenarioId>& all_scenarios();

/// Coefficients a_i, b_i, alpha and a3 are expressions in (t, x) of the
/// undiscounted price; an empty a_i means the constant r. An empty a3 is
/// derived from theta_3 = theta_2 + theta_gap.
struct ScenarioParams {
    double r = 0.05;
    double R = 0.07;
    double x0 = 100.0;
    /// Second asset's initial price; NaN means x0.
    double x0_2 = std::numeric_limits<double>::quiet_NaN();
    double T = 1.0;
    std::string a1;
    std::string a2;
    std::string a3;
    std::string b1 = "0.2";
    std::string b2 = "0.3";
    std::string b3 = "0.1";
    std::string alpha = "0.1";
    double theta_gap = 0.1;

    /// Sets one field from text. Throws InputError for unknown keys or bad numbers.
    void set(std::string_view key, std::string_view value);
    double second_x0() const { return std::isnan(x0_2) ? x0 : x0_2; }
};

ScenarioParams default_params(ScenarioId id);

struct Scenario {
    ScenarioId id = ScenarioId::misspecified_vol;
    ScenarioParams params;
    /// Problems in the variables the conditions are checked on (discounted
    /// except for alpha_abs_z). The payoff is the at-the-money call.
    ProblemSpec p1;
    ProblemSpec p2;
    /// Same problems in undiscounted prices.
    ProblemSpec u1;
    ProblemSpec u2;
    bool discounted = true;
    Expr zeta;
    OrderType expected_order = OrderType::conv;
    std::string expected_result;

    /// e^{-rT} phi(e^{rT} x) when discounted, phi otherwise.
    PayoffSpec to_working(const PayoffSpec& phi) const;
    /// Default payoff family of `order` in undiscounted prices.
    std::vector<PayoffSpec> family(OrderType order) const;
    std::vector<PayoffSpec> family() const { return family(expected_order); }
};

/// Throws ParameterViolation naming the violated constraint.
Scenario build_scenario(ScenarioId id, const ScenarioParams& params);
inline Scenario build_scenario(ScenarioId id) { return build_scenario(id, default_params(id)); }

struct PriceRow {
    std::string payoff_id;
    double working1 = 0.0;
    double working2 = 0.0;
    double undiscounted1 = 0.0;
    double undiscounted2 = 0.0;
};

struct ProfileRow {
    std::string payoff_id;
    int problem = 1;
    std::optional<Extremum> convexity;
    std::optional<Extremum> monotonicity;
    SignProfile sign;
    double scale = 1.0;
};

struct ScenarioReport {
    Scenario scenario;
    OrderingVerdict verdict;
    bool verdict_matches = false;
    EmpiricalTable empirical;
    std::vector<PriceRow> prices;
    std::vector<ProfileRow> profiles;

    bool pass() const { return verdict_matches && empirical.all_pass(); }
};

/// Verdict, empirical table on the working problems, undiscounted prices
/// (pde) and pde profiles for every payoff of the family.
ScenarioReport run_scenario(ScenarioId id, const ScenarioParams& params, const EngineConfig& engine = {},
                            bool collect_curves = false);

/// Convexity and monotonicity profiles of u for each payoff and problem.
std::vector<ProfileRow> scenario_profiles(const Scenario& s, const std::vector<PayoffSpec>& family,
                                          const EngineConfig& engine = {});

void to_json(nlohmann::json& j, const ScenarioParams& p);
/// Throws InputError on unknown keys or wrong types.
void from_json(const nlohmann::json& j, ScenarioParams& p);
void to_json(nlohmann::json& j, const PriceRow& r);
void to_json(nlohmann::json& j, const ProfileRow& r);
void to_json(nlohmann::json& j, const ScenarioReport& r);

}  // namespace gorder
