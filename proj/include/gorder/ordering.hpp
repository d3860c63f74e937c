#pragma once

#include "gorder/conditions.hpp"
#include "gorder/mc.hpp"
#include "gorder/model.hpp"
#include "gorder/pde.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gorder {

enum class OrderType { conv, iconv, mon, conc, iconc, none };

std::string_view to_string(OrderType o) noexcept;
OrderType parse_order_type(std::string_view s);

using ScalarField = std::function<double(const Point&)>;

enum class Plane { xy, yz };
enum class ZRange { all_z, nonneg_z };

/// Midpoint convexity of fn in the given plane; the remaining two variables
/// are swept over a 5 x 5 grid of the box. With nonneg_z the z coordinate
/// (frozen or sampled) is restricted to z >= 0.
ConditionReport check_convexity_2d(const std::string& id, const ScalarField& fn, Plane plane, const Box& box,
                                   ZRange zr = ZRange::all_z);

/// lhs <= rhs on sampled points; with `zeta`, the sandwich lhs <= z zeta <= rhs.
ConditionReport check_dominance(const std::string& id, const ScalarField& lhs, const ScalarField& rhs,
                                const Box& box, ZRange zr = ZRange::all_z,
                                const std::optional<Expr>& zeta = std::nullopt);

/// fn non-decreasing in `var` (x or z) on sampled ordered pairs.
ConditionReport check_monotone_in(const std::string& id, const ScalarField& fn, Var var, const Box& box,
                                  ZRange zr = ZRange::all_z);

/// sigma_order, drift_order, drift_equal, sigma_positive, sigma_equal,
/// x0_order, x0_equal; equality tolerance 1e-12 times the local scale.
ConditionSet check_coefficient_order(const DiffusionSpec& d1, const DiffusionSpec& d2, const Box& box);

/// Union of both problems' default PDE grids with the default y, z ranges.
Box default_pair_box(const ProblemSpec& p1, const ProblemSpec& p2, std::size_t sample_count = 2000,
                     std::uint64_t seed = 12345);

struct ResultAttempt {
    std::string result;
    std::vector<std::string> required;
    std::vector<std::string> blocking;
    bool applied = false;
};

struct VerdictOptions {
    /// Defaults to the constant 0.
    std::optional<Expr> zeta;
    /// Defaults to default_pair_box.
    std::optional<Box> box;
    /// Keep evaluating lower-priority results after the first success.
    bool evaluate_all = false;
};

struct OrderingVerdict {
    OrderType requested = OrderType::none;
    OrderType order_type = OrderType::none;
    std::string applied_result;
    ConditionSet conditions;
    std::vector<ResultAttempt> attempts;
    Expr zeta;
    Box box;
    /// How conc/iconc requests were answered.
    std::string route;

    bool found() const noexcept { return order_type != OrderType::none; }
};

/// Checks hypothesis sets in priority order: conv pp3, pp1, pp6; iconv pp4,
/// pp2, pp5; mon pp4.1, pp7. conc and iconc are answered on the swapped pair
/// with generators g^(-1) (iconc additionally reflects the state x -> -x).
OrderingVerdict verdict(const ProblemSpec& p1, const ProblemSpec& p2, OrderType requested,
                        const VerdictOptions& opts = {});

enum class Engine { pde, mc };
std::string_view to_string(Engine e) noexcept;
Engine parse_engine(std::string_view s);

struct EngineConfig {
    Engine engine = Engine::pde;
    double grid_L = 5.0;
    std::size_t nx = 401;
    std::size_t nt = 400;
    Boundary boundary = Boundary::second_derivative_zero;
    McConfig mc;
};

struct EmpiricalRow {
    std::string payoff_id;
    double e1 = 0.0;
    double e2 = 0.0;
    /// e2 - e1.
    double difference = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::optional<double> stderr1;
    std::optional<double> stderr2;
    std::optional<double> difference_stderr;
};

struct Curve {
    std::string payoff_id;
    int problem = 1;
    std::vector<double> x;
    std::vector<double> value;
};

struct EmpiricalTable {
    Engine engine = Engine::pde;
    OrderType order = OrderType::none;
    std::vector<EmpiricalRow> rows;
    /// u(0, .) for each payoff and problem (pde engine, when requested).
    std::vector<Curve> curves;

    bool all_pass() const;
};

/// Default payoff families; s = max(|x0|, 1).
/// conv: x, x^2, (x-K)+ for K = x0 + {-0.2, 0, 0.2} s, |x - x0|.
/// iconv: x, (x-x0)+, pos(x-x0)^2. mon: x, min(x, x0), (1 + tanh((x-x0)/eps))/2, eps = s/50.
/// conc and iconc: the negated conv family and x, min(x, x0), -pos(x0-x)^2.
std::vector<PayoffSpec> default_family(OrderType order, double x0);

/// Sampled shape check of phi on `x`: "convex", "concave", "nondecreasing".
ConditionReport check_payoff_shape(const PayoffSpec& phi, const std::string& shape, Range x,
                                   std::size_t samples = 2000, std::uint64_t seed = 12345);

/// Per payoff: E_{g1}[phi(X1_T)], E_{g2}[phi(X2_T)], pass iff the difference
/// is >= -1e-3 (1 + |E2|) (pde) or >= -3 stderr of the pathwise difference
/// (mc, common random numbers). Throws PreconditionViolation when a payoff
/// does not have the shape the order requires.
EmpiricalTable verify_order_empirically(const ProblemSpec& p1, const ProblemSpec& p2,
                                        const std::vector<PayoffSpec>& family, OrderType order,
                                        const EngineConfig& engine = {}, bool collect_curves = false);

struct RiskComparison {
    OrderingVerdict verdict;
    /// Rows hold -E_{g_i}[-phi(X_i)].
    EmpiricalTable table;
};

/// Risk comparison: pp9 then pp10 on the drivers built from g^(-1), then
/// -E_{g_i}[-phi] for each payoff.
RiskComparison risk_compare(const ProblemSpec& p1, const ProblemSpec& p2, const std::vector<PayoffSpec>& family,
                            const VerdictOptions& opts = {}, const EngineConfig& engine = {});

/// g-expectation of p by the chosen engine; stderr is set for mc.
struct Valuation {
    double value = 0.0;
    std::optional<double> std_error;
};
Valuation value_of(const ProblemSpec& p, const EngineConfig& engine);

void to_json(nlohmann::json& j, const ResultAttempt& a);
void to_json(nlohmann::json& j, const OrderingVerdict& v);
void to_json(nlohmann::json& j, const EngineConfig& e);
void to_json(nlohmann::json& j, const EmpiricalRow& r);
void to_json(nlohmann::json& j, const EmpiricalTable& t);

}  // namespace gorder
