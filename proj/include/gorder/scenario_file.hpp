#pragma once

#include "gorder/ordering.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gorder {

/// sigma_n = sigma (1 + 1/n) for each n, driven by common random numbers.
struct DependenceSpec {
    std::vector<int> n = {2, 4, 8, 16};
};

/// Parsed scenario document; see docs/expr-grammar.md and the README for the schema.
struct ScenarioFile {
    ProblemSpec p1;
    std::optional<ProblemSpec> p2;
    /// Explicit payoff family; empty means the default family of the order.
    std::vector<PayoffSpec> family;
    std::optional<Expr> zeta;
    std::optional<OrderType> order;
    EngineConfig engine;
    std::vector<std::string> checks;
    std::optional<Box> box;
    DependenceSpec dependence;

    /// Throws InputError when the second problem is missing.
    const ProblemSpec& second() const;
    std::vector<PayoffSpec> payoffs(OrderType order) const;
    /// Replaces the Monte Carlo seed and the sampling-box seed.
    void override_seed(std::uint64_t seed);
};

/// Throws InputError (unknown keys, wrong types, bad expressions).
ScenarioFile parse_scenario_file(const nlohmann::json& doc);
/// Reads and parses a file; JSON syntax errors become InputError.
ScenarioFile load_scenario_file(const std::filesystem::path& path);

/// Document that parse_scenario_file maps back to an equivalent ScenarioFile.
nlohmann::json to_document(const ScenarioFile& f);

/// Generator catalog: zero, linear {r, theta}, abs_z {alpha}, borrow {r, R, theta, b}.
Expr generator_from_catalog(const std::string& name, const nlohmann::json& params);
/// Payoff catalog: identity, square, call {K}, put {K}, abs {K}, pos_sq {K},
/// min {K}, smooth_step {K, eps}.
PayoffSpec payoff_from_catalog(const std::string& name, const nlohmann::json& params);

}  // namespace gorder
