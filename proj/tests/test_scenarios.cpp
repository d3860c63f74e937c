#include "gorder/error.hpp"
#include "gorder/scenarios.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gorder;

namespace {

std::vector<Point> samples(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> t(0.0, 1.0), x(20.0, 300.0), y(-50.0, 50.0), z(-30.0, 30.0);
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({t(rng), x(rng), y(rng), z(rng)});
    return pts;
}

std::string constraint_of(ScenarioId id, const ScenarioParams& p) {
    try {
        build_scenario(id, p);
    } catch (const ParameterViolation& e) {
        return e.constraint();
    }
    return {};
}

}  // namespace

TEST(ScenarioBuild, ExpectedVerdicts) {
    for (ScenarioId id : all_scenarios()) {
        const Scenario s = build_scenario(id);
        const OrderingVerdict v = verdict(s.p1, s.p2, s.expected_order);
        EXPECT_EQ(v.order_type, s.expected_order) << to_string(id);
        EXPECT_EQ(v.applied_result, s.expected_result) << to_string(id);
    }
    EXPECT_EQ(build_scenario(ScenarioId::alpha_abs_z).expected_result, "pp4");
    EXPECT_EQ(build_scenario(ScenarioId::short_sell).expected_result, "pp1");
    EXPECT_EQ(build_scenario(ScenarioId::borrow_both).expected_result, "pp3");
}

TEST(ScenarioBuild, AssumptionsHoldOnDefaultBox) {
    for (ScenarioId id : all_scenarios()) {
        const Scenario s = build_scenario(id);
        for (const ProblemSpec* p : {&s.p1, &s.p2}) {
            const AssumptionReport r = validate_assumptions(*p, default_box(*p, state_range(*p)));
            for (const char* c : {"A1", "A2", "A3", "A4", "sigma_positive"})
                EXPECT_TRUE(r.conditions.at(c).certified()) << to_string(id) << " " << c;
        }
    }
}

TEST(ScenarioBuild, EqualVolatilitiesGiveIdenticalProblems) {
    ScenarioParams prm;
    prm.b2 = prm.b1;
    const Scenario s = build_scenario(ScenarioId::misspecified_vol, prm);
    for (const Point& p : samples(1000, 1)) {
        EXPECT_EQ(s.p1.generator.g(p), s.p2.generator.g(p));
        EXPECT_EQ(s.p1.diffusion.mu(p), s.p2.diffusion.mu(p));
        EXPECT_EQ(s.p1.diffusion.sigma(p), s.p2.diffusion.sigma(p));
        EXPECT_EQ(s.u1.generator.g(p), s.u2.generator.g(p));
    }
}

TEST(ScenarioBuild, BorrowingTermVanishesAtLendingRate) {
    ScenarioParams prm = default_params(ScenarioId::borrow_one_side);
    prm.R = prm.r;
    const Scenario s = build_scenario(ScenarioId::borrow_one_side, prm);
    for (const Point& p : samples(1000, 2)) EXPECT_NEAR(s.p2.generator.g(p), s.p1.generator.g(p), 1e-12 * (1 + std::abs(p.y)));
}

TEST(ScenarioBuild, UndiscountedGenerators) {
    const Scenario s = build_scenario(ScenarioId::misspecified_vol);
    for (const Point& p : samples(200, 3)) EXPECT_NEAR(s.u1.generator.g(p), -0.05 * p.y, 1e-12 * (1 + std::abs(p.y)));
    const Scenario b = build_scenario(ScenarioId::borrow_one_side);
    for (const Point& p : samples(200, 4)) {
        const double expected = -0.05 * p.y + 0.02 * std::max(-(p.y - p.z / 0.2), 0.0);
        EXPECT_NEAR(b.u2.generator.g(p), expected, 1e-12 * (1 + std::abs(p.y) + std::abs(p.z)));
    }
    const Scenario a = build_scenario(ScenarioId::alpha_abs_z);
    EXPECT_FALSE(a.discounted);
    for (const Point& p : samples(200, 5)) EXPECT_DOUBLE_EQ(a.p2.generator.g(p), 0.1 * std::abs(p.z));
}

TEST(ScenarioBuild, ParameterViolations) {
    ScenarioParams p = default_params(ScenarioId::short_sell);
    p.theta_gap = -0.1;
    EXPECT_EQ(constraint_of(ScenarioId::short_sell, p), "theta order");
    p = default_params(ScenarioId::misspecified_vol);
    p.b1 = "0.4";
    EXPECT_EQ(constraint_of(ScenarioId::misspecified_vol, p), "b1 <= b2");
    p = default_params(ScenarioId::borrow_one_side);
    p.R = 0.01;
    EXPECT_EQ(constraint_of(ScenarioId::borrow_one_side, p), "R >= r");
    p = default_params(ScenarioId::misspecified_vol);
    p.T = 0.0;
    EXPECT_EQ(constraint_of(ScenarioId::misspecified_vol, p), "T > 0");
    p = default_params(ScenarioId::alpha_abs_z);
    p.alpha = "-0.1";
    EXPECT_EQ(constraint_of(ScenarioId::alpha_abs_z, p), "alpha > 0");
    p = default_params(ScenarioId::alpha_abs_z);
    p.a1 = "0.1";
    p.a2 = "0.05";
    EXPECT_EQ(constraint_of(ScenarioId::alpha_abs_z, p), "a1 <= a2");
}

TEST(ScenarioBuild, ParamsSetAndJsonRoundTrip) {
    ScenarioParams p;
    p.set("R", "0.09");
    p.set("b2", "0.25");
    p.set("theta_gap", "0.2");
    EXPECT_DOUBLE_EQ(p.R, 0.09);
    EXPECT_EQ(p.b2, "0.25");
    EXPECT_THROW(p.set("nonsense", "1"), InputError);
    EXPECT_THROW(p.set("R", "abc"), InputError);
    nlohmann::json j = p;
    ScenarioParams q;
    from_json(j, q);
    EXPECT_EQ(nlohmann::json(q), j);
    j["extra"] = 1;
    EXPECT_THROW(from_json(j, q), InputError);
    EXPECT_EQ(parse_scenario_id("short_sell"), ScenarioId::short_sell);
    EXPECT_THROW(parse_scenario_id("nope"), InputError);
}

TEST(ScenarioBuild, ShortSellConvexityPattern) {
    const Scenario s = build_scenario(ScenarioId::short_sell);
    const OrderingVerdict v = verdict(s.p1, s.p2, OrderType::conv);
    EXPECT_FALSE(v.conditions.at("B2").certified());
    EXPECT_TRUE(v.conditions.at("E2").certified());
    EXPECT_EQ(v.applied_result, "pp1");
}

TEST(ScenarioRun, MisspecifiedVolatilityMatchesBlackScholes) {
    const ScenarioReport r = run_scenario(ScenarioId::misspecified_vol, default_params(ScenarioId::misspecified_vol));
    EXPECT_TRUE(r.pass());
    for (const auto& row : r.prices) {
        if (row.payoff_id != "call_100") continue;
        EXPECT_NEAR(row.undiscounted1, oracle::bs_call(100, 100, 0.05, 0.2, 1.0), 0.05);
        EXPECT_NEAR(row.undiscounted2, oracle::bs_call(100, 100, 0.05, 0.3, 1.0), 0.05);
        EXPECT_NEAR(row.working1, row.undiscounted1, 0.02);
        EXPECT_GE(row.undiscounted2, row.undiscounted1);
    }
}

TEST(ScenarioRun, AllScenariosPass) {
    for (ScenarioId id : all_scenarios()) {
        const ScenarioReport r = run_scenario(id, default_params(id));
        EXPECT_TRUE(r.verdict_matches) << to_string(id);
        EXPECT_TRUE(r.empirical.all_pass()) << to_string(id);
    }
}

TEST(ScenarioRun, BorrowingPriceGapNondecreasingInR) {
    const ScenarioParams base = default_params(ScenarioId::borrow_one_side);
    double last = -1.0;
    for (double gap : {0.0, 0.01, 0.02, 0.05}) {
        ScenarioParams p = base;
        p.R = p.r + gap;
        const Scenario s = build_scenario(ScenarioId::borrow_one_side, p);
        const EmpiricalTable t = verify_order_empirically(s.p1, s.p2, {s.p1.payoff}, OrderType::conv);
        const double diff = t.rows.at(0).difference;
        EXPECT_GE(diff, -t.rows[0].tolerance);
        EXPECT_GE(diff, last - 1e-9) << "R - r = " << gap;
        last = diff;
    }
}

TEST(ScenarioRun, ProfilesOfConvexPayoffs) {
    const Scenario s = build_scenario(ScenarioId::borrow_both);
    for (const ProfileRow& row : scenario_profiles(s, s.family())) {
        ASSERT_TRUE(row.convexity.has_value());
        EXPECT_GE(row.convexity->value, -1e-6 * row.scale) << row.payoff_id;
        EXPECT_FALSE(row.sign.first_mixed.has_value()) << row.payoff_id;
    }
}
