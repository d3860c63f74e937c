#include "gorder/cli.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gorder;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "gorder");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string scenario(const std::string& name) {
    return (fs::path(GORDER_SOURCE_DIR) / "scenarios" / name).string();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("gorder_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const json& doc) const {
        std::ofstream(path(name)) << doc.dump(2);
        return path(name);
    }

    static json read_json(const std::string& p) {
        std::ifstream is(p);
        return json::parse(is);
    }

    static std::string read_text(const std::string& p) {
        std::ifstream is(p);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, Version) {
    const CliRun r = run({"--version"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("gorder 1.0.0"), std::string::npos);
}

TEST_F(CliTest, SolveHeat) {
    const CliRun r = run({"solve", scenario("heat.json"), "--out", path("heat.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = read_json(path("heat.json"));
    EXPECT_NEAR(j.at("g_expectation").get<double>(), 1.0, 1e-3);
    EXPECT_EQ(j.at("tool"), "gorder");
    EXPECT_TRUE(j.contains("version"));
    EXPECT_TRUE(j.contains("config"));
    EXPECT_EQ(read_text(path("heat.json.grid.csv")).rfind("t,x,u,ux,uxx\n", 0), 0u);
    EXPECT_FALSE(fs::exists(path("heat.json.tmp")));
}

TEST_F(CliTest, SolveBlackScholes) {
    const CliRun r = run({"solve", scenario("black_scholes.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out).at("g_expectation").get<double>(), 10.4506, 0.05);
}

TEST_F(CliTest, UnknownKeyIsInputError) {
    json doc = json::parse(read_text(scenario("heat.json")));
    doc["colour"] = "blue";
    const CliRun r = run({"solve", write("bad.json", doc)});
    EXPECT_EQ(r.code, exit_input_error);
    EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(CliTest, MissingFileAndBadFlags) {
    EXPECT_EQ(run({"solve", path("nope.json")}).code, exit_input_error);
    EXPECT_EQ(run({"solve"}).code, exit_input_error);
    EXPECT_EQ(run({"frobnicate"}).code, exit_input_error);
    EXPECT_EQ(run({"solve", scenario("heat.json"), "--engine", "abacus"}).code, exit_input_error);
}

TEST_F(CliTest, SolverFailure) {
    json doc = json::parse(read_text(scenario("heat.json")));
    doc["payoff"] = {{"expr", "log(x)"}};
    EXPECT_EQ(run({"solve", write("nan.json", doc)}).code, exit_solver_failure);
}

TEST_F(CliTest, CompareMisspecified) {
    const CliRun r = run({"compare", scenario("misspecified_vol.json"), "--out", path("cmp.json")});
    ASSERT_EQ(r.code, exit_pass) << r.err;
    const json j = read_json(path("cmp.json"));
    EXPECT_EQ(j.at("applied_result"), "pp3");
    EXPECT_TRUE(j.at("empirical_pass").get<bool>());
    EXPECT_EQ(read_text(path("cmp.json.empirical.csv")).rfind("payoff_id,e1,e2,difference,tolerance,pass\n", 0), 0u);
    for (const char* suffix : {".plot1.csv", ".plot2.csv"}) {
        const std::string plot = read_text(path(std::string("cmp.json") + suffix));
        EXPECT_EQ(plot.rfind("payoff_id,x,value\n", 0), 0u);
        EXPECT_GT(std::count(plot.begin(), plot.end(), '\n'), 10);
    }
}

TEST_F(CliTest, CompareReversedHasNoVerdict) {
    const CliRun r = run({"compare", scenario("reversed_vol.json")});
    EXPECT_EQ(r.code, exit_no_verdict);
    const json j = json::parse(r.out);
    EXPECT_EQ(j.at("order_type"), "none");
    bool witnessed = false;
    for (const auto& c : j.at("conditions"))
        if (c.at("id") == "sigma_order") witnessed = c.at("status") == "violated" && c.contains("witness");
    EXPECT_TRUE(witnessed);
}

TEST_F(CliTest, CompareIdenticalProblems) {
    json doc = json::parse(read_text(scenario("misspecified_vol.json")));
    doc["diffusion2"] = doc["diffusion"];
    const CliRun r = run({"compare", write("same.json", doc)});
    ASSERT_EQ(r.code, exit_pass) << r.err;
    for (const auto& row : json::parse(r.out).at("empirical")) EXPECT_EQ(row.at("difference").get<double>(), 0.0);
}

TEST_F(CliTest, CompareNeedsTwoProblems) {
    EXPECT_EQ(run({"compare", scenario("heat.json")}).code, exit_input_error);
}

TEST_F(CliTest, ExampleMisspecified) {
    const CliRun r = run({"example", "misspecified_vol", "--out", path("ex.json")});
    ASSERT_EQ(r.code, exit_pass) << r.err;
    const json j = read_json(path("ex.json"));
    EXPECT_TRUE(j.at("verdict_matches").get<bool>());
    EXPECT_TRUE(fs::exists(path("ex.json.plot1.csv")));
    EXPECT_TRUE(fs::exists(path("ex.json.plot2.csv")));
}

TEST_F(CliTest, ExampleBorrowAtLendingRate) {
    const CliRun r = run({"example", "borrow_one_side", "--params", "R=0.05"});
    ASSERT_EQ(r.code, exit_pass) << r.err;
    for (const auto& row : json::parse(r.out).at("empirical").at("rows"))
        EXPECT_LE(std::abs(row.at("difference").get<double>()), row.at("tolerance").get<double>());
}

TEST_F(CliTest, ExampleParameterViolation) {
    const CliRun r = run({"example", "short_sell", "--params", "theta_gap=-0.1"});
    EXPECT_EQ(r.code, exit_input_error);
    EXPECT_NE(r.err.find("theta order"), std::string::npos);
    EXPECT_EQ(run({"example", "misspecified_vol", "--params", "bogus=1"}).code, exit_input_error);
    EXPECT_EQ(run({"example", "no_such_scenario"}).code, exit_input_error);
}

TEST_F(CliTest, ProbeConvexityAndMonotonicity) {
    CliRun r = run({"probe", scenario("heat.json"), "--probe", "convexity"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out).at("min_value").get<double>(), 2.0, 1e-6);
    r = run({"probe", scenario("black_scholes.json"), "--probe", "monotonicity"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_GE(j.at("min_value").get<double>(), -1e-6);
    EXPECT_TRUE(j.at("location").contains("x"));
    r = run({"probe", scenario("heat.json"), "--probe", "sign"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(run({"probe", scenario("heat.json"), "--probe", "wobble"}).code, exit_input_error);
}

TEST_F(CliTest, ProbeDependence) {
    const CliRun r = run({"probe", scenario("dependence.json"), "--probe", "dependence"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_TRUE(j.at("strictly_decreasing").get<bool>());
    EXPECT_EQ(j.at("table").at("rows").size(), 4u);
}

TEST_F(CliTest, Validate) {
    const CliRun r = run({"validate", scenario("black_scholes.json")});
    EXPECT_EQ(r.code, exit_pass) << r.out;
    json doc = json::parse(read_text(scenario("heat.json")));
    doc["generator"] = {{"expr", "z^2"}};
    EXPECT_EQ(run({"validate", write("quad.json", doc)}).code, exit_no_verdict);
}

TEST_F(CliTest, SeedOverrideIsDeterministic) {
    json doc = json::parse(read_text(scenario("black_scholes.json")));
    doc["solver"]["mc"]["paths"] = 2000;
    const std::string file = write("mc.json", doc);
    const CliRun a = run({"solve", file, "--engine", "mc", "--seed", "5"});
    const CliRun b = run({"solve", file, "--engine", "mc", "--seed", "5"});
    const CliRun c = run({"solve", file, "--engine", "mc", "--seed", "6"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(json::parse(a.out).at("g_expectation"), json::parse(c.out).at("g_expectation"));
}
