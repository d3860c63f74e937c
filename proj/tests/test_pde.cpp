#include "gorder/error.hpp"
#include "gorder/pde.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace gorder;

namespace {

ProblemSpec heat(const std::string& phi, const std::string& g = "0") {
    ProblemSpec p;
    p.diffusion = make_diffusion("0", "1", 0.0);
    p.generator = make_generator(g);
    p.payoff = make_payoff(phi);
    p.horizon = 1.0;
    return p;
}

ProblemSpec black_scholes(const std::string& g = "-0.05*y") {
    ProblemSpec p;
    p.diffusion = make_diffusion("0.05*x", "0.2*x", 100.0, StateDomain::positive_halfline);
    p.generator = make_generator(g);
    p.payoff = make_payoff("max(x - 100, 0)", 1.0, true, true);
    p.horizon = 1.0;
    return p;
}

GridSpec uniform(double lo, double hi, std::size_t nx, std::size_t nt, Boundary b = Boundary::second_derivative_zero) {
    GridSpec g;
    g.x_min = lo;
    g.x_max = hi;
    g.nx = nx;
    g.nt = nt;
    g.boundary = b;
    return g;
}

const double bs_reference = oracle::bs_call(100.0, 100.0, 0.05, 0.2, 1.0);

}  // namespace

TEST(PdeSolve, MartingaleIdentity) {
    EXPECT_NEAR(g_expectation(solve(heat("x"), uniform(-8, 8, 401, 400))), 0.0, 1e-8);
}

TEST(PdeSolve, ItoIsometry) {
    const PdeSolution sol = solve(heat("x^2"), uniform(-8, 8, 400, 400, Boundary::third_derivative_zero));
    EXPECT_NEAR(sol.value_at(0, 0.0), 1.0, 1e-3);
}

TEST(PdeSolve, BlackScholesCall) {
    EXPECT_NEAR(bs_reference, 10.4506, 1e-4);
    EXPECT_NEAR(g_expectation(solve(black_scholes())), bs_reference, 0.05);
}

TEST(PdeSolve, TerminalLayerIsPayoff) {
    const ProblemSpec p = black_scholes();
    const PdeSolution sol = solve(p);
    const auto last = sol.u(sol.layers() - 1);
    for (std::size_t i = 0; i < sol.nx(); ++i) EXPECT_EQ(last[i], p.payoff.phi(sol.times().back(), sol.nodes()[i]));
    for (std::size_t n = 0; n < sol.layers(); ++n)
        for (double v : sol.u(n)) ASSERT_TRUE(std::isfinite(v));
}

TEST(PdeSolve, ConstantPreservation) {
    for (const std::string g : {"0", "0.2*abs(z)", "0.3*pos(z) - 0.1*neg(z)"}) {
        const PdeSolution sol = solve(heat("3.5", g), uniform(-8, 8, 201, 200));
        for (std::size_t n = 0; n < sol.layers(); ++n)
            for (double v : sol.u(n)) ASSERT_NEAR(v, 3.5, 1e-8) << g;
        EXPECT_NEAR(g_expectation(sol), 3.5, 1e-8);
    }
}

TEST(PdeSolve, GridConvergence) {
    const ProblemSpec p = black_scholes();
    const GridSpec coarse = default_grid(p, 5.0, 101, 50);
    const GridSpec fine = default_grid(p, 5.0, 201, 100);
    const double e_coarse = std::abs(g_expectation(solve(p, coarse)) - bs_reference);
    const double e_fine = std::abs(g_expectation(solve(p, fine)) - bs_reference);
    EXPECT_GE(e_coarse / e_fine, 1.7) << e_coarse << " " << e_fine;
}

TEST(PdeSolve, ComparisonPrinciple) {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(0.0, 0.3);
    for (int k = 0; k < 8; ++k) {
        const double a = u(rng), b = u(rng), c = u(rng);
        // g1 <= g2 pointwise: g2 adds a nonnegative term.
        const std::string g1 = std::to_string(a) + "*abs(z) - " + std::to_string(b) + "*y";
        const std::string g2 = g1 + " + " + std::to_string(c) + "*pos(z - 0.1)";
        const ProblemSpec p1 = heat("max(x, 0) - 0.5*max(x - 1, 0)", g1);
        const ProblemSpec p2 = heat("max(x, 0) - 0.5*max(x - 1, 0)", g2);
        const GridSpec grid = default_grid(p1);
        const PdeSolution s1 = solve(p1, grid);
        const double scale = std::max(1.0, std::abs(g_expectation(s1)));
        EXPECT_LE(g_expectation(s1), g_expectation(solve(p2, grid)) + 1e-8 * scale);
    }
}

TEST(PdeSolve, TruncationEffectBoundedByDoublingL) {
    const ProblemSpec p = black_scholes();
    const double a = g_expectation(solve(p, default_grid(p, 5.0, 401, 400)));
    const double b = g_expectation(solve(p, default_grid(p, 10.0, 801, 400)));
    EXPECT_NEAR(a, b, 1e-2);
}

TEST(PdeSolve, GridValidation) {
    EXPECT_THROW(uniform(1, 1, 11, 10).validate(), InputError);
    EXPECT_THROW(uniform(0, 1, 2, 10).validate(), InputError);
    EXPECT_THROW(uniform(0, 1, 11, 0).validate(), InputError);
    GridSpec g = uniform(-1, 1, 11, 10);
    g.spacing = Spacing::log;
    EXPECT_THROW(g.validate(), InputError);
}

TEST(PdeSolve, OutOfGrid) {
    const PdeSolution sol = solve(heat("x"), uniform(-8, 8, 101, 50));
    EXPECT_THROW(sol.value_at(0, 20.0), OutOfGrid);
    ProblemSpec p = heat("x");
    p.diffusion.x0 = 20.0;
    EXPECT_THROW(solve(p, uniform(-8, 8, 101, 50)), InputError);
}

TEST(PdeSolve, GridTooCoarse) {
    EXPECT_THROW(solve(heat("max(x, 0)", "50*abs(z) - 40*y"), uniform(-8, 8, 101, 2)), GridTooCoarse);
}

TEST(PdeProfiles, HeatConvexity) {
    const Extremum e = convexity_profile(solve(heat("x^2"), uniform(-8, 8, 401, 400, Boundary::third_derivative_zero)));
    EXPECT_NEAR(e.value, 2.0, 1e-6);
}

TEST(PdeProfiles, CallConvexityPropagates) {
    const PdeSolution sol = solve(black_scholes("-0.05*y - 0.15*z/(0.2*x)"));
    EXPECT_GE(convexity_profile(sol).value, -1e-6 * dead_band(sol) / 1e-6);
}

TEST(PdeProfiles, ConcavePayoffStaysConcave) {
    const Extremum e = convexity_profile(solve(heat("-x^2"), uniform(-8, 8, 401, 400, Boundary::third_derivative_zero)));
    EXPECT_NEAR(e.value, -2.0, 1e-6);
}

TEST(PdeProfiles, LinearMonotonicity) {
    EXPECT_NEAR(monotonicity_profile(solve(heat("x"), uniform(-8, 8, 401, 400))).value, 1.0, 1e-8);
    EXPECT_NEAR(monotonicity_profile(solve(heat("-x"), uniform(-8, 8, 401, 400))).value, -1.0, 1e-8);
}

TEST(PdeProfiles, CallMonotonicity) {
    const PdeSolution sol = solve(black_scholes("-0.05*y + 0.1*abs(z)"));
    EXPECT_GE(monotonicity_profile(sol).value, -1e-6);
}

TEST(PdeProfiles, SignConstancyHeat) {
    const SignProfile s = sign_constancy_profile(solve(heat("x^2"), uniform(-8, 8, 201, 100, Boundary::third_derivative_zero)));
    for (Sign v : s.layers) EXPECT_EQ(v, Sign::positive);
    EXPECT_FALSE(s.first_mixed.has_value());
}

TEST(PdeProfiles, SignConstancyLinear) {
    const SignProfile s = sign_constancy_profile(solve(heat("x"), uniform(-8, 8, 201, 100)));
    for (Sign v : s.layers) EXPECT_EQ(v, Sign::zero);
    EXPECT_TRUE(s.nondecreasing_toward_zero);
}

TEST(PdeProfiles, DeadBandScale) {
    const PdeSolution sol = solve(heat("5*x"), uniform(-8, 8, 101, 50));
    EXPECT_NEAR(dead_band(sol), 1e-6 * 40.0, 1e-9);
}

TEST(PdeExport, CsvLayout) {
    const PdeSolution sol = solve(heat("x"), uniform(-1, 1, 5, 2));
    std::ostringstream os;
    write_csv(sol, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,x,u,ux,uxx");
    std::size_t rows = 0;
    std::string first;
    while (std::getline(is, line)) {
        if (rows == 0) first = line;
        ++rows;
    }
    EXPECT_EQ(rows, 3u * 5u);
    EXPECT_EQ(first.rfind("0,-1,", 0), 0u) << first;
}
