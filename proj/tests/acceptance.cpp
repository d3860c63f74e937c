#include "gorder/cli.hpp"
#include "gorder/scenarios.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace gorder;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double pde_tol(double e) { return 1e-3 * (1.0 + std::abs(e)); }

Outcome black_scholes_reproduction() {
    ProblemSpec p;
    p.diffusion = make_diffusion("0.05*x", "0.2*x", 100.0, StateDomain::positive_halfline);
    p.generator = make_generator("-0.05*y");
    p.payoff = make_payoff("max(x - 100, 0)", 1.0, true, true);
    p.horizon = 1.0;
    const auto t0 = std::chrono::steady_clock::now();
    const double u = g_expectation(solve(p, default_grid(p, 5.0, 400, 400)));
    const double elapsed = seconds_since(t0);
    const double ref = oracle::bs_call(100, 100, 0.05, 0.2, 1.0);
    const double rel = std::abs(u - ref) / ref;
    return {rel <= 0.005 && elapsed < 5.0,
            fmt("u(0,100)=%.5f oracle=%.5f rel_err=%.2e (tol 5e-3) runtime=%.2fs (limit 5s)", u, ref, rel, elapsed)};
}

Outcome solver_cross_validation() {
    EngineConfig pde;
    EngineConfig mc;
    mc.engine = Engine::mc;
    mc.mc.n_paths = 200000;
    mc.mc.n_steps = 100;
    bool ok = true;
    double worst = 0.0;
    std::string failed;
    for (ScenarioId id : all_scenarios()) {
        const Scenario s = build_scenario(id);
        int k = 1;
        for (const ProblemSpec* p : {&s.p1, &s.p2}) {
            const double a = value_of(*p, pde).value;
            const Valuation b = value_of(*p, mc);
            const double z = std::abs(a - b.value) / *b.std_error;
            worst = std::max(worst, z);
            if (z > 3.0) {
                ok = false;
                failed += fmt(" %s/p%d(pde=%.4f mc=%.4f se=%.4f)", std::string(to_string(id)).c_str(), k, a, b.value,
                              *b.std_error);
            }
            ++k;
        }
    }
    return {ok, fmt("10 ATM-call problems, worst |pde-mc|/se=%.2f (tol 3)", worst) + failed};
}

Outcome linear_fbsde_oracle() {
    struct Set {
        double r, theta, vol;
    };
    const Set sets[] = {{0.05, 0.0, 0.2}, {0.05, 0.15, 0.2}, {0.02, -0.1, 0.3}};
    McConfig cfg;
    cfg.n_paths = 100000;
    cfg.n_steps = 50;
    bool ok = true;
    std::string detail;
    for (const Set& s : sets) {
        const auto d = make_diffusion(Expr::constant(s.r) * Expr::variable(Var::x),
                                      Expr::constant(s.vol) * Expr::variable(Var::x), 100.0,
                                      StateDomain::positive_halfline);
        const auto g = make_generator(Expr::constant(-s.r) * Expr::variable(Var::y) -
                                      Expr::constant(s.theta) * Expr::variable(Var::z));
        const PayoffSpec phi = make_payoff("max(x - 100, 0)", 1.0, true, true);
        const PathEnsemble paths = simulate_forward(d, 1.0, cfg);
        const BsdeEstimate lsmc = solve_bsde_lsmc(paths, g, phi, cfg);
        const Expr zero = Expr::constant(0.0);
        const BsdeEstimate closed =
            linear_bsde_closed_form(paths, zero, Expr::constant(-s.r), Expr::constant(-s.theta), zero, phi);
        const double tol = 3.0 * std::hypot(lsmc.y0_stderr, closed.y0_stderr);
        const double diff = std::abs(lsmc.y0_mean - closed.y0_mean);
        ok = ok && diff <= tol;
        detail += fmt(" [r=%.2f theta=%.2f: lsmc=%.4f closed=%.4f |d|=%.4f tol=%.4f]", s.r, s.theta, lsmc.y0_mean,
                      closed.y0_mean, diff, tol);
    }
    return {ok, "3 parameter sets" + detail};
}

Outcome ordering_inequality() {
    bool ok = true;
    double worst = 1e300;
    std::string detail;
    for (const char* b2 : {"0.2", "0.25", "0.3", "0.4"}) {
        ScenarioParams prm = default_params(ScenarioId::misspecified_vol);
        prm.b1 = "0.2";
        prm.b2 = b2;
        const Scenario s = build_scenario(ScenarioId::misspecified_vol, prm);
        std::vector<PayoffSpec> working;
        for (const auto& phi : s.family(OrderType::conv)) working.push_back(s.to_working(phi));
        const EmpiricalTable t = verify_order_empirically(s.p1, s.p2, working, OrderType::conv);
        const bool equal = std::string(b2) == "0.2";
        for (const auto& row : t.rows) {
            const double tol = pde_tol(row.e2);
            const bool cell = equal ? std::abs(row.difference) <= tol : row.difference >= -tol;
            worst = std::min(worst, row.difference + tol);
            if (!cell) {
                ok = false;
                detail += fmt(" b2=%s/%s diff=%.3e", b2, row.payoff_id.c_str(), row.difference);
            }
        }
    }
    return {ok, fmt("4 x 6 cells, min(diff + tol)=%.3e (must be >= 0; equality cells |diff| <= tol)", worst) + detail};
}

Outcome constrained_vs_unconstrained() {
    bool ok = true;
    std::string detail;
    double last = -1e300;
    for (double R : {0.05, 0.06, 0.07, 0.10}) {
        ScenarioParams prm = default_params(ScenarioId::borrow_one_side);
        prm.R = R;
        const Scenario s = build_scenario(ScenarioId::borrow_one_side, prm);
        std::vector<PayoffSpec> working;
        for (const auto& phi : s.family()) working.push_back(s.to_working(phi));
        const EmpiricalTable t = verify_order_empirically(s.p1, s.p2, working, OrderType::conv);
        for (const auto& row : t.rows) {
            if (row.difference < -row.tolerance) ok = false;
            if (R == 0.05 && std::abs(row.difference) > row.tolerance) ok = false;
        }
        const EmpiricalTable atm = verify_order_empirically(s.p1, s.p2, {s.p1.payoff}, OrderType::conv);
        const double d = atm.rows[0].difference;
        if (d < last) ok = false;
        last = d;
        detail += fmt(" R=%.2f:atm_diff=%.4f", R, d);
    }
    return {ok, "differences >= -tol, zero at R=r, ATM difference nondecreasing;" + detail};
}

Outcome condition_engine_ground_truth() {
    Box b;
    b.x = {-5, 5};
    b.y = {-5, 5};
    b.z = {-5, 5};
    b.sample_count = 2000;
    const Expr borrow = parse("(0.07 - 0.05)*neg(y - x*z)");
    const ScalarField fb = [borrow](const Point& p) { return borrow(p); };
    const bool xy = check_convexity_2d("xy", fb, Plane::xy, b).certified();
    const bool yz = check_convexity_2d("yz", fb, Plane::yz, b).certified();
    const ScalarField concave = [](const Point& p) { return -p.x * p.x; };
    const ConditionReport w1 = check_convexity_2d("c", concave, Plane::xy, b);
    const ConditionReport w2 = check_convexity_2d("c", concave, Plane::xy, b);
    bool witness_ok = w1.status == Status::violated && w1.witness && w1.witness->partner && w2.witness &&
                      w2.witness->partner && w1.witness->point.x == w2.witness->point.x &&
                      w1.witness->partner->x == w2.witness->partner->x;
    if (witness_ok) {
        const Point& p = w1.witness->point;
        const Point& q = *w1.witness->partner;
        Point m = p;
        m.x = 0.5 * (p.x + q.x);
        m.y = 0.5 * (p.y + q.y);
        witness_ok = concave(m) - 0.5 * (concave(p) + concave(q)) > 1e-9 * (1 + std::abs(concave(p)) + std::abs(concave(q)));
    }
    const Scenario s = build_scenario(ScenarioId::short_sell);
    VerdictOptions opts;
    opts.zeta = s.zeta;
    const OrderingVerdict v = verdict(s.p1, s.p2, OrderType::conv, opts);
    bool pp3_blocked = false;
    for (const auto& a : v.attempts)
        if (a.result == "pp3") pp3_blocked = !a.applied;
    const bool pp1 = v.applied_result == "pp1";
    return {xy && yz && witness_ok && pp3_blocked && pp1,
            fmt("borrow term convex xy=%d yz=%d; -x^2 witness reproducible and sound=%d; short_sell pp3 blocked=%d "
                "(B2 %s), applied=%s",
                xy, yz, witness_ok, pp3_blocked, std::string(to_string(v.conditions.at("B2").status)).c_str(),
                v.applied_result.c_str())};
}

Outcome convexity_propagation() {
    bool ok = true;
    double worst = 1e300;
    std::size_t checked = 0;
    std::string detail;
    for (ScenarioId id : all_scenarios()) {
        const Scenario s = build_scenario(id);
        if (s.expected_order != OrderType::conv) continue;
        for (const ProfileRow& row : scenario_profiles(s, s.family(OrderType::conv))) {
            ++checked;
            const double bound = -1e-6 * row.scale;
            const double v = row.convexity ? row.convexity->value : -1e300;
            worst = std::min(worst, v / row.scale);
            if (v < bound || row.sign.first_mixed) {
                ok = false;
                detail += fmt(" %s/%s/p%d min_uxx=%.3e mixed=%d", std::string(to_string(id)).c_str(),
                              row.payoff_id.c_str(), row.problem, v, row.sign.first_mixed.has_value());
            }
        }
    }
    return {ok, fmt("%zu profiles, min uxx/scale=%.3e (bound -1e-6), no mixed layers", checked, worst) + detail};
}

Outcome monotonicity() {
    bool ok = true;
    double worst = 1e300;
    std::size_t checked = 0;
    std::string detail;
    for (ScenarioId id : all_scenarios()) {
        const Scenario s = build_scenario(id);
        for (const ProblemSpec* p : {&s.p1, &s.p2}) {
            const Box box = default_box(*p, state_range(*p));
            const Expr g = p->generator.g;
            if (!check_monotone_in("g_x", [g](const Point& q) { return g(q); }, Var::x, box).certified()) {
                ok = false;
                detail += fmt(" %s: g not nondecreasing in x", std::string(to_string(id)).c_str());
            }
        }
        for (const ProfileRow& row : scenario_profiles(s, s.family(OrderType::mon))) {
            ++checked;
            const double v = row.monotonicity ? row.monotonicity->value : -1e300;
            worst = std::min(worst, v / row.scale);
            if (v < -1e-6 * row.scale) {
                ok = false;
                detail += fmt(" %s/%s/p%d min_ux=%.3e", std::string(to_string(id)).c_str(), row.payoff_id.c_str(),
                              row.problem, v);
            }
        }
    }
    return {ok, fmt("%zu profiles, min ux/scale=%.3e (bound -1e-6)", checked, worst) + detail};
}

Outcome scaling_and_duality() {
    const Scenario s = build_scenario(ScenarioId::borrow_one_side);
    const ProblemSpec& p = s.u2;
    const GridSpec grid = default_grid(p);
    const double e1 = g_expectation(solve(p, grid));
    bool ok = true;
    std::string detail = fmt("E_g[call]=%.5f", e1);
    for (double a : {-1.0, 2.0}) {
        ProblemSpec q = p.with_generator(scale_generator(p.generator, a));
        q.payoff = make_payoff(Expr::constant(a) * p.payoff.phi);
        const double ea = g_expectation(solve(q, grid));
        const double tol = 2.0 * pde_tol(a * e1);
        ok = ok && std::abs(ea - a * e1) <= tol;
        detail += fmt("; a=%g: E=%.5f a*E=%.5f tol=%.4f", a, ea, a * e1, tol);
    }
    const Scenario lin = build_scenario(ScenarioId::misspecified_vol);
    const double ask = g_expectation(solve(lin.u1, default_grid(lin.u1)));
    const double bid = -g_expectation(solve(lin.u1.with_payoff(make_payoff(-lin.u1.payoff.phi)), default_grid(lin.u1)));
    ok = ok && std::abs(ask - bid) <= pde_tol(ask);
    detail += fmt("; linear g: ask=%.6f bid=%.6f tol=%.4f", ask, bid, pde_tol(ask));
    return {ok, detail};
}

Outcome continuous_dependence() {
    ProblemSpec p;
    p.diffusion = make_diffusion("0.05*x", "0.2*x", 100.0, StateDomain::positive_halfline);
    p.generator = make_generator("-0.05*y");
    p.payoff = make_payoff("max(x - 100, 0)", 1.0, true, true);
    p.horizon = 1.0;
    std::vector<ProblemSpec> perturbed;
    std::vector<double> sizes;
    for (int n : {2, 4, 8, 16}) {
        ProblemSpec q = p;
        q.diffusion.sigma = Expr::constant(1.0 + 1.0 / n) * p.diffusion.sigma;
        perturbed.push_back(q);
        sizes.push_back(1.0 / n);
    }
    McConfig cfg;
    cfg.n_paths = 20000;
    cfg.n_steps = 50;
    cfg.basis_degree = 3;
    const DependenceTable t = continuous_dependence_experiment(p, perturbed, cfg, sizes);
    bool decreasing = true;
    for (std::size_t i = 1; i < t.rows.size(); ++i) decreasing = decreasing && t.rows[i].mean_sq < t.rows[i - 1].mean_sq;
    const double ratio = t.rows.back().mean_sq / t.rows.front().mean_sq;
    return {decreasing && ratio < 0.25,
            fmt("E|Y_n-Y|^2 = [%.4g, %.4g, %.4g, %.4g], strictly decreasing=%d, n16/n2=%.4f (limit 0.25)",
                t.rows[0].mean_sq, t.rows[1].mean_sq, t.rows[2].mean_sq, t.rows[3].mean_sq, decreasing, ratio)};
}

Outcome flow_monotonicity() {
    McConfig cfg;
    cfg.n_paths = 10000;
    cfg.n_steps = 100;
    const auto d = make_diffusion("0.05*x", "0.2*x", 100.0, StateDomain::positive_halfline);
    const double frac = monotone_coupling_check(d, 90.0, 110.0, 1.0, cfg);
    return {frac == 0.0, fmt("violation fraction=%g over 10^4 paths x 100 steps (must be 0)", frac)};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "gorder_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path root = fs::path(GORDER_SOURCE_DIR) / "scenarios";
    {
        std::ifstream is(root / "black_scholes.json");
        nlohmann::json doc = nlohmann::json::parse(is);
        doc["solver"]["mc"]["paths"] = 20000;
        std::ofstream(dir / "mc.json") << doc.dump();
    }
    struct Cmd {
        std::vector<std::string> args;
        std::vector<std::string> files;
    };
    const std::vector<Cmd> cmds = {
        {{"compare", (root / "misspecified_vol.json").string()}, {"", ".empirical.csv", ".plot1.csv", ".plot2.csv"}},
        {{"solve", (dir / "mc.json").string(), "--engine", "mc", "--seed", "2024"}, {""}},
        {{"example", "short_sell"}, {"", ".empirical.csv"}},
    };
    bool ok = true;
    std::size_t compared = 0;
    for (std::size_t k = 0; k < cmds.size(); ++k) {
        std::vector<std::string> outputs[2];
        for (int rep = 0; rep < 2; ++rep) {
            const std::string out = (dir / ("run" + std::to_string(k) + "_" + std::to_string(rep) + ".json")).string();
            std::vector<std::string> args = {"gorder"};
            args.insert(args.end(), cmds[k].args.begin(), cmds[k].args.end());
            args.push_back("--out");
            args.push_back(out);
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream so, se;
            const int code = run_cli(static_cast<int>(argv.size()), argv.data(), so, se);
            if (code != 0) ok = false;
            for (const auto& suffix : cmds[k].files) outputs[rep].push_back(slurp(out + suffix));
        }
        for (std::size_t i = 0; i < outputs[0].size(); ++i) {
            ++compared;
            ok = ok && !outputs[0][i].empty() && outputs[0][i] == outputs[1][i];
        }
    }
    fs::remove_all(dir);
    return {ok, fmt("%zu report/CSV files compared byte for byte across two runs", compared)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"Black-Scholes reproduction", black_scholes_reproduction},
        {"Solver cross-validation", solver_cross_validation},
        {"Linear-FBSDE oracle", linear_fbsde_oracle},
        {"Ordering inequality (pp3, misspecified volatility)", ordering_inequality},
        {"Constrained vs unconstrained borrowing", constrained_vs_unconstrained},
        {"Condition-engine ground truth", condition_engine_ground_truth},
        {"Convexity propagation", convexity_propagation},
        {"Monotonicity", monotonicity},
        {"Scaling and risk duality", scaling_and_duality},
        {"Continuous dependence", continuous_dependence},
        {"Flow monotonicity", flow_monotonicity},
        {"Determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
                  << fmt(" (%.1fs)", seconds_since(t0)) << std::endl;
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " acceptance criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
