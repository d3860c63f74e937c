#include "gorder/cli.hpp"

#include "gorder/error.hpp"
#include "gorder/scenario_file.hpp"
#include "gorder/scenarios.hpp"
#include "gorder/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gorder {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw InputError("cannot write '" + tmp.string() + "'");
        os << content;
        os.flush();
        if (!os) throw InputError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw InputError("cannot move report into place at '" + path.string() + "': " + ec.message());
    }
}

fs::path sibling(const std::string& out, const std::string& suffix) { return fs::path(out + suffix); }

struct Common {
    std::string file;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> engine;
};

json envelope(const std::string& command) {
    return json{{"tool", "gorder"}, {"version", version}, {"command", command}};
}

void emit(const Common& c, const json& report, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    if (c.out.empty()) {
        out << text;
    } else {
        write_atomic(c.out, text);
    }
}

ScenarioFile load(const Common& c) {
    ScenarioFile f = load_scenario_file(c.file);
    if (c.seed) f.override_seed(*c.seed);
    if (c.engine) f.engine.engine = parse_engine(*c.engine);
    return f;
}

const ProblemSpec& pick(const ScenarioFile& f, int problem) {
    if (problem == 1) return f.p1;
    if (problem == 2) return f.second();
    throw InputError("--problem must be 1 or 2");
}

PdeSolution solve_pde(const ProblemSpec& p, const EngineConfig& e) {
    GridSpec g = default_grid(p, e.grid_L, e.nx, e.nt);
    g.boundary = e.boundary;
    return solve(p, g);
}

json location(const Extremum& e) {
    return json{{"t", e.t}, {"x", e.x}, {"layer", e.layer}, {"node", e.node}};
}

json run_checks(const ScenarioFile& f, const ProblemSpec& p) {
    json checks = json::object();
    std::optional<PdeSolution> sol;
    for (const auto& name : f.checks) {
        if (name == "assumptions") {
            const Box box = f.box ? *f.box : default_box(p, state_range(p));
            checks["assumptions"] = validate_assumptions(p, box);
            continue;
        }
        if (!sol) sol = solve_pde(p, f.engine);
        if (name == "convexity") {
            const Extremum e = convexity_profile(*sol);
            checks["convexity"] = {{"min_value", e.value}, {"location", location(e)}, {"dead_band", dead_band(*sol)}};
        } else if (name == "monotonicity") {
            const Extremum e = monotonicity_profile(*sol);
            checks["monotonicity"] = {{"min_value", e.value}, {"location", location(e)}, {"dead_band", dead_band(*sol)}};
        } else if (name == "sign") {
            checks["sign"] = sign_constancy_profile(*sol);
        }
    }
    return checks;
}

int cmd_solve(const Common& c, int problem, std::ostream& out) {
    const ScenarioFile f = load(c);
    const ProblemSpec& p = pick(f, problem);
    json report = envelope("solve");
    report["problem"] = problem;
    report["engine"] = std::string(to_string(f.engine.engine));
    if (f.engine.engine == Engine::pde) {
        const PdeSolution sol = solve_pde(p, f.engine);
        report["g_expectation"] = g_expectation(sol);
        report["grid"] = sol.grid();
        if (!c.out.empty()) {
            std::ostringstream csv;
            write_csv(sol, csv);
            write_atomic(sibling(c.out, ".grid.csv"), csv.str());
        }
    } else {
        const BsdeEstimate e = solve_bsde_lsmc(p, f.engine.mc);
        report["g_expectation"] = e.y0_mean;
        report["stderr"] = e.y0_stderr;
        report["mc"] = e;
    }
    if (!f.checks.empty()) report["checks"] = run_checks(f, p);
    report["config"] = to_document(f);
    emit(c, report, out);
    return exit_pass;
}

std::string csv_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string empirical_csv(const EmpiricalTable& t) {
    std::ostringstream os;
    os << "payoff_id,e1,e2,difference,tolerance,pass\n";
    for (const auto& r : t.rows) {
        os << r.payoff_id << ',' << csv_number(r.e1) << ',' << csv_number(r.e2) << ',' << csv_number(r.difference)
           << ',' << csv_number(r.tolerance) << ',' << (r.pass ? "true" : "false") << '\n';
    }
    return os.str();
}

void write_plot_data(const std::string& out, const EmpiricalTable& t) {
    for (int problem : {1, 2}) {
        std::ostringstream os;
        os << "payoff_id,x,value\n";
        for (const auto& c : t.curves) {
            if (c.problem != problem) continue;
            for (std::size_t i = 0; i < c.x.size(); ++i) {
                os << c.payoff_id << ',' << csv_number(c.x[i]) << ',' << csv_number(c.value[i]) << '\n';
            }
        }
        write_atomic(sibling(out, ".plot" + std::to_string(problem) + ".csv"), os.str());
    }
}

int cmd_compare(const Common& c, const std::optional<std::string>& order_text, bool evaluate_all, std::ostream& out) {
    const ScenarioFile f = load(c);
    const ProblemSpec& p2 = f.second();
    const OrderType order = order_text ? parse_order_type(*order_text) : f.order.value_or(OrderType::conv);
    VerdictOptions opts;
    opts.zeta = f.zeta;
    opts.box = f.box;
    opts.evaluate_all = evaluate_all;
    const OrderingVerdict v = verdict(f.p1, p2, order, opts);
    json report = envelope("compare");
    report.update(json(v));
    int code = exit_no_verdict;
    if (v.found()) {
        const bool curves = !c.out.empty() && f.engine.engine == Engine::pde;
        const EmpiricalTable table = verify_order_empirically(f.p1, p2, f.payoffs(order), order, f.engine, curves);
        report["empirical"] = table.rows;
        report["empirical_pass"] = table.all_pass();
        if (!c.out.empty()) {
            write_atomic(sibling(c.out, ".empirical.csv"), empirical_csv(table));
            if (curves) write_plot_data(c.out, table);
        }
        code = table.all_pass() ? exit_pass : exit_empirical_failure;
    } else {
        report["empirical"] = json::array();
    }
    report["config"] = to_document(f);
    emit(c, report, out);
    return code;
}

int cmd_example(const Common& c, const std::string& id_text, const std::vector<std::string>& assignments,
                std::ostream& out) {
    const ScenarioId id = parse_scenario_id(id_text);
    ScenarioParams params = default_params(id);
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw InputError("--params expects key=value, got '" + a + "'");
        params.set(a.substr(0, eq), a.substr(eq + 1));
    }
    EngineConfig engine;
    if (c.engine) engine.engine = parse_engine(*c.engine);
    if (c.seed) engine.mc.seed = *c.seed;
    const bool curves = !c.out.empty() && engine.engine == Engine::pde;
    const ScenarioReport rep = run_scenario(id, params, engine, curves);
    json report = envelope("example");
    report.update(json(rep));
    report["config"] = engine;
    if (curves) write_plot_data(c.out, rep.empirical);
    if (!c.out.empty()) write_atomic(sibling(c.out, ".empirical.csv"), empirical_csv(rep.empirical));
    emit(c, report, out);
    if (!rep.verdict.found()) return exit_no_verdict;
    if (!rep.empirical.all_pass()) return exit_empirical_failure;
    return rep.verdict_matches ? exit_pass : exit_no_verdict;
}

int cmd_probe(const Common& c, const std::string& probe, int problem, std::ostream& out) {
    const ScenarioFile f = load(c);
    const ProblemSpec& p = pick(f, problem);
    json report = envelope("probe");
    report["probe"] = probe;
    report["problem"] = problem;
    if (probe == "dependence") {
        std::vector<ProblemSpec> perturbed;
        std::vector<double> sizes;
        std::vector<std::string> labels;
        for (int n : f.dependence.n) {
            ProblemSpec q = p;
            q.diffusion.sigma = Expr::constant(1.0 + 1.0 / n) * p.diffusion.sigma;
            perturbed.push_back(q);
            sizes.push_back(1.0 / n);
            labels.push_back("n=" + std::to_string(n));
        }
        const DependenceTable t = continuous_dependence_experiment(p, perturbed, f.engine.mc, sizes, labels);
        bool decreasing = true;
        for (std::size_t i = 1; i < t.rows.size(); ++i) decreasing = decreasing && t.rows[i].mean_sq < t.rows[i - 1].mean_sq;
        report["table"] = t;
        report["strictly_decreasing"] = decreasing;
    } else {
        const PdeSolution sol = solve_pde(p, f.engine);
        if (probe == "convexity" || probe == "monotonicity") {
            const Extremum e = probe == "convexity" ? convexity_profile(sol) : monotonicity_profile(sol);
            report["min_value"] = e.value;
            report["location"] = location(e);
            report["dead_band"] = dead_band(sol);
        } else if (probe == "sign") {
            report["profile"] = sign_constancy_profile(sol);
        } else {
            throw InputError("unknown probe '" + probe + "' (expected convexity, monotonicity, sign or dependence)");
        }
    }
    report["config"] = to_document(f);
    emit(c, report, out);
    return exit_pass;
}

int cmd_validate(const Common& c, std::ostream& out) {
    const ScenarioFile f = load(c);
    json report = envelope("validate");
    json problems = json::array();
    bool violated = false;
    std::vector<const ProblemSpec*> list = {&f.p1};
    if (f.p2) list.push_back(&*f.p2);
    for (const ProblemSpec* p : list) {
        const Box box = f.box ? *f.box : default_box(*p, state_range(*p));
        const AssumptionReport r = validate_assumptions(*p, box);
        for (const auto& item : r.conditions.items()) {
            if (item.id == "A3" || item.id == "A3'") continue;
            violated = violated || item.status == Status::violated;
        }
        problems.push_back(r);
    }
    report["problems"] = problems;
    report["any_violated"] = violated;
    report["config"] = to_document(f);
    emit(c, report, out);
    return violated ? exit_no_verdict : exit_pass;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonlinear g-expectations, ordering certificates and empirical checks", "gorder"};
    app.set_version_flag("--version", std::string("gorder ") + version);
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub, bool with_file) {
        if (with_file) sub->add_option("file", common.file, "Scenario JSON file")->required();
        sub->add_option("--out", common.out, "Report path (stdout when omitted)");
        sub->add_option("--seed", common.seed, "Override every seed");
        sub->add_option("--engine", common.engine, "pde or mc");
    };

    int problem = 1;
    auto* solve_cmd = app.add_subcommand("solve", "Compute the g-expectation of one problem");
    add_common(solve_cmd, true);
    solve_cmd->add_option("--problem", problem, "1 or 2");

    std::optional<std::string> order;
    bool evaluate_all = false;
    auto* compare_cmd = app.add_subcommand("compare", "Certify an ordering and verify it empirically");
    add_common(compare_cmd, true);
    compare_cmd->add_option("--order", order, "conv, iconv, mon, conc or iconc");
    compare_cmd->add_flag("--evaluate-all", evaluate_all, "Report every hypothesis set");

    std::string example_id;
    std::vector<std::string> assignments;
    auto* example_cmd = app.add_subcommand("example", "Run a packaged finance scenario");
    example_cmd->add_option("id", example_id, "Scenario id")->required();
    example_cmd->add_option("--params", assignments, "key=value overrides");
    add_common(example_cmd, false);

    std::string probe;
    auto* probe_cmd = app.add_subcommand("probe", "Run a property probe");
    add_common(probe_cmd, true);
    probe_cmd->add_option("--probe", probe, "convexity, monotonicity, sign or dependence")->required();
    probe_cmd->add_option("--problem", problem, "1 or 2");

    auto* validate_cmd = app.add_subcommand("validate", "Check the standing assumptions");
    add_common(validate_cmd, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_input_error;
    }

    try {
        if (*solve_cmd) return cmd_solve(common, problem, out);
        if (*compare_cmd) return cmd_compare(common, order, evaluate_all, out);
        if (*example_cmd) return cmd_example(common, example_id, assignments, out);
        if (*probe_cmd) return cmd_probe(common, probe, problem, out);
        if (*validate_cmd) return cmd_validate(common, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return exit_solver_failure;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return exit_solver_failure;
    }
    return exit_input_error;
}

}  // namespace gorder
