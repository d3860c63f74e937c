#include "gorder/scenario_file.hpp"

#include "gorder/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace gorder {

namespace {

using json = nlohmann::json;

void require_object(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw InputError(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw InputError(where + ": unknown key '" + key + "'");
    }
}

const json& required(const json& j, const std::string& where, const std::string& key) {
    const auto it = j.find(key);
    if (it == j.end()) throw InputError(where + ": missing key '" + key + "'");
    return *it;
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw InputError(where + ": expected a number");
    return j.get<double>();
}

std::size_t count(const json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() < 0) throw InputError(where + ": expected a non-negative integer");
    return j.get<std::size_t>();
}

std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) throw InputError(where + ": expected a string");
    return j.get<std::string>();
}

bool flag(const json& j, const std::string& where) {
    if (!j.is_boolean()) throw InputError(where + ": expected true or false");
    return j.get<bool>();
}

Expr expression(const json& j, const std::string& where) {
    if (j.is_number()) return Expr::constant(j.get<double>());
    try {
        return parse(text(j, where));
    } catch (const InputError& e) {
        throw InputError(where + ": " + e.what());
    }
}

double param(const json& params, const std::string& where, const std::string& key,
             std::optional<double> fallback = std::nullopt) {
    const auto it = params.find(key);
    if (it == params.end()) {
        if (fallback) return *fallback;
        throw InputError(where + ": missing parameter '" + key + "'");
    }
    return number(*it, where + "." + key);
}

std::string num_id(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

DiffusionSpec parse_diffusion(const json& j, const std::string& where) {
    require_object(j, where, {"mu", "sigma", "x0", "domain"});
    const StateDomain domain =
        j.contains("domain") ? parse_state_domain(text(j["domain"], where + ".domain")) : StateDomain::whole_line;
    return make_diffusion(expression(required(j, where, "mu"), where + ".mu"),
                          expression(required(j, where, "sigma"), where + ".sigma"),
                          number(required(j, where, "x0"), where + ".x0"), domain);
}

GeneratorSpec parse_generator(const json& j, const std::string& where) {
    if (j.is_string()) return make_generator(expression(j, where));
    require_object(j, where, {"expr", "catalog", "params"});
    if (j.contains("expr") == j.contains("catalog")) throw InputError(where + ": give exactly one of expr or catalog");
    if (j.contains("expr")) {
        if (j.contains("params")) throw InputError(where + ": params only apply to catalog entries");
        return make_generator(expression(j["expr"], where + ".expr"));
    }
    const json params = j.value("params", json::object());
    return make_generator(generator_from_catalog(text(j["catalog"], where + ".catalog"), params));
}

PayoffSpec parse_payoff(const json& j, const std::string& where) {
    if (j.is_string()) return make_payoff(expression(j, where));
    require_object(j, where, {"expr", "catalog", "params", "growth", "convex", "nondecreasing", "id"});
    if (j.contains("expr") == j.contains("catalog")) throw InputError(where + ": give exactly one of expr or catalog");
    PayoffSpec p;
    if (j.contains("expr")) {
        if (j.contains("params")) throw InputError(where + ": params only apply to catalog entries");
        p = make_payoff(expression(j["expr"], where + ".expr"),
                        j.contains("growth") ? number(j["growth"], where + ".growth") : 1.0,
                        j.contains("convex") && flag(j["convex"], where + ".convex"),
                        j.contains("nondecreasing") && flag(j["nondecreasing"], where + ".nondecreasing"),
                        j.contains("id") ? text(j["id"], where + ".id") : std::string());
    } else {
        for (const char* k : {"growth", "convex", "nondecreasing"}) {
            if (j.contains(k)) throw InputError(where + ": '" + k + "' is fixed by the catalog");
        }
        p = payoff_from_catalog(text(j["catalog"], where + ".catalog"), j.value("params", json::object()));
        if (j.contains("id")) p.id = text(j["id"], where + ".id");
    }
    return p;
}

Range range(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) throw InputError(where + ": expected [lo, hi]");
    return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
}

void parse_solver(const json& j, EngineConfig& e) {
    require_object(j, "solver", {"engine", "grid", "mc"});
    if (j.contains("engine")) e.engine = parse_engine(text(j["engine"], "solver.engine"));
    if (j.contains("grid")) {
        const json& g = j["grid"];
        require_object(g, "solver.grid", {"L", "nx", "nt", "boundary"});
        if (g.contains("L")) e.grid_L = number(g["L"], "solver.grid.L");
        if (g.contains("nx")) e.nx = count(g["nx"], "solver.grid.nx");
        if (g.contains("nt")) e.nt = count(g["nt"], "solver.grid.nt");
        if (g.contains("boundary")) e.boundary = parse_boundary(text(g["boundary"], "solver.grid.boundary"));
        if (!(e.grid_L > 0.0)) throw InputError("solver.grid.L must be positive");
        if (e.nx < 3 || e.nt < 1) throw InputError("solver.grid needs nx >= 3 and nt >= 1");
    }
    if (j.contains("mc")) {
        const json& m = j["mc"];
        require_object(m, "solver.mc", {"paths", "steps", "seed", "basis_degree", "antithetic"});
        if (m.contains("paths")) e.mc.n_paths = count(m["paths"], "solver.mc.paths");
        if (m.contains("steps")) e.mc.n_steps = count(m["steps"], "solver.mc.steps");
        if (m.contains("seed")) e.mc.seed = count(m["seed"], "solver.mc.seed");
        if (m.contains("basis_degree")) e.mc.basis_degree = static_cast<int>(count(m["basis_degree"], "solver.mc.basis_degree"));
        if (m.contains("antithetic")) e.mc.antithetic = flag(m["antithetic"], "solver.mc.antithetic");
        e.mc.validate();
    }
}

json payoff_document(const PayoffSpec& p) {
    return json{{"expr", p.phi.print()}, {"growth", p.growth_exponent}, {"convex", p.asserted_convex},
                {"nondecreasing", p.asserted_nondecreasing}, {"id", p.id}};
}

json diffusion_document(const DiffusionSpec& d) {
    return json{{"mu", d.mu.print()}, {"sigma", d.sigma.print()}, {"x0", d.x0},
                {"domain", std::string(to_string(d.domain))}};
}

}  // namespace

Expr generator_from_catalog(const std::string& name, const json& params) {
    const std::string where = "generator catalog '" + name + "'";
    auto only = [&](const std::set<std::string>& keys) { require_object(params, where + " params", keys); };
    const Expr y = Expr::variable(Var::y);
    const Expr z = Expr::variable(Var::z);
    auto c = [](double v) { return Expr::constant(v); };
    if (name == "zero") {
        only({});
        return c(0.0);
    }
    if (name == "linear") {
        only({"r", "theta"});
        return -(c(param(params, where, "r", 0.0)) * y) - c(param(params, where, "theta", 0.0)) * z;
    }
    if (name == "abs_z") {
        only({"alpha"});
        return c(param(params, where, "alpha")) * Expr::call(Expr::Fn::abs, z);
    }
    if (name == "borrow") {
        only({"r", "R", "theta", "b"});
        const double r = param(params, where, "r");
        const double R = param(params, where, "R");
        const double b = param(params, where, "b");
        if (b <= 0.0) throw InputError(where + ": b must be positive");
        return -(c(r) * y) - c(param(params, where, "theta", 0.0)) * z +
               c(R - r) * Expr::call(Expr::Fn::neg, y - z / c(b));
    }
    throw InputError("unknown generator catalog entry '" + name + "' (expected zero, linear, abs_z or borrow)");
}

PayoffSpec payoff_from_catalog(const std::string& name, const json& params) {
    const std::string where = "payoff catalog '" + name + "'";
    const Expr x = Expr::variable(Var::x);
    auto c = [](double v) { return Expr::constant(v); };
    if (name == "identity") {
        require_object(params, where + " params", {});
        return make_payoff(x, 1.0, true, true, "x");
    }
    if (name == "square") {
        require_object(params, where + " params", {});
        return make_payoff(x * x, 2.0, true, false, "x^2");
    }
    if (name == "smooth_step") {
        require_object(params, where + " params", {"K", "eps"});
        const double k = param(params, where, "K");
        const double eps = param(params, where, "eps");
        if (eps <= 0.0) throw InputError(where + ": eps must be positive");
        return make_payoff((c(1.0) + Expr::call(Expr::Fn::tanh, (x - c(k)) / c(eps))) / c(2.0), 1.0, false, true,
                           "smooth_step_" + num_id(k));
    }
    require_object(params, where + " params", {"K"});
    const double k = param(params, where, "K");
    if (name == "call") return make_payoff(Expr::call(Expr::Fn::pos, x - c(k)), 1.0, true, true, "call_" + num_id(k));
    if (name == "put") return make_payoff(Expr::call(Expr::Fn::pos, c(k) - x), 1.0, true, false, "put_" + num_id(k));
    if (name == "abs") return make_payoff(Expr::call(Expr::Fn::abs, x - c(k)), 1.0, true, false, "abs_" + num_id(k));
    if (name == "min") return make_payoff(Expr::call(Expr::Fn::min, x, c(k)), 1.0, false, true, "min_" + num_id(k));
    if (name == "pos_sq") {
        const Expr up = Expr::call(Expr::Fn::pos, x - c(k));
        return make_payoff(up * up, 2.0, true, true, "pos_sq_" + num_id(k));
    }
    throw InputError("unknown payoff catalog entry '" + name +
                     "' (expected identity, square, call, put, abs, min, pos_sq or smooth_step)");
}

const ProblemSpec& ScenarioFile::second() const {
    if (!p2) throw InputError("this command needs a second problem (diffusion2)");
    return *p2;
}

std::vector<PayoffSpec> ScenarioFile::payoffs(OrderType o) const {
    return family.empty() ? default_family(o, p1.diffusion.x0) : family;
}

void ScenarioFile::override_seed(std::uint64_t seed) {
    engine.mc.seed = seed;
    if (box) box->seed = seed;
}

ScenarioFile parse_scenario_file(const json& doc) {
    require_object(doc, "scenario", {"diffusion", "diffusion2", "generator", "generator2", "payoff", "payoff_family",
                                     "horizon", "zeta", "order", "solver", "checks", "box", "dependence"});
    ScenarioFile f;
    f.p1.diffusion = parse_diffusion(required(doc, "scenario", "diffusion"), "diffusion");
    f.p1.generator = doc.contains("generator") ? parse_generator(doc["generator"], "generator")
                                                : make_generator(Expr::constant(0.0));
    f.p1.horizon = number(required(doc, "scenario", "horizon"), "horizon");
    if (doc.contains("payoff")) {
        f.p1.payoff = parse_payoff(doc["payoff"], "payoff");
    } else if (!doc.contains("payoff_family")) {
        throw InputError("scenario: give payoff or payoff_family");
    }
    if (doc.contains("payoff_family")) {
        const json& fam = doc["payoff_family"];
        if (fam.is_string()) {
            if (fam.get<std::string>() != "default") throw InputError("payoff_family: expected an array or \"default\"");
        } else if (fam.is_array()) {
            if (fam.empty()) throw InputError("payoff_family: empty");
            for (std::size_t i = 0; i < fam.size(); ++i) {
                f.family.push_back(parse_payoff(fam[i], "payoff_family[" + std::to_string(i) + "]"));
            }
        } else {
            throw InputError("payoff_family: expected an array or \"default\"");
        }
        if (!doc.contains("payoff")) f.p1.payoff = f.family.empty() ? default_family(OrderType::conv, f.p1.diffusion.x0).front()
                                                                    : f.family.front();
    }
    f.p1.validate();
    if (doc.contains("diffusion2") || doc.contains("generator2")) {
        if (!doc.contains("diffusion2")) throw InputError("generator2 given without diffusion2");
        ProblemSpec p2 = f.p1;
        p2.diffusion = parse_diffusion(doc["diffusion2"], "diffusion2");
        if (doc.contains("generator2")) p2.generator = parse_generator(doc["generator2"], "generator2");
        p2.validate();
        f.p2 = p2;
    }
    if (doc.contains("zeta")) {
        f.zeta = expression(doc["zeta"], "zeta");
        for (Var v : {Var::y, Var::z}) {
            if (f.zeta->depends_on(v)) throw InputError("zeta may depend on t and x only");
        }
    }
    if (doc.contains("order")) f.order = parse_order_type(text(doc["order"], "order"));
    if (doc.contains("solver")) parse_solver(doc["solver"], f.engine);
    if (doc.contains("checks")) {
        const json& c = doc["checks"];
        if (!c.is_array()) throw InputError("checks: expected an array");
        for (const auto& item : c) {
            const std::string name = text(item, "checks[]");
            static const std::set<std::string> known = {"assumptions", "convexity", "monotonicity", "sign"};
            if (!known.count(name)) {
                throw InputError("checks: unknown check '" + name + "' (expected assumptions, convexity, monotonicity or sign)");
            }
            f.checks.push_back(name);
        }
    }
    if (doc.contains("box")) {
        const json& b = doc["box"];
        require_object(b, "box", {"t", "x", "y", "z", "samples", "seed"});
        Box box = f.p2 ? default_pair_box(f.p1, *f.p2) : default_box(f.p1, state_range(f.p1));
        for (Var v : {Var::t, Var::x, Var::y, Var::z}) {
            const std::string key(1, "txyz"[static_cast<int>(v)]);
            if (b.contains(key)) box.range(v) = range(b[key], "box." + key);
        }
        if (b.contains("samples")) box.sample_count = count(b["samples"], "box.samples");
        if (b.contains("seed")) box.seed = count(b["seed"], "box.seed");
        box.validate();
        f.box = box;
    }
    if (doc.contains("dependence")) {
        const json& d = doc["dependence"];
        require_object(d, "dependence", {"n"});
        if (d.contains("n")) {
            if (!d["n"].is_array() || d["n"].empty()) throw InputError("dependence.n: expected a non-empty array");
            f.dependence.n.clear();
            for (const auto& v : d["n"]) {
                const std::size_t n = count(v, "dependence.n[]");
                if (n == 0) throw InputError("dependence.n entries must be positive");
                f.dependence.n.push_back(static_cast<int>(n));
            }
        }
    }
    return f;
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("scenario file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_scenario_file(doc);
}

json to_document(const ScenarioFile& f) {
    json doc{{"diffusion", diffusion_document(f.p1.diffusion)},
             {"generator", {{"expr", f.p1.generator.g.print()}}},
             {"payoff", payoff_document(f.p1.payoff)},
             {"horizon", f.p1.horizon},
             {"solver",
              {{"engine", std::string(to_string(f.engine.engine))},
               {"grid", {{"L", f.engine.grid_L}, {"nx", f.engine.nx}, {"nt", f.engine.nt},
                         {"boundary", std::string(to_string(f.engine.boundary))}}},
               {"mc", f.engine.mc}}},
             {"checks", f.checks},
             {"dependence", {{"n", f.dependence.n}}}};
    if (f.p2) {
        doc["diffusion2"] = diffusion_document(f.p2->diffusion);
        doc["generator2"] = {{"expr", f.p2->generator.g.print()}};
    }
    if (!f.family.empty()) {
        json fam = json::array();
        for (const auto& p : f.family) fam.push_back(payoff_document(p));
        doc["payoff_family"] = fam;
    }
    if (f.zeta) doc["zeta"] = f.zeta->print();
    if (f.order) doc["order"] = std::string(to_string(*f.order));
    if (f.box) {
        auto r = [](const Range& x) { return json::array({x.lo, x.hi}); };
        doc["box"] = {{"t", r(f.box->t)}, {"x", r(f.box->x)}, {"y", r(f.box->y)}, {"z", r(f.box->z)},
                      {"samples", f.box->sample_count}, {"seed", f.box->seed}};
    }
    return doc;
}

}  // namespace gorder
