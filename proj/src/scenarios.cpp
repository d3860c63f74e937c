#include "gorder/scenarios.hpp"

#include "gorder/error.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace gorder {

std::string_view to_string(ScenarioId id) noexcept {
    switch (id) {
        case ScenarioId::misspecified_vol: return "misspecified_vol";
        case ScenarioId::alpha_abs_z: return "alpha_abs_z";
        case ScenarioId::borrow_one_side: return "borrow_one_side";
        case ScenarioId::borrow_both: return "borrow_both";
        case ScenarioId::short_sell: return "short_sell";
    }
    return "misspecified_vol";
}

const std::vector<ScenarioId>& all_scenarios() {
    static const std::vector<ScenarioId> ids = {ScenarioId::misspecified_vol, ScenarioId::alpha_abs_z,
                                                ScenarioId::borrow_one_side, ScenarioId::borrow_both,
                                                ScenarioId::short_sell};
    return ids;
}

ScenarioId parse_scenario_id(std::string_view s) {
    for (ScenarioId id : all_scenarios()) {
        if (s == to_string(id)) return id;
    }
    throw InputError("unknown scenario '" + std::string(s) +
                     "' (expected misspecified_vol, alpha_abs_z, borrow_one_side, borrow_both or short_sell)");
}

namespace {

double parse_number(std::string_view key, std::string_view value) {
    double v = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw InputError("parameter '" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
    }
    return v;
}

}  // namespace

void ScenarioParams::set(std::string_view key, std::string_view value) {
    auto expr_field = [&](std::string& field) {
        if (!value.empty()) {
            const Expr e = parse(value);
            for (Var v : {Var::y, Var::z}) {
                if (e.depends_on(v)) throw InputError("parameter '" + std::string(key) + "' may use t and x only");
            }
        }
        field = std::string(value);
    };
    if (key == "r") r = parse_number(key, value);
    else if (key == "R") R = parse_number(key, value);
    else if (key == "x0") x0 = parse_number(key, value);
    else if (key == "x0_2") x0_2 = parse_number(key, value);
    else if (key == "T") T = parse_number(key, value);
    else if (key == "theta_gap") theta_gap = parse_number(key, value);
    else if (key == "a1") expr_field(a1);
    else if (key == "a2") expr_field(a2);
    else if (key == "a3") expr_field(a3);
    else if (key == "b1") expr_field(b1);
    else if (key == "b2") expr_field(b2);
    else if (key == "b3") expr_field(b3);
    else if (key == "alpha") expr_field(alpha);
    else throw InputError("unknown scenario parameter '" + std::string(key) + "'");
}

ScenarioParams default_params(ScenarioId id) {
    ScenarioParams p;
    if (id == ScenarioId::borrow_one_side) p.b2 = "0.2";
    return p;
}

namespace {

Expr var_x() { return Expr::variable(Var::x); }
Expr num(double v) { return Expr::constant(v); }

/// Sampled (t, x) points on [0, T] x [x0 e^-3, x0 e^3].
std::vector<std::array<double, 2>> constraint_points(const ScenarioParams& p) {
    LowDiscrepancyStream s(2, mix_seed(12345, 9000));
    std::vector<std::array<double, 2>> out(257);
    const double x0 = std::max(std::min(p.x0, p.second_x0()), 1e-12);
    const double x1 = std::max(p.x0, p.second_x0());
    const Range lx{std::log(x0) - 3.0, std::log(x1) + 3.0};
    std::array<double, 2> u{};
    for (auto& pt : out) {
        s.next(u);
        pt = {p.T * u[0], std::exp(lx.at(u[1]))};
    }
    out.push_back({0.0, p.x0});
    out.push_back({p.T, p.x0});
    return out;
}

std::string at_point(double t, double x) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " at t=%.6g, x=%.6g", t, x);
    return buf;
}

void require_le(const std::string& constraint, const Expr& lhs, const Expr& rhs, const ScenarioParams& p,
                bool strict = false) {
    for (const auto& [t, x] : constraint_points(p)) {
        const double l = lhs(t, x);
        const double r = rhs(t, x);
        const double tol = 1e-12 * (1.0 + std::abs(l) + std::abs(r));
        const bool bad = strict ? !(l < r) : !(l <= r + tol);
        if (bad) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%.6g %s %.6g", l, strict ? ">=" : ">", r);
            throw ParameterViolation(constraint, lhs.print() + " vs " + rhs.print() + ": " + buf + at_point(t, x));
        }
    }
}

struct Coefficients {
    Expr a1, a2, a3, b1, b2, b3, alpha;
};

Expr coefficient(const std::string& text, double r) { return text.empty() ? num(r) : parse(text); }

Coefficients coefficients(ScenarioId id, const ScenarioParams& p) {
    Coefficients c;
    c.a1 = coefficient(p.a1, p.r);
    c.a2 = coefficient(p.a2, p.r);
    c.b1 = parse(p.b1);
    c.b2 = parse(p.b2);
    c.b3 = parse(p.b3);
    c.alpha = parse(p.alpha);
    for (const auto* e : {&c.a1, &c.a2, &c.b1, &c.b2, &c.b3}) {
        for (Var v : {Var::y, Var::z}) {
            if (e->depends_on(v)) throw InputError("scenario coefficients may use t and x only");
        }
    }
    if (c.alpha.depends_on(Var::x) || c.alpha.depends_on(Var::y) || c.alpha.depends_on(Var::z)) {
        throw InputError("alpha may depend on t only");
    }
    if (id == ScenarioId::short_sell) {
        if (p.a3.empty()) {
            if (p.theta_gap < 0.0) {
                throw ParameterViolation("theta order",
                                         "theta_gap = " + std::to_string(p.theta_gap) + " gives theta_2 > theta_3");
            }
            c.a3 = num(p.r) + c.b3 * ((c.a2 - num(p.r)) / c.b2 + num(p.theta_gap));
        } else {
            c.a3 = parse(p.a3);
        }
    } else {
        c.a3 = num(p.r);
    }
    return c;
}

void check_constraints(ScenarioId id, const ScenarioParams& p, const Coefficients& c) {
    if (!(p.T > 0.0)) throw ParameterViolation("T > 0", "T = " + std::to_string(p.T));
    if (!(p.x0 > 0.0)) throw ParameterViolation("x0 > 0", "x0 = " + std::to_string(p.x0));
    if (!(p.second_x0() > 0.0)) throw ParameterViolation("x0 > 0", "x0_2 = " + std::to_string(p.second_x0()));
    if (id == ScenarioId::alpha_abs_z) {
        if (p.x0 > p.second_x0()) throw ParameterViolation("x0_1 <= x0_2", "initial prices are not ordered");
    } else if (p.x0 != p.second_x0()) {
        throw ParameterViolation("x0_1 = x0_2", "this scenario requires equal initial prices");
    }
    require_le("b1 > 0", num(0.0), c.b1, p, true);
    require_le("b2 > 0", num(0.0), c.b2, p, true);
    require_le("b1 <= b2", c.b1, c.b2, p);
    switch (id) {
        case ScenarioId::misspecified_vol: break;
        case ScenarioId::alpha_abs_z:
            require_le("alpha > 0", num(0.0), c.alpha, p, true);
            require_le("a1 <= a2", c.a1, c.a2, p);
            break;
        case ScenarioId::borrow_one_side:
        case ScenarioId::borrow_both:
            if (p.R < p.r) throw ParameterViolation("R >= r", "R = " + std::to_string(p.R) + " < r");
            break;
        case ScenarioId::short_sell:
            if (p.R < p.r) throw ParameterViolation("R >= r", "R = " + std::to_string(p.R) + " < r");
            require_le("b3 > 0", num(0.0), c.b3, p, true);
            require_le("theta order", (c.a2 - num(p.r)) / c.b2, (c.a3 - num(p.r)) / c.b3, p);
            break;
    }
}

/// Generator of the second (or first) asset, in the variables of `sub`.
Expr generator_terms(ScenarioId id, int i, const Coefficients& c, double r, double R) {
    const Expr z = Expr::variable(Var::z);
    const Expr y = Expr::variable(Var::y);
    const Expr& a = i == 1 ? c.a1 : c.a2;
    const Expr& b = i == 1 ? c.b1 : c.b2;
    const Expr theta = (a - num(r)) / b;
    const Expr gap = num(R - r);
    switch (id) {
        case ScenarioId::misspecified_vol: return -(z * theta);
        case ScenarioId::alpha_abs_z: return c.alpha * Expr::call(Expr::Fn::abs, z);
        case ScenarioId::borrow_one_side:
            if (i == 1) return -(z * theta);
            return -(z * theta) + gap * Expr::call(Expr::Fn::neg, y - z / b);
        case ScenarioId::borrow_both: return -(z * theta) + gap * Expr::call(Expr::Fn::neg, y - z / b);
        case ScenarioId::short_sell: {
            if (i == 1) return -(z * theta);
            const Expr theta3 = (c.a3 - num(r)) / c.b3;
            const Expr zp = Expr::call(Expr::Fn::pos, z);
            const Expr zm = Expr::call(Expr::Fn::neg, z);
            return -(z * theta) + zm * (theta3 - theta) + gap * Expr::call(Expr::Fn::neg, y - zp / b + zm / c.b3);
        }
    }
    return num(0.0);
}

PayoffSpec discount_payoff(const PayoffSpec& phi, double r, double T) {
    const double up = std::exp(r * T);
    PayoffSpec out = phi;
    out.phi = num(1.0 / up) * phi.phi.substitute({{Var::x, var_x() * num(up)}});
    return out;
}

}  // namespace

PayoffSpec Scenario::to_working(const PayoffSpec& phi) const {
    return discounted ? discount_payoff(phi, params.r, params.T) : phi;
}

std::vector<PayoffSpec> Scenario::family(OrderType order) const { return default_family(order, params.x0); }

Scenario build_scenario(ScenarioId id, const ScenarioParams& params) {
    Scenario s;
    s.id = id;
    s.params = params;
    const Coefficients c = coefficients(id, params);
    check_constraints(id, params, c);
    const double r = params.r;
    s.discounted = id != ScenarioId::alpha_abs_z;
    s.zeta = num(0.0);
    s.expected_order = id == ScenarioId::alpha_abs_z ? OrderType::iconv : OrderType::conv;
    s.expected_result = id == ScenarioId::alpha_abs_z ? "pp4" : id == ScenarioId::short_sell ? "pp1" : "pp3";

    const PayoffSpec call = make_payoff(Expr::call(Expr::Fn::pos, var_x() - num(params.x0)), 1.0, true, true, "call");
    const Expr y = Expr::variable(Var::y);
    const std::array<double, 2> x0s = {params.x0, params.second_x0()};

    for (int i : {1, 2}) {
        const Expr& a = i == 1 ? c.a1 : c.a2;
        const Expr& b = i == 1 ? c.b1 : c.b2;
        const Expr g = generator_terms(id, i, c, r, params.R);

        ProblemSpec u;
        u.diffusion = make_diffusion(var_x() * a, var_x() * b, x0s[i - 1], StateDomain::positive_halfline);
        u.generator = make_generator(s.discounted ? -(num(r) * y) + g : g);
        u.payoff = call;
        u.horizon = params.T;

        ProblemSpec w = u;
        if (s.discounted) {
            const std::map<Var, Expr> grow = {
                {Var::x, var_x() * Expr::call(Expr::Fn::exp, num(r) * Expr::variable(Var::t))}};
            Coefficients cd = c;
            for (Expr* e : {&cd.a1, &cd.a2, &cd.a3, &cd.b1, &cd.b2, &cd.b3}) *e = e->substitute(grow);
            const Expr& ad = i == 1 ? cd.a1 : cd.a2;
            const Expr& bd = i == 1 ? cd.b1 : cd.b2;
            w.diffusion =
                make_diffusion(var_x() * (ad - num(r)), var_x() * bd, x0s[i - 1], StateDomain::positive_halfline);
            w.generator = make_generator(generator_terms(id, i, cd, r, params.R));
            w.payoff = discount_payoff(call, r, params.T);
        }
        (i == 1 ? s.u1 : s.u2) = u;
        (i == 1 ? s.p1 : s.p2) = w;
    }
    return s;
}

std::vector<ProfileRow> scenario_profiles(const Scenario& s, const std::vector<PayoffSpec>& family,
                                          const EngineConfig& engine) {
    std::vector<ProfileRow> out;
    for (const auto& phi : family) {
        for (int i : {1, 2}) {
            const ProblemSpec p = (i == 1 ? s.p1 : s.p2).with_payoff(s.to_working(phi));
            GridSpec g = default_grid(p, engine.grid_L, engine.nx, engine.nt);
            g.boundary = engine.boundary;
            const PdeSolution sol = solve(p, g);
            ProfileRow row;
            row.payoff_id = phi.id;
            row.problem = i;
            if (phi.asserted_convex) row.convexity = convexity_profile(sol);
            if (phi.asserted_nondecreasing) row.monotonicity = monotonicity_profile(sol);
            row.sign = sign_constancy_profile(sol);
            row.scale = row.sign.dead_band / 1e-6;
            out.push_back(std::move(row));
        }
    }
    return out;
}

ScenarioReport run_scenario(ScenarioId id, const ScenarioParams& params, const EngineConfig& engine,
                            bool collect_curves) {
    ScenarioReport rep;
    rep.scenario = build_scenario(id, params);
    const Scenario& s = rep.scenario;
    VerdictOptions opts;
    opts.zeta = s.zeta;
    rep.verdict = verdict(s.p1, s.p2, s.expected_order, opts);
    rep.verdict_matches = rep.verdict.order_type == s.expected_order && rep.verdict.applied_result == s.expected_result;

    const std::vector<PayoffSpec> family = s.family();
    std::vector<PayoffSpec> working;
    for (const auto& phi : family) working.push_back(s.to_working(phi));
    rep.empirical = verify_order_empirically(s.p1, s.p2, working, s.expected_order, engine, collect_curves);

    EngineConfig pde = engine;
    pde.engine = Engine::pde;
    for (std::size_t k = 0; k < family.size(); ++k) {
        PriceRow row;
        row.payoff_id = family[k].id;
        row.working1 = rep.empirical.rows[k].e1;
        row.working2 = rep.empirical.rows[k].e2;
        row.undiscounted1 = value_of(s.u1.with_payoff(family[k]), pde).value;
        row.undiscounted2 = value_of(s.u2.with_payoff(family[k]), pde).value;
        rep.prices.push_back(row);
    }
    rep.profiles = scenario_profiles(s, family, pde);
    return rep;
}

void to_json(nlohmann::json& j, const ScenarioParams& p) {
    j = nlohmann::json{{"r", p.r},   {"R", p.R},   {"x0", p.x0}, {"T", p.T},   {"a1", p.a1},
                       {"a2", p.a2}, {"a3", p.a3}, {"b1", p.b1}, {"b2", p.b2}, {"b3", p.b3},
                       {"alpha", p.alpha}, {"theta_gap", p.theta_gap}};
    j["x0_2"] = std::isnan(p.x0_2) ? nlohmann::json(nullptr) : nlohmann::json(p.x0_2);
}

void from_json(const nlohmann::json& j, ScenarioParams& p) {
    if (!j.is_object()) throw InputError("scenario parameters must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (value.is_number()) {
            const double v = value.get<double>();
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            p.set(key, buf);
        } else if (value.is_string()) {
            p.set(key, value.get<std::string>());
        } else if (value.is_null() && key == "x0_2") {
            p.x0_2 = std::numeric_limits<double>::quiet_NaN();
        } else {
            throw InputError("parameter '" + key + "' must be a number or an expression string");
        }
    }
}

void to_json(nlohmann::json& j, const PriceRow& r) {
    j = nlohmann::json{{"payoff_id", r.payoff_id},
                       {"working", {r.working1, r.working2}},
                       {"undiscounted", {r.undiscounted1, r.undiscounted2}}};
}

void to_json(nlohmann::json& j, const ProfileRow& r) {
    j = nlohmann::json{{"payoff_id", r.payoff_id}, {"problem", r.problem}, {"sign", r.sign}, {"scale", r.scale}};
    if (r.convexity) j["min_uxx"] = *r.convexity;
    if (r.monotonicity) j["min_ux"] = *r.monotonicity;
}

void to_json(nlohmann::json& j, const ScenarioReport& r) {
    const Scenario& s = r.scenario;
    j = nlohmann::json{{"scenario", std::string(to_string(s.id))},
                       {"params", s.params},
                       {"discounted", s.discounted},
                       {"problems", {s.p1, s.p2}},
                       {"expected", {{"order_type", std::string(to_string(s.expected_order))},
                                     {"applied_result", s.expected_result}}},
                       {"verdict", r.verdict},
                       {"verdict_matches", r.verdict_matches},
                       {"empirical", r.empirical},
                       {"prices", r.prices},
                       {"profiles", r.profiles},
                       {"pass", r.pass()}};
}

}  // namespace gorder
