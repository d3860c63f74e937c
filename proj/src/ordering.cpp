#include "gorder/ordering.hpp"

#include "gorder/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace gorder {

std::string_view to_string(OrderType o) noexcept {
    switch (o) {
        case OrderType::conv: return "conv";
        case OrderType::iconv: return "iconv";
        case OrderType::mon: return "mon";
        case OrderType::conc: return "conc";
        case OrderType::iconc: return "iconc";
        case OrderType::none: return "none";
    }
    return "none";
}

OrderType parse_order_type(std::string_view s) {
    for (OrderType o : {OrderType::conv, OrderType::iconv, OrderType::mon, OrderType::conc, OrderType::iconc}) {
        if (s == to_string(o)) return o;
    }
    throw InputError("unknown order type '" + std::string(s) + "' (expected conv, iconv, mon, conc or iconc)");
}

std::string_view to_string(Engine e) noexcept { return e == Engine::pde ? "pde" : "mc"; }

Engine parse_engine(std::string_view s) {
    if (s == "pde") return Engine::pde;
    if (s == "mc") return Engine::mc;
    throw InputError("unknown engine '" + std::string(s) + "' (expected pde or mc)");
}

namespace {

constexpr double rel_tol = 1e-9;
constexpr double eq_tol = 1e-12;

Range nonneg(const Range& r) { return {std::max(0.0, r.lo), std::max(0.0, r.hi)}; }

Box restrict_z(const Box& box, ZRange zr) {
    Box b = box;
    if (zr == ZRange::nonneg_z) b.z = nonneg(box.z);
    return b;
}

ConditionReport fresh(const std::string& id) {
    ConditionReport r;
    r.id = id;
    r.status = Status::certified;
    return r;
}

void record(ConditionReport& r, double excess, double magnitude, const Point& p, const std::optional<Point>& q) {
    if (excess > 0.0 && (r.status != Status::violated || magnitude > r.max_violation)) {
        r.status = Status::violated;
        r.max_violation = magnitude;
        r.witness = Witness{p, q};
    }
}

double clip(const Range& r, double v) { return std::min(r.hi, std::max(r.lo, v)); }

}  // namespace

ConditionReport check_convexity_2d(const std::string& id, const ScalarField& fn, Plane plane, const Box& box,
                                   ZRange zr) {
    const Box b = restrict_z(box, zr);
    const Var a1 = plane == Plane::xy ? Var::x : Var::y;
    const Var a2 = plane == Plane::xy ? Var::y : Var::z;
    const Var f1 = Var::t;
    const Var f2 = plane == Plane::xy ? Var::z : Var::x;
    const Range& r1 = b.range(a1);
    const Range& r2 = b.range(a2);
    ConditionReport rep = fresh(id);
    constexpr int grid = 5;
    std::array<double, 4> u{};
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            Point base;
            base[f1] = b.range(f1).at(i / double(grid - 1));
            base[f2] = b.range(f2).at(j / double(grid - 1));
            LowDiscrepancyStream s(4, mix_seed(b.seed, 1000 + static_cast<std::uint64_t>(plane) * 100 + i * grid + j));
            for (std::size_t k = 0; k < b.sample_count; ++k) {
                s.next(u);
                Point p = base;
                Point q = base;
                p[a1] = r1.at(u[0]);
                p[a2] = r2.at(u[1]);
                if (k % 2 == 0) {
                    q[a1] = r1.at(u[2]);
                    q[a2] = r2.at(u[3]);
                } else {
                    q[a1] = clip(r1, p[a1] + 0.02 * r1.width() * (u[2] - 0.5));
                    q[a2] = clip(r2, p[a2] + 0.02 * r2.width() * (u[3] - 0.5));
                }
                Point m = base;
                m[a1] = 0.5 * (p[a1] + q[a1]);
                m[a2] = 0.5 * (p[a2] + q[a2]);
                const double fp = fn(p);
                const double fq = fn(q);
                const double fm = fn(m);
                const double gap = fm - 0.5 * (fp + fq);
                const double tol = rel_tol * (1.0 + std::abs(fp) + std::abs(fq));
                ++rep.samples;
                record(rep, gap - tol, gap, p, q);
            }
        }
    }
    return rep;
}

ConditionReport check_dominance(const std::string& id, const ScalarField& lhs, const ScalarField& rhs,
                                const Box& box, ZRange zr, const std::optional<Expr>& zeta) {
    const Box b = restrict_z(box, zr);
    ConditionReport rep = fresh(id);
    LowDiscrepancyStream s(4, mix_seed(b.seed, zeta ? 2001 : 2000));
    std::array<double, 4> u{};
    for (std::size_t k = 0; k < b.sample_count; ++k) {
        s.next(u);
        const Point p = b.lerp(u[0], u[1], u[2], u[3]);
        const double l = lhs(p);
        const double r = rhs(p);
        ++rep.samples;
        if (zeta) {
            const double mid = p.z * (*zeta)(p.t, p.x);
            const double tol = rel_tol * (1.0 + std::abs(l) + std::abs(mid) + std::abs(r));
            const double gap = std::max(l - mid, mid - r);
            record(rep, gap - tol, gap, p, std::nullopt);
        } else {
            const double tol = rel_tol * (1.0 + std::abs(l) + std::abs(r));
            record(rep, l - r - tol, l - r, p, std::nullopt);
        }
    }
    return rep;
}

ConditionReport check_monotone_in(const std::string& id, const ScalarField& fn, Var var, const Box& box,
                                  ZRange zr) {
    if (var != Var::x && var != Var::z && var != Var::y) throw InputError("monotonicity check needs x, y or z");
    const Box b = restrict_z(box, zr);
    const Range& r = b.range(var);
    ConditionReport rep = fresh(id);
    LowDiscrepancyStream s(5, mix_seed(b.seed, 3000 + static_cast<std::uint64_t>(var)));
    std::array<double, 5> u{};
    for (std::size_t k = 0; k < b.sample_count; ++k) {
        s.next(u);
        Point lo = b.lerp(u[0], u[1], u[2], u[3]);
        Point hi = lo;
        hi[var] = k % 2 == 0 ? r.at(u[4]) : clip(r, lo[var] + 0.02 * r.width() * u[4]);
        if (hi[var] < lo[var]) std::swap(lo, hi);
        const double fl = fn(lo);
        const double fh = fn(hi);
        const double tol = rel_tol * (1.0 + std::abs(fl) + std::abs(fh));
        ++rep.samples;
        record(rep, fl - fh - tol, fl - fh, lo, hi);
    }
    return rep;
}

ConditionSet check_coefficient_order(const DiffusionSpec& d1, const DiffusionSpec& d2, const Box& box) {
    ConditionReport s_order = fresh("sigma_order");
    ConditionReport m_order = fresh("drift_order");
    ConditionReport m_equal = fresh("drift_equal");
    ConditionReport s_pos = fresh("sigma_positive");
    ConditionReport s_equal = fresh("sigma_equal");
    LowDiscrepancyStream s(2, mix_seed(box.seed, 4000));
    std::array<double, 2> u{};
    for (std::size_t k = 0; k < box.sample_count; ++k) {
        s.next(u);
        const Point p{box.t.at(u[0]), box.x.at(u[1]), 0.0, 0.0};
        const double s1 = d1.sigma(p.t, p.x);
        const double s2 = d2.sigma(p.t, p.x);
        const double m1 = d1.mu(p.t, p.x);
        const double m2 = d2.mu(p.t, p.x);
        const double ts = eq_tol * (1.0 + std::abs(s1) + std::abs(s2));
        const double tm = eq_tol * (1.0 + std::abs(m1) + std::abs(m2));
        for (ConditionReport* r : {&s_order, &m_order, &m_equal, &s_pos, &s_equal}) ++r->samples;
        record(s_order, s1 - s2 - ts, s1 - s2, p, std::nullopt);
        record(m_order, m1 - m2 - tm, m1 - m2, p, std::nullopt);
        record(m_equal, std::abs(m1 - m2) - tm, std::abs(m1 - m2), p, std::nullopt);
        record(s_equal, std::abs(s1 - s2) - ts, std::abs(s1 - s2), p, std::nullopt);
        const double worst = std::min(s1, s2);
        if (!(worst > 0.0)) record(s_pos, 1.0, -worst, p, std::nullopt);
    }
    ConditionSet out;
    for (auto* r : {&s_order, &m_order, &m_equal, &s_pos, &s_equal}) out.add(*r);

    const double tx = eq_tol * (1.0 + std::abs(d1.x0) + std::abs(d2.x0));
    ConditionReport x_order = fresh("x0_order");
    ConditionReport x_equal = fresh("x0_equal");
    x_order.samples = x_equal.samples = 1;
    const Point p1{0.0, d1.x0, 0.0, 0.0};
    const Point p2{0.0, d2.x0, 0.0, 0.0};
    record(x_order, d1.x0 - d2.x0 - tx, d1.x0 - d2.x0, p1, p2);
    record(x_equal, std::abs(d1.x0 - d2.x0) - tx, std::abs(d1.x0 - d2.x0), p1, p2);
    out.add(x_order);
    out.add(x_equal);
    return out;
}

Box default_pair_box(const ProblemSpec& p1, const ProblemSpec& p2, std::size_t sample_count, std::uint64_t seed) {
    if (std::abs(p1.horizon - p2.horizon) > 1e-12 * std::max(p1.horizon, p2.horizon)) {
        throw InputError("both problems must share the same horizon T");
    }
    const Range r1 = state_range(p1);
    const Range r2 = state_range(p2);
    const Box b1 = default_box(p1, r1, sample_count, seed);
    const Box b2 = default_box(p2, r2, sample_count, seed);
    Box b = b1;
    b.x = {std::min(r1.lo, r2.lo), std::max(r1.hi, r2.hi)};
    b.y = {std::min(b1.y.lo, b2.y.lo), std::max(b1.y.hi, b2.y.hi)};
    b.z = {std::min(b1.z.lo, b2.z.lo), std::max(b1.z.hi, b2.z.hi)};
    return b;
}

namespace {

struct Requirement {
    const char* result;
    std::vector<std::string> required;
};

const std::vector<Requirement>& result_table() {
    static const std::vector<Requirement> table = {
        {"pp3", {"x0_equal", "sigma_positive", "sigma_order", "B1", "B2"}},
        {"pp1", {"x0_equal", "sigma_positive", "sigma_order", "E1", "E2"}},
        {"pp6", {"x0_equal", "drift_equal", "sigma_positive", "sigma_order", "C'1", "C'2", "C'3"}},
        {"pp4", {"x0_order", "sigma_positive", "sigma_order", "B'1", "B'2", "B'3"}},
        {"pp2", {"x0_order", "sigma_positive", "sigma_order", "E'1", "E'2", "E'3"}},
        {"pp5", {"x0_order", "drift_order", "sigma_positive", "sigma_order", "C1", "C2", "C3", "C4"}},
        {"pp4.1", {"x0_order", "sigma_positive", "sigma_equal", "B''1", "B''2"}},
        {"pp7", {"x0_order", "sigma_positive", "sigma_equal", "D1", "D2", "D3"}},
        {"pp9", {"x0_equal", "sigma_positive", "sigma_order", "F1", "F2"}},
        {"pp10", {"x0_equal", "sigma_positive", "sigma_order", "G1", "G2"}},
    };
    return table;
}

const Requirement& requirement(const std::string& result) {
    for (const auto& r : result_table()) {
        if (result == r.result) return r;
    }
    throw Error("unknown result id " + result);
}

/// Lazily evaluated condition reports for one ordered problem pair.
class Checker {
public:
    Checker(const ProblemSpec& p1, const ProblemSpec& p2, Box box, Expr zeta)
        : p1_(p1),
          p2_(p2),
          box_(std::move(box)),
          zeta_(std::move(zeta)),
          f1_(make_driver(p1.diffusion, p1.generator)),
          f2_(make_driver(p2.diffusion, p2.generator)),
          r1_(make_driver(p1.diffusion, risk_transform(p1.generator))),
          r2_(make_driver(p2.diffusion, risk_transform(p2.generator))) {}

    const ConditionReport& get(const std::string& id) {
        if (const auto* r = set_.find(id)) return *r;
        compute(id);
        return set_.at(id);
    }

    ConditionSet& conditions() { return set_; }

private:
    ScalarField driver(int i) const {
        const DriverF& f = i == 1 ? f1_ : f2_;
        return [&f](const Point& p) { return f(p); };
    }
    ScalarField risk_driver(int i) const {
        const DriverF& f = i == 1 ? r1_ : r2_;
        return [&f](const Point& p) { return f(p); };
    }
    ScalarField gen(int i) const {
        const Expr& g = i == 1 ? p1_.generator.g : p2_.generator.g;
        return [&g](const Point& p) { return g(p); };
    }

    /// Sub-reports: convex_{xy,yz}_{i}[+] for f_i, risk_convex_... for f_i^(-1).
    ConditionReport convex_both(const std::string& prefix, const ScalarField& fn, int i, ZRange zr) {
        const std::string suffix = std::to_string(i) + (zr == ZRange::nonneg_z ? "+" : "");
        const std::string xy = prefix + "convex_xy_" + suffix;
        const std::string yz = prefix + "convex_yz_" + suffix;
        if (!set_.find(xy)) set_.add(check_convexity_2d(xy, fn, Plane::xy, box_, zr));
        if (!set_.find(yz)) set_.add(check_convexity_2d(yz, fn, Plane::yz, box_, zr));
        return all_of(prefix + "convex_" + suffix, {set_.at(xy), set_.at(yz)});
    }

    ConditionReport convex_pair(const std::string& id, bool risk, ZRange zr, bool either) {
        const std::string prefix = risk ? "risk_" : "";
        ConditionReport c1 = convex_both(prefix, risk ? risk_driver(1) : driver(1), 1, zr);
        ConditionReport c2 = convex_both(prefix, risk ? risk_driver(2) : driver(2), 2, zr);
        set_.add(c1);
        set_.add(c2);
        return either ? any_of(id, {c1, c2}) : all_of(id, {c1, c2});
    }

    ConditionReport mono_x_both(const std::string& id) {
        for (int i : {1, 2}) {
            const std::string sub = "nondecreasing_x_g" + std::to_string(i) + "+";
            if (!set_.find(sub)) set_.add(check_monotone_in(sub, gen(i), Var::x, box_, ZRange::nonneg_z));
        }
        return all_of(id, {set_.at("nondecreasing_x_g1+"), set_.at("nondecreasing_x_g2+")});
    }

    ConditionReport z_independent(int i) {
        const std::string id = "z_independent_g" + std::to_string(i);
        const Expr& g = i == 1 ? p1_.generator.g : p2_.generator.g;
        ConditionReport rep = fresh(id);
        if (!g.depends_on(Var::z)) {
            rep.samples = 0;
            rep.note = "g does not reference z";
            return rep;
        }
        LowDiscrepancyStream s(4, mix_seed(box_.seed, 5000 + i));
        std::array<double, 4> u{};
        for (std::size_t k = 0; k < box_.sample_count; ++k) {
            s.next(u);
            const Point p = box_.lerp(u[0], u[1], u[2], u[3]);
            const Point q{p.t, p.x, p.y, 0.0};
            const double a = g(p);
            const double b = g(q);
            const double tol = eq_tol * (1.0 + std::abs(a) + std::abs(b));
            ++rep.samples;
            record(rep, std::abs(a - b) - tol, std::abs(a - b), p, q);
        }
        return rep;
    }

    ConditionReport novikov() {
        ConditionReport rep = fresh("novikov_heuristic");
        auto scan = [&](const Box& b, std::uint64_t salt) {
            LowDiscrepancyStream s(2, mix_seed(b.seed, salt));
            std::array<double, 2> u{};
            double m = 0.0;
            for (std::size_t k = 0; k < b.sample_count; ++k) {
                s.next(u);
                const double t = b.t.at(u[0]);
                const double x = b.x.at(u[1]);
                for (const ProblemSpec* p : {&p1_, &p2_}) {
                    const double v = (p->diffusion.mu(t, x) - zeta_(t, x)) / p->diffusion.sigma(t, x);
                    m = std::max(m, std::isfinite(v) ? std::abs(v) : std::numeric_limits<double>::infinity());
                }
                ++rep.samples;
            }
            return m;
        };
        double inner = 0.0;
        double outer = 0.0;
        try {
            inner = scan(box_, 6000);
            outer = scan(dilate(box_, 4.0, p1_.diffusion.domain), 6001);
        } catch (const NonFinite&) {
            outer = std::numeric_limits<double>::infinity();
        }
        rep.fitted_constant = inner;
        if (std::isfinite(outer) && outer <= 1.5 * inner + 1e-12) {
            rep.note = "heuristic: (mu_i - zeta)/sigma_i bounded on the sampled box";
        } else {
            rep.status = Status::inconclusive;
            rep.note = "heuristic: (mu_i - zeta)/sigma_i grows outside the box";
        }
        return rep;
    }

    void add_coefficient_checks() {
        const ConditionSet coefficients = check_coefficient_order(p1_.diffusion, p2_.diffusion, box_);
        for (const auto& r : coefficients.items()) set_.add(r);
    }

    void compute(const std::string& id) {
        static const std::vector<std::string> coefficient_ids = {
            "sigma_order", "drift_order", "drift_equal", "sigma_positive", "sigma_equal", "x0_order", "x0_equal"};
        if (std::find(coefficient_ids.begin(), coefficient_ids.end(), id) != coefficient_ids.end()) {
            add_coefficient_checks();
            return;
        }
        const auto all = ZRange::all_z;
        const auto pos = ZRange::nonneg_z;
        ConditionReport r;
        if (id == "B1") {
            r = check_dominance(id, driver(1), driver(2), box_, all);
        } else if (id == "B2" || id == "C'3") {
            r = convex_pair(id, false, all, false);
        } else if (id == "B'1" || id == "B''1") {
            r = check_dominance(id, driver(1), driver(2), box_, pos);
        } else if (id == "B'2" || id == "C4") {
            r = convex_pair(id, false, pos, false);
        } else if (id == "B'3" || id == "B''2" || id == "C3" || id == "D3" || id == "E'3") {
            r = mono_x_both(id);
        } else if (id == "C1" || id == "D2") {
            r = check_dominance(id, gen(1), gen(2), box_, pos);
        } else if (id == "C2") {
            ConditionReport m1 = check_monotone_in("nondecreasing_z_g1+", gen(1), Var::z, box_, pos);
            ConditionReport m2 = check_monotone_in("nondecreasing_z_g2+", gen(2), Var::z, box_, pos);
            set_.add(m1);
            set_.add(m2);
            r = any_of(id, {m1, m2});
        } else if (id == "C'1") {
            ConditionReport z1 = z_independent(1);
            ConditionReport z2 = z_independent(2);
            set_.add(z1);
            set_.add(z2);
            r = all_of(id, {z1, z2});
        } else if (id == "C'2") {
            r = check_dominance(id, gen(1), gen(2), box_, all);
        } else if (id == "D1") {
            r = get("drift_order");
            r.id = id;
        } else if (id == "E1") {
            r = check_dominance(id, driver(1), driver(2), box_, all, zeta_);
        } else if (id == "E2") {
            r = convex_pair(id, false, all, true);
        } else if (id == "E'1") {
            r = check_dominance(id, driver(1), driver(2), box_, pos, zeta_);
        } else if (id == "E'2") {
            r = convex_pair(id, false, pos, true);
        } else if (id == "F1") {
            r = check_dominance(id, risk_driver(1), risk_driver(2), box_, all);
        } else if (id == "F2") {
            r = convex_pair(id, true, all, false);
        } else if (id == "G1") {
            r = check_dominance(id, risk_driver(1), risk_driver(2), box_, all, zeta_);
        } else if (id == "G2") {
            r = convex_pair(id, true, all, true);
        } else if (id == "novikov_heuristic") {
            r = novikov();
        } else {
            throw Error("unknown condition id " + id);
        }
        set_.add(std::move(r));
    }

    const ProblemSpec& p1_;
    const ProblemSpec& p2_;
    Box box_;
    Expr zeta_;
    DriverF f1_;
    DriverF f2_;
    DriverF r1_;
    DriverF r2_;
    ConditionSet set_;
};

std::vector<std::string> results_for(OrderType o) {
    switch (o) {
        case OrderType::conv: return {"pp3", "pp1", "pp6"};
        case OrderType::iconv: return {"pp4", "pp2", "pp5"};
        case OrderType::mon: return {"pp4.1", "pp7"};
        default: return {};
    }
}

OrderingVerdict run_attempts(const ProblemSpec& p1, const ProblemSpec& p2, OrderType requested,
                             const std::vector<std::string>& results, const VerdictOptions& opts, const Box& box) {
    p1.validate();
    p2.validate();
    box.validate();
    OrderingVerdict v;
    v.requested = requested;
    v.zeta = opts.zeta ? *opts.zeta : Expr::constant(0.0);
    for (Var w : {Var::y, Var::z}) {
        if (v.zeta.depends_on(w)) throw InputError("zeta may depend on (t, x) only");
    }
    v.box = box;
    Checker checker(p1, p2, box, v.zeta);
    for (const std::string& result : results) {
        const Requirement& req = requirement(result);
        ResultAttempt attempt;
        attempt.result = result;
        attempt.required = req.required;
        for (const std::string& id : req.required) {
            if (!checker.get(id).certified()) attempt.blocking.push_back(id);
        }
        if (result == "pp1" || result == "pp2" || result == "pp10") checker.get("novikov_heuristic");
        attempt.applied = attempt.blocking.empty();
        const bool first = attempt.applied && v.applied_result.empty();
        if (first) {
            v.applied_result = result;
            v.order_type = requested;
        }
        v.attempts.push_back(std::move(attempt));
        if (first && !opts.evaluate_all) break;
    }
    v.conditions = checker.conditions();
    return v;
}

ProblemSpec risk_problem(const ProblemSpec& p) { return p.with_generator(risk_transform(p.generator)); }

Expr reflect_x(const Expr& e) { return e.substitute({{Var::x, -Expr::variable(Var::x)}}); }

/// w = -x: mu(w) = -mu(t,-w), sigma(w) = sigma(t,-w), g(t,w,y,z) = g(t,-w,y,-z), phi(w) = phi(-w).
ProblemSpec reflect(const ProblemSpec& p) {
    ProblemSpec out = p;
    out.diffusion = make_diffusion(-reflect_x(p.diffusion.mu), reflect_x(p.diffusion.sigma), -p.diffusion.x0,
                                   StateDomain::whole_line);
    out.generator = make_generator(
        p.generator.g.substitute({{Var::x, -Expr::variable(Var::x)}, {Var::z, -Expr::variable(Var::z)}}));
    out.payoff.phi = reflect_x(p.payoff.phi);
    return out;
}

Box reflect(const Box& b) {
    Box out = b;
    out.x = {-b.x.hi, -b.x.lo};
    out.z = {-b.z.hi, -b.z.lo};
    return out;
}

}  // namespace

OrderingVerdict verdict(const ProblemSpec& p1, const ProblemSpec& p2, OrderType requested, const VerdictOptions& opts) {
    const Box box = opts.box ? *opts.box : default_pair_box(p1, p2);
    if (std::abs(p1.horizon - p2.horizon) > 1e-12 * std::max(p1.horizon, p2.horizon)) {
        throw InputError("both problems must share the same horizon T");
    }
    switch (requested) {
        case OrderType::conv:
        case OrderType::iconv:
        case OrderType::mon: {
            OrderingVerdict v = run_attempts(p1, p2, requested, results_for(requested), opts, box);
            v.route = "direct";
            return v;
        }
        case OrderType::conc: {
            OrderingVerdict v = run_attempts(risk_problem(p2), risk_problem(p1), OrderType::conv,
                                             results_for(OrderType::conv), opts, box);
            v.requested = OrderType::conc;
            if (v.found()) v.order_type = OrderType::conc;
            v.route = "conv order of the swapped pair with generators g^(-1)";
            return v;
        }
        case OrderType::iconc: {
            VerdictOptions ropts = opts;
            if (opts.zeta) ropts.zeta = -reflect_x(*opts.zeta);
            OrderingVerdict v = run_attempts(reflect(risk_problem(p2)), reflect(risk_problem(p1)), OrderType::iconv,
                                             results_for(OrderType::iconv), ropts, reflect(box));
            v.requested = OrderType::iconc;
            if (v.found()) v.order_type = OrderType::iconc;
            v.route = "iconv order of the swapped pair with generators g^(-1), state reflected x -> -x";
            return v;
        }
        case OrderType::none: break;
    }
    throw InputError("no order type requested");
}

std::vector<PayoffSpec> default_family(OrderType order, double x0) {
    const double s = std::max(std::abs(x0), 1.0);
    const Expr x = Expr::variable(Var::x);
    const Expr c0 = Expr::constant(x0);
    auto strike = [&](double k) { return Expr::call(Expr::Fn::pos, x - Expr::constant(k)); };
    auto id_num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };
    std::vector<PayoffSpec> conv = {
        make_payoff(x, 1.0, true, true, "x"),
        make_payoff(x * x, 2.0, true, false, "x^2"),
    };
    for (double k : {x0 - 0.2 * s, x0, x0 + 0.2 * s}) {
        conv.push_back(make_payoff(strike(k), 1.0, true, true, "call_" + id_num(k)));
    }
    conv.push_back(make_payoff(Expr::call(Expr::Fn::abs, x - c0), 1.0, true, false, "abs_" + id_num(x0)));

    switch (order) {
        case OrderType::conv: return conv;
        case OrderType::iconv: {
            const Expr up = Expr::call(Expr::Fn::pos, x - c0);
            return {make_payoff(x, 1.0, true, true, "x"), make_payoff(up, 1.0, true, true, "call_" + id_num(x0)),
                    make_payoff(up * up, 2.0, true, true, "pos_sq_" + id_num(x0))};
        }
        case OrderType::mon: {
            const double eps = s / 50.0;
            const Expr step = (Expr::constant(1.0) +
                               Expr::call(Expr::Fn::tanh, (x - c0) / Expr::constant(eps))) /
                              Expr::constant(2.0);
            return {make_payoff(x, 1.0, true, true, "x"),
                    make_payoff(Expr::call(Expr::Fn::min, x, c0), 1.0, false, true, "min_" + id_num(x0)),
                    make_payoff(step, 1.0, false, true, "smooth_step_" + id_num(x0))};
        }
        case OrderType::conc: {
            std::vector<PayoffSpec> out;
            for (const auto& p : conv) {
                out.push_back(make_payoff(-p.phi, p.growth_exponent, false, false, "neg_" + p.id));
            }
            return out;
        }
        case OrderType::iconc: {
            const Expr down = Expr::call(Expr::Fn::pos, c0 - x);
            return {make_payoff(x, 1.0, true, true, "x"),
                    make_payoff(Expr::call(Expr::Fn::min, x, c0), 1.0, false, true, "min_" + id_num(x0)),
                    make_payoff(-(down * down), 2.0, false, true, "neg_pos_sq_" + id_num(x0))};
        }
        case OrderType::none: break;
    }
    return {};
}

ConditionReport check_payoff_shape(const PayoffSpec& phi, const std::string& shape, Range x, std::size_t samples,
                                   std::uint64_t seed) {
    Box b;
    b.t = {0.0, 0.0};
    b.x = x;
    b.y = {0.0, 0.0};
    b.z = {0.0, 0.0};
    b.sample_count = samples;
    b.seed = seed;
    const Expr& e = phi.phi;
    const std::string id = phi.id + ":" + shape;
    if (shape == "nondecreasing") {
        return check_monotone_in(id, [&e](const Point& p) { return e(p); }, Var::x, b);
    }
    if (shape != "convex" && shape != "concave") throw InputError("unknown payoff shape '" + shape + "'");
    const double sign = shape == "convex" ? 1.0 : -1.0;
    ConditionReport rep = fresh(id);
    LowDiscrepancyStream s(2, mix_seed(seed, 7000));
    std::array<double, 2> u{};
    for (std::size_t k = 0; k < samples; ++k) {
        s.next(u);
        const double a = x.at(u[0]);
        const double c = k % 2 == 0 ? x.at(u[1]) : clip(x, a + 0.02 * x.width() * (u[1] - 0.5));
        const double fa = sign * e(0.0, a);
        const double fc = sign * e(0.0, c);
        const double fm = sign * e(0.0, 0.5 * (a + c));
        const double gap = fm - 0.5 * (fa + fc);
        const double tol = rel_tol * (1.0 + std::abs(fa) + std::abs(fc));
        ++rep.samples;
        record(rep, gap - tol, gap, Point{0.0, a, 0.0, 0.0}, Point{0.0, c, 0.0, 0.0});
    }
    return rep;
}

bool EmpiricalTable::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const EmpiricalRow& r) { return r.pass; });
}

namespace {

GridSpec grid_for(const ProblemSpec& p, const EngineConfig& e) {
    GridSpec g = default_grid(p, e.grid_L, e.nx, e.nt);
    g.boundary = e.boundary;
    return g;
}

std::vector<std::string> shapes_for(OrderType o) {
    switch (o) {
        case OrderType::conv: return {"convex"};
        case OrderType::iconv: return {"convex", "nondecreasing"};
        case OrderType::mon: return {"nondecreasing"};
        case OrderType::conc: return {"concave"};
        case OrderType::iconc: return {"concave", "nondecreasing"};
        case OrderType::none: break;
    }
    return {};
}

void require_shapes(const std::vector<PayoffSpec>& family, OrderType order, Range x) {
    for (const auto& phi : family) {
        for (const auto& shape : shapes_for(order)) {
            const ConditionReport r = check_payoff_shape(phi, shape, x);
            if (!r.certified()) {
                throw PreconditionViolation("payoff '" + phi.id + "' is not " + shape + " on the sampled range, as the " +
                                            std::string(to_string(order)) + " order requires");
            }
        }
    }
}

/// sign = -1 evaluates -E_g[-phi].
EmpiricalTable run_family(const ProblemSpec& p1, const ProblemSpec& p2, const std::vector<PayoffSpec>& family,
                          OrderType order, const EngineConfig& engine, bool collect_curves, double sign) {
    EmpiricalTable table;
    table.engine = engine.engine;
    table.order = order;
    auto signed_payoff = [&](const PayoffSpec& phi) {
        PayoffSpec out = phi;
        if (sign < 0.0) out.phi = -phi.phi;
        return out;
    };
    if (engine.engine == Engine::pde) {
        const GridSpec g1 = grid_for(p1, engine);
        const GridSpec g2 = grid_for(p2, engine);
        for (const auto& phi : family) {
            const PdeSolution s1 = solve(p1.with_payoff(signed_payoff(phi)), g1);
            const PdeSolution s2 = solve(p2.with_payoff(signed_payoff(phi)), g2);
            EmpiricalRow row;
            row.payoff_id = phi.id;
            row.e1 = sign * g_expectation(s1);
            row.e2 = sign * g_expectation(s2);
            row.difference = row.e2 - row.e1;
            row.tolerance = 1e-3 * (1.0 + std::abs(row.e2));
            row.pass = row.difference >= -row.tolerance;
            table.rows.push_back(row);
            if (collect_curves) {
                int idx = 1;
                for (const PdeSolution* s : {&s1, &s2}) {
                    Curve c;
                    c.payoff_id = phi.id;
                    c.problem = idx++;
                    c.x = s->nodes();
                    const auto u0 = s->u(0);
                    c.value.assign(u0.begin(), u0.end());
                    if (sign < 0.0) {
                        for (double& v : c.value) v = -v;
                    }
                    table.curves.push_back(std::move(c));
                }
            }
        }
        return table;
    }
    const PathEnsemble a = simulate_forward(p1.diffusion, p1.horizon, engine.mc);
    const PathEnsemble b = simulate_forward(p2.diffusion, p2.horizon, a);
    for (const auto& phi : family) {
        const BsdeEstimate e1 = solve_bsde_lsmc(a, p1.generator, signed_payoff(phi), engine.mc);
        const BsdeEstimate e2 = solve_bsde_lsmc(b, p2.generator, signed_payoff(phi), engine.mc);
        const Difference d = pathwise_difference(e1, e2);
        EmpiricalRow row;
        row.payoff_id = phi.id;
        row.e1 = sign * e1.y0_mean;
        row.e2 = sign * e2.y0_mean;
        row.difference = sign * d.mean;
        row.stderr1 = e1.y0_stderr;
        row.stderr2 = e2.y0_stderr;
        row.difference_stderr = d.std_error;
        row.tolerance = 3.0 * d.std_error;
        row.pass = row.difference >= -row.tolerance;
        table.rows.push_back(row);
    }
    return table;
}

Range family_range(const ProblemSpec& p1, const ProblemSpec& p2) {
    const Range r1 = state_range(p1);
    const Range r2 = state_range(p2);
    return {std::min(r1.lo, r2.lo), std::max(r1.hi, r2.hi)};
}

}  // namespace

EmpiricalTable verify_order_empirically(const ProblemSpec& p1, const ProblemSpec& p2,
                                        const std::vector<PayoffSpec>& family, OrderType order,
                                        const EngineConfig& engine, bool collect_curves) {
    if (order == OrderType::none) throw InputError("no order type requested");
    if (std::abs(p1.horizon - p2.horizon) > 1e-12 * std::max(p1.horizon, p2.horizon)) {
        throw InputError("both problems must share the same horizon T");
    }
    require_shapes(family, order, family_range(p1, p2));
    return run_family(p1, p2, family, order, engine, collect_curves, 1.0);
}

RiskComparison risk_compare(const ProblemSpec& p1, const ProblemSpec& p2, const std::vector<PayoffSpec>& family,
                            const VerdictOptions& opts, const EngineConfig& engine) {
    const Box box = opts.box ? *opts.box : default_pair_box(p1, p2);
    RiskComparison out;
    out.verdict = run_attempts(p1, p2, OrderType::conv, {"pp9", "pp10"}, opts, box);
    out.verdict.route = "risk measures via g^(-1)";
    require_shapes(family, OrderType::conv, family_range(p1, p2));
    out.table = run_family(p1, p2, family, OrderType::conv, engine, false, -1.0);
    return out;
}

Valuation value_of(const ProblemSpec& p, const EngineConfig& engine) {
    if (engine.engine == Engine::pde) return Valuation{g_expectation(solve(p, grid_for(p, engine))), std::nullopt};
    const BsdeEstimate e = solve_bsde_lsmc(p, engine.mc);
    return Valuation{e.y0_mean, e.y0_stderr};
}

void to_json(nlohmann::json& j, const ResultAttempt& a) {
    j = nlohmann::json{{"result", a.result}, {"required", a.required}, {"blocking", a.blocking},
                       {"applied", a.applied}};
}

void to_json(nlohmann::json& j, const OrderingVerdict& v) {
    j = nlohmann::json{{"requested", std::string(to_string(v.requested))},
                       {"order_type", std::string(to_string(v.order_type))},
                       {"route", v.route},
                       {"zeta", v.zeta.print()},
                       {"box", v.box},
                       {"attempts", v.attempts},
                       {"conditions", v.conditions.items()}};
    j["applied_result"] = v.applied_result.empty() ? nlohmann::json(nullptr) : nlohmann::json(v.applied_result);
}

void to_json(nlohmann::json& j, const EngineConfig& e) {
    j = nlohmann::json{{"engine", std::string(to_string(e.engine))},
                       {"grid", {{"L", e.grid_L}, {"nx", e.nx}, {"nt", e.nt},
                                 {"boundary", std::string(to_string(e.boundary))}}},
                       {"mc", e.mc}};
}

void to_json(nlohmann::json& j, const EmpiricalRow& r) {
    j = nlohmann::json{{"payoff_id", r.payoff_id}, {"e1", r.e1},           {"e2", r.e2},
                       {"difference", r.difference}, {"tolerance", r.tolerance}, {"pass", r.pass}};
    if (r.stderr1) j["stderr1"] = *r.stderr1;
    if (r.stderr2) j["stderr2"] = *r.stderr2;
    if (r.difference_stderr) j["difference_stderr"] = *r.difference_stderr;
}

void to_json(nlohmann::json& j, const EmpiricalTable& t) {
    j = nlohmann::json{{"engine", std::string(to_string(t.engine))},
                       {"order", std::string(to_string(t.order))},
                       {"rows", t.rows},
                       {"all_pass", t.all_pass()}};
}

}  // namespace gorder
