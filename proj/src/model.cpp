#include "gorder/model.hpp"

#include "gorder/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

namespace gorder {

namespace {

constexpr double normalization_tol = 1e-12;

void require_vars(const Expr& e, std::initializer_list<Var> allowed, const std::string& what) {
    for (Var v : {Var::t, Var::x, Var::y, Var::z}) {
        if (!e.depends_on(v)) continue;
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            throw InputError(what + " may not depend on '" + std::string(var_name(v)) + "'");
        }
    }
}

Box default_probe_box() {
    Box b;
    b.t = {0.0, 10.0};
    b.x = {-1000.0, 1000.0};
    b.y = {-1000.0, 1000.0};
    b.z = {-1000.0, 1000.0};
    b.sample_count = 512;
    b.seed = 7;
    return b;
}

/// Max |g| on sampled (t,x[,y]) with the remaining arguments zeroed. Points
/// where g is non-finite are skipped.
double max_abs_on_axes(const Expr& g, const Box& box, bool vary_y) {
    LowDiscrepancyStream s(3, box.seed);
    std::array<double, 3> u{};
    double worst = 0.0;
    for (std::size_t i = 0; i < box.sample_count; ++i) {
        s.next(u);
        Point p{box.t.at(u[0]), box.x.at(u[1]), vary_y ? box.y.at(u[2]) : 0.0, 0.0};
        try {
            worst = std::max(worst, std::abs(g(p)));
        } catch (const NonFinite&) {
        }
    }
    return worst;
}

void fill_flags(GeneratorSpec& spec, const Box& probe) {
    spec.normalized = max_abs_on_axes(spec.g, probe, false) <= normalization_tol;
    spec.strongly_normalized = spec.normalized && max_abs_on_axes(spec.g, probe, true) <= normalization_tol;
}

Range dilate_range(const Range& r, double factor, bool keep_positive) {
    if (keep_positive && r.lo > 0.0) return {r.lo / factor, r.hi * factor};
    const double c = 0.5 * (r.lo + r.hi);
    const double h = std::max(0.5 * r.width(), 1e-12);
    return {c - factor * h, c + factor * h};
}

struct QuotientScan {
    double max_q = 0.0;
    std::optional<Witness> witness;
    std::size_t pairs = 0;
};

/// Max difference quotient |f(P)-f(Q)|/|P_v-Q_v| over pairs that differ in
/// `var` only. `separation` <= 0 draws the partner anywhere in the range;
/// otherwise the partner sits at relative distance `separation`.
QuotientScan scan_quotients(const std::function<double(const Point&)>& f, Var var, const Box& box,
                            double separation, std::uint64_t seed_salt) {
    QuotientScan out;
    LowDiscrepancyStream s(5, mix_seed(box.seed, seed_salt));
    std::array<double, 5> u{};
    const Range& r = box.range(var);
    if (r.width() <= 0.0) return out;
    for (std::size_t i = 0; i < box.sample_count; ++i) {
        s.next(u);
        Point p = box.lerp(u[0], u[1], u[2], u[3]);
        Point q = p;
        if (separation <= 0.0) {
            q[var] = r.at(u[4]);
        } else {
            const double d = separation * r.width() * (0.5 + u[4]);
            q[var] = p[var] + d <= r.hi ? p[var] + d : p[var] - d;
        }
        const double dv = std::abs(p[var] - q[var]);
        if (dv <= 1e-12 * (1.0 + std::abs(p[var]))) continue;
        const double qv = std::abs(f(p) - f(q)) / dv;
        ++out.pairs;
        if (!out.witness || qv > out.max_q) {
            out.max_q = qv;
            out.witness = Witness{p, q};
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(StateDomain d) noexcept {
    return d == StateDomain::whole_line ? "whole_line" : "positive_halfline";
}

StateDomain parse_state_domain(std::string_view s) {
    if (s == "whole_line") return StateDomain::whole_line;
    if (s == "positive_halfline") return StateDomain::positive_halfline;
    throw InputError("unknown state domain '" + std::string(s) + "'");
}

DiffusionSpec make_diffusion(Expr mu, Expr sigma, double x0, StateDomain domain) {
    require_vars(mu, {Var::t, Var::x}, "drift mu");
    require_vars(sigma, {Var::t, Var::x}, "volatility sigma");
    if (!std::isfinite(x0)) throw InputError("x0 must be finite");
    if (domain == StateDomain::positive_halfline && !(x0 > 0.0)) {
        throw InputError("positive_halfline diffusion requires x0 > 0");
    }
    return DiffusionSpec{std::move(mu), std::move(sigma), x0, domain};
}

DiffusionSpec make_diffusion(std::string_view mu, std::string_view sigma, double x0, StateDomain domain) {
    return make_diffusion(parse(mu), parse(sigma), x0, domain);
}

GeneratorSpec make_generator(Expr g, const std::optional<Box>& probe) {
    GeneratorSpec spec;
    spec.g = std::move(g);
    fill_flags(spec, probe ? *probe : default_probe_box());
    return spec;
}

GeneratorSpec make_generator(std::string_view g) { return make_generator(parse(g)); }

PayoffSpec make_payoff(Expr phi, double growth_exponent, bool convex, bool nondecreasing, std::string id) {
    require_vars(phi, {Var::x}, "payoff phi");
    if (!(growth_exponent >= 1.0) || !std::isfinite(growth_exponent)) {
        throw InputError("payoff growth exponent must be >= 1");
    }
    if (id.empty()) id = phi.print();
    return PayoffSpec{std::move(phi), growth_exponent, convex, nondecreasing, std::move(id)};
}

PayoffSpec make_payoff(std::string_view phi, double growth_exponent, bool convex, bool nondecreasing,
                       std::string id) {
    return make_payoff(parse(phi), growth_exponent, convex, nondecreasing, std::move(id));
}

void ProblemSpec::validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("horizon T must be > 0");
    if (diffusion.domain == StateDomain::positive_halfline && !(diffusion.x0 > 0.0)) {
        throw InputError("positive_halfline diffusion requires x0 > 0");
    }
    require_vars(diffusion.mu, {Var::t, Var::x}, "drift mu");
    require_vars(diffusion.sigma, {Var::t, Var::x}, "volatility sigma");
    require_vars(payoff.phi, {Var::x}, "payoff phi");
}

ProblemSpec ProblemSpec::with_payoff(PayoffSpec p) const {
    ProblemSpec out = *this;
    out.payoff = std::move(p);
    return out;
}

ProblemSpec ProblemSpec::with_generator(GeneratorSpec g) const {
    ProblemSpec out = *this;
    out.generator = std::move(g);
    return out;
}

DriverF::DriverF(DiffusionSpec diffusion, GeneratorSpec generator)
    : diffusion_(std::move(diffusion)), generator_(std::move(generator)) {}

double DriverF::operator()(const Point& p) const {
    const double mu = diffusion_.mu(p.t, p.x);
    const double sigma = diffusion_.sigma(p.t, p.x);
    return p.z * mu + generator_.g(Point{p.t, p.x, p.y, p.z * sigma});
}

DriverF make_driver(const DiffusionSpec& d, const GeneratorSpec& g) { return DriverF(d, g); }

GeneratorSpec risk_transform(const GeneratorSpec& g) {
    const Expr flipped = g.g.substitute({{Var::y, -Expr::variable(Var::y)}, {Var::z, -Expr::variable(Var::z)}});
    GeneratorSpec out = make_generator(-flipped);
    out.lipschitz_bound = g.lipschitz_bound;
    return out;
}

GeneratorSpec scale_generator(const GeneratorSpec& g, double a) {
    if (a == 0.0 || !std::isfinite(a)) throw ZeroScale();
    const Expr ea = Expr::constant(a);
    const Expr scaled = ea * g.g.substitute({{Var::y, Expr::variable(Var::y) / ea}, {Var::z, Expr::variable(Var::z) / ea}});
    GeneratorSpec out = make_generator(scaled);
    out.lipschitz_bound = g.lipschitz_bound;
    return out;
}

VolatilityScale volatility_scale(const ProblemSpec& p, Range x) {
    const bool positive = p.diffusion.domain == StateDomain::positive_halfline;
    constexpr int nt = 9;
    constexpr int nx = 65;
    VolatilityScale out;
    for (int i = 0; i < nt; ++i) {
        const double t = p.horizon * i / (nt - 1);
        for (int j = 0; j < nx; ++j) {
            double xv;
            if (positive && x.lo > 0.0) {
                xv = x.lo * std::pow(x.hi / x.lo, static_cast<double>(j) / (nx - 1));
            } else {
                xv = x.at(static_cast<double>(j) / (nx - 1));
            }
            double s;
            double m;
            try {
                s = std::abs(p.diffusion.sigma(t, xv));
                m = std::abs(p.diffusion.mu(t, xv));
            } catch (const NonFinite&) {
                continue;
            }
            if (positive) {
                s /= xv;
                m /= xv;
            }
            out.sigma_bar = std::max(out.sigma_bar, s);
            out.drift_bar = std::max(out.drift_bar, m);
        }
    }
    return out;
}

Range state_range(const ProblemSpec& p, double L) {
    if (!(L > 0.0)) throw InputError("grid width multiplier L must be > 0");
    const double x0 = p.diffusion.x0;
    const double sqrt_t = std::sqrt(p.horizon);
    const bool positive = p.diffusion.domain == StateDomain::positive_halfline;
    auto from_width = [&](double w) {
        return positive ? Range{x0 * std::exp(-w), x0 * std::exp(w)} : Range{x0 - w, x0 + w};
    };
    // Start from the local scale at x0, then re-sample over the resulting range.
    double w = 0.0;
    {
        double s = std::abs(p.diffusion.sigma(0.0, x0));
        double m = std::abs(p.diffusion.mu(0.0, x0));
        if (positive) {
            s /= x0;
            m /= x0;
        }
        w = L * s * sqrt_t + m * p.horizon;
    }
    const double fallback = positive ? 0.5 : std::max(1.0, 0.5 * std::abs(x0));
    if (!(w > 0.0)) w = fallback;
    for (int pass = 0; pass < 3; ++pass) {
        const VolatilityScale vs = volatility_scale(p, from_width(w));
        double next = L * vs.sigma_bar * sqrt_t + vs.drift_bar * p.horizon;
        if (!(next > 0.0)) next = fallback;
        if (positive) next = std::min(next, 30.0);
        if (std::abs(next - w) <= 1e-9 * w) {
            w = next;
            break;
        }
        w = std::max(w, next);
    }
    return from_width(w);
}

Box default_box(const ProblemSpec& p, Range x, std::size_t sample_count, std::uint64_t seed) {
    Box b;
    b.t = {0.0, p.horizon};
    b.x = x;
    const double m = 10.0 * (1.0 + std::pow(std::abs(p.diffusion.x0), p.payoff.growth_exponent));
    b.y = {-m, m};
    b.z = {-m, m};
    b.sample_count = sample_count;
    b.seed = seed;
    return b;
}

Box dilate(const Box& b, double factor, StateDomain domain) {
    Box out = b;
    out.x = dilate_range(b.x, factor, domain == StateDomain::positive_halfline);
    out.y = dilate_range(b.y, factor, false);
    out.z = dilate_range(b.z, factor, false);
    return out;
}

ConditionReport lipschitz_check(std::string id, const std::function<double(const Point&)>& f, Var var,
                                const Box& box, StateDomain domain) {
    ConditionReport rep;
    rep.id = std::move(id);
    const QuotientScan wide = scan_quotients(f, var, box, 0.0, 1);
    rep.samples = wide.pairs;
    QuotientScan fine1;
    QuotientScan fine2;
    QuotientScan dil;
    try {
        fine1 = scan_quotients(f, var, box, 1e-3, 2);
        fine2 = scan_quotients(f, var, box, 1e-5, 3);
        dil = scan_quotients(f, var, dilate(box, 4.0, domain), 0.0, 4);
    } catch (const NonFinite& e) {
        rep.status = Status::inconclusive;
        rep.note = std::string("evaluation failed outside the box: ") + e.what();
        return rep;
    }
    rep.samples += fine1.pairs + fine2.pairs + dil.pairs;
    const double c = std::max({wide.max_q, fine1.max_q, fine2.max_q});
    const double eps = 1e-9 * (1.0 + c);
    if (dil.max_q > 1.5 * c + eps) {
        rep.status = Status::violated;
        rep.witness = dil.witness;
        rep.max_violation = dil.max_q - c;
        rep.fitted_constant = c;
        rep.note = "difference quotient grows on the dilated box";
        return rep;
    }
    if (fine2.max_q > 2.0 * std::max(fine1.max_q, wide.max_q) + eps) {
        rep.status = Status::inconclusive;
        rep.witness = fine2.witness;
        rep.fitted_constant = c;
        rep.note = "difference quotient grows under pair refinement";
        return rep;
    }
    rep.status = Status::certified;
    rep.fitted_constant = c;
    return rep;
}

namespace {

ConditionReport zero_check(std::string id, const Expr& g, const Box& box, bool vary_y) {
    ConditionReport rep;
    rep.id = std::move(id);
    LowDiscrepancyStream s(3, mix_seed(box.seed, vary_y ? 11 : 10));
    std::array<double, 3> u{};
    rep.status = Status::certified;
    for (std::size_t i = 0; i < box.sample_count; ++i) {
        s.next(u);
        Point p{box.t.at(u[0]), box.x.at(u[1]), vary_y ? box.y.at(u[2]) : 0.0, 0.0};
        const double v = std::abs(g(p));
        ++rep.samples;
        if (v > normalization_tol && v > rep.max_violation) {
            rep.status = Status::violated;
            rep.max_violation = v;
            rep.witness = Witness{p, std::nullopt};
        }
    }
    return rep;
}

/// Max of |phi(x)|/(1+|x|^p) over x in `r` with |x| > `reach`.
std::pair<double, double> shell_ratio(const PayoffSpec& phi, Range r, double reach, std::uint64_t seed,
                                      std::size_t n, std::size_t& samples) {
    const double p = phi.growth_exponent;
    LowDiscrepancyStream s(1, seed);
    double u = 0.0;
    double best = 0.0;
    double best_x = r.lo;
    for (std::size_t i = 0; i < n; ++i) {
        s.next({&u, 1});
        const double x = r.at(u);
        if (std::abs(x) <= reach) continue;
        ++samples;
        const double v = std::abs(phi.phi(0.0, x)) / (1.0 + std::pow(std::abs(x), p));
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    return {best, best_x};
}

ConditionReport growth_check(const PayoffSpec& phi, const Box& box, StateDomain domain) {
    ConditionReport rep;
    rep.id = "A4";
    const bool positive = domain == StateDomain::positive_halfline;
    const auto [c_box, x_box] = shell_ratio(phi, box.x, -1.0, mix_seed(box.seed, 20), box.sample_count, rep.samples);
    const Range mid = dilate_range(box.x, 4.0, positive);
    const Range far = dilate_range(box.x, 16.0, positive);
    const double reach = std::max(std::abs(box.x.lo), std::abs(box.x.hi));
    const double reach_mid = std::max(std::abs(mid.lo), std::abs(mid.hi));
    double c_mid = 0.0;
    double c_far = 0.0;
    double x_far = 0.0;
    try {
        c_mid = shell_ratio(phi, mid, reach, mix_seed(box.seed, 21), box.sample_count, rep.samples).first;
        std::tie(c_far, x_far) =
            shell_ratio(phi, far, reach_mid, mix_seed(box.seed, 22), box.sample_count, rep.samples);
    } catch (const NonFinite& e) {
        rep.status = Status::inconclusive;
        rep.fitted_constant = c_box;
        rep.note = std::string("evaluation failed outside the box: ") + e.what();
        return rep;
    }
    (void)x_box;
    const double c_near = std::max(c_box, c_mid);
    rep.fitted_constant = std::max(c_near, c_far);
    if (c_far > 1.5 * c_near + 1e-12) {
        rep.status = Status::violated;
        rep.max_violation = c_far - c_near;
        rep.witness = Witness{Point{0.0, x_far, 0.0, 0.0}, std::nullopt};
        rep.note = "|phi(x)|/(1+|x|^p) grows outside the box";
    } else {
        rep.status = Status::certified;
    }
    return rep;
}

}  // namespace

AssumptionReport validate_assumptions(const ProblemSpec& p, const Box& box) {
    box.validate();
    p.validate();
    AssumptionReport out;
    out.box = box;
    const StateDomain dom = p.diffusion.domain;

    const auto& mu = p.diffusion.mu;
    const auto& sigma = p.diffusion.sigma;
    const auto& g = p.generator.g;
    ConditionReport a1_mu = lipschitz_check("A1.mu", [&](const Point& q) { return mu(q.t, q.x); }, Var::x, box, dom);
    ConditionReport a1_sigma =
        lipschitz_check("A1.sigma", [&](const Point& q) { return sigma(q.t, q.x); }, Var::x, box, dom);
    ConditionReport a1 = all_of("A1", {a1_mu, a1_sigma});
    if (a1_mu.fitted_constant && a1_sigma.fitted_constant) {
        a1.fitted_constant = std::max(*a1_mu.fitted_constant, *a1_sigma.fitted_constant);
    }
    out.conditions.add(a1_mu);
    out.conditions.add(a1_sigma);
    out.conditions.add(a1);

    std::vector<ConditionReport> a2_parts;
    for (Var v : {Var::x, Var::y, Var::z}) {
        a2_parts.push_back(lipschitz_check("A2." + std::string(var_name(v)), [&](const Point& q) { return g(q); }, v,
                                           box, dom));
        out.conditions.add(a2_parts.back());
    }
    ConditionReport a2 = all_of("A2", a2_parts);
    double c2 = 0.0;
    bool have_c2 = true;
    for (const auto& r : a2_parts) {
        if (r.fitted_constant) {
            c2 = std::max(c2, *r.fitted_constant);
        } else {
            have_c2 = false;
        }
    }
    if (have_c2) a2.fitted_constant = c2;
    out.conditions.add(a2);

    const ConditionReport a3 = zero_check("A3", g, box, false);
    const ConditionReport a3s = zero_check("A3'", g, box, true);
    out.conditions.add(a3);
    out.conditions.add(a3s);
    out.conditions.add(growth_check(p.payoff, box, dom));

    ConditionReport pos;
    pos.id = "sigma_positive";
    pos.status = Status::certified;
    {
        LowDiscrepancyStream s(2, mix_seed(box.seed, 30));
        std::array<double, 2> u{};
        for (std::size_t i = 0; i < box.sample_count; ++i) {
            s.next(u);
            const Point q{box.t.at(u[0]), box.x.at(u[1]), 0.0, 0.0};
            const double v = sigma(q.t, q.x);
            ++pos.samples;
            if (!(v > 0.0) && -v >= pos.max_violation) {
                pos.status = Status::violated;
                pos.max_violation = -v;
                pos.witness = Witness{q, std::nullopt};
            }
        }
    }
    out.conditions.add(pos);

    ConditionReport x0r;
    x0r.id = "x0_domain";
    x0r.samples = 1;
    x0r.status = (dom == StateDomain::whole_line || p.diffusion.x0 > 0.0) ? Status::certified : Status::violated;
    if (!x0r.certified()) x0r.witness = Witness{Point{0.0, p.diffusion.x0, 0.0, 0.0}, std::nullopt};
    out.conditions.add(x0r);

    if (a3s.certified()) {
        out.functional_label = "g-expectation";
    } else if (a3.certified()) {
        out.functional_label = "g-evaluation";
    } else {
        out.functional_label = "raw BSDE value";
    }
    return out;
}

void to_json(nlohmann::json& j, const DiffusionSpec& d) {
    j = nlohmann::json{{"mu", d.mu.print()}, {"sigma", d.sigma.print()}, {"x0", d.x0},
                       {"domain", std::string(to_string(d.domain))}};
}

void to_json(nlohmann::json& j, const GeneratorSpec& g) {
    j = nlohmann::json{{"expr", g.g.print()}, {"normalized", g.normalized},
                       {"strongly_normalized", g.strongly_normalized}};
    if (g.lipschitz_bound) j["lipschitz_bound"] = *g.lipschitz_bound;
}

void to_json(nlohmann::json& j, const PayoffSpec& p) {
    j = nlohmann::json{{"id", p.id}, {"expr", p.phi.print()}, {"growth_exponent", p.growth_exponent},
                       {"convex", p.asserted_convex}, {"nondecreasing", p.asserted_nondecreasing}};
}

void to_json(nlohmann::json& j, const ProblemSpec& p) {
    j = nlohmann::json{{"diffusion", p.diffusion}, {"generator", p.generator}, {"payoff", p.payoff},
                       {"horizon", p.horizon}};
}

void to_json(nlohmann::json& j, const Box& b) {
    auto r = [](const Range& x) { return nlohmann::json::array({x.lo, x.hi}); };
    j = nlohmann::json{{"t", r(b.t)}, {"x", r(b.x)}, {"y", r(b.y)}, {"z", r(b.z)},
                       {"sample_count", b.sample_count}, {"seed", b.seed}};
}

void to_json(nlohmann::json& j, const AssumptionReport& r) {
    j = nlohmann::json{{"functional", r.functional_label}, {"box", r.box},
                       {"conditions", r.conditions.items()}};
}

}  // namespace gorder
