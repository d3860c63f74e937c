#include "gorder/mc.hpp"

#include "gorder/error.hpp"
#include "gorder/parallel.hpp"

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace gorder {

void McConfig::validate() const {
    if (n_paths < 2) throw InputError("mc requires n_paths >= 2");
    if (antithetic && n_paths % 2 != 0) throw InputError("antithetic sampling requires an even n_paths");
    if (n_steps < 1) throw InputError("mc requires n_steps >= 1");
    if (basis_degree < 1) throw InputError("mc requires basis_degree >= 1");
}

namespace {

std::string where(std::size_t step, std::size_t path) {
    return "step " + std::to_string(step) + ", path " + std::to_string(path);
}

/// out[p] = e(t, x[p], y[p], z[p]); on failure names the offending path.
void eval_column(const Expr& e, double t, std::span<const double> x, std::span<const double> y,
                 std::span<const double> z, std::span<double> out, std::size_t step) {
    BatchInput in{Column::broadcast(t), Column::of(x), y.empty() ? Column::broadcast(0.0) : Column::of(y),
                  z.empty() ? Column::broadcast(0.0) : Column::of(z)};
    try {
        e.eval_batch(in, out);
    } catch (const NonFinite& err) {
        for (std::size_t p = 0; p < out.size(); ++p) {
            try {
                e(Point{t, x[p], y.empty() ? 0.0 : y[p], z.empty() ? 0.0 : z[p]});
            } catch (const NonFinite& inner) {
                throw NonFinite(inner.subexpression(), where(step, p));
            }
        }
        throw NonFinite(err.subexpression(), "step " + std::to_string(step));
    }
}

/// Log-state simulation is used when mu/x and sigma/x over a wide band
/// around x0 stay within a small multiple of their values near x0.
bool ratios_bounded(const DiffusionSpec& d, double T) {
    if (d.domain != StateDomain::positive_halfline) return false;
    auto band_max = [&](double width) {
        double m = 0.0;
        constexpr int nt = 5;
        constexpr int nx = 81;
        for (int i = 0; i < nt; ++i) {
            const double t = T * i / (nt - 1);
            for (int j = 0; j < nx; ++j) {
                const double x = d.x0 * std::exp(-width + 2.0 * width * j / (nx - 1));
                try {
                    m = std::max({m, std::abs(d.mu(t, x)) / x, std::abs(d.sigma(t, x)) / x});
                } catch (const NonFinite&) {
                    return std::numeric_limits<double>::infinity();
                }
            }
        }
        return m;
    };
    const double near = band_max(2.0);
    const double far = band_max(8.0);
    return std::isfinite(far) && far <= 4.0 * near + 1e-12;
}

PathEnsemble simulate_with(const DiffusionSpec& d, double T, std::size_t n_paths, std::size_t n_steps,
                           std::vector<double> increments, std::uint64_t seed, bool antithetic) {
    if (!(T > 0.0)) throw InputError("horizon T must be > 0");
    PathEnsemble ens;
    ens.n_paths = n_paths;
    ens.n_steps = n_steps;
    ens.seed = seed;
    ens.antithetic = antithetic;
    ens.increments = std::move(increments);
    ens.times.resize(n_steps + 1);
    for (std::size_t k = 0; k <= n_steps; ++k) ens.times[k] = T * (static_cast<double>(k) / n_steps);
    ens.times[n_steps] = T;
    ens.states.assign((n_steps + 1) * n_paths, d.x0);
    ens.log_scheme = ratios_bounded(d, T);
    const double dt = T / static_cast<double>(n_steps);
    const double floor = 1e-8 * std::abs(d.x0);
    const bool positive = d.domain == StateDomain::positive_halfline;

    std::vector<double> mu(n_paths);
    std::vector<double> sig(n_paths);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = ens.times[k];
        const auto x = std::span<const double>(ens.states).subspan(k * n_paths, n_paths);
        const auto db = ens.increments_at(k);
        auto next = std::span<double>(ens.states).subspan((k + 1) * n_paths, n_paths);
        eval_column(d.mu, t, x, {}, {}, mu, k);
        eval_column(d.sigma, t, x, {}, {}, sig, k);
        for (std::size_t p = 0; p < n_paths; ++p) {
            double v;
            if (ens.log_scheme) {
                const double m = mu[p] / x[p];
                const double s = sig[p] / x[p];
                v = x[p] * std::exp((m - 0.5 * s * s) * dt + s * db[p]);
            } else {
                v = x[p] + mu[p] * dt + sig[p] * db[p];
                if (positive && v < floor) v = floor;
            }
            if (!std::isfinite(v)) throw NonFinite("X", where(k + 1, p));
            next[p] = v;
        }
    }
    return ens;
}

struct Stats {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Mean and standard error; antithetic samples are averaged in pairs first.
Stats mean_stderr(std::span<const double> v, bool antithetic) {
    Stats s;
    const std::size_t n = v.size();
    long double sum = 0.0L;
    for (double x : v) sum += x;
    s.mean = static_cast<double>(sum / n);
    const std::size_t groups = antithetic ? n / 2 : n;
    if (groups < 2) return s;
    long double ss = 0.0L;
    for (std::size_t i = 0; i < groups; ++i) {
        const double x = antithetic ? 0.5 * (v[2 * i] + v[2 * i + 1]) : v[i];
        const long double d = x - s.mean;
        ss += d * d;
    }
    const double var = static_cast<double>(ss / (groups - 1));
    s.std_error = std::sqrt(var / static_cast<double>(groups));
    return s;
}

struct Fit {
    double center = 0.0;
    double scale = 1.0;
    std::vector<double> coef;
    bool reduced = false;
};

/// Least-squares fit of target on 1, s, ..., s^degree with s = (x - center) / scale.
Fit fit_polynomial(std::span<const double> x, std::span<const double> target, int degree) {
    Fit f;
    const std::size_t n = x.size();
    long double sx = 0.0L;
    for (double v : x) sx += v;
    f.center = static_cast<double>(sx / n);
    long double ss = 0.0L;
    for (double v : x) ss += (v - f.center) * (v - f.center);
    const double sd = std::sqrt(static_cast<double>(ss / n));
    if (!(sd > 1e-12 * (1.0 + std::abs(f.center)))) {
        long double st = 0.0L;
        for (double v : target) st += v;
        f.scale = 1.0;
        f.coef = {static_cast<double>(st / n)};
        return f;
    }
    f.scale = sd;
    const int q = 2 * degree;
    std::vector<double> moments(q + 1, 0.0);
    std::vector<double> rhs(degree + 1, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const double s = (x[p] - f.center) / sd;
        double pw = 1.0;
        for (int i = 0; i <= q; ++i) {
            moments[i] += pw;
            if (i <= degree) rhs[i] += pw * target[p];
            pw *= s;
        }
    }
    for (int d = degree; d >= 1; --d) {
        Eigen::MatrixXd a(d + 1, d + 1);
        Eigen::VectorXd b(d + 1);
        for (int i = 0; i <= d; ++i) {
            b(i) = rhs[i] / static_cast<double>(n);
            for (int j = 0; j <= d; ++j) a(i, j) = moments[i + j] / static_cast<double>(n);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            f.reduced = true;
            continue;
        }
        const auto diag = ldlt.vectorD();
        const double dmax = diag.cwiseAbs().maxCoeff();
        const double dmin = diag.cwiseAbs().minCoeff();
        if (!(dmin > 1e-13 * dmax)) {
            f.reduced = true;
            continue;
        }
        const Eigen::VectorXd c = ldlt.solve(b);
        if (!c.allFinite()) {
            f.reduced = true;
            continue;
        }
        f.coef.assign(c.data(), c.data() + c.size());
        return f;
    }
    f.reduced = true;
    f.coef = {rhs[0] / static_cast<double>(n)};
    return f;
}

void predict(const Fit& f, std::span<const double> x, std::span<double> out) {
    for (std::size_t p = 0; p < x.size(); ++p) {
        const double s = (x[p] - f.center) / f.scale;
        double acc = 0.0;
        for (std::size_t i = f.coef.size(); i-- > 0;) acc = acc * s + f.coef[i];
        out[p] = acc;
    }
}

}  // namespace

std::vector<double> brownian_increments(const McConfig& cfg, double dt) {
    cfg.validate();
    const std::size_t n = cfg.n_paths;
    const std::size_t steps = cfg.n_steps;
    std::vector<double> inc(n * steps);
    const double sd = std::sqrt(dt);
    const std::size_t streams = cfg.antithetic ? n / 2 : n;
    parallel_for(streams, [&](std::size_t b, std::size_t e) {
        constexpr std::size_t block = 64;
        std::vector<std::mt19937_64> rngs;
        rngs.reserve(block);
        for (std::size_t b0 = b; b0 < e; b0 += block) {
            const std::size_t b1 = std::min(e, b0 + block);
            rngs.clear();
            for (std::size_t s = b0; s < b1; ++s) rngs.emplace_back(mix_seed(cfg.seed, s));
            boost::random::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t k = 0; k < steps; ++k) {
                double* row = inc.data() + k * n;
                for (std::size_t s = b0; s < b1; ++s) {
                    const double v = sd * normal(rngs[s - b0]);
                    if (cfg.antithetic) {
                        row[2 * s] = v;
                        row[2 * s + 1] = -v;
                    } else {
                        row[s] = v;
                    }
                }
            }
        }
    });
    return inc;
}

PathEnsemble simulate_forward(const DiffusionSpec& d, double T, const McConfig& cfg) {
    cfg.validate();
    if (!(T > 0.0)) throw InputError("horizon T must be > 0");
    const double dt = T / static_cast<double>(cfg.n_steps);
    return simulate_with(d, T, cfg.n_paths, cfg.n_steps, brownian_increments(cfg, dt), cfg.seed, cfg.antithetic);
}

PathEnsemble simulate_forward(const DiffusionSpec& d, double T, const PathEnsemble& noise) {
    if (std::abs(noise.times.back() - T) > 1e-12 * T) {
        throw InputError("common random numbers require the same horizon");
    }
    return simulate_with(d, T, noise.n_paths, noise.n_steps, noise.increments, noise.seed, noise.antithetic);
}

BsdeEstimate solve_bsde_lsmc(const PathEnsemble& paths, const GeneratorSpec& g, const PayoffSpec& phi,
                             const McConfig& cfg) {
    cfg.validate();
    const std::size_t n = paths.n_paths;
    const std::size_t steps = paths.n_steps;
    if (n < 2 || steps < 1 || paths.states.size() != (steps + 1) * n) {
        throw InputError("path ensemble is inconsistent with the configuration");
    }
    const double dt = paths.dt();
    BsdeEstimate est;
    est.n_paths = n;
    est.n_steps = steps;
    est.seed = paths.seed;
    est.antithetic = paths.antithetic;
    est.fits.resize(steps);

    std::vector<double> y(n);
    eval_column(phi.phi, paths.times.back(), paths.states_at(steps), {}, {}, y, steps);
    std::vector<double> yhat(n);
    std::vector<double> zt(n);
    std::vector<double> zhat(n);
    std::vector<double> gv(n);
    for (std::size_t k = steps; k-- > 0;) {
        const auto x = paths.states_at(k);
        const auto db = paths.increments_at(k);
        const Fit fy = fit_polynomial(x, y, cfg.basis_degree);
        predict(fy, x, yhat);
        for (std::size_t p = 0; p < n; ++p) zt[p] = (y[p] - yhat[p]) * db[p] / dt;
        const Fit fz = fit_polynomial(x, zt, cfg.basis_degree);
        predict(fz, x, zhat);
        if (fy.reduced) ++est.fallbacks;
        if (fz.reduced) ++est.fallbacks;
        eval_column(g.g, paths.times[k], x, yhat, zhat, gv, k);
        for (std::size_t p = 0; p < n; ++p) y[p] += gv[p] * dt;
        est.fits[k] = StepFit{fy.center, fy.scale, fy.coef, fz.coef};
        if (k == 0) {
            long double s = 0.0L;
            for (double v : zhat) s += v;
            est.z0_mean = static_cast<double>(s / n);
        }
    }
    const Stats st = mean_stderr(y, paths.antithetic);
    est.y0_mean = st.mean;
    est.y0_stderr = st.std_error;
    est.y0_paths = std::move(y);
    return est;
}

BsdeEstimate solve_bsde_lsmc(const ProblemSpec& p, const McConfig& cfg) {
    p.validate();
    const PathEnsemble paths = simulate_forward(p.diffusion, p.horizon, cfg);
    return solve_bsde_lsmc(paths, p.generator, p.payoff, cfg);
}

BsdeEstimate linear_bsde_closed_form(const PathEnsemble& paths, const Expr& a, const Expr& b, const Expr& c,
                                     const Expr& k, const PayoffSpec& phi) {
    for (const Expr* e : {&a, &b, &c, &k}) {
        if (e->depends_on(Var::y) || e->depends_on(Var::z)) {
            throw InputError("linear coefficients a, b, c, k must depend on (t, x) only");
        }
    }
    const std::size_t n = paths.n_paths;
    const std::size_t steps = paths.n_steps;
    const double dt = paths.dt();
    std::vector<double> log_gamma(n, 0.0);
    std::vector<double> acc(n, 0.0);
    std::vector<double> av(n), bv(n), cv(n), kv(n);
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = paths.times[s];
        const auto x = paths.states_at(s);
        const auto db = paths.increments_at(s);
        eval_column(a, t, x, {}, {}, av, s);
        eval_column(b, t, x, {}, {}, bv, s);
        eval_column(c, t, x, {}, {}, cv, s);
        eval_column(k, t, x, {}, {}, kv, s);
        for (std::size_t p = 0; p < n; ++p) {
            const double gamma = std::exp(log_gamma[p]);
            acc[p] += (av[p] * x[p] + kv[p]) * gamma * dt;
            log_gamma[p] += (bv[p] - 0.5 * cv[p] * cv[p]) * dt + cv[p] * db[p];
        }
    }
    std::vector<double> terminal(n);
    eval_column(phi.phi, paths.times.back(), paths.states_at(steps), {}, {}, terminal, steps);
    BsdeEstimate est;
    est.n_paths = n;
    est.n_steps = steps;
    est.seed = paths.seed;
    est.antithetic = paths.antithetic;
    est.y0_paths.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        const double v = std::exp(log_gamma[p]) * terminal[p] + acc[p];
        if (!std::isfinite(v)) throw NonFinite("Gamma_T phi(X_T)", where(steps, p));
        est.y0_paths[p] = v;
    }
    const Stats st = mean_stderr(est.y0_paths, paths.antithetic);
    est.y0_mean = st.mean;
    est.y0_stderr = st.std_error;
    return est;
}

BsdeEstimate linear_bsde_closed_form(const DiffusionSpec& d, const Expr& a, const Expr& b, const Expr& c,
                                     const Expr& k, const PayoffSpec& phi, double T, const McConfig& cfg) {
    const PathEnsemble paths = simulate_forward(d, T, cfg);
    return linear_bsde_closed_form(paths, a, b, c, k, phi);
}

Difference pathwise_difference(const BsdeEstimate& lhs, const BsdeEstimate& rhs) {
    if (lhs.y0_paths.size() != rhs.y0_paths.size() || lhs.y0_paths.empty()) {
        throw InputError("pathwise difference needs estimates on the same paths");
    }
    std::vector<double> d(lhs.y0_paths.size());
    for (std::size_t p = 0; p < d.size(); ++p) d[p] = rhs.y0_paths[p] - lhs.y0_paths[p];
    const Stats s = mean_stderr(d, lhs.antithetic && rhs.antithetic);
    return Difference{s.mean, s.std_error};
}

double monotone_coupling_check(const DiffusionSpec& d, double x_lo, double x_hi, double T, const McConfig& cfg) {
    if (!(x_lo <= x_hi)) throw InputError("monotone coupling check requires x_lo <= x_hi");
    DiffusionSpec lo = d;
    DiffusionSpec hi = d;
    lo.x0 = x_lo;
    hi.x0 = x_hi;
    const PathEnsemble a = simulate_forward(lo, T, cfg);
    const PathEnsemble b = simulate_forward(hi, T, a);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        if (b.states[i] < a.states[i]) ++bad;
    }
    return static_cast<double>(bad) / static_cast<double>(a.states.size());
}

DependenceTable continuous_dependence_experiment(const ProblemSpec& base, const std::vector<ProblemSpec>& perturbed,
                                                 const McConfig& cfg, const std::vector<double>& sizes,
                                                 const std::vector<std::string>& labels) {
    if (!sizes.empty() && sizes.size() != perturbed.size()) {
        throw InputError("perturbation sizes must match the perturbed specs");
    }
    base.validate();
    DependenceTable table;
    double shared = 0.0;
    auto check = [&](const ProblemSpec& p, const std::string& label) {
        Box box = default_box(p, state_range(p), 500, cfg.seed);
        const AssumptionReport rep = validate_assumptions(p, box);
        for (const char* id : {"A1", "A2", "A4"}) {
            const ConditionReport& r = rep.conditions.at(id);
            if (r.status == Status::violated) {
                throw PreconditionViolation("continuous dependence: " + std::string(id) + " violated for " + label);
            }
            if (r.fitted_constant) shared = std::max(shared, *r.fitted_constant);
        }
        return rep.conditions.at("A1").certified() && rep.conditions.at("A2").certified() &&
               rep.conditions.at("A4").certified();
    };
    check(base, "base");

    const PathEnsemble base_paths = simulate_forward(base.diffusion, base.horizon, cfg);
    const BsdeEstimate y = solve_bsde_lsmc(base_paths, base.generator, base.payoff, cfg);
    table.base_y0 = y.y0_mean;
    table.base_stderr = y.y0_stderr;
    for (std::size_t i = 0; i < perturbed.size(); ++i) {
        const ProblemSpec& p = perturbed[i];
        p.validate();
        DependenceRow row;
        row.label = i < labels.size() ? labels[i] : "spec " + std::to_string(i + 1);
        if (!sizes.empty()) row.size = sizes[i];
        row.assumptions_certified = check(p, row.label);
        const PathEnsemble paths = simulate_forward(p.diffusion, p.horizon, base_paths);
        const BsdeEstimate yn = solve_bsde_lsmc(paths, p.generator, p.payoff, cfg);
        const Difference d = pathwise_difference(y, yn);
        row.y0 = yn.y0_mean;
        row.mean_sq = d.mean * d.mean;
        row.std_error = 2.0 * std::abs(d.mean) * d.std_error + d.std_error * d.std_error;
        table.rows.push_back(std::move(row));
    }
    table.shared_constant = shared;

    std::vector<std::pair<double, double>> pts;
    for (const auto& r : table.rows) {
        if (r.size && *r.size > 0.0 && r.mean_sq > 0.0) pts.emplace_back(std::log(*r.size), std::log(r.mean_sq));
    }
    if (pts.size() >= 2) {
        double mx = 0.0;
        double my = 0.0;
        for (const auto& [a, b] : pts) {
            mx += a;
            my += b;
        }
        mx /= pts.size();
        my /= pts.size();
        double sxy = 0.0;
        double sxx = 0.0;
        for (const auto& [a, b] : pts) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
        }
        if (sxx > 0.0) table.fitted_slope = sxy / sxx;
    }
    table.note = "convergence is observed along the supplied sequence only and is not certified";
    return table;
}

void to_json(nlohmann::json& j, const McConfig& c) {
    j = nlohmann::json{{"paths", c.n_paths}, {"steps", c.n_steps}, {"seed", c.seed},
                       {"basis_degree", c.basis_degree}, {"antithetic", c.antithetic}};
}

void to_json(nlohmann::json& j, const BsdeEstimate& e) {
    j = nlohmann::json{{"y0_mean", e.y0_mean}, {"y0_stderr", e.y0_stderr}, {"n_paths", e.n_paths},
                       {"n_steps", e.n_steps}, {"seed", e.seed}};
}

void to_json(nlohmann::json& j, const DependenceTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json row{{"label", r.label}, {"y0", r.y0}, {"mean_sq", r.mean_sq}, {"stderr", r.std_error},
                           {"assumptions_certified", r.assumptions_certified}};
        row["size"] = r.size ? nlohmann::json(*r.size) : nlohmann::json(nullptr);
        rows.push_back(std::move(row));
    }
    j = nlohmann::json{{"base_y0", t.base_y0}, {"base_stderr", t.base_stderr}, {"rows", rows}, {"note", t.note}};
    j["fitted_slope"] = t.fitted_slope ? nlohmann::json(*t.fitted_slope) : nlohmann::json(nullptr);
    j["shared_constant"] = t.shared_constant ? nlohmann::json(*t.shared_constant) : nlohmann::json(nullptr);
}

}  // namespace gorder
