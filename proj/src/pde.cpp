#include "gorder/pde.hpp"

#include "gorder/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace gorder {

std::string_view to_string(Spacing s) noexcept { return s == Spacing::uniform ? "uniform" : "log"; }

std::string_view to_string(Boundary b) noexcept {
    switch (b) {
        case Boundary::second_derivative_zero: return "second_derivative_zero";
        case Boundary::third_derivative_zero: return "third_derivative_zero";
        case Boundary::dirichlet_payoff: return "dirichlet_payoff";
    }
    return "?";
}

Spacing parse_spacing(std::string_view s) {
    if (s == "uniform") return Spacing::uniform;
    if (s == "log") return Spacing::log;
    throw InputError("unknown grid spacing '" + std::string(s) + "'");
}

Boundary parse_boundary(std::string_view s) {
    if (s == "second_derivative_zero") return Boundary::second_derivative_zero;
    if (s == "third_derivative_zero") return Boundary::third_derivative_zero;
    if (s == "dirichlet_payoff") return Boundary::dirichlet_payoff;
    throw InputError("unknown boundary condition '" + std::string(s) + "'");
}

void GridSpec::validate() const {
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < x_max)) {
        throw InputError("grid requires finite x_min < x_max");
    }
    if (nx < 3) throw InputError("grid requires nx >= 3");
    if (boundary == Boundary::third_derivative_zero && nx < 5) {
        throw InputError("third_derivative_zero boundary requires nx >= 5");
    }
    if (nt < 1) throw InputError("grid requires nt >= 1");
    if (spacing == Spacing::log && !(x_min > 0.0)) throw InputError("log spacing requires x_min > 0");
}

std::vector<double> GridSpec::nodes() const {
    validate();
    std::vector<double> out(nx);
    const double n = static_cast<double>(nx - 1);
    if (spacing == Spacing::uniform) {
        for (std::size_t i = 0; i < nx; ++i) out[i] = x_min + (x_max - x_min) * (static_cast<double>(i) / n);
    } else {
        const double a = std::log(x_min);
        const double b = std::log(x_max);
        for (std::size_t i = 0; i < nx; ++i) out[i] = std::exp(a + (b - a) * (static_cast<double>(i) / n));
    }
    out.front() = x_min;
    out.back() = x_max;
    return out;
}

GridSpec default_grid(const ProblemSpec& p, double L, std::size_t nx, std::size_t nt) {
    const Range r = state_range(p, L);
    GridSpec g;
    g.x_min = r.lo;
    g.x_max = r.hi;
    g.nx = nx;
    g.nt = nt;
    g.spacing = p.diffusion.domain == StateDomain::positive_halfline ? Spacing::log : Spacing::uniform;
    g.boundary = Boundary::second_derivative_zero;
    return g;
}

PdeSolution::PdeSolution(ProblemSpec problem, GridSpec grid, std::vector<double> times, std::vector<double> nodes,
                         std::vector<double> u, std::vector<double> ux, std::vector<double> uxx)
    : problem_(std::move(problem)),
      grid_(grid),
      times_(std::move(times)),
      nodes_(std::move(nodes)),
      u_(std::move(u)),
      ux_(std::move(ux)),
      uxx_(std::move(uxx)) {}

std::span<const double> PdeSolution::row(const std::vector<double>& a, std::size_t layer) const {
    if (layer >= times_.size()) throw OutOfGrid("layer index out of range");
    return std::span<const double>(a).subspan(layer * nodes_.size(), nodes_.size());
}

double PdeSolution::value_at(std::size_t layer, double x) const {
    const auto v = u(layer);
    if (!(x >= nodes_.front() && x <= nodes_.back())) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "x = %.17g outside grid [%.17g, %.17g]", x, nodes_.front(), nodes_.back());
        throw OutOfGrid(buf);
    }
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    std::size_t i = it == nodes_.end() ? nodes_.size() - 1 : static_cast<std::size_t>(it - nodes_.begin());
    if (i == 0) i = 1;
    const double x0 = nodes_[i - 1];
    const double x1 = nodes_[i];
    if (x == x1) return v[i];
    if (x == x0) return v[i - 1];
    const double w = (x - x0) / (x1 - x0);
    return (1.0 - w) * v[i - 1] + w * v[i];
}

namespace {

std::string where(std::size_t step, std::size_t node) {
    return "step " + std::to_string(step) + ", node " + std::to_string(node);
}

double eval_at(const Expr& e, const Point& p, std::size_t step, std::size_t node) {
    try {
        return e(p);
    } catch (const NonFinite& err) {
        throw NonFinite(err.subexpression(), where(step, node));
    }
}

/// Central (nonuniform) first and second differences; one-sided at the ends.
void differentiate(std::span<const double> x, std::span<const double> u, std::span<double> ux,
                   std::span<double> uxx) {
    const std::size_t n = x.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hm = x[i] - x[i - 1];
        const double hp = x[i + 1] - x[i];
        const double dm = (u[i] - u[i - 1]) / hm;
        const double dp = (u[i + 1] - u[i]) / hp;
        ux[i] = (hp * dm + hm * dp) / (hm + hp);
        uxx[i] = 2.0 * (dp - dm) / (hm + hp);
    }
    ux[0] = (u[1] - u[0]) / (x[1] - x[0]);
    ux[n - 1] = (u[n - 1] - u[n - 2]) / (x[n - 1] - x[n - 2]);
    uxx[0] = uxx[1];
    uxx[n - 1] = uxx[n - 2];
}

/// Weights expressing u(x0) through u(x1), u(x2) and, for quadratic
/// extrapolation, u(x3).
std::array<double, 3> extrapolation_weights(double x0, double x1, double x2, double x3, bool quadratic) {
    if (!quadratic) {
        const double r = (x1 - x0) / (x2 - x1);
        return {1.0 + r, -r, 0.0};
    }
    return {(x0 - x2) * (x0 - x3) / ((x1 - x2) * (x1 - x3)), (x0 - x1) * (x0 - x3) / ((x2 - x1) * (x2 - x3)),
            (x0 - x1) * (x0 - x2) / ((x3 - x1) * (x3 - x2))};
}

/// Thomas algorithm; a is the sub-diagonal, c the super-diagonal.
void thomas(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c, std::vector<double>& d,
            std::vector<double>& out) {
    const std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    out[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = (d[i] - c[i] * out[i + 1]) / b[i];
}

/// Largest local slopes of g in y and z around the given layer values.
void probe_slopes(const Expr& g, double t, std::span<const double> x, std::span<const double> y,
                  std::span<const double> z, double& ly, double& lz) {
    const std::size_t n = x.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 48);
    for (std::size_t i = 1; i + 1 < n; i += stride) {
        const double hy = 1e-4 * (1.0 + std::abs(y[i]));
        const double hz = 1e-4 * (1.0 + std::abs(z[i]));
        try {
            const double gy = std::abs(g(Point{t, x[i], y[i] + hy, z[i]}) - g(Point{t, x[i], y[i] - hy, z[i]}));
            const double gz = std::abs(g(Point{t, x[i], y[i], z[i] + hz}) - g(Point{t, x[i], y[i], z[i] - hz}));
            ly = std::max(ly, gy / (2.0 * hy));
            lz = std::max(lz, gz / (2.0 * hz));
        } catch (const NonFinite&) {
        }
    }
}

}  // namespace

PdeSolution solve(const ProblemSpec& p, const GridSpec& grid) {
    p.validate();
    grid.validate();
    if (p.diffusion.domain == StateDomain::positive_halfline && !(grid.x_min > 0.0)) {
        throw InputError("positive_halfline problems need a grid with x_min > 0");
    }
    if (!(p.diffusion.x0 >= grid.x_min && p.diffusion.x0 <= grid.x_max)) {
        throw InputError("grid does not cover x0");
    }
    const std::vector<double> x = grid.nodes();
    const std::size_t nx = grid.nx;
    const std::size_t nt = grid.nt;
    const double dt = p.horizon / static_cast<double>(nt);
    std::vector<double> times(nt + 1);
    for (std::size_t n = 0; n <= nt; ++n) times[n] = p.horizon * (static_cast<double>(n) / static_cast<double>(nt));
    times[nt] = p.horizon;

    std::vector<double> u((nt + 1) * nx);
    std::vector<double> ux((nt + 1) * nx);
    std::vector<double> uxx((nt + 1) * nx);
    auto layer = [nx](std::vector<double>& a, std::size_t n) { return std::span<double>(a).subspan(n * nx, nx); };

    {
        auto un = layer(u, nt);
        for (std::size_t i = 0; i < nx; ++i) un[i] = eval_at(p.payoff.phi, Point{p.horizon, x[i], 0.0, 0.0}, nt, i);
        differentiate(x, un, layer(ux, nt), layer(uxx, nt));
    }
    std::vector<double> phi_boundary{u[nt * nx], u[nt * nx + nx - 1]};

    const Expr& mu = p.diffusion.mu;
    const Expr& sigma = p.diffusion.sigma;
    const Expr& g = p.generator.g;
    const bool mu_const_t = !mu.depends_on(Var::t);
    const bool sigma_const_t = !sigma.depends_on(Var::t);
    std::vector<double> mu_v(nx);
    std::vector<double> sig_v(nx);
    std::vector<double> sig_next(nx);
    auto fill_coeffs = [&](double t, std::size_t step, std::vector<double>& m, std::vector<double>& s, bool do_mu) {
        for (std::size_t i = 0; i < nx; ++i) {
            if (do_mu) m[i] = eval_at(mu, Point{t, x[i], 0.0, 0.0}, step, i);
            s[i] = eval_at(sigma, Point{t, x[i], 0.0, 0.0}, step, i);
        }
    };
    fill_coeffs(p.horizon, nt, mu_v, sig_next, false);

    const std::size_t m = nx - 2;
    const bool quadratic = grid.boundary == Boundary::third_derivative_zero;
    const std::array<double, 3> wl =
        extrapolation_weights(x[0], x[1], x[2], x[std::min<std::size_t>(3, nx - 1)], quadratic);
    const std::array<double, 3> wr =
        extrapolation_weights(x[nx - 1], x[nx - 2], x[nx - 3], x[nx >= 4 ? nx - 4 : 0], quadratic);
    std::vector<double> lo(m), di(m), up(m), rhs(m), sol(m);
    std::vector<double> zv(nx);
    const std::size_t probe_every = std::max<std::size_t>(1, nt / 8);
    bool coeffs_ready = false;

    for (std::size_t step = nt; step-- > 0;) {
        const double t_now = times[step];
        const double t_prev = times[step + 1];
        auto u_prev = layer(u, step + 1);
        auto ux_prev = layer(ux, step + 1);

        if (!coeffs_ready || !mu_const_t || !sigma_const_t) {
            fill_coeffs(t_now, step, mu_v, sig_v, true);
            coeffs_ready = true;
        }

        for (std::size_t i = 0; i < nx; ++i) zv[i] = sig_next[i] * ux_prev[i];
        if ((nt - 1 - step) % probe_every == 0) {
            double ly = 0.0;
            double lz = 0.0;
            probe_slopes(g, t_prev, x, u_prev, zv, ly, lz);
            const double load = dt * (ly + lz * lz);
            if (load > 1.0) {
                char buf[256];
                std::snprintf(buf, sizeof buf,
                              "explicit generator term too large for the time step: dt*(Ly + Lz^2) = %.3g > 1 "
                              "(Ly = %.3g, Lz = %.3g, dt = %.3g); increase nt",
                              load, ly, lz, dt);
                throw GridTooCoarse(buf);
            }
        }

        for (std::size_t i = 1; i + 1 < nx; ++i) {
            const double hm = x[i] - x[i - 1];
            const double hp = x[i + 1] - x[i];
            const double d2 = 0.5 * sig_v[i] * sig_v[i];
            double a = 2.0 * d2 / (hm * (hm + hp));
            double c = 2.0 * d2 / (hp * (hm + hp));
            double b = -(a + c);
            const double ca = -mu_v[i] * hp / (hm * (hm + hp));
            const double cc = mu_v[i] * hm / (hp * (hm + hp));
            if (a + ca >= 0.0 && c + cc >= 0.0) {
                a += ca;
                c += cc;
                b += -(ca + cc);
            } else if (mu_v[i] > 0.0) {
                c += mu_v[i] / hp;
                b -= mu_v[i] / hp;
            } else {
                a += -mu_v[i] / hm;
                b -= -mu_v[i] / hm;
            }
            const double gv = eval_at(g, Point{t_prev, x[i], u_prev[i], zv[i]}, step, i);
            const std::size_t k = i - 1;
            lo[k] = -dt * a;
            di[k] = 1.0 - dt * b;
            up[k] = -dt * c;
            rhs[k] = u_prev[i] + dt * gv;
        }

        if (grid.boundary == Boundary::dirichlet_payoff) {
            rhs[0] -= lo[0] * phi_boundary[0];
            rhs[m - 1] -= up[m - 1] * phi_boundary[1];
        } else {
            // u_0 = wl[0] u_1 + wl[1] u_2 + wl[2] u_3, mirrored at the right end.
            const double e0 = lo[0] * wl[2];
            di[0] += lo[0] * wl[0];
            up[0] += lo[0] * wl[1];
            if (e0 != 0.0) {
                const double f = e0 / up[1];
                di[0] -= f * lo[1];
                up[0] -= f * di[1];
                rhs[0] -= f * rhs[1];
            }
            const double e1 = up[m - 1] * wr[2];
            di[m - 1] += up[m - 1] * wr[0];
            lo[m - 1] += up[m - 1] * wr[1];
            if (e1 != 0.0) {
                const double f = e1 / lo[m - 2];
                lo[m - 1] -= f * di[m - 2];
                di[m - 1] -= f * up[m - 2];
                rhs[m - 1] -= f * rhs[m - 2];
            }
        }
        lo[0] = 0.0;
        up[m - 1] = 0.0;

        thomas(lo, di, up, rhs, sol);

        auto un = layer(u, step);
        for (std::size_t k = 0; k < m; ++k) un[k + 1] = sol[k];
        if (grid.boundary == Boundary::dirichlet_payoff) {
            un[0] = phi_boundary[0];
            un[nx - 1] = phi_boundary[1];
        } else {
            un[0] = wl[0] * un[1] + wl[1] * un[2] + wl[2] * un[3];
            un[nx - 1] = wr[0] * un[nx - 2] + wr[1] * un[nx - 3] + wr[2] * un[nx - 4];
        }
        for (std::size_t i = 0; i < nx; ++i) {
            if (!std::isfinite(un[i])) throw NonFinite("u", where(step, i));
        }
        differentiate(x, un, layer(ux, step), layer(uxx, step));
        std::swap(sig_next, sig_v);
        if (sigma_const_t) sig_v = sig_next;
    }

    return PdeSolution(p, grid, std::move(times), x, std::move(u), std::move(ux), std::move(uxx));
}

PdeSolution solve(const ProblemSpec& p) { return solve(p, default_grid(p)); }

double g_expectation(const PdeSolution& sol) { return sol.value_at(0, sol.problem().diffusion.x0); }

namespace {

template <typename Row>
Extremum interior_min(const PdeSolution& sol, Row row) {
    Extremum best;
    bool first = true;
    const std::size_t nx = sol.nx();
    const std::size_t lo = nx > 4 ? 2 : 0;
    const std::size_t hi = nx > 4 ? nx - 2 : nx;
    for (std::size_t n = 0; n < sol.layers(); ++n) {
        const auto v = row(n);
        for (std::size_t i = lo; i < hi; ++i) {
            if (first || v[i] < best.value) {
                best = Extremum{v[i], sol.times()[n], sol.nodes()[i], n, i};
                first = false;
            }
        }
    }
    return best;
}

}  // namespace

Extremum convexity_profile(const PdeSolution& sol) {
    return interior_min(sol, [&](std::size_t n) { return sol.uxx(n); });
}

Extremum monotonicity_profile(const PdeSolution& sol) {
    return interior_min(sol, [&](std::size_t n) { return sol.ux(n); });
}

std::string_view to_string(Sign s) noexcept {
    switch (s) {
        case Sign::negative: return "-";
        case Sign::zero: return "0";
        case Sign::positive: return "+";
        case Sign::mixed: return "mixed";
    }
    return "?";
}

double dead_band(const PdeSolution& sol) {
    double m = 0.0;
    for (std::size_t n = 0; n < sol.layers(); ++n) {
        for (double v : sol.u(n)) m = std::max(m, std::abs(v));
    }
    return 1e-6 * std::max(1.0, m);
}

SignProfile sign_constancy_profile(const PdeSolution& sol) {
    SignProfile out;
    out.dead_band = dead_band(sol);
    const std::size_t nx = sol.nx();
    const std::size_t lo = nx > 4 ? 2 : 0;
    const std::size_t hi = nx > 4 ? nx - 2 : nx;
    out.layers.resize(sol.layers());
    for (std::size_t n = 0; n < sol.layers(); ++n) {
        bool pos = false;
        bool neg = false;
        const auto v = sol.uxx(n);
        for (std::size_t i = lo; i < hi; ++i) {
            if (v[i] > out.dead_band) pos = true;
            if (v[i] < -out.dead_band) neg = true;
        }
        out.layers[n] = pos && neg ? Sign::mixed : pos ? Sign::positive : neg ? Sign::negative : Sign::zero;
    }
    for (std::size_t n = sol.layers(); n-- > 0;) {
        if (out.layers[n] == Sign::mixed) {
            out.first_mixed = n;
            break;
        }
    }
    for (std::size_t n = sol.layers() - 1; n-- > 0;) {
        const Sign later = out.layers[n + 1];
        const Sign earlier = out.layers[n];
        if (later == Sign::mixed || earlier == Sign::mixed || static_cast<int>(earlier) < static_cast<int>(later)) {
            out.nondecreasing_toward_zero = false;
            break;
        }
    }
    return out;
}

void write_csv(const PdeSolution& sol, std::ostream& os) {
    os << "t,x,u,ux,uxx\n";
    char buf[160];
    for (std::size_t n = 0; n < sol.layers(); ++n) {
        const auto u = sol.u(n);
        const auto ux = sol.ux(n);
        const auto uxx = sol.uxx(n);
        for (std::size_t i = 0; i < sol.nx(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", sol.times()[n], sol.nodes()[i], u[i],
                          ux[i], uxx[i]);
            os << buf;
        }
    }
}

void to_json(nlohmann::json& j, const GridSpec& g) {
    j = nlohmann::json{{"x_min", g.x_min}, {"x_max", g.x_max}, {"nx", g.nx}, {"nt", g.nt},
                       {"spacing", std::string(to_string(g.spacing))}, {"boundary", std::string(to_string(g.boundary))}};
}

void to_json(nlohmann::json& j, const Extremum& e) {
    j = nlohmann::json{{"min_value", e.value}, {"location", {{"t", e.t}, {"x", e.x}}}};
}

void to_json(nlohmann::json& j, const SignProfile& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (Sign v : s.layers) layers.push_back(std::string(to_string(v)));
    j = nlohmann::json{{"dead_band", s.dead_band}, {"layers", layers},
                       {"nondecreasing_toward_zero", s.nondecreasing_toward_zero}};
    j["first_mixed_layer"] = s.first_mixed ? nlohmann::json(*s.first_mixed) : nlohmann::json(nullptr);
}

}  // namespace gorder
