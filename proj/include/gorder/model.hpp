#pragma once

#include "gorder/conditions.hpp"
#include "gorder/expr.hpp"
#include "gorder/sampling.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace gorder {

enum class StateDomain { whole_line, positive_halfline };

std::string_view to_string(StateDomain d) noexcept;
StateDomain parse_state_domain(std::string_view s);

/// Forward diffusion dX = mu(t,X) dt + sigma(t,X) dB, X_0 = x0.
struct DiffusionSpec {
    Expr mu;
    Expr sigma;
    double x0 = 0.0;
    StateDomain domain = StateDomain::whole_line;
};

/// Throws InputError if mu/sigma use variables other than t, x, or if a
/// positive-halfline diffusion starts at x0 <= 0.
DiffusionSpec make_diffusion(Expr mu, Expr sigma, double x0, StateDomain domain = StateDomain::whole_line);
DiffusionSpec make_diffusion(std::string_view mu, std::string_view sigma, double x0,
                             StateDomain domain = StateDomain::whole_line);

/// Backward-equation generator g(t,x,y,z).
struct GeneratorSpec {
    Expr g;
    /// g(t,x,0,0) = 0 on the probe sample.
    bool normalized = false;
    /// g(t,x,y,0) = 0 on the probe sample.
    bool strongly_normalized = false;
    std::optional<double> lipschitz_bound;
};

/// Builds a generator and fills the normalization flags by sampling `probe`
/// (or a wide default probe box).
GeneratorSpec make_generator(Expr g, const std::optional<Box>& probe = std::nullopt);
GeneratorSpec make_generator(std::string_view g);

struct PayoffSpec {
    Expr phi;
    double growth_exponent = 1.0;
    bool asserted_convex = false;
    bool asserted_nondecreasing = false;
    std::string id;
};

PayoffSpec make_payoff(Expr phi, double growth_exponent = 1.0, bool convex = false, bool nondecreasing = false,
                       std::string id = {});
PayoffSpec make_payoff(std::string_view phi, double growth_exponent = 1.0, bool convex = false,
                       bool nondecreasing = false, std::string id = {});

struct ProblemSpec {
    DiffusionSpec diffusion;
    GeneratorSpec generator;
    PayoffSpec payoff;
    double horizon = 1.0;

    /// Throws InputError unless horizon > 0 and x0 is in the state domain.
    void validate() const;
    ProblemSpec with_payoff(PayoffSpec p) const;
    ProblemSpec with_generator(GeneratorSpec g) const;
};

/// f(t,x,y,z) = z mu(t,x) + g(t,x,y, z sigma(t,x)).
class DriverF {
public:
    DriverF(DiffusionSpec diffusion, GeneratorSpec generator);

    double operator()(const Point& p) const;
    double operator()(double t, double x, double y, double z) const { return (*this)(Point{t, x, y, z}); }

    const DiffusionSpec& diffusion() const noexcept { return diffusion_; }
    const GeneratorSpec& generator() const noexcept { return generator_; }

private:
    DiffusionSpec diffusion_;
    GeneratorSpec generator_;
};

DriverF make_driver(const DiffusionSpec& d, const GeneratorSpec& g);

/// g^(-1)(t,x,y,z) = -g(t,x,-y,-z); flags recomputed by sampling.
GeneratorSpec risk_transform(const GeneratorSpec& g);

/// g^(a)(t,x,y,z) = a g(t,x,y/a,z/a). Throws ZeroScale for a == 0.
GeneratorSpec scale_generator(const GeneratorSpec& g, double a);

/// Sampled max of sigma(t,x)/x (positive halfline) or |sigma| (whole line)
/// and of the matching drift ratio, over t in [0,T] and the given x range.
struct VolatilityScale {
    double sigma_bar = 0.0;
    double drift_bar = 0.0;
};
VolatilityScale volatility_scale(const ProblemSpec& p, Range x);

/// Truncated state interval: [x0 e^-w, x0 e^w] on the positive halfline,
/// [x0 - w, x0 + w] on the whole line, with w = L sigma_bar sqrt(T) plus the
/// drift displacement over the horizon.
Range state_range(const ProblemSpec& p, double L = 5.0);

/// t in [0,T], x over `x`, y and z in [-M, M] with M = 10 (1 + |x0|^p).
Box default_box(const ProblemSpec& p, Range x, std::size_t sample_count = 2000, std::uint64_t seed = 12345);

/// Enlarged box used to detect growth of difference quotients. The x range
/// stays positive for positive-halfline problems.
Box dilate(const Box& b, double factor, StateDomain domain);

struct AssumptionReport {
    ConditionSet conditions;
    /// "g-expectation" (A'3), "g-evaluation" (A3), or "raw BSDE value".
    std::string functional_label;
    Box box;
};

/// Sampled checks of the standing assumptions on `box`:
/// A1 (mu, sigma Lipschitz in x), A2 (g Lipschitz in x,y,z), A3, A3', A4
/// (polynomial growth of phi), and sigma > 0.
AssumptionReport validate_assumptions(const ProblemSpec& p, const Box& box);

/// Difference-quotient Lipschitz probe of `f` in `var`. Certified with the
/// fitted constant; violated when the quotient grows on the dilated box;
/// inconclusive when it grows under pair refinement.
ConditionReport lipschitz_check(std::string id, const std::function<double(const Point&)>& f, Var var,
                                const Box& box, StateDomain domain);

void to_json(nlohmann::json& j, const DiffusionSpec& d);
void to_json(nlohmann::json& j, const GeneratorSpec& g);
void to_json(nlohmann::json& j, const PayoffSpec& p);
void to_json(nlohmann::json& j, const ProblemSpec& p);
void to_json(nlohmann::json& j, const Box& b);
void to_json(nlohmann::json& j, const AssumptionReport& r);

}  // namespace gorder
