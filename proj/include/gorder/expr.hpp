#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gorder {

enum class Var : std::uint8_t { t = 0, x = 1, y = 2, z = 3 };

constexpr std::size_t var_count = 4;

std::string_view var_name(Var v) noexcept;

/// Set of variables, stored as a bitmask over {t,x,y,z}.
class VarSet {
public:
    constexpr VarSet() = default;

    constexpr bool contains(Var v) const noexcept { return (bits_ >> static_cast<unsigned>(v)) & 1u; }
    constexpr void insert(Var v) noexcept { bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(v)); }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr VarSet operator|(VarSet o) const noexcept { VarSet r; r.bits_ = bits_ | o.bits_; return r; }
    constexpr bool operator==(const VarSet&) const = default;

    std::vector<std::string> names() const;

private:
    std::uint8_t bits_ = 0;
};

/// All four variables bound at once; the fast evaluation path.
struct Point {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double operator[](Var v) const noexcept {
        switch (v) {
            case Var::t: return t;
            case Var::x: return x;
            case Var::y: return y;
            case Var::z: return z;
        }
        return 0.0;
    }
    double& operator[](Var v) noexcept {
        switch (v) {
            case Var::t: return t;
            case Var::x: return x;
            case Var::y: return y;
            default: return z;
        }
    }
};

/// One input column for batch evaluation: either a span of per-element values
/// or, when the span is empty, a scalar broadcast to every element.
struct Column {
    std::span<const double> values{};
    double scalar = 0.0;

    static Column broadcast(double v) { return Column{{}, v}; }
    static Column of(std::span<const double> v) { return Column{v, 0.0}; }
};

struct BatchInput {
    Column t, x, y, z;
};

/// Immutable parsed arithmetic expression over t, x, y, z.
///
/// Copies share the underlying tree. Evaluation is a pure function of the
/// bindings and may be called concurrently.
class Expr {
public:
    enum class Fn : std::uint8_t { min, max, abs, pos, neg, exp, log, sqrt, tanh };
    enum class BinOp : std::uint8_t { add, sub, mul, div, pow };

    /// The zero constant.
    Expr();

    static Expr constant(double value);
    static Expr variable(Var v);
    static Expr call(Fn fn, const Expr& arg);
    static Expr call(Fn fn, const Expr& a, const Expr& b);
    static Expr binary(BinOp op, const Expr& a, const Expr& b);
    static Expr negate(const Expr& a);

    const VarSet& free_vars() const noexcept;
    bool depends_on(Var v) const noexcept { return free_vars().contains(v); }

    /// Canonical fully parenthesized form; reparses to an equivalent tree.
    std::string print() const;

    /// Evaluates with every variable bound. Throws NonFinite.
    double operator()(const Point& p) const;
    double operator()(double t, double x, double y = 0.0, double z = 0.0) const { return (*this)(Point{t, x, y, z}); }

    /// Evaluates `out.size()` elements. Spans in `in` must be empty or have
    /// out.size() entries. Throws NonFinite naming the first offending element.
    void eval_batch(const BatchInput& in, std::span<double> out) const;

    /// Replaces each variable that has an entry in `replacements`.
    Expr substitute(const std::map<Var, Expr>& replacements) const;

    /// True when the expression is a constant with this exact value.
    bool is_constant(double value) const noexcept;

    struct Impl;

private:
    explicit Expr(std::shared_ptr<const Impl> impl);
    std::shared_ptr<const Impl> impl_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

/// Parses `text`. Grammar in docs/expr-grammar.md.
/// Throws SyntaxError (with byte offset) or UnknownIdentifier.
Expr parse(std::string_view text);

/// Evaluates with a name->value map; every free variable must be bound.
/// Throws MissingBinding or NonFinite.
double eval(const Expr& e, const std::map<std::string, double>& bindings);

}  // namespace gorder
