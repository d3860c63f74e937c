#include "gorder/expr.hpp"

#include "gorder/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace gorder {

std::string_view var_name(Var v) noexcept {
    switch (v) {
        case Var::t: return "t";
        case Var::x: return "x";
        case Var::y: return "y";
        case Var::z: return "z";
    }
    return "?";
}

std::vector<std::string> VarSet::names() const {
    std::vector<std::string> out;
    for (Var v : {Var::t, Var::x, Var::y, Var::z}) {
        if (contains(v)) out.emplace_back(var_name(v));
    }
    return out;
}

namespace {

enum class Kind : std::uint8_t { constant, variable, negate, binary, call1, call2 };

struct Node {
    Kind kind = Kind::constant;
    double value = 0.0;
    Var var = Var::t;
    Expr::BinOp op = Expr::BinOp::add;
    Expr::Fn fn = Expr::Fn::abs;
    int a = -1;
    int b = -1;
};

enum class Code : std::uint8_t {
    push_const, push_t, push_x, push_y, push_z,
    neg, add, sub, mul, div, pow,
    min, max, abs, pos, negpart, exp, log, sqrt, tanh
};

struct Instr {
    Code code;
    double value;
    int node;
};

std::string_view fn_name(Expr::Fn fn) {
    switch (fn) {
        case Expr::Fn::min: return "min";
        case Expr::Fn::max: return "max";
        case Expr::Fn::abs: return "abs";
        case Expr::Fn::pos: return "pos";
        case Expr::Fn::neg: return "neg";
        case Expr::Fn::exp: return "exp";
        case Expr::Fn::log: return "log";
        case Expr::Fn::sqrt: return "sqrt";
        case Expr::Fn::tanh: return "tanh";
    }
    return "?";
}

int fn_arity(Expr::Fn fn) { return (fn == Expr::Fn::min || fn == Expr::Fn::max) ? 2 : 1; }

bool lookup_fn(std::string_view name, Expr::Fn& out) {
    static constexpr std::array<Expr::Fn, 9> all{Expr::Fn::min, Expr::Fn::max, Expr::Fn::abs,
                                                 Expr::Fn::pos, Expr::Fn::neg, Expr::Fn::exp,
                                                 Expr::Fn::log, Expr::Fn::sqrt, Expr::Fn::tanh};
    for (auto fn : all) {
        if (fn_name(fn) == name) {
            out = fn;
            return true;
        }
    }
    return false;
}

char op_char(Expr::BinOp op) {
    switch (op) {
        case Expr::BinOp::add: return '+';
        case Expr::BinOp::sub: return '-';
        case Expr::BinOp::mul: return '*';
        case Expr::BinOp::div: return '/';
        case Expr::BinOp::pow: return '^';
    }
    return '?';
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Prefer the shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        char trial[32];
        std::snprintf(trial, sizeof trial, "%.*g", prec, v);
        double back = 0.0;
        std::from_chars(trial, trial + std::char_traits<char>::length(trial), back);
        if (back == v) return trial;
    }
    return buf;
}

inline double apply_fn1(Code c, double a) {
    switch (c) {
        case Code::neg: return -a;
        case Code::abs: return std::fabs(a);
        case Code::pos: return a > 0.0 ? a : 0.0;
        case Code::negpart: return a < 0.0 ? -a : 0.0;
        case Code::exp: return std::exp(a);
        case Code::log: return std::log(a);
        case Code::sqrt: return std::sqrt(a);
        case Code::tanh: return std::tanh(a);
        default: return a;
    }
}

inline double apply_fn2(Code c, double a, double b) {
    switch (c) {
        case Code::add: return a + b;
        case Code::sub: return a - b;
        case Code::mul: return a * b;
        case Code::div: return a / b;
        case Code::pow: return std::pow(a, b);
        case Code::min: return std::min(a, b);
        case Code::max: return std::max(a, b);
        default: return a;
    }
}

bool is_unary(Code c) {
    switch (c) {
        case Code::neg: case Code::abs: case Code::pos: case Code::negpart:
        case Code::exp: case Code::log: case Code::sqrt: case Code::tanh:
            return true;
        default:
            return false;
    }
}

}  // namespace

struct Expr::Impl {
    std::vector<Node> nodes;
    int root = 0;
    VarSet vars;
    std::vector<Instr> program;
    std::size_t max_depth = 1;

    void finalize() {
        vars = VarSet{};
        program.clear();
        std::size_t depth = 0;
        max_depth = 1;
        emit(root, depth);
    }

    void emit(int idx, std::size_t& depth) {
        const Node& n = nodes[static_cast<std::size_t>(idx)];
        auto push = [&](Code c, double v = 0.0) {
            program.push_back({c, v, idx});
            ++depth;
            max_depth = std::max(max_depth, depth);
        };
        switch (n.kind) {
            case Kind::constant:
                push(Code::push_const, n.value);
                return;
            case Kind::variable:
                vars.insert(n.var);
                push(n.var == Var::t ? Code::push_t : n.var == Var::x ? Code::push_x
                                                   : n.var == Var::y ? Code::push_y
                                                                     : Code::push_z);
                return;
            case Kind::negate:
                emit(n.a, depth);
                program.push_back({Code::neg, 0.0, idx});
                return;
            case Kind::binary: {
                emit(n.a, depth);
                emit(n.b, depth);
                Code c = Code::add;
                switch (n.op) {
                    case BinOp::add: c = Code::add; break;
                    case BinOp::sub: c = Code::sub; break;
                    case BinOp::mul: c = Code::mul; break;
                    case BinOp::div: c = Code::div; break;
                    case BinOp::pow: c = Code::pow; break;
                }
                program.push_back({c, 0.0, idx});
                --depth;
                return;
            }
            case Kind::call1: {
                emit(n.a, depth);
                Code c = Code::abs;
                switch (n.fn) {
                    case Fn::abs: c = Code::abs; break;
                    case Fn::pos: c = Code::pos; break;
                    case Fn::neg: c = Code::negpart; break;
                    case Fn::exp: c = Code::exp; break;
                    case Fn::log: c = Code::log; break;
                    case Fn::sqrt: c = Code::sqrt; break;
                    case Fn::tanh: c = Code::tanh; break;
                    default: break;
                }
                program.push_back({c, 0.0, idx});
                return;
            }
            case Kind::call2:
                emit(n.a, depth);
                emit(n.b, depth);
                program.push_back({n.fn == Fn::min ? Code::min : Code::max, 0.0, idx});
                --depth;
                return;
        }
    }

    std::string print_node(int idx) const {
        const Node& n = nodes[static_cast<std::size_t>(idx)];
        switch (n.kind) {
            case Kind::constant:
                if (std::signbit(n.value)) return "(-" + format_number(-n.value) + ")";
                return format_number(n.value);
            case Kind::variable:
                return std::string(var_name(n.var));
            case Kind::negate:
                return "(-" + print_node(n.a) + ")";
            case Kind::binary:
                return "(" + print_node(n.a) + " " + op_char(n.op) + " " + print_node(n.b) + ")";
            case Kind::call1:
                return std::string(fn_name(n.fn)) + "(" + print_node(n.a) + ")";
            case Kind::call2:
                return std::string(fn_name(n.fn)) + "(" + print_node(n.a) + ", " + print_node(n.b) + ")";
        }
        return "?";
    }

    // Copies the subtree of `src` rooted at `idx` into this arena.
    int import(const Impl& src, int idx) {
        Node n = src.nodes[static_cast<std::size_t>(idx)];
        if (n.a >= 0) n.a = import(src, n.a);
        if (n.b >= 0) n.b = import(src, n.b);
        nodes.push_back(n);
        return static_cast<int>(nodes.size()) - 1;
    }

    [[noreturn]] void fail(int node, const std::string& context = {}) const {
        throw NonFinite(print_node(node), context);
    }
};

namespace {

std::shared_ptr<Expr::Impl> make_leaf(const Node& n) {
    auto impl = std::make_shared<Expr::Impl>();
    impl->nodes.push_back(n);
    impl->root = 0;
    impl->finalize();
    return impl;
}

}  // namespace

Expr::Expr() : Expr(make_leaf(Node{})) {}

Expr::Expr(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

Expr Expr::constant(double value) {
    Node n;
    n.kind = Kind::constant;
    n.value = value;
    return Expr(make_leaf(n));
}

Expr Expr::variable(Var v) {
    Node n;
    n.kind = Kind::variable;
    n.var = v;
    return Expr(make_leaf(n));
}

Expr Expr::call(Fn fn, const Expr& arg) {
    if (fn_arity(fn) != 1) throw InputError(std::string(fn_name(fn)) + " takes two arguments");
    auto impl = std::make_shared<Impl>();
    Node n;
    n.kind = Kind::call1;
    n.fn = fn;
    n.a = impl->import(*arg.impl_, arg.impl_->root);
    impl->nodes.push_back(n);
    impl->root = static_cast<int>(impl->nodes.size()) - 1;
    impl->finalize();
    return Expr(impl);
}

Expr Expr::call(Fn fn, const Expr& a, const Expr& b) {
    if (fn_arity(fn) != 2) throw InputError(std::string(fn_name(fn)) + " takes one argument");
    auto impl = std::make_shared<Impl>();
    Node n;
    n.kind = Kind::call2;
    n.fn = fn;
    n.a = impl->import(*a.impl_, a.impl_->root);
    n.b = impl->import(*b.impl_, b.impl_->root);
    impl->nodes.push_back(n);
    impl->root = static_cast<int>(impl->nodes.size()) - 1;
    impl->finalize();
    return Expr(impl);
}

Expr Expr::binary(BinOp op, const Expr& a, const Expr& b) {
    auto impl = std::make_shared<Impl>();
    Node n;
    n.kind = Kind::binary;
    n.op = op;
    n.a = impl->import(*a.impl_, a.impl_->root);
    n.b = impl->import(*b.impl_, b.impl_->root);
    impl->nodes.push_back(n);
    impl->root = static_cast<int>(impl->nodes.size()) - 1;
    impl->finalize();
    return Expr(impl);
}

Expr Expr::negate(const Expr& a) {
    auto impl = std::make_shared<Impl>();
    Node n;
    n.kind = Kind::negate;
    n.a = impl->import(*a.impl_, a.impl_->root);
    impl->nodes.push_back(n);
    impl->root = static_cast<int>(impl->nodes.size()) - 1;
    impl->finalize();
    return Expr(impl);
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(Expr::BinOp::add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(Expr::BinOp::sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(Expr::BinOp::mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(Expr::BinOp::div, a, b); }
Expr operator-(const Expr& a) { return Expr::negate(a); }

const VarSet& Expr::free_vars() const noexcept { return impl_->vars; }

std::string Expr::print() const { return impl_->print_node(impl_->root); }

bool Expr::is_constant(double value) const noexcept {
    const Node& n = impl_->nodes[static_cast<std::size_t>(impl_->root)];
    return n.kind == Kind::constant && n.value == value;
}

double Expr::operator()(const Point& p) const {
    const Impl& im = *impl_;
    std::array<double, 64> fixed{};
    std::vector<double> heap;
    double* stack = fixed.data();
    if (im.max_depth > fixed.size()) {
        heap.resize(im.max_depth);
        stack = heap.data();
    }
    std::size_t sp = 0;
    for (const Instr& ins : im.program) {
        double v = 0.0;
        switch (ins.code) {
            case Code::push_const: stack[sp++] = ins.value; continue;
            case Code::push_t: stack[sp++] = p.t; continue;
            case Code::push_x: stack[sp++] = p.x; continue;
            case Code::push_y: stack[sp++] = p.y; continue;
            case Code::push_z: stack[sp++] = p.z; continue;
            default: break;
        }
        if (is_unary(ins.code)) {
            v = apply_fn1(ins.code, stack[sp - 1]);
            stack[sp - 1] = v;
        } else {
            v = apply_fn2(ins.code, stack[sp - 2], stack[sp - 1]);
            --sp;
            stack[sp - 1] = v;
        }
        if (!std::isfinite(v)) im.fail(ins.node);
    }
    const double out = stack[0];
    if (!std::isfinite(out)) im.fail(im.root);
    return out;
}

void Expr::eval_batch(const BatchInput& in, std::span<double> out) const {
    const Impl& im = *impl_;
    const std::size_t n = out.size();
    for (const Column* c : {&in.t, &in.x, &in.y, &in.z}) {
        if (!c->values.empty() && c->values.size() != n) {
            throw InputError("batch evaluation: column length mismatch");
        }
    }
    constexpr std::size_t chunk = 256;
    std::vector<double> storage(im.max_depth * chunk);
    auto column_at = [](const Column& c, std::size_t i) { return c.values.empty() ? c.scalar : c.values[i]; };

    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t len = std::min(chunk, n - begin);
        std::size_t sp = 0;
        for (const Instr& ins : im.program) {
            const Column* col = nullptr;
            switch (ins.code) {
                case Code::push_const: {
                    double* dst = storage.data() + sp * chunk;
                    std::fill(dst, dst + len, ins.value);
                    ++sp;
                    continue;
                }
                case Code::push_t: col = &in.t; break;
                case Code::push_x: col = &in.x; break;
                case Code::push_y: col = &in.y; break;
                case Code::push_z: col = &in.z; break;
                default: break;
            }
            if (col != nullptr) {
                double* dst = storage.data() + sp * chunk;
                if (col->values.empty()) {
                    std::fill(dst, dst + len, col->scalar);
                } else {
                    std::copy_n(col->values.data() + begin, len, dst);
                }
                ++sp;
                continue;
            }
            if (is_unary(ins.code)) {
                double* a = storage.data() + (sp - 1) * chunk;
                for (std::size_t i = 0; i < len; ++i) a[i] = apply_fn1(ins.code, a[i]);
            } else {
                double* a = storage.data() + (sp - 2) * chunk;
                const double* b = storage.data() + (sp - 1) * chunk;
                switch (ins.code) {
                    case Code::add: for (std::size_t i = 0; i < len; ++i) a[i] += b[i]; break;
                    case Code::sub: for (std::size_t i = 0; i < len; ++i) a[i] -= b[i]; break;
                    case Code::mul: for (std::size_t i = 0; i < len; ++i) a[i] *= b[i]; break;
                    case Code::div: for (std::size_t i = 0; i < len; ++i) a[i] /= b[i]; break;
                    default: for (std::size_t i = 0; i < len; ++i) a[i] = apply_fn2(ins.code, a[i], b[i]); break;
                }
                --sp;
            }
        }
        const double* res = storage.data();
        for (std::size_t i = 0; i < len; ++i) {
            if (!std::isfinite(res[i])) {
                // Re-run the element on the scalar path to name the failing node.
                const std::size_t k = begin + i;
                (*this)(Point{column_at(in.t, k), column_at(in.x, k), column_at(in.y, k), column_at(in.z, k)});
                im.fail(im.root);
            }
        }
        std::copy_n(res, len, out.data() + begin);
    }
}

Expr Expr::substitute(const std::map<Var, Expr>& replacements) const {
    struct Rebuild {
        const Impl& im;
        const std::map<Var, Expr>& rep;
        Expr operator()(int idx) const {
            const Node& n = im.nodes[static_cast<std::size_t>(idx)];
            switch (n.kind) {
                case Kind::constant: return Expr::constant(n.value);
                case Kind::variable: {
                    auto it = rep.find(n.var);
                    return it != rep.end() ? it->second : Expr::variable(n.var);
                }
                case Kind::negate: return Expr::negate((*this)(n.a));
                case Kind::binary: return Expr::binary(n.op, (*this)(n.a), (*this)(n.b));
                case Kind::call1: return Expr::call(n.fn, (*this)(n.a));
                case Kind::call2: return Expr::call(n.fn, (*this)(n.a), (*this)(n.b));
            }
            return Expr{};
        }
    };
    return Rebuild{*impl_, replacements}(impl_->root);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    Expr parse_all() {
        Expr e = parse_sum();
        skip_ws();
        if (pos_ < s_.size()) {
            throw SyntaxError(pos_, std::string("unexpected character '") + s_[pos_] + "'");
        }
        return e;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            throw SyntaxError(pos_, pos_ < s_.size() ? std::string("expected '") + c + "'"
                                                     : std::string("expected '") + c + "' at end of input");
        }
    }

    Expr parse_sum() {
        Expr lhs = parse_product();
        for (;;) {
            if (accept('+')) {
                lhs = lhs + parse_product();
            } else if (accept('-')) {
                lhs = lhs - parse_product();
            } else {
                return lhs;
            }
        }
    }

    Expr parse_product() {
        Expr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = lhs * parse_unary();
            } else if (accept('/')) {
                lhs = lhs / parse_unary();
            } else {
                return lhs;
            }
        }
    }

    // Unary minus binds tighter than * and / but looser than ^.
    Expr parse_unary() {
        if (accept('-')) return -parse_unary();
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (accept('^')) {
            return Expr::binary(Expr::BinOp::pow, base, parse_unary());
        }
        return base;
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= s_.size()) throw SyntaxError(pos_, "expected expression");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = parse_sum();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw SyntaxError(pos_, std::string("unexpected character '") + c + "'");
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t mantissa = digits();
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            mantissa += digits();
        }
        if (mantissa == 0) throw SyntaxError(start, "malformed number");
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            const std::size_t epos = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (digits() == 0) throw SyntaxError(epos, "malformed exponent");
        }
        double value = 0.0;
        const auto* first = s_.data() + start;
        const auto* last = s_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
            throw SyntaxError(start, "number out of range");
        }
        return Expr::constant(value);
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string_view name = s_.substr(start, pos_ - start);
        if (name.size() == 1) {
            switch (name[0]) {
                case 't': return Expr::variable(Var::t);
                case 'x': return Expr::variable(Var::x);
                case 'y': return Expr::variable(Var::y);
                case 'z': return Expr::variable(Var::z);
                default: break;
            }
        }
        Expr::Fn fn{};
        if (!lookup_fn(name, fn)) throw UnknownIdentifier(start, std::string(name));
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '(') {
            throw SyntaxError(pos_, "expected '(' after function name '" + std::string(name) + "'");
        }
        ++pos_;
        Expr a = parse_sum();
        if (fn_arity(fn) == 2) {
            expect(',');
            Expr b = parse_sum();
            expect(')');
            return Expr::call(fn, a, b);
        }
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ',') {
            throw SyntaxError(pos_, std::string(name) + "() takes one argument");
        }
        expect(')');
        return Expr::call(fn, a);
    }
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

double eval(const Expr& e, const std::map<std::string, double>& bindings) {
    Point p;
    for (Var v : {Var::t, Var::x, Var::y, Var::z}) {
        if (!e.depends_on(v)) continue;
        auto it = bindings.find(std::string(var_name(v)));
        if (it == bindings.end()) throw MissingBinding(std::string(var_name(v)));
        p[v] = it->second;
    }
    return e(p);
}

}  // namespace gorder
