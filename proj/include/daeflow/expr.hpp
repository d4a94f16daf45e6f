#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "daeflow/errors.hpp"
#include "daeflow/symbol.hpp"

namespace daeflow {

enum class ExprKind { constant, symbol, apply, deriv };

enum class Op { add, mul, pow, div, neg, sin, cos, tan, exp, log, sqrt, abs };

inline const char* op_name(Op op) {
    switch (op) {
    case Op::add: return "+";
    case Op::mul: return "*";
    case Op::pow: return "^";
    case Op::div: return "/";
    case Op::neg: return "-";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::tan: return "tan";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sqrt: return "sqrt";
    case Op::abs: return "abs";
    }
    return "?";
}

namespace detail {

// Exact rational with overflow detection; falls back to double on overflow.
struct Rat {
    long long num = 0;
    long long den = 1;
};

inline std::optional<Rat> rat_make(long long n, long long d) {
    if (d == 0) return std::nullopt;
    if (n == std::numeric_limits<long long>::min() ||
        d == std::numeric_limits<long long>::min())
        return std::nullopt;
    if (d < 0) {
        n = -n;
        d = -d;
    }
    long long g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) {
        n /= g;
        d /= g;
    }
    return Rat{n, d};
}

inline std::optional<long long> narrow128(__int128 v) {
    if (v > std::numeric_limits<long long>::max() ||
        v < -std::numeric_limits<long long>::max())
        return std::nullopt;
    return static_cast<long long>(v);
}

inline std::optional<Rat> rat_add(Rat a, Rat b) {
    __int128 n = (__int128)a.num * b.den + (__int128)b.num * a.den;
    __int128 d = (__int128)a.den * b.den;
    __int128 g = 1;
    {
        __int128 x = n < 0 ? -n : n, y = d;
        while (y) {
            __int128 t = x % y;
            x = y;
            y = t;
        }
        g = x == 0 ? 1 : x;
    }
    auto nn = narrow128(n / g), dd = narrow128(d / g);
    if (!nn || !dd) return std::nullopt;
    return rat_make(*nn, *dd);
}

inline std::optional<Rat> rat_mul(Rat a, Rat b) {
    __int128 n = (__int128)a.num * b.num;
    __int128 d = (__int128)a.den * b.den;
    __int128 g = 1;
    {
        __int128 x = n < 0 ? -n : n, y = d;
        while (y) {
            __int128 t = x % y;
            x = y;
            y = t;
        }
        g = x == 0 ? 1 : x;
    }
    auto nn = narrow128(n / g), dd = narrow128(d / g);
    if (!nn || !dd) return std::nullopt;
    return rat_make(*nn, *dd);
}

inline std::optional<Rat> rat_recip(Rat a) {
    if (a.num == 0) return std::nullopt;
    return rat_make(a.den, a.num);
}

inline std::optional<Rat> rat_pow_nonneg(Rat a, long long e) {
    Rat acc{1, 1};
    for (long long i = 0; i < e; ++i) {
        auto r = rat_mul(acc, a);
        if (!r) return std::nullopt;
        acc = *r;
    }
    return acc;
}

} // namespace detail

class Expr;
int expr_compare(const Expr& a, const Expr& b);

struct ExprNode {
    ExprKind kind;
    // constant payload
    bool rat = false;
    long long num = 0;
    long long den = 1;
    double val = 0.0;
    // symbol payload (also the differentiation variable for deriv nodes)
    SymbolId sym;
    // apply payload
    Op op = Op::add;
    std::vector<Expr> args; // deriv: args[0] is the differentiated expression
    int order = 0;          // deriv order >= 1
    std::size_t h = 0;
};

class Expr {
public:
    Expr() : Expr(integer(0)) {}

    static Expr integer(long long n) {
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprKind::constant;
        node->rat = true;
        node->num = n;
        node->den = 1;
        node->val = static_cast<double>(n);
        finish(*node);
        return Expr(std::move(node));
    }

    static Expr rational(long long n, long long d) {
        if (d == 0) throw ConstructionError("rational constant with zero denominator");
        auto r = detail::rat_make(n, d);
        if (!r) return real(static_cast<double>(n) / static_cast<double>(d));
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprKind::constant;
        node->rat = true;
        node->num = r->num;
        node->den = r->den;
        node->val = static_cast<double>(r->num) / static_cast<double>(r->den);
        finish(*node);
        return Expr(std::move(node));
    }

    static Expr real(double v) {
        if (!std::isfinite(v)) throw ConstructionError("non-finite constant");
        if (v == 0.0) v = 0.0; // normalize -0.0
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprKind::constant;
        node->rat = false;
        node->val = v;
        finish(*node);
        return Expr(std::move(node));
    }

    static Expr symbol(SymbolId s) {
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprKind::symbol;
        node->sym = std::move(s);
        finish(*node);
        return Expr(std::move(node));
    }

    static Expr apply(Op op, std::vector<Expr> args) {
        std::size_t n = args.size();
        bool ok = true;
        switch (op) {
        case Op::add:
        case Op::mul: ok = n >= 2; break;
        case Op::pow:
        case Op::div: ok = n == 2; break;
        default: ok = n == 1; break;
        }
        if (!ok)
            throw ConstructionError(std::string("wrong arity for operator ") + op_name(op));
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprKind::apply;
        node->op = op;
        node->args = std::move(args);
        finish(*node);
        return Expr(std::move(node));
    }

    // Derivative node factory. Folds derivatives of constants and parameters
    // to zero, collapses nesting, and pushes through sums and constant factors
    // so that D(2*x + c) comes out as 2*D(x).
    static Expr deriv(const Expr& arg, const SymbolId& wrt, int order = 1) {
        if (order < 1) throw ConstructionError("derivative order must be >= 1");
        switch (arg.kind()) {
        case ExprKind::constant: return integer(0);
        case ExprKind::symbol: {
            const SymbolId& s = arg.sym();
            if (s.kind == SymKind::parameter) return integer(0);
            if (s.kind == SymKind::independent)
                return s == wrt ? (order == 1 ? integer(1) : integer(0)) : raw(arg, wrt, order);
            return raw(arg, wrt, order);
        }
        case ExprKind::deriv:
            if (arg.sym() == wrt) return deriv(arg.arg(0), wrt, order + arg.order());
            return raw(arg, wrt, order);
        case ExprKind::apply:
            switch (arg.op()) {
            case Op::add: {
                std::vector<Expr> parts;
                parts.reserve(arg.nargs());
                for (const Expr& a : arg.args()) {
                    Expr d = deriv(a, wrt, order);
                    if (!d.is_zero()) parts.push_back(std::move(d));
                }
                if (parts.empty()) return integer(0);
                if (parts.size() == 1) return parts[0];
                return apply(Op::add, std::move(parts));
            }
            case Op::neg: {
                Expr d = deriv(arg.arg(0), wrt, order);
                if (d.is_zero()) return d;
                return apply(Op::neg, {d});
            }
            case Op::mul: {
                std::vector<Expr> consts, rest;
                for (const Expr& a : arg.args())
                    (a.is_const() ? consts : rest).push_back(a);
                if (!consts.empty() && rest.size() == 1) {
                    std::vector<Expr> parts = std::move(consts);
                    parts.push_back(deriv(rest[0], wrt, order));
                    return apply(Op::mul, std::move(parts));
                }
                return raw(arg, wrt, order);
            }
            default: return raw(arg, wrt, order);
            }
        }
        return raw(arg, wrt, order);
    }

    ExprKind kind() const { return n_->kind; }
    bool is_const() const { return n_->kind == ExprKind::constant; }
    bool is_symbol() const { return n_->kind == ExprKind::symbol; }
    bool is_apply(Op op) const { return n_->kind == ExprKind::apply && n_->op == op; }
    bool is_deriv() const { return n_->kind == ExprKind::deriv; }

    double value() const { return n_->val; }
    bool is_rational() const { return n_->rat; }
    long long num() const { return n_->num; }
    long long den() const { return n_->den; }
    bool is_zero() const { return is_const() && n_->val == 0.0; }
    bool is_one() const { return is_const() && n_->val == 1.0 && (!n_->rat || n_->den == 1); }

    const SymbolId& sym() const { return n_->sym; }
    Op op() const { return n_->op; }
    const std::vector<Expr>& args() const { return n_->args; }
    std::size_t nargs() const { return n_->args.size(); }
    const Expr& arg(std::size_t i) const { return n_->args[i]; }
    int order() const { return n_->order; }

    std::size_t hash() const { return n_->h; }

    friend bool operator==(const Expr& a, const Expr& b) {
        if (a.n_ == b.n_) return true;
        if (a.n_->h != b.n_->h) return false;
        return structural_eq(a, b);
    }
    friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

private:
    explicit Expr(std::shared_ptr<const ExprNode> n) : n_(std::move(n)) {}

    static Expr raw(const Expr& arg, const SymbolId& wrt, int order) {
        auto node = std::make_shared<ExprNode>();
        node->kind = ExprKind::deriv;
        node->sym = wrt;
        node->args = {arg};
        node->order = order;
        finish(*node);
        return Expr(std::move(node));
    }

    static void finish(ExprNode& n) {
        std::size_t h = static_cast<std::size_t>(n.kind) * 0x100000001b3ull;
        switch (n.kind) {
        case ExprKind::constant: {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(n.val));
            std::memcpy(&bits, &n.val, sizeof(bits));
            h = detail::hash_combine(h, static_cast<std::size_t>(bits));
            break;
        }
        case ExprKind::symbol:
            h = detail::hash_combine(h, std::hash<std::string>{}(n.sym.full_name()));
            break;
        case ExprKind::apply:
            h = detail::hash_combine(h, static_cast<std::size_t>(n.op));
            for (const Expr& a : n.args) h = detail::hash_combine(h, a.hash());
            break;
        case ExprKind::deriv:
            h = detail::hash_combine(h, std::hash<std::string>{}(n.sym.full_name()));
            h = detail::hash_combine(h, static_cast<std::size_t>(n.order));
            h = detail::hash_combine(h, n.args[0].hash());
            break;
        }
        n.h = h;
    }

    static bool structural_eq(const Expr& a, const Expr& b) {
        if (a.kind() != b.kind()) return false;
        switch (a.kind()) {
        case ExprKind::constant: return a.value() == b.value();
        case ExprKind::symbol: return a.sym() == b.sym();
        case ExprKind::apply: {
            if (a.op() != b.op() || a.nargs() != b.nargs()) return false;
            for (std::size_t i = 0; i < a.nargs(); ++i)
                if (a.arg(i) != b.arg(i)) return false;
            return true;
        }
        case ExprKind::deriv:
            return a.order() == b.order() && a.sym() == b.sym() && a.arg(0) == b.arg(0);
        }
        return false;
    }

    std::shared_ptr<const ExprNode> n_;
};

// Total order used for canonical argument sorting: constants < symbols <
// applications < derivatives, with deterministic tie-breaks inside each class.
inline int expr_compare(const Expr& a, const Expr& b) {
    auto rank = [](const Expr& e) {
        switch (e.kind()) {
        case ExprKind::constant: return 0;
        case ExprKind::symbol: return 1;
        case ExprKind::apply: return 2;
        case ExprKind::deriv: return 3;
        }
        return 4;
    };
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (a.kind()) {
    case ExprKind::constant: {
        if (a.value() < b.value()) return -1;
        if (a.value() > b.value()) return 1;
        return 0;
    }
    case ExprKind::symbol: {
        std::string fa = a.sym().full_name(), fb = b.sym().full_name();
        return fa < fb ? -1 : (fa == fb ? 0 : 1);
    }
    case ExprKind::apply: {
        if (a.op() != b.op())
            return static_cast<int>(a.op()) < static_cast<int>(b.op()) ? -1 : 1;
        if (a.nargs() != b.nargs()) return a.nargs() < b.nargs() ? -1 : 1;
        for (std::size_t i = 0; i < a.nargs(); ++i) {
            int c = expr_compare(a.arg(i), b.arg(i));
            if (c != 0) return c;
        }
        return 0;
    }
    case ExprKind::deriv: {
        int c = expr_compare(a.arg(0), b.arg(0));
        if (c != 0) return c;
        std::string fa = a.sym().full_name(), fb = b.sym().full_name();
        if (fa != fb) return fa < fb ? -1 : 1;
        if (a.order() != b.order()) return a.order() < b.order() ? -1 : 1;
        return 0;
    }
    }
    return 0;
}

inline bool expr_less(const Expr& a, const Expr& b) { return expr_compare(a, b) < 0; }

template <class T>
    requires std::is_arithmetic_v<T>
Expr to_expr(T v) {
    if constexpr (std::is_integral_v<T>)
        return Expr::integer(static_cast<long long>(v));
    else
        return Expr::real(static_cast<double>(v));
}
inline const Expr& to_expr(const Expr& e) { return e; }

inline Expr operator+(const Expr& a, const Expr& b) { return Expr::apply(Op::add, {a, b}); }
inline Expr operator-(const Expr& a) { return Expr::apply(Op::neg, {a}); }
inline Expr operator-(const Expr& a, const Expr& b) {
    return Expr::apply(Op::add, {a, Expr::apply(Op::neg, {b})});
}
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::apply(Op::mul, {a, b}); }
inline Expr operator/(const Expr& a, const Expr& b) { return Expr::apply(Op::div, {a, b}); }

template <class T>
    requires std::is_arithmetic_v<T>
Expr operator+(const Expr& a, T b) { return a + to_expr(b); }
template <class T>
    requires std::is_arithmetic_v<T>
Expr operator+(T a, const Expr& b) { return to_expr(a) + b; }
template <class T>
    requires std::is_arithmetic_v<T>
Expr operator-(const Expr& a, T b) { return a - to_expr(b); }
template <class T>
    requires std::is_arithmetic_v<T>
Expr operator-(T a, const Expr& b) { return to_expr(a) - b; }
template <class T>
    requires std::is_arithmetic_v<T>
Expr operator*(const Expr& a, T b) { return a * to_expr(b); }
template <class T>
    requires std::is_arithmetic_v<T>
Expr operator*(T a, const Expr& b) { return to_expr(a) * b; }
template <class T>
    requires std::is_arithmetic_v<T>
Expr operator/(const Expr& a, T b) { return a / to_expr(b); }
template <class T>
    requires std::is_arithmetic_v<T>
Expr operator/(T a, const Expr& b) { return to_expr(a) / b; }

inline Expr pow(const Expr& a, const Expr& b) { return Expr::apply(Op::pow, {a, b}); }
template <class T>
    requires std::is_arithmetic_v<T>
Expr pow(const Expr& a, T b) { return pow(a, to_expr(b)); }

inline Expr sin(const Expr& a) { return Expr::apply(Op::sin, {a}); }
inline Expr cos(const Expr& a) { return Expr::apply(Op::cos, {a}); }
inline Expr tan(const Expr& a) { return Expr::apply(Op::tan, {a}); }
inline Expr exp(const Expr& a) { return Expr::apply(Op::exp, {a}); }
inline Expr log(const Expr& a) { return Expr::apply(Op::log, {a}); }
inline Expr sqrt(const Expr& a) { return Expr::apply(Op::sqrt, {a}); }
inline Expr abs(const Expr& a) { return Expr::apply(Op::abs, {a}); }

inline Expr D(const Expr& state_or_expr, const SymbolId& ivar, int order = 1) {
    return Expr::deriv(state_or_expr, ivar, order);
}

template <class F>
void for_each_node(const Expr& e, F&& f) {
    f(e);
    switch (e.kind()) {
    case ExprKind::apply:
    case ExprKind::deriv:
        for (const Expr& a : e.args()) for_each_node(a, f);
        break;
    default: break;
    }
}

// Simultaneous structural substitution: each node equal to a key is replaced
// by the paired value, and replacements are not re-visited.
inline Expr substitute(const Expr& e, const std::vector<std::pair<Expr, Expr>>& subs) {
    for (const auto& [from, to] : subs)
        if (e == from) return to;
    switch (e.kind()) {
    case ExprKind::constant:
    case ExprKind::symbol: return e;
    case ExprKind::apply: {
        std::vector<Expr> args;
        args.reserve(e.nargs());
        bool changed = false;
        for (const Expr& a : e.args()) {
            args.push_back(substitute(a, subs));
            if (args.back() != a) changed = true;
        }
        if (!changed) return e;
        return Expr::apply(e.op(), std::move(args));
    }
    case ExprKind::deriv: {
        Expr arg = substitute(e.arg(0), subs);
        if (arg == e.arg(0)) return e;
        return Expr::deriv(arg, e.sym(), e.order());
    }
    }
    return e;
}

inline Expr substitute(const Expr& e, const Expr& from, const Expr& to) {
    return substitute(e, std::vector<std::pair<Expr, Expr>>{{from, to}});
}

// Occurrence map: for every symbol, the set of derivative orders at which it
// appears (order 0 means a plain appearance). Nested derivative depths add.
inline void collect_occurrences(const Expr& e,
                                std::map<std::string, std::set<int>>& orders,
                                std::map<std::string, SymbolId>& ids,
                                int depth = 0) {
    switch (e.kind()) {
    case ExprKind::constant: return;
    case ExprKind::symbol: {
        std::string f = e.sym().full_name();
        orders[f].insert(depth);
        ids.emplace(f, e.sym());
        return;
    }
    case ExprKind::apply:
        for (const Expr& a : e.args()) collect_occurrences(a, orders, ids, depth);
        return;
    case ExprKind::deriv:
        collect_occurrences(e.arg(0), orders, ids, depth + e.order());
        return;
    }
}

inline bool contains(const Expr& e, const Expr& needle) {
    if (e == needle) return true;
    switch (e.kind()) {
    case ExprKind::apply:
    case ExprKind::deriv:
        for (const Expr& a : e.args())
            if (contains(a, needle)) return true;
        return false;
    default: return false;
    }
}

inline std::size_t count_nodes(const Expr& e, const Expr& needle) {
    std::size_t c = e == needle ? 1 : 0;
    switch (e.kind()) {
    case ExprKind::apply:
    case ExprKind::deriv:
        for (const Expr& a : e.args()) c += count_nodes(a, needle);
        break;
    default: break;
    }
    return c;
}

inline bool contains_deriv(const Expr& e) {
    bool found = false;
    for_each_node(e, [&](const Expr& n) { found = found || n.is_deriv(); });
    return found;
}

} // namespace daeflow
