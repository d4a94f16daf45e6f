#pragma once

#include <vector>

#include "daeflow/expr.hpp"
#include "daeflow/expr_text.hpp"
#include "daeflow/simplify.hpp"

namespace daeflow {

namespace detail {

// Shared chain-rule walker; `leaf` supplies the derivative of symbol and
// derivative nodes.
template <class Leaf>
Expr diff_walk(const Expr& e, Leaf&& leaf) {
    switch (e.kind()) {
    case ExprKind::constant: return Expr::integer(0);
    case ExprKind::symbol:
    case ExprKind::deriv: return leaf(e);
    case ExprKind::apply: break;
    }
    const auto& args = e.args();
    switch (e.op()) {
    case Op::add: {
        std::vector<Expr> parts;
        parts.reserve(args.size());
        for (const Expr& a : args) parts.push_back(diff_walk(a, leaf));
        return Expr::apply(Op::add, std::move(parts));
    }
    case Op::neg: return Expr::apply(Op::neg, {diff_walk(args[0], leaf)});
    case Op::mul: {
        std::vector<Expr> terms;
        terms.reserve(args.size());
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::vector<Expr> prod;
            prod.reserve(args.size());
            for (std::size_t j = 0; j < args.size(); ++j)
                prod.push_back(j == i ? diff_walk(args[j], leaf) : args[j]);
            terms.push_back(Expr::apply(Op::mul, std::move(prod)));
        }
        return Expr::apply(Op::add, std::move(terms));
    }
    case Op::div: {
        const Expr& u = args[0];
        const Expr& v = args[1];
        Expr du = diff_walk(u, leaf), dv = diff_walk(v, leaf);
        Expr numer = du * v - u * dv;
        return Expr::apply(Op::div, {numer, pow(v, 2)});
    }
    case Op::pow: {
        const Expr& u = args[0];
        const Expr& v = args[1];
        Expr du = diff_walk(u, leaf);
        if (v.is_const()) {
            Expr vm1 = const_add(v, Expr::integer(-1));
            return v * pow(u, vm1) * du;
        }
        Expr dv = diff_walk(v, leaf);
        return pow(u, v) * (dv * log(u) + v * du / u);
    }
    case Op::sin: return cos(args[0]) * diff_walk(args[0], leaf);
    case Op::cos: return -(sin(args[0])) * diff_walk(args[0], leaf);
    case Op::tan: return diff_walk(args[0], leaf) / pow(cos(args[0]), 2);
    case Op::exp: return exp(args[0]) * diff_walk(args[0], leaf);
    case Op::log: return diff_walk(args[0], leaf) / args[0];
    case Op::sqrt: return diff_walk(args[0], leaf) / (2 * sqrt(args[0]));
    case Op::abs:
        throw DerivativeError("no derivative rule for abs in " + to_string(e));
    }
    return Expr::integer(0);
}

} // namespace detail

// Partial derivative with respect to one target node (a symbol or a
// derivative node); every other symbol and derivative node is held constant.
inline Expr partial_derivative(const Expr& e, const Expr& target) {
    Expr d = detail::diff_walk(e, [&](const Expr& leaf) {
        return leaf == target ? Expr::integer(1) : Expr::integer(0);
    });
    return simplify_basic(d);
}

// Total derivative with respect to the independent variable: states pick up a
// derivative node, existing derivative nodes gain one order, parameters die.
inline Expr total_derivative(const Expr& e, const SymbolId& ivar) {
    Expr d = detail::diff_walk(e, [&](const Expr& leaf) -> Expr {
        if (leaf.is_symbol()) {
            const SymbolId& s = leaf.sym();
            if (s.kind == SymKind::independent)
                return s == ivar ? Expr::integer(1) : Expr::integer(0);
            if (s.kind == SymKind::parameter) return Expr::integer(0);
            return Expr::deriv(leaf, ivar, 1);
        }
        return Expr::deriv(leaf, ivar, 1);
    });
    return simplify_basic(d);
}

// Differentiate by symbol kind: total for the independent variable, partial
// for states and parameters.
inline Expr differentiate(const Expr& e, const SymbolId& wrt) {
    if (wrt.kind == SymKind::independent) return total_derivative(e, wrt);
    return partial_derivative(e, Expr::symbol(wrt));
}

inline std::vector<std::vector<Expr>> jacobian(const std::vector<Expr>& fs,
                                               const std::vector<Expr>& xs) {
    std::vector<std::vector<Expr>> out(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) {
        out[i].reserve(xs.size());
        for (const Expr& x : xs) out[i].push_back(partial_derivative(fs[i], x));
    }
    return out;
}

} // namespace daeflow
