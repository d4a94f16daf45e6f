#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "daeflow/expr.hpp"
#include "daeflow/expr_text.hpp"

namespace daeflow {

struct EvalEnv {
    std::map<std::string, double> values; // symbol full name -> value
    std::map<std::pair<std::string, int>, double> deriv_values; // (state, order)
};

inline double evaluate(const Expr& e, const EvalEnv& env) {
    switch (e.kind()) {
    case ExprKind::constant: return e.value();
    case ExprKind::symbol: {
        auto it = env.values.find(e.sym().full_name());
        if (it == env.values.end())
            throw UnboundSymbolError("unbound symbol '" + e.sym().full_name() + "'");
        return it->second;
    }
    case ExprKind::deriv: {
        if (!e.arg(0).is_symbol())
            throw EvalDomainError("cannot evaluate derivative of compound expression " +
                                  to_string(e));
        auto it = env.deriv_values.find({e.arg(0).sym().full_name(), e.order()});
        if (it == env.deriv_values.end())
            throw UnboundSymbolError("unbound derivative " + to_string(e));
        return it->second;
    }
    case ExprKind::apply: break;
    }
    double v = 0;
    switch (e.op()) {
    case Op::add: {
        v = evaluate(e.arg(0), env);
        for (std::size_t i = 1; i < e.nargs(); ++i) v += evaluate(e.arg(i), env);
        break;
    }
    case Op::mul: {
        v = evaluate(e.arg(0), env);
        for (std::size_t i = 1; i < e.nargs(); ++i) v *= evaluate(e.arg(i), env);
        break;
    }
    case Op::div: {
        double num = evaluate(e.arg(0), env);
        double den = evaluate(e.arg(1), env);
        if (den == 0.0) throw EvalDomainError("division by zero in " + to_string(e));
        v = num / den;
        break;
    }
    case Op::pow: v = std::pow(evaluate(e.arg(0), env), evaluate(e.arg(1), env)); break;
    case Op::neg: v = -evaluate(e.arg(0), env); break;
    case Op::sin: v = std::sin(evaluate(e.arg(0), env)); break;
    case Op::cos: v = std::cos(evaluate(e.arg(0), env)); break;
    case Op::tan: v = std::tan(evaluate(e.arg(0), env)); break;
    case Op::exp: v = std::exp(evaluate(e.arg(0), env)); break;
    case Op::log: {
        double x = evaluate(e.arg(0), env);
        if (x <= 0.0) throw EvalDomainError("log of non-positive value in " + to_string(e));
        v = std::log(x);
        break;
    }
    case Op::sqrt: {
        double x = evaluate(e.arg(0), env);
        if (x < 0.0) throw EvalDomainError("sqrt of negative value in " + to_string(e));
        v = std::sqrt(x);
        break;
    }
    case Op::abs: v = std::fabs(evaluate(e.arg(0), env)); break;
    }
    if (!std::isfinite(v))
        throw EvalDomainError("non-finite result evaluating " + to_string(e));
    return v;
}

// Evaluation over an arbitrary scalar type: leaves are resolved by `leaf`,
// operators by ADL. Lets the same expression drive doubles, traced values, or
// anything else with the right operator set.
template <class S, class LeafFn>
S evaluate_generic(const Expr& e, LeafFn&& leaf) {
    switch (e.kind()) {
    case ExprKind::constant: return S(e.value());
    case ExprKind::symbol:
    case ExprKind::deriv: return leaf(e);
    case ExprKind::apply: break;
    }
    auto ev = [&](const Expr& a) { return evaluate_generic<S>(a, leaf); };
    switch (e.op()) {
    case Op::add: {
        S v = ev(e.arg(0));
        for (std::size_t i = 1; i < e.nargs(); ++i) v = v + ev(e.arg(i));
        return v;
    }
    case Op::mul: {
        S v = ev(e.arg(0));
        for (std::size_t i = 1; i < e.nargs(); ++i) v = v * ev(e.arg(i));
        return v;
    }
    case Op::div: return ev(e.arg(0)) / ev(e.arg(1));
    case Op::pow: {
        using std::pow;
        return pow(ev(e.arg(0)), ev(e.arg(1)));
    }
    case Op::neg: return -ev(e.arg(0));
    case Op::sin: {
        using std::sin;
        return sin(ev(e.arg(0)));
    }
    case Op::cos: {
        using std::cos;
        return cos(ev(e.arg(0)));
    }
    case Op::tan: {
        using std::tan;
        return tan(ev(e.arg(0)));
    }
    case Op::exp: {
        using std::exp;
        return exp(ev(e.arg(0)));
    }
    case Op::log: {
        using std::log;
        return log(ev(e.arg(0)));
    }
    case Op::sqrt: {
        using std::sqrt;
        return sqrt(ev(e.arg(0)));
    }
    case Op::abs: {
        using std::abs;
        return abs(ev(e.arg(0)));
    }
    }
    return S(0.0);
}

} // namespace daeflow
