#pragma once

#include <algorithm>
#include <vector>

#include "daeflow/expr.hpp"

namespace daeflow {

Expr simplify_basic(const Expr& e);

namespace detail {

inline Expr const_neg(const Expr& a) {
    if (a.is_rational()) return Expr::rational(-a.num(), a.den());
    return Expr::real(-a.value());
}

inline Expr const_add(const Expr& a, const Expr& b) {
    if (a.is_rational() && b.is_rational()) {
        auto r = rat_add(Rat{a.num(), a.den()}, Rat{b.num(), b.den()});
        if (r) return Expr::rational(r->num, r->den);
    }
    return Expr::real(a.value() + b.value());
}

inline Expr const_mul(const Expr& a, const Expr& b) {
    if (a.is_rational() && b.is_rational()) {
        auto r = rat_mul(Rat{a.num(), a.den()}, Rat{b.num(), b.den()});
        if (r) return Expr::rational(r->num, r->den);
    }
    return Expr::real(a.value() * b.value());
}

inline Expr const_recip(const Expr& a) {
    if (a.value() == 0.0) throw EvalDomainError("division by literal zero");
    if (a.is_rational()) return Expr::rational(a.den(), a.num());
    return Expr::real(1.0 / a.value());
}

Expr simp_mul(std::vector<Expr> args);

inline Expr simp_add(std::vector<Expr> args) {
    std::vector<Expr> terms;
    Expr csum = Expr::integer(0);
    for (const Expr& a : args) {
        if (a.is_apply(Op::add)) {
            for (const Expr& inner : a.args()) {
                if (inner.is_const())
                    csum = const_add(csum, inner);
                else
                    terms.push_back(inner);
            }
        } else if (a.is_const()) {
            csum = const_add(csum, a);
        } else {
            terms.push_back(a);
        }
    }

    // Cancel structurally identical terms that appear with opposite constant
    // coefficients; no other like-term collection happens here.
    auto split = [](const Expr& t) -> std::pair<Expr, Expr> {
        if (t.is_apply(Op::mul) && t.arg(0).is_const()) {
            const std::vector<Expr>& ma = t.args();
            if (ma.size() == 2) return {ma[0], ma[1]};
            std::vector<Expr> rest(ma.begin() + 1, ma.end());
            return {ma[0], Expr::apply(Op::mul, std::move(rest))};
        }
        return {Expr::integer(1), t};
    };
    std::vector<bool> dead(terms.size(), false);
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (dead[i]) continue;
        auto [ci, corei] = split(terms[i]);
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
            if (dead[j]) continue;
            auto [cj, corej] = split(terms[j]);
            if (ci.value() == -cj.value() && corei == corej) {
                dead[i] = dead[j] = true;
                break;
            }
        }
    }
    std::vector<Expr> keep;
    for (std::size_t i = 0; i < terms.size(); ++i)
        if (!dead[i]) keep.push_back(terms[i]);

    if (!csum.is_zero()) keep.push_back(csum);
    if (keep.empty()) return Expr::integer(0);
    if (keep.size() == 1) return keep[0];
    std::stable_sort(keep.begin(), keep.end(), expr_less);
    return Expr::apply(Op::add, std::move(keep));
}

Expr simp_pow(const Expr& base, const Expr& expo);
Expr simp_div(const Expr& a, const Expr& b);

inline Expr simp_mul(std::vector<Expr> args) {
    std::vector<Expr> factors;
    Expr c = Expr::integer(1);
    for (const Expr& a : args) {
        if (a.is_apply(Op::mul)) {
            for (const Expr& inner : a.args()) {
                if (inner.is_const())
                    c = const_mul(c, inner);
                else
                    factors.push_back(inner);
            }
        } else if (a.is_const()) {
            c = const_mul(c, a);
        } else {
            factors.push_back(a);
        }
    }
    if (c.is_zero()) return Expr::integer(0);

    // Merge repeated bases: x*x -> x^2, x^2*x -> x^3. Only constant exponents
    // take part; anything else stays an opaque factor.
    std::vector<std::pair<Expr, Expr>> grouped; // (base, constant exponent)
    for (const Expr& f : factors) {
        Expr base = f, expo = Expr::integer(1);
        if (f.is_apply(Op::pow) && f.arg(1).is_const()) {
            base = f.arg(0);
            expo = f.arg(1);
        }
        bool merged = false;
        for (auto& [b, k] : grouped) {
            if (b == base) {
                k = const_add(k, expo);
                merged = true;
                break;
            }
        }
        if (!merged) grouped.emplace_back(base, expo);
    }
    factors.clear();
    for (auto& [b, k] : grouped) {
        Expr f = simp_pow(b, k);
        if (f.is_const())
            c = const_mul(c, f);
        else
            factors.push_back(f);
    }
    if (c.is_zero()) return Expr::integer(0);

    // Push a constant factor through a sum: 2*(x + y) -> 2*x + 2*y. Applied to
    // the first sum only; products of sums are never expanded.
    if (!c.is_one()) {
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (factors[i].is_apply(Op::add)) {
                std::vector<Expr> spread;
                spread.reserve(factors[i].nargs());
                for (const Expr& t : factors[i].args()) spread.push_back(simp_mul({c, t}));
                std::vector<Expr> rest;
                rest.push_back(simp_add(std::move(spread)));
                for (std::size_t j = 0; j < factors.size(); ++j)
                    if (j != i) rest.push_back(factors[j]);
                return simp_mul(std::move(rest));
            }
        }
        // Fold a constant into the numerator of a quotient so that -(x/y) and
        // (-x)/y normalize identically.
        for (std::size_t i = 0; i < factors.size(); ++i) {
            if (factors[i].is_apply(Op::div)) {
                std::vector<Expr> rest;
                rest.push_back(simp_div(simp_mul({c, factors[i].arg(0)}),
                                        factors[i].arg(1)));
                for (std::size_t j = 0; j < factors.size(); ++j)
                    if (j != i) rest.push_back(factors[j]);
                return simp_mul(std::move(rest));
            }
        }
    }

    if (factors.empty()) return c;
    if (c.is_one() && factors.size() == 1) return factors[0];
    if (!c.is_one()) factors.push_back(c);
    if (factors.size() == 1) return factors[0];
    std::stable_sort(factors.begin(), factors.end(), expr_less);
    return Expr::apply(Op::mul, std::move(factors));
}

inline Expr simp_pow(const Expr& base, const Expr& expo) {
    if (expo.is_const()) {
        if (expo.value() == 0.0) return Expr::integer(1);
        if (expo.is_one()) return base;
        if (base.is_const()) {
            if (base.is_rational() && expo.is_rational() && expo.den() == 1 &&
                expo.num() >= -64 && expo.num() <= 64) {
                long long n = expo.num();
                auto r = rat_pow_nonneg(Rat{base.num(), base.den()}, n < 0 ? -n : n);
                if (r && n < 0) {
                    if (r->num == 0) throw EvalDomainError("zero raised to a negative power");
                    r = rat_recip(*r);
                }
                if (r) return Expr::rational(r->num, r->den);
            }
            double v = std::pow(base.value(), expo.value());
            if (!std::isfinite(v))
                throw EvalDomainError("constant power with non-finite result");
            return Expr::real(v);
        }
    }
    if (base.is_const() && base.is_one()) return Expr::integer(1);
    return Expr::apply(Op::pow, {base, expo});
}

inline Expr simp_div(const Expr& a, const Expr& b) {
    if (b.is_const()) return simp_mul({a, const_recip(b)});
    if (a.is_zero()) return Expr::integer(0);
    return Expr::apply(Op::div, {a, b});
}

inline Expr simp_elementary(Op op, const Expr& u) {
    if (u.is_const()) {
        double x = u.value();
        double v = 0;
        switch (op) {
        case Op::sin: v = std::sin(x); break;
        case Op::cos: v = std::cos(x); break;
        case Op::tan: v = std::tan(x); break;
        case Op::exp: v = std::exp(x); break;
        case Op::log:
            if (x <= 0.0) throw EvalDomainError("log of a non-positive constant");
            v = std::log(x);
            break;
        case Op::sqrt:
            if (x < 0.0) throw EvalDomainError("sqrt of a negative constant");
            v = std::sqrt(x);
            break;
        case Op::abs:
            if (u.is_rational())
                return Expr::rational(u.num() < 0 ? -u.num() : u.num(), u.den());
            return Expr::real(std::fabs(x));
        default: break;
        }
        if (!std::isfinite(v))
            throw EvalDomainError(std::string(op_name(op)) + " of constant overflowed");
        return Expr::real(v);
    }
    return Expr::apply(op, {u});
}

} // namespace detail

// Deterministic bottom-up normalization: flattening of nested sums/products,
// exact constant folding, identity elimination, cancellation of structurally
// identical terms with opposite sign, merging of repeated factors, constant
// distribution over sums, and canonical argument ordering. Idempotent; never
// expands products of non-constant subexpressions.
inline Expr simplify_basic(const Expr& e) {
    switch (e.kind()) {
    case ExprKind::constant:
    case ExprKind::symbol: return e;
    case ExprKind::deriv: {
        Expr arg = simplify_basic(e.arg(0));
        return Expr::deriv(arg, e.sym(), e.order());
    }
    case ExprKind::apply: {
        std::vector<Expr> args;
        args.reserve(e.nargs());
        for (const Expr& a : e.args()) args.push_back(simplify_basic(a));
        switch (e.op()) {
        case Op::add: return detail::simp_add(std::move(args));
        case Op::mul: return detail::simp_mul(std::move(args));
        case Op::neg: return detail::simp_mul({Expr::integer(-1), args[0]});
        case Op::div: return detail::simp_div(args[0], args[1]);
        case Op::pow: return detail::simp_pow(args[0], args[1]);
        default: return detail::simp_elementary(e.op(), args[0]);
        }
    }
    }
    return e;
}

} // namespace daeflow
