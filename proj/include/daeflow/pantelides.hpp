#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "daeflow/derivative.hpp"
#include "daeflow/matching.hpp"
#include "daeflow/system.hpp"

namespace daeflow {

struct IndexReduction {
    FlatSystem system;
    std::vector<int> diff_counts; // per original equation
    int rounds = 0;
};

namespace detail {

// Explicit first-order rules D(v) -> rhs, extracted from equations where the
// derivative occurs exactly once, linearly, with a nonzero constant
// coefficient, and the solved right-hand side is derivative free.
inline std::map<std::string, Expr> extract_rules(const std::vector<Equation>& eqs,
                                                 const std::vector<SymbolId>& states,
                                                 const SymbolId& ivar) {
    std::map<std::string, Expr> rules;
    for (const auto& e : eqs) {
        Expr res = e.residual();
        for (const auto& v : states) {
            if (rules.count(v.full_name())) continue;
            Expr dv = Expr::deriv(Expr::symbol(v), ivar, 1);
            if (count_nodes(res, dv) != 1) continue;
            Expr a = partial_derivative(res, dv);
            if (!a.is_const() || a.value() == 0.0) continue;
            Expr rest = simplify_basic(substitute(res, dv, Expr::integer(0)));
            Expr solved = simplify_basic(const_mul(Expr::integer(-1), const_recip(a)) * rest);
            if (contains_deriv(solved)) continue;
            rules.emplace(v.full_name(), std::move(solved));
        }
    }
    return rules;
}

// Substitutes known first-order rules into an expression, deriving
// higher-order replacements on demand: D(v,k) becomes the (k-1)-th total
// derivative of the rule for v, itself expanded.
struct RuleExpander {
    const std::map<std::string, Expr>& rules;
    const SymbolId& ivar;
    std::map<std::pair<std::string, int>, Expr> memo;

    Expr expand(const Expr& e) {
        switch (e.kind()) {
        case ExprKind::constant:
        case ExprKind::symbol: return e;
        case ExprKind::apply: {
            std::vector<Expr> args;
            args.reserve(e.nargs());
            bool changed = false;
            for (const Expr& a : e.args()) {
                args.push_back(expand(a));
                if (args.back() != a) changed = true;
            }
            return changed ? Expr::apply(e.op(), std::move(args)) : e;
        }
        case ExprKind::deriv: {
            if (e.arg(0).is_symbol() && rules.count(e.arg(0).sym().full_name()))
                return derived(e.arg(0).sym().full_name(), e.order());
            Expr arg = expand(e.arg(0));
            return arg == e.arg(0) ? e : Expr::deriv(arg, e.sym(), e.order());
        }
        }
        return e;
    }

    Expr derived(const std::string& name, int order) {
        auto key = std::make_pair(name, order);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        Expr out;
        if (order == 1) {
            out = rules.at(name);
        } else {
            Expr prev = derived(name, order - 1);
            out = expand(total_derivative(prev, ivar));
        }
        memo.emplace(key, out);
        return out;
    }
};

inline std::map<std::string, int> top_orders(const std::vector<Equation>& eqs) {
    std::map<std::string, std::set<int>> occ;
    std::map<std::string, SymbolId> ids;
    for (const auto& e : eqs) {
        collect_occurrences(e.lhs, occ, ids, 0);
        collect_occurrences(e.rhs, occ, ids, 0);
    }
    std::map<std::string, int> top;
    for (const auto& [name, orders] : occ) top[name] = *orders.rbegin();
    return top;
}

} // namespace detail

// Structural index reduction. Finds the equations that block a perfect
// matching on highest-order derivatives, differentiates them in place (known
// explicit derivative rules are substituted into the result, so reducing the
// pendulum rewrites only the length constraint), and repeats until the
// matching closes. States whose derivatives then appear above first order are
// rewritten through chained first-order states (x_t, x_tt, ...) with fresh
// chain equations. The reduced system keeps the original solution set for
// initial values consistent with the differentiated constraints.
inline IndexReduction pantelides(const FlatSystem& sys, int max_diff = 8) {
    if (sys.equations.size() != sys.states.size())
        throw SingularSystemError(
            "system is not square: " + std::to_string(sys.equations.size()) +
            " equations for " + std::to_string(sys.states.size()) + " states");

    IndexReduction out;
    out.system = sys;
    out.diff_counts.assign(sys.equations.size(), 0);
    std::vector<Equation>& eqs = out.system.equations;

    while (true) {
        IncidenceStructure inc = build_incidence(eqs, out.system.states,
                                                 IncidenceMode::highest);
        Matching m = maximal_matching(inc);
        if (m.perfect()) break;

        int start = -1;
        for (std::size_t i = 0; i < eqs.size(); ++i)
            if (m.eq_to_col[i] < 0) {
                start = static_cast<int>(i);
                break;
            }

        std::vector<int> exposed = alternating_reachable(inc, m, start);
        auto rules = detail::extract_rules(eqs, out.system.states, out.system.ivar);
        detail::RuleExpander expander{rules, out.system.ivar, {}};
        for (int e : exposed) {
            if (out.diff_counts[e] >= max_diff) {
                std::string unmatched;
                for (std::size_t i = 0; i < eqs.size(); ++i)
                    if (m.eq_to_col[i] < 0)
                        unmatched += (unmatched.empty() ? "" : ", ") + std::to_string(i);
                throw SingularSystemError(
                    "no perfect matching after differentiating equation " +
                    std::to_string(e) + " " + std::to_string(max_diff) +
                    " times; unmatched equations: " + unmatched);
            }
            Expr dres = total_derivative(eqs[e].residual(), out.system.ivar);
            Expr expanded = simplify_basic(expander.expand(dres));
            if (expanded.is_const())
                throw SingularSystemError(
                    "equation " + std::to_string(e) +
                    " differentiates to a constant; system is structurally singular");
            eqs[e] = Equation{expanded, Expr::integer(0)};
            ++out.diff_counts[e];
        }
        ++out.rounds;
    }

    // First-order rewrite of any state still appearing above order one.
    auto top = detail::top_orders(eqs);
    std::set<std::string> taken;
    taken.insert(out.system.ivar.full_name());
    for (const auto& s : out.system.states) taken.insert(s.full_name());
    for (const auto& p : out.system.parameters) taken.insert(p.full_name());

    std::vector<SymbolId> base_states = out.system.states;
    for (const auto& v : base_states) {
        auto it = top.find(v.full_name());
        if (it == top.end() || it->second < 2) continue;
        int m_ord = it->second;
        std::vector<SymbolId> chain;
        std::string suffix = "_t";
        for (int k = 1; k < m_ord; ++k) {
            SymbolId c = v;
            c.name = v.name + suffix;
            while (taken.count(c.full_name())) c.name += "_";
            taken.insert(c.full_name());
            chain.push_back(c);
            suffix += "t";
        }
        std::vector<std::pair<Expr, Expr>> subs;
        for (int k = 1; k < m_ord; ++k)
            subs.emplace_back(Expr::deriv(Expr::symbol(v), out.system.ivar, k),
                              Expr::symbol(chain[k - 1]));
        subs.emplace_back(Expr::deriv(Expr::symbol(v), out.system.ivar, m_ord),
                          Expr::deriv(Expr::symbol(chain[m_ord - 2]), out.system.ivar, 1));
        for (auto& e : eqs)
            e = Equation{substitute(e.lhs, subs), substitute(e.rhs, subs)};
        Expr prev = Expr::symbol(v);
        for (const auto& c : chain) {
            eqs.push_back(Equation{Expr::deriv(prev, out.system.ivar, 1), Expr::symbol(c)});
            out.system.states.push_back(c);
            prev = Expr::symbol(c);
        }
    }

    IncidenceStructure inc = build_incidence(eqs, out.system.states, IncidenceMode::highest);
    Matching m = maximal_matching(inc);
    if (!m.perfect())
        throw SingularSystemError(
            "reduced system admits no perfect matching on highest derivatives");
    return out;
}

} // namespace daeflow
