#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "daeflow/expr_text.hpp"
#include "daeflow/simplify.hpp"
#include "daeflow/system.hpp"

namespace daeflow {

struct AliasResult {
    FlatSystem system;
    // eliminated state -> expression it was replaced by, in elimination order
    std::vector<std::pair<SymbolId, Expr>> observed;
};

namespace detail {

struct AliasTerm {
    SymbolId sym;
    int sign = 1;
};

// Decomposes a residual of the shape  c + s1*a + s2*b  with unit signs into
// its parts. Returns nullopt for anything else.
struct AliasShape {
    Expr constant = Expr::integer(0);
    std::vector<AliasTerm> terms;
};

inline std::optional<AliasShape> match_alias(const Expr& res) {
    AliasShape shape;
    auto take = [&](const Expr& term) -> bool {
        if (term.is_symbol()) {
            shape.terms.push_back({term.sym(), 1});
            return true;
        }
        if (term.is_apply(Op::mul) && term.nargs() == 2 && term.arg(0).is_const() &&
            term.arg(0).value() == -1.0 && term.arg(1).is_symbol()) {
            shape.terms.push_back({term.arg(1).sym(), -1});
            return true;
        }
        return false;
    };
    if (res.is_apply(Op::add)) {
        std::size_t i = 0;
        if (res.arg(0).is_const()) {
            shape.constant = res.arg(0);
            i = 1;
        }
        for (; i < res.nargs(); ++i)
            if (!take(res.arg(i))) return std::nullopt;
    } else if (!take(res)) {
        return std::nullopt;
    }
    if (shape.terms.empty() || shape.terms.size() > 2) return std::nullopt;
    return shape;
}

inline std::set<std::string> differentiated_states(const std::vector<Equation>& eqs) {
    std::set<std::string> out;
    for (const auto& e : eqs)
        for (const Expr& side : {e.lhs, e.rhs})
            for_each_node(side, [&](const Expr& n) {
                if (n.is_deriv() && n.arg(0).is_symbol())
                    out.insert(n.arg(0).sym().full_name());
            });
    return out;
}

} // namespace detail

// Removes trivially redundant structure: equations that reduce to 0 = 0, and
// states bound by unit-coefficient relations (x = y + c, x = c). Eliminated
// states move to the observed list with their defining expression; remaining
// equations, later observed entries, and derivative arguments are rewritten in
// terms of the survivor. A residual that reduces to a nonzero constant means
// the equations contradict each other.
inline AliasResult alias_elimination(const FlatSystem& sys) {
    AliasResult out;
    out.system = sys;
    auto& eqs = out.system.equations;
    auto& states = out.system.states;
    for (auto& e : eqs) e = Equation{simplify_basic(e.lhs), simplify_basic(e.rhs)};

    bool progress = true;
    while (progress) {
        progress = false;
        auto diffed = detail::differentiated_states(eqs);
        auto state_index = [&](const SymbolId& s) -> int {
            for (std::size_t i = 0; i < states.size(); ++i)
                if (states[i] == s) return static_cast<int>(i);
            return -1;
        };

        for (std::size_t i = 0; i < eqs.size(); ++i) {
            Expr res = eqs[i].residual();
            if (res.is_const()) {
                if (res.value() != 0.0)
                    throw ContradictionError("equation reduces to " + to_string(res) +
                                             " = 0; equations are inconsistent");
                eqs.erase(eqs.begin() + static_cast<std::ptrdiff_t>(i));
                progress = true;
                break;
            }

            auto shape = detail::match_alias(res);
            if (!shape) continue;

            // pick the eliminated side: a state, preferably never differentiated,
            // preferably declared later
            int pick = -1;
            int pick_rank = -1;
            for (std::size_t k = 0; k < shape->terms.size(); ++k) {
                int si = state_index(shape->terms[k].sym);
                if (si < 0) continue;
                bool nd = diffed.count(shape->terms[k].sym.full_name()) == 0;
                int rank = (nd ? 1 << 20 : 0) + si;
                if (rank > pick_rank) {
                    pick_rank = rank;
                    pick = static_cast<int>(k);
                }
            }
            if (pick < 0) continue;

            const detail::AliasTerm victim = shape->terms[static_cast<std::size_t>(pick)];
            // res = c + s_v*v + s_o*o = 0  =>  v = -(c + s_o*o)/s_v
            Expr rest = shape->constant;
            if (shape->terms.size() == 2) {
                const auto& other = shape->terms[1 - static_cast<std::size_t>(pick)];
                Expr o = Expr::symbol(other.sym);
                rest = rest + (other.sign > 0 ? o : Expr::integer(-1) * o);
            }
            Expr repl = simplify_basic(victim.sign > 0 ? Expr::integer(-1) * rest : rest);

            Expr vx = Expr::symbol(victim.sym);
            eqs.erase(eqs.begin() + static_cast<std::ptrdiff_t>(i));
            for (auto& e : eqs)
                e = Equation{simplify_basic(substitute(e.lhs, vx, repl)),
                             simplify_basic(substitute(e.rhs, vx, repl))};
            for (auto& [w, def] : out.observed) def = substitute(def, vx, repl);
            out.observed.emplace_back(victim.sym, repl);
            states.erase(states.begin() + state_index(victim.sym));
            out.system.defaults.erase(victim.sym.full_name());
            progress = true;
            break;
        }
    }
    return out;
}

} // namespace daeflow
