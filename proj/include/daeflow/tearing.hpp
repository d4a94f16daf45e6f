#pragma once

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "daeflow/alias.hpp"
#include "daeflow/blt.hpp"
#include "daeflow/derivative.hpp"

namespace daeflow {

struct ExplicitSolve {
    Expr rhs;
    std::vector<Expr> nonzero; // parameter expressions that must be nonzero at runtime
};

namespace detail {

inline bool param_only(const Expr& e) {
    bool ok = true;
    for_each_node(e, [&](const Expr& n) {
        if (n.is_deriv()) ok = false;
        if (n.is_symbol() && n.sym().kind != SymKind::parameter) ok = false;
    });
    return ok;
}

} // namespace detail

// Solves residual = 0 for `target` when the target occurs exactly once,
// linearly, and its coefficient is a nonzero constant or (unless
// require_const_coeff) built from parameters only. A parameter coefficient is
// reported back as a nonzero precondition instead of being assumed safe.
inline std::optional<ExplicitSolve> try_explicit_solve(const Expr& res, const Expr& target,
                                                       bool require_const_coeff) {
    if (count_nodes(res, target) != 1) return std::nullopt;
    Expr a = partial_derivative(res, target);
    if (contains(a, target)) return std::nullopt;
    Expr b = simplify_basic(substitute(res, target, Expr::integer(0)));
    if (a.is_const()) {
        if (a.value() == 0.0) return std::nullopt;
        Expr coeff = detail::const_mul(Expr::integer(-1), detail::const_recip(a));
        return ExplicitSolve{simplify_basic(coeff * b), {}};
    }
    if (require_const_coeff || !detail::param_only(a)) return std::nullopt;
    return ExplicitSolve{simplify_basic((Expr::integer(-1) * b) / a), {a}};
}

struct SolvedAssign {
    SymbolId var;
    int order; // 0: the variable's value, 1: its derivative
    Expr rhs;
    std::vector<Expr> nonzero;
    int pos; // position in block execution order
};

struct InnerAssign {
    SymbolId var;
    int order;
    Expr rhs;
    std::vector<Expr> nonzero;
};

struct TornBlock {
    std::vector<std::pair<SymbolId, int>> unknowns; // iteration variables
    std::vector<InnerAssign> inners;                // computed from unknowns each sweep
    std::vector<Expr> residuals;
    std::vector<int> eqs; // original indices of the residual equations
    int pos;
};

struct SimplifiedSystem {
    FlatSystem system; // after alias elimination
    std::vector<std::pair<SymbolId, Expr>> observed;
    std::vector<SymbolId> differential_states; // in declaration order
    std::vector<SymbolId> algebraic_states;
    std::vector<SolvedAssign> solved;
    std::vector<TornBlock> torn;
    IncidenceStructure highest;
    Matching matching;
    BltResult blt;
};

// Alias elimination, matching, block ordering, and tearing in one pass.
// Every equation ends up either as an explicit assignment or inside a torn
// block whose unknowns must be iterated on; block positions record the
// execution order so assignments and blocks interleave correctly.
inline SimplifiedSystem structural_simplify(const FlatSystem& flat) {
    AliasResult ar = alias_elimination(flat);
    SimplifiedSystem out;
    out.system = std::move(ar.system);
    out.observed = std::move(ar.observed);
    out.highest = build_incidence(out.system, IncidenceMode::highest);
    out.matching = maximal_matching(out.highest);
    if (!out.matching.perfect())
        throw StructuralError(
            "no perfect matching on highest-order derivatives; run index reduction first");
    out.blt = blt_sort(out.system.equations, out.highest, out.matching);

    const SymbolId& ivar = out.system.ivar;
    auto target_of = [&](const SymbolId& v, int k) {
        return k == 0 ? Expr::symbol(v) : Expr::deriv(Expr::symbol(v), ivar, k);
    };
    auto occ_orders = [&](const Expr& res) {
        std::map<std::string, std::set<int>> orders;
        std::map<std::string, SymbolId> ids;
        collect_occurrences(res, orders, ids, 0);
        return orders;
    };

    for (int pos = 0; pos < static_cast<int>(out.blt.blocks.size()); ++pos) {
        const BltBlock& blk = out.blt.blocks[pos];
        if (blk.eqs.size() == 1) {
            const auto& [v, k] = out.highest.cols[blk.cols[0]];
            Expr res = out.system.equations[blk.eqs[0]].residual();
            auto sol = try_explicit_solve(res, target_of(v, k), k >= 1);
            if (sol) {
                out.solved.push_back({v, k, sol->rhs, sol->nonzero, pos});
                continue;
            }
        }

        TornBlock tb;
        tb.pos = pos;
        std::vector<int> rem_eqs = blk.eqs;
        std::vector<int> rem_cols = blk.cols;
        std::sort(rem_cols.begin(), rem_cols.end());
        std::vector<int> torn_cols;

        while (true) {
            bool assigned = false;
            for (std::size_t ei = 0; ei < rem_eqs.size() && !assigned; ++ei) {
                Expr res = out.system.equations[rem_eqs[ei]].residual();
                auto orders = occ_orders(res);
                std::vector<int> incident;
                for (int c : rem_cols) {
                    const auto& [v, k] = out.highest.cols[c];
                    auto it = orders.find(v.full_name());
                    if (it != orders.end() && it->second.count(k)) incident.push_back(c);
                }
                if (incident.size() != 1) continue;
                const auto& [v, k] = out.highest.cols[incident[0]];
                auto sol = try_explicit_solve(res, target_of(v, k), k >= 1);
                if (!sol) continue;
                tb.inners.push_back({v, k, sol->rhs, sol->nonzero});
                rem_eqs.erase(rem_eqs.begin() + ei);
                rem_cols.erase(std::find(rem_cols.begin(), rem_cols.end(), incident[0]));
                assigned = true;
            }
            if (assigned) continue;
            if (!rem_cols.empty()) {
                torn_cols.push_back(rem_cols.front());
                rem_cols.erase(rem_cols.begin());
                continue;
            }
            break;
        }

        for (int c : torn_cols) tb.unknowns.push_back(out.highest.cols[c]);
        for (int e : rem_eqs) {
            tb.residuals.push_back(out.system.equations[e].residual());
            tb.eqs.push_back(e);
        }
        out.torn.push_back(std::move(tb));
    }

    for (std::size_t j = 0; j < out.system.states.size(); ++j) {
        if (out.highest.cols[j].second >= 1)
            out.differential_states.push_back(out.system.states[j]);
        else
            out.algebraic_states.push_back(out.system.states[j]);
    }
    return out;
}

} // namespace daeflow
