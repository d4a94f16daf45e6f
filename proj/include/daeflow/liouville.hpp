#pragma once

#include <set>
#include <string>
#include <vector>

#include "daeflow/derivative.hpp"
#include "daeflow/tearing.hpp"

namespace daeflow {

// Appends a phase-space volume state w with D(w) = w * tr(J), where J is the
// Jacobian of the explicit right-hand sides. Requires a pure first-order ODE
// system: every equation must solve explicitly for the derivative of its
// matched state. The new state starts at 1 and tracks the local volume
// expansion factor along the trajectory.
inline FlatSystem liouville_transform(const FlatSystem& sys) {
    IncidenceStructure inc = build_incidence(sys, IncidenceMode::highest);
    Matching m = maximal_matching(inc);
    if (!m.perfect())
        throw SystemError("volume transform requires a square matched system");

    std::vector<Expr> rhs(sys.states.size(), Expr::integer(0));
    for (std::size_t i = 0; i < sys.equations.size(); ++i) {
        const auto& [v, k] = inc.cols[m.eq_to_col[i]];
        if (k != 1)
            throw SystemError("volume transform requires a pure ODE system; '" +
                              v.full_name() + "' is not defined by a first derivative");
        Expr target = Expr::deriv(Expr::symbol(v), sys.ivar, 1);
        auto sol = try_explicit_solve(sys.equations[i].residual(), target, true);
        if (!sol)
            throw SystemError("equation for D(" + v.full_name() +
                              ") is not an explicit right-hand side");
        for (std::size_t j = 0; j < sys.states.size(); ++j)
            if (sys.states[j] == v) rhs[j] = sol->rhs;
    }

    Expr trace = Expr::integer(0);
    for (std::size_t j = 0; j < sys.states.size(); ++j)
        trace = trace + partial_derivative(rhs[j], Expr::symbol(sys.states[j]));
    trace = simplify_basic(trace);

    FlatSystem out = sys;
    std::set<std::string> taken;
    taken.insert(out.ivar.full_name());
    for (const auto& s : out.states) taken.insert(s.full_name());
    for (const auto& p : out.parameters) taken.insert(p.full_name());
    SymbolId w = sym_state("w", out.ivar);
    while (taken.count(w.full_name())) w.name += "_";

    Expr we = Expr::symbol(w);
    out.equations.push_back(eq(Expr::deriv(we, out.ivar, 1), simplify_basic(we * trace)));
    out.states.push_back(w);
    out.defaults[w.full_name()] = 1.0;
    return out;
}

} // namespace daeflow
