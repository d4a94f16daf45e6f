#pragma once

#include <string>
#include <vector>

#include "daeflow/errors.hpp"
#include "daeflow/system.hpp"

namespace daeflow {

// Scalable benchmark: n RC charging circuits, each with a temperature-dependent
// nonlinear resistor, all tied to one ambient temperature. Every circuit
// contributes one differential state, one torn 1x1 nonlinear block, and one
// alias-eliminated connection, so the algebraic work is embarrassingly
// parallel.
inline OdeSystem rc_network(int n_circuits) {
    if (n_circuits < 1) throw SystemError("the circuit count must be positive");
    SymbolId t = sym_ivar("t");
    SymbolId tamb = sym_param("Tamb");
    Expr Tamb = Expr::symbol(tamb);

    std::vector<OdeSystem> subs;
    std::vector<Equation> eqs;
    for (int i = 1; i <= n_circuits; ++i) {
        std::string nm = "rc" + std::to_string(i);
        SymbolId vs = sym_state("v", t), Rs = sym_state("R", t), tin = sym_state("Tin", t);
        SymbolId Cs = sym_param("C"), R0s = sym_param("R0"), als = sym_param("alpha"),
                 qs = sym_param("q"), Vss = sym_param("Vs");
        Expr v = Expr::symbol(vs), R = Expr::symbol(Rs), Tin = Expr::symbol(tin);
        Expr C = Expr::symbol(Cs), R0 = Expr::symbol(R0s), alpha = Expr::symbol(als),
             q = Expr::symbol(qs), Vsr = Expr::symbol(Vss);
        subs.push_back(make_system(
            nm, t,
            {eq(D(v, t), (Vsr - v) / (R * C)),
             eq(Expr::integer(0), pow(R, 2) - R0 * (1 + alpha * Tin) * R - q * pow(v, 2))},
            {.states = {{vs, Rs, tin}},
             .parameters = {{Cs, R0s, als, qs, Vss}},
             .defaults = {{"v", 0.0}, {"R", 110.0}, {"Tin", 25.0},
                          {"C", 1e-3}, {"R0", 100.0}, {"alpha", 0.01}, {"q", 40.0},
                          {"Vs", 5.0}}}));
        eqs.push_back(eq(Expr::integer(0), Expr::symbol(in_namespace(tin, nm)) - Tamb));
    }

    return make_system("rcnet", t, std::move(eqs),
                       {.states = {{}},
                        .parameters = {{tamb}},
                        .defaults = {{"Tamb", 25.0}},
                        .subsystems = std::move(subs)});
}

} // namespace daeflow
