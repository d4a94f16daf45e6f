#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "daeflow/expr.hpp"
#include "daeflow/simplify.hpp"

namespace daeflow {

struct Equation {
    Expr lhs, rhs;
    Expr residual() const { return simplify_basic(lhs - rhs); }
};

inline Equation eq(Expr lhs, Expr rhs) { return Equation{std::move(lhs), std::move(rhs)}; }

// Hierarchical model: equations over its own symbols plus dotted references
// into subsystems. Stored exactly as written.
struct OdeSystem {
    std::string name;
    SymbolId ivar;
    std::vector<Equation> equations;
    std::vector<SymbolId> states;
    std::vector<SymbolId> parameters;
    std::map<std::string, double> defaults; // symbol full name -> value
    std::vector<OdeSystem> subsystems;
};

// Flat namespace-free view: every symbol carries its dotted path, exactly one
// independent variable.
struct FlatSystem {
    std::string name;
    SymbolId ivar;
    std::vector<Equation> equations;
    std::vector<SymbolId> states;
    std::vector<SymbolId> parameters;
    std::map<std::string, double> defaults;

    int state_index(const std::string& full) const {
        for (std::size_t i = 0; i < states.size(); ++i)
            if (states[i].full_name() == full) return static_cast<int>(i);
        return -1;
    }
};

struct MakeOptions {
    std::optional<std::vector<SymbolId>> states;
    std::optional<std::vector<SymbolId>> parameters;
    std::map<std::string, double> defaults;
    std::vector<OdeSystem> subsystems;
};

namespace detail {

struct SymbolUse {
    SymbolId id;
    std::set<int> orders;
    std::size_t first_seen;
};

inline void scan_symbols(const Expr& e, std::map<std::string, SymbolUse>& uses,
                         std::size_t& counter, int depth) {
    switch (e.kind()) {
    case ExprKind::constant: return;
    case ExprKind::symbol: {
        std::string f = e.sym().full_name();
        auto it = uses.find(f);
        if (it == uses.end())
            it = uses.emplace(f, SymbolUse{e.sym(), {}, counter++}).first;
        it->second.orders.insert(depth);
        return;
    }
    case ExprKind::apply:
        for (const Expr& a : e.args()) scan_symbols(a, uses, counter, depth);
        return;
    case ExprKind::deriv:
        scan_symbols(e.arg(0), uses, counter, depth + e.order());
        return;
    }
}

inline const SymbolId* find_in_subsystems(const OdeSystem& sys,
                                          const std::vector<std::string>& path,
                                          std::size_t pos, const std::string& name) {
    if (pos == path.size()) {
        for (const auto& s : sys.states)
            if (s.name == name) return &s;
        for (const auto& p : sys.parameters)
            if (p.name == name) return &p;
        return nullptr;
    }
    for (const auto& sub : sys.subsystems)
        if (sub.name == path[pos]) return find_in_subsystems(sub, path, pos + 1, name);
    return nullptr;
}

} // namespace detail

// Assembles a system. Without explicit lists, classification is inferred from
// the equations: anything differentiated or declared time dependent is a
// state, the rest are parameters. A symbol declared as parameter that shows
// up under a derivative is an error, as is an undeclared symbol when explicit
// lists are given.
inline OdeSystem make_system(std::string name, SymbolId ivar,
                             std::vector<Equation> equations, MakeOptions opts = {}) {
    OdeSystem sys;
    sys.name = std::move(name);
    sys.ivar = std::move(ivar);
    sys.equations = std::move(equations);
    sys.defaults = std::move(opts.defaults);
    sys.subsystems = std::move(opts.subsystems);

    std::map<std::string, detail::SymbolUse> uses;
    std::size_t counter = 0;
    for (const auto& e : sys.equations) {
        detail::scan_symbols(e.lhs, uses, counter, 0);
        detail::scan_symbols(e.rhs, uses, counter, 0);
    }

    for (const auto& [full, use] : uses) {
        if (use.id.kind == SymKind::independent && !(use.id == sys.ivar))
            throw SystemError("equation references foreign independent variable '" +
                              full + "'");
        if (use.id.kind == SymKind::parameter && *use.orders.rbegin() > 0)
            throw SystemError("parameter '" + full + "' appears under a derivative");
        if (!use.id.path.empty()) {
            if (!detail::find_in_subsystems(sys, use.id.path, 0, use.id.name))
                throw SystemError("reference to unknown subsystem symbol '" + full + "'");
        }
    }

    if (opts.states || opts.parameters) {
        sys.states = opts.states.value_or(std::vector<SymbolId>{});
        sys.parameters = opts.parameters.value_or(std::vector<SymbolId>{});
        std::set<std::string> declared;
        declared.insert(sys.ivar.full_name());
        for (const auto& s : sys.states) declared.insert(s.full_name());
        for (const auto& p : sys.parameters) declared.insert(p.full_name());
        for (const auto& [full, use] : uses) {
            if (!use.id.path.empty()) continue;
            if (!declared.count(full))
                throw SystemError("symbol '" + full + "' is not declared");
        }
        std::set<std::string> params;
        for (const auto& p : sys.parameters) params.insert(p.full_name());
        for (const auto& [full, use] : uses)
            if (params.count(full) && *use.orders.rbegin() > 0)
                throw SystemError("parameter '" + full + "' appears under a derivative");
    } else {
        std::vector<const detail::SymbolUse*> ordered;
        for (const auto& [full, use] : uses)
            if (use.id.path.empty() && use.id.kind != SymKind::independent)
                ordered.push_back(&use);
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto* a, const auto* b) { return a->first_seen < b->first_seen; });
        for (const auto* use : ordered) {
            if (use->id.kind == SymKind::state)
                sys.states.push_back(use->id);
            else
                sys.parameters.push_back(use->id);
        }
    }
    return sys;
}

namespace detail {

inline Expr prefix_symbols(const Expr& e, const std::vector<std::string>& prefix) {
    if (prefix.empty()) return e;
    switch (e.kind()) {
    case ExprKind::constant: return e;
    case ExprKind::symbol: {
        SymbolId s = e.sym();
        if (s.kind == SymKind::independent) return e;
        s.path.insert(s.path.begin(), prefix.begin(), prefix.end());
        return Expr::symbol(s);
    }
    case ExprKind::apply: {
        std::vector<Expr> args;
        args.reserve(e.nargs());
        for (const Expr& a : e.args()) args.push_back(prefix_symbols(a, prefix));
        return Expr::apply(e.op(), std::move(args));
    }
    case ExprKind::deriv:
        return Expr::deriv(prefix_symbols(e.arg(0), prefix), e.sym(), e.order());
    }
    return e;
}

inline void flatten_into(const OdeSystem& sys, std::vector<std::string>& prefix,
                         FlatSystem& out) {
    if (sys.ivar.name != out.ivar.name)
        throw SystemError("subsystem '" + sys.name + "' declares independent variable '" +
                          sys.ivar.name + "' but the root uses '" + out.ivar.name + "'");
    std::string joined;
    for (const auto& p : prefix) joined += p + ".";
    for (const auto& e : sys.equations)
        out.equations.push_back(
            Equation{prefix_symbols(e.lhs, prefix), prefix_symbols(e.rhs, prefix)});
    for (SymbolId s : sys.states) {
        s.path.insert(s.path.begin(), prefix.begin(), prefix.end());
        out.states.push_back(std::move(s));
    }
    for (SymbolId p : sys.parameters) {
        p.path.insert(p.path.begin(), prefix.begin(), prefix.end());
        out.parameters.push_back(std::move(p));
    }
    // Outer defaults win over subsystem defaults for the same symbol.
    for (const auto& [key, val] : sys.defaults)
        out.defaults.emplace(joined + key, val);
    for (const auto& sub : sys.subsystems) {
        prefix.push_back(sub.name);
        flatten_into(sub, prefix, out);
        prefix.pop_back();
    }
}

} // namespace detail

inline FlatSystem flatten(const OdeSystem& sys) {
    FlatSystem out;
    out.name = sys.name;
    out.ivar = sys.ivar;
    std::vector<std::string> prefix;
    detail::flatten_into(sys, prefix, out);
    std::set<std::string> seen;
    seen.insert(out.ivar.full_name());
    for (const auto& s : out.states)
        if (!seen.insert(s.full_name()).second)
            throw SystemError("duplicate symbol '" + s.full_name() + "' after flattening");
    for (const auto& p : out.parameters)
        if (!seen.insert(p.full_name()).second)
            throw SystemError("duplicate symbol '" + p.full_name() + "' after flattening");
    return out;
}

struct ValidationReport {
    bool ok = true;
    std::size_t n_equations = 0;
    std::size_t n_states = 0;
    std::vector<std::string> problems;
};

inline ValidationReport validate(const FlatSystem& sys) {
    ValidationReport rep;
    rep.n_equations = sys.equations.size();
    rep.n_states = sys.states.size();
    if (rep.n_equations != rep.n_states) {
        rep.ok = false;
        rep.problems.push_back("system has " + std::to_string(rep.n_equations) +
                               " equations for " + std::to_string(rep.n_states) +
                               " states");
    }
    std::set<std::string> known;
    for (const auto& s : sys.states) known.insert(s.full_name());
    for (const auto& p : sys.parameters) known.insert(p.full_name());
    for (const auto& [key, val] : sys.defaults) {
        if (!known.count(key)) {
            rep.ok = false;
            rep.problems.push_back("default value for unknown symbol '" + key + "'");
        }
    }
    for (const auto& p : sys.parameters)
        if (!sys.defaults.count(p.full_name()))
            rep.problems.push_back("parameter '" + p.full_name() + "' has no default");
    return rep;
}

// 1 where an equation contains any derivative node, 0 for purely algebraic
// rows.
inline std::vector<int> mass_diag(const std::vector<Equation>& eqs) {
    std::vector<int> out;
    out.reserve(eqs.size());
    for (const auto& e : eqs)
        out.push_back(contains_deriv(e.lhs) || contains_deriv(e.rhs) ? 1 : 0);
    return out;
}

} // namespace daeflow
