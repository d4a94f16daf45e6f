#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace daeflow {

enum class SymKind {
    independent, // the time-like variable
    state,       // unknown function of the independent variable
    parameter,   // constant with respect to the independent variable
};

// Identity of a symbol. Two symbols are the same variable iff their dotted
// full names agree; kind and dependency are attributes, not identity.
struct SymbolId {
    std::string name;
    std::vector<std::string> path; // enclosing subsystem names, outermost first
    SymKind kind = SymKind::parameter;
    std::string dep; // name of the independent variable for states, else empty

    std::string full_name() const {
        std::string out;
        for (const auto& p : path) {
            out += p;
            out += '.';
        }
        out += name;
        return out;
    }

    friend bool operator==(const SymbolId& a, const SymbolId& b) {
        return a.name == b.name && a.path == b.path;
    }
    friend bool operator!=(const SymbolId& a, const SymbolId& b) { return !(a == b); }
    friend bool operator<(const SymbolId& a, const SymbolId& b) {
        return a.full_name() < b.full_name();
    }
};

inline SymbolId sym_ivar(std::string name) {
    SymbolId s;
    s.name = std::move(name);
    s.kind = SymKind::independent;
    return s;
}

inline SymbolId sym_state(std::string name, const SymbolId& ivar) {
    SymbolId s;
    s.name = std::move(name);
    s.kind = SymKind::state;
    s.dep = ivar.name;
    return s;
}

inline SymbolId sym_param(std::string name) {
    SymbolId s;
    s.name = std::move(name);
    s.kind = SymKind::parameter;
    return s;
}

// Reference to a symbol from one namespace level up, as "ns.name".
inline SymbolId in_namespace(SymbolId s, const std::string& ns) {
    s.path.insert(s.path.begin(), ns);
    return s;
}

namespace detail {
inline std::size_t hash_combine(std::size_t h, std::size_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}
} // namespace detail

} // namespace daeflow
