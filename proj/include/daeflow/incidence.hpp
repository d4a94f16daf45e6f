#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "daeflow/system.hpp"

namespace daeflow {

enum class IncidenceMode {
    full,    // one column per (state, derivative order) pair that occurs
    highest, // one column per state at its highest occurring order
};

struct IncidenceStructure {
    std::vector<std::vector<int>> rows;              // sorted column ids per equation
    std::vector<std::pair<SymbolId, int>> cols;      // (state, derivative order)
    std::vector<int> eq_index;                       // original equation numbers

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return cols.size(); }

    int col_of(const std::string& full, int order) const {
        for (std::size_t j = 0; j < cols.size(); ++j)
            if (cols[j].second == order && cols[j].first.full_name() == full)
                return static_cast<int>(j);
        return -1;
    }
};

inline IncidenceStructure build_incidence(const std::vector<Equation>& eqs,
                                          const std::vector<SymbolId>& states,
                                          IncidenceMode mode) {
    std::map<std::string, std::set<int>> occ; // per state: orders present anywhere
    std::vector<std::map<std::string, std::set<int>>> per_eq(eqs.size());
    std::map<std::string, SymbolId> ids;
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        collect_occurrences(eqs[i].lhs, per_eq[i], ids, 0);
        collect_occurrences(eqs[i].rhs, per_eq[i], ids, 0);
        for (const auto& [name, orders] : per_eq[i]) occ[name].insert(orders.begin(), orders.end());
    }

    IncidenceStructure inc;
    std::map<std::string, std::vector<int>> col_ids; // state -> column per order
    if (mode == IncidenceMode::full) {
        for (const auto& s : states) {
            auto it = occ.find(s.full_name());
            if (it == occ.end()) continue;
            for (int order : it->second) {
                col_ids[s.full_name()].push_back(static_cast<int>(inc.cols.size()));
                inc.cols.emplace_back(s, order);
            }
        }
    } else {
        for (const auto& s : states) {
            auto it = occ.find(s.full_name());
            int top = it == occ.end() ? 0 : *it->second.rbegin();
            col_ids[s.full_name()].push_back(static_cast<int>(inc.cols.size()));
            inc.cols.emplace_back(s, top);
        }
    }

    inc.rows.resize(eqs.size());
    inc.eq_index.resize(eqs.size());
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        inc.eq_index[i] = static_cast<int>(i);
        for (std::size_t j = 0; j < inc.cols.size(); ++j) {
            const auto& [sym, order] = inc.cols[j];
            auto it = per_eq[i].find(sym.full_name());
            if (it == per_eq[i].end()) continue;
            if (it->second.count(order)) inc.rows[i].push_back(static_cast<int>(j));
        }
    }
    return inc;
}

inline IncidenceStructure build_incidence(const FlatSystem& sys, IncidenceMode mode) {
    return build_incidence(sys.equations, sys.states, mode);
}

} // namespace daeflow
