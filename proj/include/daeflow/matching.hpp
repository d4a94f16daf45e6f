#pragma once

#include <vector>

#include "daeflow/incidence.hpp"

namespace daeflow {

struct Matching {
    std::vector<int> eq_to_col; // -1 for unmatched equations
    std::vector<int> col_to_eq; // -1 for unmatched columns
    std::size_t cardinality = 0;

    bool perfect() const {
        return cardinality == eq_to_col.size() && cardinality == col_to_eq.size();
    }
};

namespace detail {

inline bool augment(const IncidenceStructure& inc, int eq,
                    const std::vector<bool>& eligible, std::vector<bool>& visited,
                    Matching& m) {
    for (int col : inc.rows[eq]) {
        if (!eligible[col] || visited[col]) continue;
        visited[col] = true;
        if (m.col_to_eq[col] < 0 || augment(inc, m.col_to_eq[col], eligible, visited, m)) {
            m.col_to_eq[col] = eq;
            m.eq_to_col[eq] = col;
            return true;
        }
    }
    return false;
}

} // namespace detail

// Maximum bipartite matching between equations and incidence columns
// (augmenting path search, equations processed in ascending order, columns
// tried in ascending order, so results are deterministic). With
// `restrict_to_highest` only columns at their state's top derivative order
// are eligible.
inline Matching maximal_matching(const IncidenceStructure& inc,
                                 bool restrict_to_highest = false) {
    std::vector<bool> eligible(inc.n_cols(), true);
    if (restrict_to_highest) {
        std::map<std::string, int> top;
        for (const auto& [sym, order] : inc.cols) {
            auto [it, fresh] = top.emplace(sym.full_name(), order);
            if (!fresh && order > it->second) it->second = order;
        }
        for (std::size_t j = 0; j < inc.cols.size(); ++j)
            eligible[j] = inc.cols[j].second == top[inc.cols[j].first.full_name()];
    }
    Matching m;
    m.eq_to_col.assign(inc.n_rows(), -1);
    m.col_to_eq.assign(inc.n_cols(), -1);
    for (std::size_t eq = 0; eq < inc.n_rows(); ++eq) {
        std::vector<bool> visited(inc.n_cols(), false);
        if (detail::augment(inc, static_cast<int>(eq), eligible, visited, m))
            ++m.cardinality;
    }
    return m;
}

// The set of equations reachable from one unmatched equation by alternating
// paths (the equations whose differentiation index reduction exposes).
inline std::vector<int> alternating_reachable(const IncidenceStructure& inc,
                                              const Matching& m, int start_eq) {
    std::vector<bool> eq_seen(inc.n_rows(), false);
    std::vector<bool> col_seen(inc.n_cols(), false);
    std::vector<int> stack{start_eq};
    std::vector<int> out;
    eq_seen[start_eq] = true;
    while (!stack.empty()) {
        int eq = stack.back();
        stack.pop_back();
        out.push_back(eq);
        for (int col : inc.rows[eq]) {
            if (col_seen[col]) continue;
            col_seen[col] = true;
            int other = m.col_to_eq[col];
            if (other >= 0 && !eq_seen[other]) {
                eq_seen[other] = true;
                stack.push_back(other);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace daeflow
