#pragma once

#include <algorithm>
#include <vector>

#include "daeflow/incidence.hpp"

namespace test_support {

// Exhaustive maximum-matching cardinality for small incidence structures.
inline std::size_t brute_force_matching(const daeflow::IncidenceStructure& inc) {
    std::size_t best = 0;
    std::vector<int> cols(inc.n_cols());
    for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = static_cast<int>(j);

    struct Rec {
        const daeflow::IncidenceStructure& inc;
        std::vector<bool> used;
        std::size_t best = 0;

        void go(std::size_t eq, std::size_t matched) {
            if (eq == inc.n_rows()) {
                best = std::max(best, matched);
                return;
            }
            if (matched + (inc.n_rows() - eq) <= best) return;
            go(eq + 1, matched);
            for (int col : inc.rows[eq]) {
                if (used[col]) continue;
                used[col] = true;
                go(eq + 1, matched + 1);
                used[col] = false;
            }
        }
    } rec{inc, std::vector<bool>(inc.n_cols(), false)};
    rec.go(0, 0);
    best = rec.best;
    return best;
}

} // namespace test_support
