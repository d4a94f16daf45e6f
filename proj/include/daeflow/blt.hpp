#pragma once

#include <algorithm>
#include <climits>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "daeflow/matching.hpp"
#include "daeflow/system.hpp"

namespace daeflow {

struct BltBlock {
    std::vector<int> eqs;  // original equation indices, ascending
    std::vector<int> cols; // matched column per equation, parallel to eqs
};

struct BltResult {
    std::vector<BltBlock> blocks; // in execution order
};

// Sorts a matched system into blocks of mutually dependent equations and
// orders the blocks so every variable is computed before it is used.
// Equation i feeds equation j when j mentions i's matched variable at exactly
// the matched derivative order; a state matched at order one therefore does
// not order the equations that use its value. Ties are broken by the smallest
// original equation index so the result is deterministic.
inline BltResult blt_sort(const std::vector<Equation>& eqs,
                          const IncidenceStructure& highest,
                          const Matching& m) {
    const int n = static_cast<int>(eqs.size());
    if (!m.perfect())
        throw StructuralError("block ordering requires a perfect matching");

    std::vector<std::set<std::pair<std::string, int>>> occ(n);
    for (int i = 0; i < n; ++i) {
        std::map<std::string, std::set<int>> orders;
        std::map<std::string, SymbolId> ids;
        collect_occurrences(eqs[i].lhs, orders, ids, 0);
        collect_occurrences(eqs[i].rhs, orders, ids, 0);
        for (const auto& [name, os] : orders)
            for (int k : os) occ[i].insert({name, k});
    }

    std::vector<std::vector<int>> out(n);
    for (int i = 0; i < n; ++i) {
        const auto& [v, k] = highest.cols[m.eq_to_col[i]];
        for (int j = 0; j < n; ++j)
            if (j != i && occ[j].count({v.full_name(), k})) out[i].push_back(j);
    }

    // Tarjan's strongly connected components, iteratively.
    std::vector<int> idx(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on(n, 0);
    std::vector<int> stk;
    int counter = 0, ncomp = 0;
    for (int root = 0; root < n; ++root) {
        if (idx[root] != -1) continue;
        std::vector<std::pair<int, int>> call{{root, 0}};
        while (!call.empty()) {
            int v = call.back().first;
            int& pi = call.back().second;
            if (pi == 0) {
                idx[v] = low[v] = counter++;
                stk.push_back(v);
                on[v] = 1;
            }
            if (pi < static_cast<int>(out[v].size())) {
                int w = out[v][pi++];
                if (idx[w] == -1)
                    call.emplace_back(w, 0);
                else if (on[w])
                    low[v] = std::min(low[v], idx[w]);
            } else {
                if (low[v] == idx[v]) {
                    while (true) {
                        int w = stk.back();
                        stk.pop_back();
                        on[w] = 0;
                        comp[w] = ncomp;
                        if (w == v) break;
                    }
                    ++ncomp;
                }
                call.pop_back();
                if (!call.empty()) {
                    int parent = call.back().first;
                    low[parent] = std::min(low[parent], low[v]);
                }
            }
        }
    }

    std::vector<std::vector<int>> members(ncomp);
    std::vector<int> key(ncomp, INT_MAX);
    for (int i = 0; i < n; ++i) {
        members[comp[i]].push_back(i);
        key[comp[i]] = std::min(key[comp[i]], i);
    }
    std::vector<std::set<int>> cedges(ncomp);
    std::vector<int> indeg(ncomp, 0);
    for (int i = 0; i < n; ++i)
        for (int w : out[i]) {
            if (comp[i] != comp[w] && cedges[comp[i]].insert(comp[w]).second)
                ++indeg[comp[w]];
        }

    using Entry = std::pair<int, int>; // (smallest member, component)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> ready;
    for (int c = 0; c < ncomp; ++c)
        if (indeg[c] == 0) ready.emplace(key[c], c);

    BltResult result;
    while (!ready.empty()) {
        int c = ready.top().second;
        ready.pop();
        BltBlock block;
        block.eqs = members[c]; // ascending by construction
        for (int e : block.eqs) block.cols.push_back(m.eq_to_col[e]);
        result.blocks.push_back(std::move(block));
        for (int b : cedges[c])
            if (--indeg[b] == 0) ready.emplace(key[b], b);
    }
    return result;
}

} // namespace daeflow
