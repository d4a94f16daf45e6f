#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "daeflow/tearing.hpp"

namespace daeflow {

struct Schedule {
    // torn-block indices grouped by dependency level; blocks in one level
    // share no data and can run concurrently
    std::vector<std::vector<int>> levels;
};

// Levels the torn blocks by longest dependency path. Block B depends on block
// A when a value A computes (a torn or inner variable) feeds B's expressions,
// directly or through explicit assignments in between. Differential state
// values come from the integrator, not from another block, so they impose no
// ordering.
inline Schedule build_schedule(const SimplifiedSystem& simp) {
    const int n = static_cast<int>(simp.torn.size());

    auto value_names = [](const Expr& e, std::set<std::string>& out) {
        std::map<std::string, std::set<int>> orders;
        std::map<std::string, SymbolId> ids;
        collect_occurrences(e, orders, ids, 0);
        for (const auto& [name, os] : orders)
            if (os.count(0)) out.insert(name);
    };

    // value-producing explicit assignments, for closing over pass-through uses
    std::map<std::string, std::set<std::string>> assign_inputs;
    for (const auto& s : simp.solved)
        if (s.order == 0) value_names(s.rhs, assign_inputs[s.var.full_name()]);

    std::vector<std::set<std::string>> outputs(n), inputs(n);
    for (int i = 0; i < n; ++i) {
        const TornBlock& tb = simp.torn[i];
        for (const auto& [v, k] : tb.unknowns)
            if (k == 0) outputs[i].insert(v.full_name());
        for (const auto& ia : tb.inners)
            if (ia.order == 0) outputs[i].insert(ia.var.full_name());
        for (const auto& ia : tb.inners) value_names(ia.rhs, inputs[i]);
        for (const auto& r : tb.residuals) value_names(r, inputs[i]);
        // chase uses of assigned variables back to what they were computed from
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& [var, ins] : assign_inputs)
                if (inputs[i].count(var))
                    for (const auto& name : ins)
                        if (inputs[i].insert(name).second) grew = true;
        }
    }

    std::vector<int> level(n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            bool feeds = false;
            for (const auto& name : outputs[j])
                if (inputs[i].count(name)) {
                    feeds = true;
                    break;
                }
            if (feeds) level[i] = std::max(level[i], level[j] + 1);
        }

    Schedule sched;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(sched.levels.size()) <= level[i])
            sched.levels.resize(level[i] + 1);
        sched.levels[level[i]].push_back(i);
    }
    return sched;
}

} // namespace daeflow
