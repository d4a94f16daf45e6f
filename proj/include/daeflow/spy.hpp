#pragma once

#include <string>
#include <vector>

#include "daeflow/tearing.hpp"

namespace daeflow {

// Occupancy picture of an incidence structure, one row per equation.
inline std::string render_spy_text(const IncidenceStructure& inc) {
    std::string out;
    for (const auto& row : inc.rows) {
        std::string line(inc.n_cols(), '.');
        for (int c : row) line[c] = '#';
        out += line;
        out += '\n';
    }
    return out;
}

// Same picture as a portable bitmap (P1), one digit per cell.
inline std::string render_spy_pbm(const IncidenceStructure& inc) {
    std::string out = "P1\n" + std::to_string(inc.n_cols()) + " " +
                      std::to_string(inc.n_rows()) + "\n";
    for (const auto& row : inc.rows) {
        std::string line(inc.n_cols(), '0');
        for (int c : row) line[c] = '1';
        out += line;
        out += '\n';
    }
    return out;
}

// Incidence permuted into block execution order: rows follow the block
// sequence, columns follow each row's matched variable, so a well-torn system
// reads lower block triangular.
inline IncidenceStructure permuted_incidence(const SimplifiedSystem& simp) {
    std::vector<int> eq_order, col_order;
    for (const auto& blk : simp.blt.blocks) {
        eq_order.insert(eq_order.end(), blk.eqs.begin(), blk.eqs.end());
        col_order.insert(col_order.end(), blk.cols.begin(), blk.cols.end());
    }
    std::vector<int> col_pos(simp.highest.cols.size(), -1);
    for (std::size_t j = 0; j < col_order.size(); ++j) col_pos[col_order[j]] = static_cast<int>(j);

    IncidenceStructure out;
    for (int c : col_order) out.cols.push_back(simp.highest.cols[c]);
    for (int e : eq_order) {
        std::vector<int> row;
        for (int c : simp.highest.rows[e]) row.push_back(col_pos[c]);
        std::sort(row.begin(), row.end());
        out.rows.push_back(std::move(row));
        out.eq_index.push_back(e);
    }
    return out;
}

// Incidence of the torn residual equations against the torn unknowns only.
inline IncidenceStructure torn_incidence(const SimplifiedSystem& simp) {
    IncidenceStructure out;
    for (const auto& tb : simp.torn)
        for (const auto& u : tb.unknowns) out.cols.push_back(u);
    for (const auto& tb : simp.torn) {
        for (std::size_t r = 0; r < tb.residuals.size(); ++r) {
            std::map<std::string, std::set<int>> orders;
            std::map<std::string, SymbolId> ids;
            collect_occurrences(tb.residuals[r], orders, ids, 0);
            std::vector<int> row;
            for (std::size_t j = 0; j < out.cols.size(); ++j) {
                auto it = orders.find(out.cols[j].first.full_name());
                if (it != orders.end() && it->second.count(out.cols[j].second))
                    row.push_back(static_cast<int>(j));
            }
            out.rows.push_back(std::move(row));
            out.eq_index.push_back(tb.eqs[r]);
        }
    }
    return out;
}

} // namespace daeflow
