#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "daeflow/errors.hpp"
#include "daeflow/expr_text.hpp"

namespace daeflow {

// Time series table. Written to a temporary file first and renamed into place
// so readers never observe a half-written file.
inline void write_csv(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<double>& ts,
                      const std::vector<std::vector<double>>& rows) {
    if (rows.size() != ts.size())
        throw RuntimeSolveError("csv: row count does not match the time column");

    std::string body = "t";
    for (const auto& c : columns) body += "," + c;
    body += "\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (rows[i].size() != columns.size())
            throw RuntimeSolveError("csv: row " + std::to_string(i) + " has " +
                                    std::to_string(rows[i].size()) + " values for " +
                                    std::to_string(columns.size()) + " columns");
        body += detail::format_double(ts[i]);
        for (double v : rows[i]) body += "," + detail::format_double(v);
        body += "\n";
    }

    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw RuntimeSolveError("cannot open '" + tmp + "' for writing");
        out << body;
        out.flush();
        if (!out) throw RuntimeSolveError("failed to write '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw RuntimeSolveError("cannot move '" + tmp + "' to '" + path + "'");
    }
}

} // namespace daeflow
