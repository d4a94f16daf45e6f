#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "daeflow/ctesn.hpp"
#include "daeflow/errors.hpp"

namespace daeflow {

namespace detail {

inline void put_u64(std::string& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& b, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(b, v);
}

inline void put_str(std::string& b, const std::string& s) {
    put_u64(b, s.size());
    b.append(s);
}

struct ArchiveCursor {
    const std::string& buf;
    std::size_t off = 0;

    void need(std::size_t n) const {
        if (off + n > buf.size()) throw SurrogateError("surrogate archive is truncated");
    }
    std::uint64_t get_u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf[off + i])) << (8 * i);
        off += 8;
        return v;
    }
    double get_f64() {
        std::uint64_t v = get_u64();
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
    std::string get_str() {
        std::uint64_t n = get_u64();
        if (n > (1u << 20)) throw SurrogateError("surrogate archive is corrupt");
        need(n);
        std::string s = buf.substr(off, n);
        off += n;
        return s;
    }
};

} // namespace detail

// Fixed little-endian layout; saving the same surrogate twice produces
// byte-identical files.
inline void save_surrogate(const CtesnSurrogate& s, const std::string& path) {
    std::string b;
    b.append("DFS1");
    detail::put_u64(b, s.outputs.size());
    detail::put_u64(b, s.box.size());
    detail::put_u64(b, s.ts.size());
    detail::put_u64(b, std::uint64_t(s.R.rows()));
    detail::put_u64(b, std::uint64_t(s.readout.nodes.rows()));
    for (const auto& name : s.outputs) detail::put_str(b, name);
    for (std::size_t j = 0; j < s.box.size(); ++j) {
        detail::put_str(b, s.param_names[j]);
        detail::put_f64(b, s.box[j].first);
        detail::put_f64(b, s.box[j].second);
    }
    for (double t : s.ts) detail::put_f64(b, t);
    for (long i = 0; i < s.R.rows(); ++i)
        for (long g = 0; g < s.R.cols(); ++g) detail::put_f64(b, s.R(i, g));
    for (long i = 0; i < s.readout.nodes.rows(); ++i)
        for (long j = 0; j < s.readout.nodes.cols(); ++j)
            detail::put_f64(b, s.readout.nodes(i, j));
    for (long i = 0; i < s.readout.coef.rows(); ++i)
        for (long j = 0; j < s.readout.coef.cols(); ++j)
            detail::put_f64(b, s.readout.coef(i, j));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SurrogateError("cannot open '" + path + "' for writing");
    out.write(b.data(), std::streamsize(b.size()));
    out.flush();
    if (!out) throw SurrogateError("failed to write '" + path + "'");
}

inline CtesnSurrogate load_surrogate(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SurrogateError("cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 || buf.compare(0, 4, "DFS1") != 0)
        throw SurrogateError("'" + path + "' is not a surrogate archive");

    detail::ArchiveCursor c{buf, 4};
    std::uint64_t n_out = c.get_u64(), d = c.get_u64(), n_grid = c.get_u64(),
                  N = c.get_u64(), n_nodes = c.get_u64();
    const std::uint64_t limit = 1u << 24;
    if (n_out > limit || d > limit || n_grid > limit || N > limit || n_nodes > limit)
        throw SurrogateError("surrogate archive is corrupt");

    CtesnSurrogate s;
    for (std::uint64_t o = 0; o < n_out; ++o) s.outputs.push_back(c.get_str());
    for (std::uint64_t j = 0; j < d; ++j) {
        s.param_names.push_back(c.get_str());
        double lo = c.get_f64(), hi = c.get_f64();
        s.box.emplace_back(lo, hi);
    }
    s.ts.resize(n_grid);
    for (auto& t : s.ts) t = c.get_f64();
    s.R.resize(long(N), long(n_grid));
    for (long i = 0; i < s.R.rows(); ++i)
        for (long g = 0; g < s.R.cols(); ++g) s.R(i, g) = c.get_f64();
    s.readout.nodes.resize(long(n_nodes), long(d));
    for (long i = 0; i < s.readout.nodes.rows(); ++i)
        for (long j = 0; j < s.readout.nodes.cols(); ++j) s.readout.nodes(i, j) = c.get_f64();
    s.readout.coef.resize(long(n_nodes + d + 1), long(n_out * N));
    for (long i = 0; i < s.readout.coef.rows(); ++i)
        for (long j = 0; j < s.readout.coef.cols(); ++j) s.readout.coef(i, j) = c.get_f64();
    if (c.off != buf.size()) throw SurrogateError("surrogate archive has trailing data");
    return s;
}

} // namespace daeflow
