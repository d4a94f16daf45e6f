#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "daeflow/compile.hpp"
#include "daeflow/errors.hpp"
#include "daeflow/pantelides.hpp"
#include "daeflow/solvers.hpp"

namespace daeflow {

namespace detail {

// fixed uniform in [0, 1) so trained artifacts are reproducible across
// standard library implementations
inline double u01(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

// one stratified jittered column per dimension
inline Eigen::MatrixXd latin_hypercube(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    Eigen::MatrixXd q(n, d);
    std::vector<int> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i)
            std::swap(perm[i - 1], perm[std::size_t(u01(rng) * double(i))]);
        for (std::size_t i = 0; i < n; ++i) q(i, j) = (perm[i] + u01(rng)) / double(n);
    }
    return q;
}

// piecewise-linear sample of a saved trajectory at time t
inline void interp_state(const Solution& sol, double t, std::vector<double>& out) {
    const auto& ts = sol.ts;
    if (t <= ts.front()) {
        out = sol.us.front();
        return;
    }
    if (t >= ts.back()) {
        out = sol.us.back();
        return;
    }
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t hi = it - ts.begin(), lo = hi - 1;
    double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    out.resize(sol.us[lo].size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - w) * sol.us[lo][i] + w * sol.us[hi][i];
}

} // namespace detail

// geometric-mean growth rate of repeated application; converges to the
// dominant eigenvalue magnitude without forming the spectrum
inline double power_radius(const Eigen::MatrixXd& A, int warmup = 100, int iters = 200) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(A.rows());
    for (int i = 0; i < warmup; ++i) {
        v = A * v;
        double n = v.norm();
        if (n == 0.0) return 0.0;
        v /= n;
    }
    double acc = 0.0;
    for (int i = 0; i < iters; ++i) {
        v = A * v;
        double n = v.norm();
        if (n == 0.0) return 0.0;
        acc += std::log(n);
        v /= n;
    }
    return std::exp(acc / iters);
}

// sparse random +-1 coupling rescaled to the requested spectral radius
inline Eigen::MatrixXd make_reservoir_matrix(std::size_t n, double sparsity,
                                             double spectral_radius, std::mt19937_64& rng) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (detail::u01(rng) < sparsity)
                A(i, j) = detail::u01(rng) < 0.5 ? -1.0 : 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    double r0 = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(r0 > 1e-12))
        throw SurrogateError("reservoir coupling has zero spectral radius; change the seed");
    A *= spectral_radius / r0;
    return A;
}

// thin-plate interpolation with a linear tail; exact at its nodes
struct ThinPlateInterp {
    Eigen::MatrixXd nodes; // n x d
    Eigen::MatrixXd coef;  // (n + d + 1) x m

    static double kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

    void fit(Eigen::MatrixXd pts, const Eigen::MatrixXd& values) {
        nodes = std::move(pts);
        const long n = nodes.rows(), d = nodes.cols();
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + d + 1, n + d + 1);
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < n; ++j)
                S(i, j) = kernel((nodes.row(i) - nodes.row(j)).norm());
        for (long i = 0; i < n; ++i) {
            S(i, n) = S(n, i) = 1.0;
            for (long j = 0; j < d; ++j) S(i, n + 1 + j) = S(n + 1 + j, i) = nodes(i, j);
        }
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n + d + 1, values.cols());
        B.topRows(n) = values;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
        if (!lu.isInvertible())
            throw SurrogateError("interpolation nodes are degenerate; add samples or jitter");
        coef = lu.solve(B);
    }

    Eigen::VectorXd eval(const Eigen::VectorXd& q) const {
        const long n = nodes.rows(), d = nodes.cols();
        Eigen::VectorXd phi(n + d + 1);
        for (long i = 0; i < n; ++i) phi(i) = kernel((nodes.row(i).transpose() - q).norm());
        phi(n) = 1.0;
        phi.tail(d) = q;
        return coef.transpose() * phi;
    }
};

struct CtesnOptions {
    std::size_t reservoir = 100;
    double spectral_radius = 1.0;
    double sparsity = 0.1;
    double feedback_scale = 1.0;
    std::size_t n_grid = 200;
    double ridge = 1e-8;
    std::uint64_t seed = 1;
    SolverOptions solver;
};

// Trained time-series surrogate: a shared reservoir trajectory plus a
// parameter-dependent linear readout interpolated between training samples.
struct CtesnSurrogate {
    std::vector<std::string> outputs;
    std::vector<std::string> param_names;                 // box dimensions
    std::vector<std::pair<double, double>> box;           // bounds per dimension
    std::vector<double> ts;                               // shared time grid
    Eigen::MatrixXd R;                                    // reservoir x grid
    ThinPlateInterp readout;                              // maps params to readout weights

    static CtesnSurrogate train(const OdeSystem& model, const std::vector<std::string>& outputs,
                                const std::vector<std::pair<std::string, std::pair<double, double>>>& box,
                                std::pair<double, double> tspan, std::size_t n_samples,
                                CtesnOptions opts = {});

    // readout matrix at a parameter point, outputs x reservoir
    Eigen::MatrixXd weights_at(const std::vector<double>& p) const {
        Eigen::VectorXd q = normalized(p);
        Eigen::VectorXd flat = readout.eval(q);
        const long n_out = long(outputs.size()), N = R.rows();
        Eigen::MatrixXd W(n_out, N);
        for (long o = 0; o < n_out; ++o)
            for (long i = 0; i < N; ++i) W(o, i) = flat(o * N + i);
        return W;
    }

    // series for each output over ts; no differential equation is solved here
    std::vector<std::vector<double>> predict(const std::vector<double>& p) const {
        Eigen::MatrixXd Y = weights_at(p) * R;
        std::vector<std::vector<double>> out(outputs.size(), std::vector<double>(ts.size()));
        for (std::size_t o = 0; o < outputs.size(); ++o)
            for (std::size_t g = 0; g < ts.size(); ++g) out[o][g] = Y(long(o), long(g));
        return out;
    }

private:
    Eigen::VectorXd normalized(const std::vector<double>& p) const {
        if (p.size() != box.size())
            throw SurrogateError("expected " + std::to_string(box.size()) +
                                 " parameter values, got " + std::to_string(p.size()));
        Eigen::VectorXd q(long(p.size()));
        for (std::size_t j = 0; j < p.size(); ++j) {
            auto [lo, hi] = box[j];
            double w = hi - lo;
            if (p[j] < lo - 0.1 * w || p[j] > hi + 0.1 * w)
                throw SurrogateError("parameter '" + param_names[j] + "' = " +
                                     std::to_string(p[j]) + " is outside the sampled box [" +
                                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
            q(long(j)) = (p[j] - lo) / w;
        }
        return q;
    }
};

inline CtesnSurrogate CtesnSurrogate::train(
    const OdeSystem& model, const std::vector<std::string>& outputs,
    const std::vector<std::pair<std::string, std::pair<double, double>>>& box,
    std::pair<double, double> tspan, std::size_t n_samples, CtesnOptions opts) {
    if (outputs.empty()) throw SurrogateError("no outputs requested");
    if (box.empty()) throw SurrogateError("the parameter box is empty");
    if (n_samples < box.size() + 2)
        throw SurrogateError("need at least " + std::to_string(box.size() + 2) +
                             " samples for " + std::to_string(box.size()) + " box dimensions");
    if (opts.n_grid < 2) throw SurrogateError("the time grid needs at least two points");

    SimplifiedSystem simp = structural_simplify(pantelides(flatten(model)).system);
    CompiledRhs rhs = compile_rhs(simp);

    std::vector<int> box_idx;
    {
        const auto& pnames = rhs.param_names();
        for (const auto& [name, bounds] : box) {
            auto it = std::find(pnames.begin(), pnames.end(), name);
            if (it == pnames.end())
                throw SurrogateError("'" + name + "' is not a parameter of '" + model.name + "'");
            if (!(bounds.second > bounds.first))
                throw SurrogateError("empty bounds for parameter '" + name + "'");
            box_idx.push_back(int(it - pnames.begin()));
        }
    }

    CtesnSurrogate s;
    s.outputs = outputs;
    for (const auto& [name, bounds] : box) {
        s.param_names.push_back(name);
        s.box.push_back(bounds);
    }
    s.ts.resize(opts.n_grid);
    for (std::size_t g = 0; g < opts.n_grid; ++g)
        s.ts[g] = tspan.first +
                  (tspan.second - tspan.first) * double(g) / double(opts.n_grid - 1);

    auto with_box = [&](const Eigen::VectorXd& vals) {
        std::vector<double> p = rhs.default_p();
        for (std::size_t j = 0; j < box_idx.size(); ++j) p[box_idx[j]] = vals(long(j));
        return p;
    };

    auto solve_full = [&](const std::vector<double>& p) {
        Solution sol = solve_tsit5(rhs, rhs.default_u0(), p, tspan, opts.solver);
        if (!sol.ok())
            throw SurrogateError("reference solve failed (" +
                                 std::string(to_string(sol.status)) + "): " + sol.message);
        return sol;
    };

    // check the requested outputs exist before doing any expensive work
    {
        auto rec = rhs.reconstruct(rhs.default_u0(), rhs.default_p(), tspan.first);
        for (const auto& name : outputs)
            if (!rec.count(name))
                throw SurrogateError("'" + name + "' is not a state or observed variable of '" +
                                     model.name + "'");
    }

    auto outputs_on_grid = [&](const Solution& sol, const std::vector<double>& p) {
        Eigen::MatrixXd X(long(outputs.size()), long(opts.n_grid));
        std::vector<double> u;
        for (std::size_t g = 0; g < opts.n_grid; ++g) {
            detail::interp_state(sol, s.ts[g], u);
            auto rec = rhs.reconstruct(u, p, s.ts[g]);
            for (std::size_t o = 0; o < outputs.size(); ++o)
                X(long(o), long(g)) = rec.at(outputs[o]);
        }
        return X;
    };

    // reference trajectory at the box centre drives the reservoir
    Eigen::VectorXd centre(long(box.size()));
    for (std::size_t j = 0; j < box.size(); ++j)
        centre(long(j)) = 0.5 * (box[j].second.first + box[j].second.second);
    std::vector<double> p_centre = with_box(centre);
    Solution ref = solve_full(p_centre);

    const std::size_t n_u = rhs.n_states();
    Eigen::MatrixXd Xref(long(n_u), long(opts.n_grid));
    {
        std::vector<double> u;
        for (std::size_t g = 0; g < opts.n_grid; ++g) {
            detail::interp_state(ref, s.ts[g], u);
            for (std::size_t i = 0; i < n_u; ++i) Xref(long(i), long(g)) = u[i];
        }
    }

    std::mt19937_64 rng(opts.seed);
    Eigen::MatrixXd A = make_reservoir_matrix(opts.reservoir, opts.sparsity,
                                              opts.spectral_radius, rng);
    Eigen::MatrixXd Wfb(long(opts.reservoir), long(n_u));
    for (long i = 0; i < Wfb.rows(); ++i)
        for (long j = 0; j < Wfb.cols(); ++j)
            Wfb(i, j) = detail::u01(rng) < 0.5 ? -opts.feedback_scale : opts.feedback_scale;
    std::vector<double> r0(opts.reservoir);
    double r0norm = 0.0;
    for (double& v : r0) {
        v = 2.0 * detail::u01(rng) - 1.0;
        r0norm += v * v;
    }
    if (!(r0norm > 0.0)) throw SurrogateError("reservoir started from the zero state");

    const double t0 = tspan.first, dtg = s.ts[1] - s.ts[0];
    auto drive = [&](double t, Eigen::VectorXd& x) {
        double pos = (t - t0) / dtg;
        long g = std::clamp(long(pos), long(0), long(opts.n_grid - 2));
        double w = std::clamp(pos - double(g), 0.0, 1.0);
        x = (1.0 - w) * Xref.col(g) + w * Xref.col(g + 1);
    };
    auto reservoir_rhs = [&](std::vector<double>& dr, const std::vector<double>& r,
                             const std::vector<double>&, double t) {
        Eigen::Map<const Eigen::VectorXd> rv(r.data(), long(r.size()));
        Eigen::VectorXd x;
        drive(t, x);
        Eigen::VectorXd z = A * rv + Wfb * x;
        dr.resize(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) dr[i] = std::tanh(z(long(i)));
    };
    Solution rsol = solve_tsit5(reservoir_rhs, r0, {}, tspan, opts.solver);
    if (!rsol.ok())
        throw SurrogateError("reservoir integration failed (" +
                             std::string(to_string(rsol.status)) + "): " + rsol.message);

    s.R.resize(long(opts.reservoir), long(opts.n_grid));
    {
        std::vector<double> r;
        for (std::size_t g = 0; g < opts.n_grid; ++g) {
            detail::interp_state(rsol, s.ts[g], r);
            for (std::size_t i = 0; i < opts.reservoir; ++i) s.R(long(i), long(g)) = r[i];
        }
    }

    // per-sample ridge readouts against the shared reservoir
    Eigen::MatrixXd G = s.R * s.R.transpose();
    G.diagonal().array() += opts.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);

    Eigen::MatrixXd nodes = detail::latin_hypercube(n_samples, box.size(), rng);
    Eigen::MatrixXd Wmat(long(n_samples), long(outputs.size()) * long(opts.reservoir));
    for (std::size_t k = 0; k < n_samples; ++k) {
        Eigen::VectorXd vals(long(box.size()));
        for (std::size_t j = 0; j < box.size(); ++j) {
            auto [lo, hi] = box[j].second;
            vals(long(j)) = lo + (hi - lo) * nodes(long(k), long(j));
        }
        std::vector<double> p = with_box(vals);
        Eigen::MatrixXd X = outputs_on_grid(solve_full(p), p);
        Eigen::MatrixXd Wk = ldlt.solve(s.R * X.transpose()).transpose();
        for (long o = 0; o < Wk.rows(); ++o)
            for (long i = 0; i < Wk.cols(); ++i)
                Wmat(long(k), o * long(opts.reservoir) + i) = Wk(o, i);
    }

    s.readout.fit(std::move(nodes), Wmat);
    return s;
}

// A named surrogate standing in for one submodel.
struct SurrogateComponent {
    std::string name;
    CtesnSurrogate surrogate;
};

struct ComposedPrediction {
    std::vector<double> ts;
    std::map<std::string, std::vector<double>> series; // "component.output"
};

// Several surrogates evaluated side by side on a shared grid, each under its
// own namespace.
struct ComposedModel {
    std::vector<SurrogateComponent> components;

    ComposedPrediction predict(const std::map<std::string, std::vector<double>>& params) const {
        if (components.empty()) throw SurrogateError("composed model has no components");
        ComposedPrediction out;
        out.ts = components.front().surrogate.ts;
        for (const auto& c : components) {
            if (c.surrogate.ts != out.ts)
                throw SurrogateError("component '" + c.name +
                                     "' was trained on a different time grid");
            auto it = params.find(c.name);
            if (it == params.end())
                throw SurrogateError("no parameters given for component '" + c.name + "'");
            auto series = c.surrogate.predict(it->second);
            for (std::size_t o = 0; o < series.size(); ++o)
                out.series[c.name + "." + c.surrogate.outputs[o]] = std::move(series[o]);
        }
        return out;
    }
};

} // namespace daeflow
