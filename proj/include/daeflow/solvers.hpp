#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "daeflow/errors.hpp"

namespace daeflow {

// du is resized by the callee; p is passed through untouched
using RhsFn = std::function<void(std::vector<double>& du, const std::vector<double>& u,
                                 const std::vector<double>& p, double t)>;

// implicit residual form r(u, du, p, t) = 0; rows with no du dependence are
// algebraic constraints
using DaeResidualFn = std::function<void(std::vector<double>& r, const std::vector<double>& u,
                                         const std::vector<double>& du,
                                         const std::vector<double>& p, double t)>;

enum class SolveStatus { success, dtmin_underflow, max_steps, newton_failure, nan_detected };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::success: return "success";
    case SolveStatus::dtmin_underflow: return "dtmin_underflow";
    case SolveStatus::max_steps: return "max_steps";
    case SolveStatus::newton_failure: return "newton_failure";
    case SolveStatus::nan_detected: return "nan_detected";
    }
    return "unknown";
}

struct SolveStats {
    long long naccept = 0;
    long long nreject = 0;
    long long nf = 0; // right-hand-side or residual evaluations
};

struct Solution {
    std::vector<double> ts;
    std::vector<std::vector<double>> us;
    SolveStatus status = SolveStatus::success;
    std::string message;
    SolveStats stats;

    bool ok() const { return status == SolveStatus::success; }
};

struct SolverOptions {
    double abstol = 1e-6;
    double reltol = 1e-6;
    double dt0 = 0.0;   // 0 picks 1e-4 * span
    double dtmin = 0.0; // 0 picks a roundoff-level floor
    double dtmax = 0.0; // 0 picks the whole span
    long long max_steps = 10'000'000;
};

namespace tsit5 {

// Tsitouras' 5(4) pair; the last row of a equals b, so the final stage of an
// accepted step is the first stage of the next one
inline constexpr std::array<double, 7> c = {
    0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0};

inline constexpr std::array<std::array<double, 7>, 7> a = {{
    {},
    {0.161},
    {-0.008480655492356989, 0.335480655492357},
    {2.8971530571054935, -6.359448489975075, 4.3622954328695815},
    {5.325864828439257, -11.748883564062828, 7.4955393428898365, -0.09249506636175525},
    {5.86145544294642, -12.92096931784711, 8.159367898576159, -0.071584973281401,
     -0.028269050394068383},
    {0.09646076681806523, 0.01, 0.4798896504144996, 1.379008574103742, -3.290069515436081,
     2.324710524099774},
}};

inline constexpr std::array<double, 7> b = {
    0.09646076681806523, 0.01, 0.4798896504144996, 1.379008574103742,
    -3.290069515436081, 2.324710524099774, 0.0};

inline constexpr std::array<double, 7> btilde = {
    -0.00178001105222577714, -0.0008164344596567469, 0.007880878010261995,
    -0.1447110071732629, 0.5823571654525552, -0.45808210592918697,
    0.015151515151515152};

} // namespace tsit5

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace detail

inline Solution solve_tsit5(const RhsFn& f, std::vector<double> u0, const std::vector<double>& p,
                            std::pair<double, double> tspan, SolverOptions opts = {}) {
    Solution sol;
    const double t0 = tspan.first, tf = tspan.second;
    const double span = tf - t0;
    if (!(span > 0.0)) throw RuntimeSolveError("integration span must be positive");

    const std::size_t n = u0.size();
    const double dtmax = opts.dtmax > 0.0 ? opts.dtmax : span;
    const double dtmin = opts.dtmin > 0.0 ? opts.dtmin
                                          : 16.0 * std::numeric_limits<double>::epsilon() *
                                                std::max({std::abs(t0), std::abs(tf), 1.0});
    const bool fixed = opts.dtmin > 0.0 && opts.dtmin == opts.dtmax;
    double dt = opts.dt0 > 0.0 ? opts.dt0 : (fixed ? dtmax : 1e-4 * span);
    dt = std::min(dt, dtmax);

    std::array<std::vector<double>, 7> k;
    for (auto& ki : k) ki.assign(n, 0.0);
    std::vector<double> u = std::move(u0), stage(n), u_new(n), err(n);

    double t = t0;
    sol.ts.push_back(t);
    sol.us.push_back(u);

    try {
        f(k[0], u, p, t);
    } catch (const NewtonFailure& e) {
        sol.status = SolveStatus::newton_failure;
        sol.message = e.what();
        return sol;
    }
    ++sol.stats.nf;
    if (k[0].size() != n) throw RuntimeSolveError("right-hand side changed the state size");
    if (!detail::all_finite(k[0])) {
        sol.status = SolveStatus::nan_detected;
        sol.message = "non-finite derivative at the initial point";
        return sol;
    }

    long long steps = 0;
    while (t < tf) {
        if (steps++ >= opts.max_steps) {
            sol.status = SolveStatus::max_steps;
            sol.message = "step limit reached at t = " + std::to_string(t);
            return sol;
        }
        double h = std::min(dt, tf - t);
        bool last = tf - (t + h) < 0.05 * h;
        if (last) h = tf - t; // absorb a roundoff-sized remainder

        bool bad = false;
        std::string bad_msg;
        try {
            for (int i = 1; i < 7; ++i) {
                for (std::size_t m = 0; m < n; ++m) {
                    double acc = 0.0;
                    for (int j = 0; j < i; ++j) acc += tsit5::a[i][j] * k[j][m];
                    stage[m] = u[m] + h * acc;
                }
                f(k[i], stage, p, t + tsit5::c[i] * h);
                ++sol.stats.nf;
            }
        } catch (const NewtonFailure& e) {
            bad = true;
            bad_msg = e.what();
        }

        double norm = 0.0;
        if (!bad) {
            for (std::size_t m = 0; m < n; ++m) {
                double acc = 0.0, eacc = 0.0;
                for (int j = 0; j < 7; ++j) {
                    acc += tsit5::b[j] * k[j][m];
                    eacc += tsit5::btilde[j] * k[j][m];
                }
                u_new[m] = u[m] + h * acc;
                err[m] = h * eacc;
            }
            if (!detail::all_finite(u_new) || !detail::all_finite(err)) {
                bad = true;
                bad_msg = "non-finite state at t = " + std::to_string(t + h);
            } else if (!fixed) {
                for (std::size_t m = 0; m < n; ++m) {
                    double w = opts.abstol +
                               opts.reltol * std::max(std::abs(u[m]), std::abs(u_new[m]));
                    double s = err[m] / w;
                    norm += s * s;
                }
                norm = n > 0 ? std::sqrt(norm / double(n)) : 0.0;
            }
        }

        if (bad) {
            ++sol.stats.nreject;
            dt = h * 0.2;
            if (dt < dtmin) {
                sol.status = bad_msg.find("non-finite") != std::string::npos
                                 ? SolveStatus::nan_detected
                                 : SolveStatus::newton_failure;
                sol.message = bad_msg;
                return sol;
            }
            continue;
        }

        if (fixed || norm <= 1.0) {
            t = last ? tf : t + h;
            u.swap(u_new);
            k[0] = k[6]; // reuse the last stage
            sol.ts.push_back(t);
            sol.us.push_back(u);
            ++sol.stats.naccept;
            if (!fixed) {
                double factor = norm > 0.0 ? 0.9 * std::pow(norm, -0.2) : 5.0;
                factor = std::clamp(factor, 0.2, 5.0);
                dt = std::min(h * factor, dtmax);
            }
        } else {
            ++sol.stats.nreject;
            double factor = std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
            dt = h * factor;
            if (dt < dtmin) {
                sol.status = SolveStatus::dtmin_underflow;
                sol.message = "step size underflow at t = " + std::to_string(t);
                return sol;
            }
        }
    }
    return sol;
}

inline Solution solve_rk4(const RhsFn& f, std::vector<double> u0, const std::vector<double>& p,
                          std::pair<double, double> tspan, double dt,
                          long long max_steps = 10'000'000) {
    Solution sol;
    const double t0 = tspan.first, tf = tspan.second;
    if (!(tf - t0 > 0.0)) throw RuntimeSolveError("integration span must be positive");
    if (!(dt > 0.0)) throw RuntimeSolveError("step size must be positive");

    const std::size_t n = u0.size();
    std::vector<double> u = std::move(u0), k1(n), k2(n), k3(n), k4(n), stage(n);
    double t = t0;
    sol.ts.push_back(t);
    sol.us.push_back(u);

    long long steps = 0;
    while (t < tf) {
        if (steps++ >= max_steps) {
            sol.status = SolveStatus::max_steps;
            sol.message = "step limit reached at t = " + std::to_string(t);
            return sol;
        }
        double h = std::min(dt, tf - t);
        bool last = tf - (t + h) < 0.05 * h;
        if (last) h = tf - t;
        try {
            f(k1, u, p, t);
            for (std::size_t m = 0; m < n; ++m) stage[m] = u[m] + 0.5 * h * k1[m];
            f(k2, stage, p, t + 0.5 * h);
            for (std::size_t m = 0; m < n; ++m) stage[m] = u[m] + 0.5 * h * k2[m];
            f(k3, stage, p, t + 0.5 * h);
            for (std::size_t m = 0; m < n; ++m) stage[m] = u[m] + h * k3[m];
            f(k4, stage, p, t + h);
        } catch (const NewtonFailure& e) {
            sol.status = SolveStatus::newton_failure;
            sol.message = e.what();
            return sol;
        }
        sol.stats.nf += 4;
        for (std::size_t m = 0; m < n; ++m)
            u[m] += h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        if (!detail::all_finite(u)) {
            sol.status = SolveStatus::nan_detected;
            sol.message = "non-finite state at t = " + std::to_string(t + h);
            return sol;
        }
        t = last ? tf : t + h;
        sol.ts.push_back(t);
        sol.us.push_back(u);
        ++sol.stats.naccept;
    }
    return sol;
}

struct IeulerOptions {
    double newton_tol = 1e-10;
    int max_newton = 25;
    long long max_steps = 10'000'000;
};

// backward Euler on the implicit residual form: at each step solve
// r(w, (w - u_n)/h, p, t_{n+1}) = 0 for w with a finite-difference jacobian
inline Solution solve_ieuler(const DaeResidualFn& res, std::vector<double> u0,
                             const std::vector<double>& p, std::pair<double, double> tspan,
                             double dt, IeulerOptions opts = {}) {
    Solution sol;
    const double t0 = tspan.first, tf = tspan.second;
    if (!(tf - t0 > 0.0)) throw RuntimeSolveError("integration span must be positive");
    if (!(dt > 0.0)) throw RuntimeSolveError("step size must be positive");

    const std::size_t n = u0.size();
    const double sqeps = std::sqrt(std::numeric_limits<double>::epsilon());
    std::vector<double> u = std::move(u0), w(n), du(n), r(n), r2(n);
    double t = t0;
    sol.ts.push_back(t);
    sol.us.push_back(u);

    auto residual = [&](const std::vector<double>& x, double h, double tn,
                        std::vector<double>& out) {
        for (std::size_t m = 0; m < n; ++m) du[m] = (x[m] - u[m]) / h;
        res(out, x, du, p, tn);
        ++sol.stats.nf;
        if (out.size() != n) throw RuntimeSolveError("residual has wrong length");
    };

    Eigen::MatrixXd J(n, n);
    Eigen::VectorXd rhs(n);

    long long step = 0;
    while (t < tf) {
        if (step >= opts.max_steps) {
            sol.status = SolveStatus::max_steps;
            sol.message = "step limit reached at t = " + std::to_string(t);
            return sol;
        }
        ++step;
        double h = std::min(dt, tf - t);
        bool last = tf - (t + h) < 0.05 * h;
        if (last) h = tf - t;
        double tn = last ? tf : t + h;
        w = u; // warm start from the previous state

        bool converged = false;
        for (int it = 0; it < opts.max_newton; ++it) {
            residual(w, h, tn, r);
            double rnorm = 0.0;
            bool finite = true;
            for (double x : r) {
                if (!std::isfinite(x)) finite = false;
                rnorm = std::max(rnorm, std::abs(x));
            }
            if (!finite) {
                sol.status = SolveStatus::nan_detected;
                sol.message = "non-finite residual at step " + std::to_string(step);
                return sol;
            }
            if (rnorm <= opts.newton_tol) {
                converged = true;
                break;
            }

            for (std::size_t j = 0; j < n; ++j) {
                double save = w[j];
                double eps = sqeps * std::max(1.0, std::abs(save));
                w[j] = save + eps;
                residual(w, h, tn, r2);
                w[j] = save;
                for (std::size_t i = 0; i < n; ++i) J(i, j) = (r2[i] - r[i]) / eps;
            }

            Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
            if (!lu.isInvertible()) {
                sol.status = SolveStatus::newton_failure;
                sol.message = "singular iteration matrix at step " + std::to_string(step);
                return sol;
            }
            for (std::size_t i = 0; i < n; ++i) rhs(i) = -r[i];
            Eigen::VectorXd delta = lu.solve(rhs);

            double wnorm = 0.0, dnorm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                wnorm = std::max(wnorm, std::abs(w[i]));
                dnorm = std::max(dnorm, std::abs(delta(i)));
                w[i] += delta(i);
            }
            if (dnorm <= opts.newton_tol * (1.0 + wnorm)) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            sol.status = SolveStatus::newton_failure;
            sol.message = "no convergence at step " + std::to_string(step) +
                          " (t = " + std::to_string(tn) + ")";
            return sol;
        }

        t = tn;
        u = w;
        sol.ts.push_back(t);
        sol.us.push_back(u);
        ++sol.stats.naccept;
    }
    return sol;
}

} // namespace daeflow
