#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "daeflow/expr_text.hpp"
#include "daeflow/schedule.hpp"
#include "daeflow/tearing.hpp"

namespace daeflow {

enum class GuessPolicy { warm_start, defaults_always };

struct NewtonConfig {
    double tol = 1e-10; // infinity norm of the residual
    int max_iter = 50;
    int max_halvings = 8;
    GuessPolicy guess = GuessPolicy::warm_start;
};

struct CompileOptions {
    NewtonConfig newton{};
    bool parallel = false;
    int parallel_min_blocks = 2; // smallest batch worth spawning threads for
};

// Expression over value slots, evaluated with plain IEEE arithmetic; solvers
// watch for non-finite results instead of exceptions on the hot path.
struct SlotExpr {
    enum class K { constant, slot, add, mul, div, pow, sin, cos, tan, exp, log, sqrt, abs };
    K k = K::constant;
    double val = 0.0;
    int slot = -1;
    std::vector<SlotExpr> args;

    double eval(const double* env) const {
        switch (k) {
        case K::constant: return val;
        case K::slot: return env[slot];
        case K::add: {
            double s = 0.0;
            for (const auto& a : args) s += a.eval(env);
            return s;
        }
        case K::mul: {
            double p = 1.0;
            for (const auto& a : args) p *= a.eval(env);
            return p;
        }
        case K::div: return args[0].eval(env) / args[1].eval(env);
        case K::pow: return std::pow(args[0].eval(env), args[1].eval(env));
        case K::sin: return std::sin(args[0].eval(env));
        case K::cos: return std::cos(args[0].eval(env));
        case K::tan: return std::tan(args[0].eval(env));
        case K::exp: return std::exp(args[0].eval(env));
        case K::log: return std::log(args[0].eval(env));
        case K::sqrt: return std::sqrt(args[0].eval(env));
        case K::abs: return std::abs(args[0].eval(env));
        }
        return 0.0;
    }
};

namespace detail {

// Slot layout: [state values][parameters][t][state derivatives]
struct SlotMap {
    std::map<std::string, int> value;
    std::map<std::string, int> param;
    int t_slot = -1;
    int du_base = -1;
    int total = 0;

    int deriv_slot(const std::string& name) const { return du_base + value.at(name); }
};

inline SlotMap make_slot_map(const FlatSystem& sys) {
    SlotMap sm;
    int next = 0;
    for (const auto& s : sys.states) sm.value[s.full_name()] = next++;
    for (const auto& p : sys.parameters) sm.param[p.full_name()] = next++;
    sm.t_slot = next++;
    sm.du_base = next;
    next += static_cast<int>(sys.states.size());
    sm.total = next;
    return sm;
}

inline SlotExpr compile_expr(const Expr& e, const SlotMap& sm) {
    SlotExpr out;
    switch (e.kind()) {
    case ExprKind::constant:
        out.k = SlotExpr::K::constant;
        out.val = e.value();
        return out;
    case ExprKind::symbol: {
        out.k = SlotExpr::K::slot;
        const std::string name = e.sym().full_name();
        if (e.sym().kind == SymKind::independent)
            out.slot = sm.t_slot;
        else if (auto it = sm.value.find(name); it != sm.value.end())
            out.slot = it->second;
        else if (auto it = sm.param.find(name); it != sm.param.end())
            out.slot = it->second;
        else
            throw SystemError("no slot for symbol '" + name + "'");
        return out;
    }
    case ExprKind::deriv: {
        if (e.order() != 1 || !e.arg(0).is_symbol())
            throw SystemError("cannot compile derivative term " + std::to_string(e.order()));
        out.k = SlotExpr::K::slot;
        out.slot = sm.deriv_slot(e.arg(0).sym().full_name());
        return out;
    }
    case ExprKind::apply: break;
    }
    switch (e.op()) {
    case Op::add: out.k = SlotExpr::K::add; break;
    case Op::mul: out.k = SlotExpr::K::mul; break;
    case Op::div: out.k = SlotExpr::K::div; break;
    case Op::pow: out.k = SlotExpr::K::pow; break;
    case Op::sin: out.k = SlotExpr::K::sin; break;
    case Op::cos: out.k = SlotExpr::K::cos; break;
    case Op::tan: out.k = SlotExpr::K::tan; break;
    case Op::exp: out.k = SlotExpr::K::exp; break;
    case Op::log: out.k = SlotExpr::K::log; break;
    case Op::sqrt: out.k = SlotExpr::K::sqrt; break;
    case Op::abs: out.k = SlotExpr::K::abs; break;
    case Op::neg: {
        out.k = SlotExpr::K::mul;
        SlotExpr minus;
        minus.k = SlotExpr::K::constant;
        minus.val = -1.0;
        out.args.push_back(minus);
        out.args.push_back(compile_expr(e.arg(0), sm));
        return out;
    }
    }
    for (const Expr& a : e.args()) out.args.push_back(compile_expr(a, sm));
    return out;
}

struct Precondition {
    SlotExpr expr;
    std::string text; // rendered form for the error message
};

struct CompiledAssign {
    int target = -1;
    SlotExpr rhs;
    std::vector<Precondition> checks;
};

struct CompiledBlock {
    std::string label;
    std::vector<int> unknown_slots;
    std::vector<CompiledAssign> inners;
    std::vector<SlotExpr> residuals;
    std::vector<SlotExpr> jacobian; // row-major, inner assignments substituted
    bool linear_scalar = false;
    SlotExpr lin_a, lin_b; // residual = a*x + b with a free of x
    std::vector<double> guess0;
    int level = 0;
};

struct PlanStep {
    bool is_block = false;
    int index = 0; // into assigns or blocks
};

} // namespace detail

// Executable right-hand side of a simplified system. Calling it runs the
// explicit assignments and torn-block solves in block order, then reports the
// derivatives of the differential states. Copies share the warm-start caches.
class CompiledRhs {
public:
    CompiledRhs() = default;

    explicit CompiledRhs(const SimplifiedSystem& simp, CompileOptions opts = {})
        : impl_(std::make_shared<Impl>()) {
        Impl& im = *impl_;
        im.opts = opts;
        im.sm = detail::make_slot_map(simp.system);
        im.n_env = im.sm.total;
        im.param_base = simp.system.states.size();

        for (const auto& s : simp.differential_states) {
            im.diff_value_slots.push_back(im.sm.value.at(s.full_name()));
            im.diff_du_slots.push_back(im.sm.deriv_slot(s.full_name()));
            im.state_names.push_back(s.full_name());
        }
        for (const auto& p : simp.system.parameters) im.param_names.push_back(p.full_name());
        for (const auto& s : simp.algebraic_states) {
            im.algebraic_names.push_back(s.full_name());
            im.algebraic_slots.push_back(im.sm.value.at(s.full_name()));
        }
        for (const auto& [v, def] : simp.observed) {
            im.observed_names.push_back(v.full_name());
            im.observed_exprs.push_back(detail::compile_expr(def, im.sm));
        }

        auto defaults_of = [&](const std::string& name) {
            auto it = simp.system.defaults.find(name);
            return it == simp.system.defaults.end() ? 0.0 : it->second;
        };
        for (const auto& s : simp.differential_states)
            im.u0.push_back(defaults_of(s.full_name()));
        for (const auto& p : simp.system.parameters) im.p0.push_back(defaults_of(p.full_name()));
        for (const auto& s : simp.system.states)
            im.state_defaults.push_back(defaults_of(s.full_name()));

        Schedule sched = build_schedule(simp);
        std::vector<int> level_of(simp.torn.size(), 0);
        for (std::size_t lv = 0; lv < sched.levels.size(); ++lv)
            for (int b : sched.levels[lv]) level_of[b] = static_cast<int>(lv);

        auto make_checks = [&](const std::vector<Expr>& nonzero) {
            std::vector<detail::Precondition> checks;
            for (const Expr& c : nonzero)
                checks.push_back({detail::compile_expr(c, im.sm), to_string(c)});
            return checks;
        };

        // merge assignments and blocks into one sequence ordered by position
        std::map<int, detail::PlanStep> by_pos;
        for (const auto& sa : simp.solved) {
            detail::CompiledAssign ca;
            ca.target = sa.order == 0 ? im.sm.value.at(sa.var.full_name())
                                      : im.sm.deriv_slot(sa.var.full_name());
            ca.rhs = detail::compile_expr(sa.rhs, im.sm);
            ca.checks = make_checks(sa.nonzero);
            by_pos[sa.pos] = {false, static_cast<int>(im.assigns.size())};
            im.assigns.push_back(std::move(ca));
        }
        for (std::size_t b = 0; b < simp.torn.size(); ++b) {
            const TornBlock& tb = simp.torn[b];
            detail::CompiledBlock cb;
            cb.level = level_of[b];
            for (const auto& [v, k] : tb.unknowns) {
                cb.label += (cb.label.empty() ? "" : ", ") + v.full_name();
                cb.unknown_slots.push_back(k == 0 ? im.sm.value.at(v.full_name())
                                                  : im.sm.deriv_slot(v.full_name()));
                cb.guess0.push_back(k == 0 ? defaults_of(v.full_name()) : 0.0);
            }
            for (const auto& ia : tb.inners) {
                detail::CompiledAssign ca;
                ca.target = ia.order == 0 ? im.sm.value.at(ia.var.full_name())
                                          : im.sm.deriv_slot(ia.var.full_name());
                ca.rhs = detail::compile_expr(ia.rhs, im.sm);
                ca.checks = make_checks(ia.nonzero);
                cb.inners.push_back(std::move(ca));
            }

            // residuals with inner assignments substituted, for the Jacobian
            std::vector<Expr> subbed;
            for (const Expr& r : tb.residuals) {
                Expr e = r;
                for (auto it = tb.inners.rbegin(); it != tb.inners.rend(); ++it) {
                    Expr key = it->order == 0
                                   ? Expr::symbol(it->var)
                                   : Expr::deriv(Expr::symbol(it->var), simp.system.ivar, 1);
                    e = substitute(e, key, it->rhs);
                }
                subbed.push_back(simplify_basic(e));
                cb.residuals.push_back(detail::compile_expr(r, im.sm));
            }
            std::vector<Expr> targets;
            for (const auto& [v, k] : tb.unknowns)
                targets.push_back(k == 0 ? Expr::symbol(v)
                                         : Expr::deriv(Expr::symbol(v), simp.system.ivar, 1));
            for (const Expr& r : subbed)
                for (const Expr& x : targets)
                    cb.jacobian.push_back(detail::compile_expr(partial_derivative(r, x), im.sm));

            if (tb.unknowns.size() == 1 && subbed.size() == 1) {
                Expr a = partial_derivative(subbed[0], targets[0]);
                if (!contains(a, targets[0])) {
                    cb.linear_scalar = true;
                    cb.lin_a = detail::compile_expr(a, im.sm);
                    cb.lin_b = detail::compile_expr(
                        simplify_basic(substitute(subbed[0], targets[0], Expr::integer(0))),
                        im.sm);
                }
            }

            by_pos[tb.pos] = {true, static_cast<int>(im.blocks.size())};
            im.blocks.push_back(std::move(cb));
        }
        for (const auto& [pos, step] : by_pos) im.plan.push_back(step);

        im.caches.resize(im.blocks.size());
        im.cache_mutexes = std::vector<std::mutex>(im.blocks.size());
    }

    void operator()(std::vector<double>& du, const std::vector<double>& u,
                    const std::vector<double>& p, double t) const {
        Impl& im = *impl_;
        std::vector<double> env(im.n_env, 0.0);
        run_plan(env, u, p, t);
        du.resize(im.diff_du_slots.size());
        for (std::size_t i = 0; i < im.diff_du_slots.size(); ++i)
            du[i] = env[im.diff_du_slots[i]];
    }

    // algebraic, observed, and differential values at one point
    std::map<std::string, double> reconstruct(const std::vector<double>& u,
                                              const std::vector<double>& p, double t) const {
        Impl& im = *impl_;
        std::vector<double> env(im.n_env, 0.0);
        run_plan(env, u, p, t);
        std::map<std::string, double> out;
        for (std::size_t i = 0; i < im.state_names.size(); ++i)
            out[im.state_names[i]] = u[i];
        for (std::size_t i = 0; i < im.algebraic_names.size(); ++i)
            out[im.algebraic_names[i]] = env[im.algebraic_slots[i]];
        for (std::size_t i = 0; i < im.observed_names.size(); ++i)
            out[im.observed_names[i]] = im.observed_exprs[i].eval(env.data());
        return out;
    }

    std::vector<double> default_u0() const { return impl_->u0; }
    std::vector<double> default_p() const { return impl_->p0; }
    const std::vector<std::string>& state_names() const { return impl_->state_names; }
    const std::vector<std::string>& param_names() const { return impl_->param_names; }
    const std::vector<std::string>& algebraic_names() const { return impl_->algebraic_names; }
    int n_states() const { return static_cast<int>(impl_->state_names.size()); }

private:
    struct Impl {
        CompileOptions opts;
        detail::SlotMap sm;
        int n_env = 0;
        std::size_t param_base = 0;
        std::vector<int> diff_value_slots, diff_du_slots;
        std::vector<int> algebraic_slots;
        std::vector<std::string> state_names, param_names, algebraic_names, observed_names;
        std::vector<SlotExpr> observed_exprs;
        std::vector<double> u0, p0, state_defaults;
        std::vector<detail::CompiledAssign> assigns;
        std::vector<detail::CompiledBlock> blocks;
        std::vector<detail::PlanStep> plan;
        mutable std::vector<std::vector<double>> caches;
        mutable std::vector<std::mutex> cache_mutexes;
    };

    static void run_assign(const detail::CompiledAssign& ca, std::vector<double>& env) {
        for (const auto& c : ca.checks)
            if (c.expr.eval(env.data()) == 0.0)
                throw PreconditionViolation("'" + c.text + "' must be nonzero");
        env[ca.target] = ca.rhs.eval(env.data());
    }

    void solve_block(int bi, std::vector<double>& env) const {
        Impl& im = *impl_;
        const detail::CompiledBlock& cb = im.blocks[bi];
        const NewtonConfig& cfg = im.opts.newton;
        const int m = static_cast<int>(cb.unknown_slots.size());

        if (cb.linear_scalar) {
            double a = cb.lin_a.eval(env.data());
            double b = cb.lin_b.eval(env.data());
            if (a == 0.0)
                throw NewtonFailure("block {" + cb.label + "} is singular at this point");
            env[cb.unknown_slots[0]] = -b / a;
            for (const auto& ia : cb.inners) run_assign(ia, env);
            return;
        }

        std::vector<double> x;
        if (cfg.guess == GuessPolicy::warm_start) {
            std::lock_guard<std::mutex> lock(im.cache_mutexes[bi]);
            x = im.caches[bi];
        }
        if (x.empty()) x = cb.guess0;

        auto residual_at = [&](const std::vector<double>& xs, Eigen::VectorXd& r) {
            for (int j = 0; j < m; ++j) env[cb.unknown_slots[j]] = xs[j];
            for (const auto& ia : cb.inners) run_assign(ia, env);
            for (int i = 0; i < m; ++i) r[i] = cb.residuals[i].eval(env.data());
        };
        auto inf_norm = [](const Eigen::VectorXd& r) {
            double mx = 0.0;
            for (int i = 0; i < r.size(); ++i) {
                double a = std::abs(r[i]);
                if (std::isnan(a)) return std::numeric_limits<double>::quiet_NaN();
                mx = std::max(mx, a);
            }
            return mx;
        };

        Eigen::VectorXd r(m), rn(m);
        Eigen::MatrixXd J(m, m);
        for (int it = 0; it < cfg.max_iter; ++it) {
            residual_at(x, r);
            double rnorm = inf_norm(r);
            if (rnorm <= cfg.tol) {
                if (cfg.guess == GuessPolicy::warm_start) {
                    std::lock_guard<std::mutex> lock(im.cache_mutexes[bi]);
                    im.caches[bi] = x;
                }
                return;
            }
            if (std::isnan(rnorm))
                throw NewtonFailure("block {" + cb.label + "} produced a non-finite residual");

            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    J(i, j) = cb.jacobian[i * m + j].eval(env.data());
            Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
            if (!lu.isInvertible())
                throw NewtonFailure("block {" + cb.label + "} has a singular jacobian");
            Eigen::VectorXd delta = lu.solve(-r);

            double lambda = 1.0;
            bool stepped = false;
            std::vector<double> cand(m);
            for (int h = 0; h <= cfg.max_halvings; ++h) {
                for (int j = 0; j < m; ++j) cand[j] = x[j] + lambda * delta[j];
                residual_at(cand, rn);
                double rnn = inf_norm(rn);
                if (!std::isnan(rnn) && rnn <= rnorm) {
                    x = cand;
                    stepped = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!stepped)
                throw NewtonFailure("block {" + cb.label +
                                    "} made no progress despite step halving");
        }
        throw NewtonFailure("block {" + cb.label + "} did not converge in " +
                            std::to_string(cfg.max_iter) + " iterations");
    }

    void run_batch(const std::vector<int>& batch, std::vector<double>& env) const {
        Impl& im = *impl_;
        if (!im.opts.parallel ||
            static_cast<int>(batch.size()) < im.opts.parallel_min_blocks) {
            for (int bi : batch) solve_block(bi, env);
            return;
        }
        // blocks in one batch write disjoint slots, so they may run concurrently
        std::vector<std::exception_ptr> errors(batch.size());
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < batch.size(); ++i)
            threads.emplace_back([&, i] {
                try {
                    solve_block(batch[i], env);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        for (auto& th : threads) th.join();
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    void run_plan(std::vector<double>& env, const std::vector<double>& u,
                  const std::vector<double>& p, double t) const {
        Impl& im = *impl_;
        if (u.size() != im.diff_value_slots.size())
            throw RuntimeSolveError("state vector has wrong length");
        if (p.size() != im.p0.size())
            throw RuntimeSolveError("parameter vector has wrong length");
        // value slots 0..n-1 follow state declaration order; algebraic slots
        // start from their defaults but are overwritten by the plan
        for (std::size_t i = 0; i < im.state_defaults.size(); ++i)
            env[i] = im.state_defaults[i];
        for (std::size_t i = 0; i < im.diff_value_slots.size(); ++i)
            env[im.diff_value_slots[i]] = u[i];
        for (std::size_t i = 0; i < p.size(); ++i)
            env[im.param_base + i] = p[i];
        env[im.sm.t_slot] = t;

        std::vector<int> batch;
        int batch_level = -1;
        auto flush = [&] {
            if (!batch.empty()) run_batch(batch, env);
            batch.clear();
            batch_level = -1;
        };
        for (const auto& step : im.plan) {
            if (!step.is_block) {
                flush();
                run_assign(im.assigns[step.index], env);
            } else {
                int lv = im.blocks[step.index].level;
                if (batch_level != -1 && lv != batch_level) flush();
                batch_level = lv;
                batch.push_back(step.index);
            }
        }
        flush();
    }

    std::shared_ptr<Impl> impl_;
};

inline CompiledRhs compile_rhs(const SimplifiedSystem& simp, CompileOptions opts = {}) {
    return CompiledRhs(simp, opts);
}

} // namespace daeflow
