#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "daeflow/errors.hpp"
#include "daeflow/expr.hpp"
#include "daeflow/system.hpp"

namespace daeflow {

// A number-like value recorded symbolically. Running an ordinary right-hand
// side on these instead of doubles yields the expression tree it computes.
class TraceValue {
public:
    TraceValue() : e_(Expr::integer(0)) {}
    TraceValue(double v) : e_(Expr::real(v)) {}
    TraceValue(int v) : e_(Expr::integer(v)) {}
    explicit TraceValue(Expr e) : e_(std::move(e)) {}

    const Expr& expr() const { return e_; }

    friend TraceValue operator+(const TraceValue& a, const TraceValue& b) {
        return TraceValue(a.e_ + b.e_);
    }
    friend TraceValue operator-(const TraceValue& a, const TraceValue& b) {
        return TraceValue(a.e_ - b.e_);
    }
    friend TraceValue operator*(const TraceValue& a, const TraceValue& b) {
        return TraceValue(a.e_ * b.e_);
    }
    friend TraceValue operator/(const TraceValue& a, const TraceValue& b) {
        return TraceValue(a.e_ / b.e_);
    }
    friend TraceValue operator-(const TraceValue& a) { return TraceValue(-a.e_); }
    friend TraceValue operator+(const TraceValue& a) { return a; }

    TraceValue& operator+=(const TraceValue& o) { return *this = *this + o; }
    TraceValue& operator-=(const TraceValue& o) { return *this = *this - o; }
    TraceValue& operator*=(const TraceValue& o) { return *this = *this * o; }
    TraceValue& operator/=(const TraceValue& o) { return *this = *this / o; }

    friend TraceValue sin(const TraceValue& a) { return TraceValue(sin(a.e_)); }
    friend TraceValue cos(const TraceValue& a) { return TraceValue(cos(a.e_)); }
    friend TraceValue tan(const TraceValue& a) { return TraceValue(tan(a.e_)); }
    friend TraceValue exp(const TraceValue& a) { return TraceValue(exp(a.e_)); }
    friend TraceValue log(const TraceValue& a) { return TraceValue(log(a.e_)); }
    friend TraceValue sqrt(const TraceValue& a) { return TraceValue(sqrt(a.e_)); }
    friend TraceValue abs(const TraceValue& a) { return TraceValue(abs(a.e_)); }
    friend TraceValue pow(const TraceValue& a, const TraceValue& b) {
        return TraceValue(pow(a.e_, b.e_));
    }

    // branching on a traced quantity would bake one path into the recorded
    // system, so only constant against constant may be compared
    friend bool operator<(const TraceValue& a, const TraceValue& b) {
        return cval(a, "<") < cval(b, "<");
    }
    friend bool operator>(const TraceValue& a, const TraceValue& b) {
        return cval(a, ">") > cval(b, ">");
    }
    friend bool operator<=(const TraceValue& a, const TraceValue& b) {
        return cval(a, "<=") <= cval(b, "<=");
    }
    friend bool operator>=(const TraceValue& a, const TraceValue& b) {
        return cval(a, ">=") >= cval(b, ">=");
    }
    friend bool operator==(const TraceValue& a, const TraceValue& b) {
        return cval(a, "==") == cval(b, "==");
    }
    friend bool operator!=(const TraceValue& a, const TraceValue& b) {
        return cval(a, "!=") != cval(b, "!=");
    }

private:
    static double cval(const TraceValue& v, const char* opname) {
        if (!v.e_.is_const())
            throw TraceError(std::string("operator ") + opname +
                             " cannot branch on a symbolic value");
        return v.e_.value();
    }
    Expr e_;
};

// Derivative output array. Every slot must be assigned exactly once.
class TraceDu {
public:
    explicit TraceDu(std::size_t n) : slots_(n) {}

    class Slot {
    public:
        Slot& operator=(const TraceValue& v) {
            auto& cell = parent_->slots_[i_];
            if (cell)
                throw TraceError("du[" + std::to_string(i_) + "] assigned more than once");
            cell = v.expr();
            return *this;
        }

    private:
        friend class TraceDu;
        Slot(TraceDu* p, std::size_t i) : parent_(p), i_(i) {}
        TraceDu* parent_;
        std::size_t i_;
    };

    Slot operator[](std::size_t i) {
        if (i >= slots_.size())
            throw TraceError("du[" + std::to_string(i) + "] is out of range (size " +
                             std::to_string(slots_.size()) + ")");
        return Slot(this, i);
    }

    std::size_t size() const { return slots_.size(); }
    const std::optional<Expr>& slot(std::size_t i) const { return slots_[i]; }

private:
    std::vector<std::optional<Expr>> slots_;
};

struct TraceOptions {
    std::string name = "traced";
    std::vector<double> mass_diag; // empty means every row is differential
};

// Record f(du, u, p, t) once on symbolic inputs and return the equation
// system it computes. States are named u1..un, parameters p1..pm; the given
// numeric vectors become their defaults.
template <class F>
OdeSystem trace_to_system(F&& f, const std::vector<double>& u0, const std::vector<double>& p0,
                          TraceOptions opts = {}) {
    for (double v : u0)
        if (!std::isfinite(v)) throw TraceError("non-finite initial state value");
    for (double v : p0)
        if (!std::isfinite(v)) throw TraceError("non-finite parameter value");
    if (!opts.mass_diag.empty() && opts.mass_diag.size() != u0.size())
        throw TraceError("mass diagonal length does not match the state count");

    SymbolId t = sym_ivar("t");
    std::vector<SymbolId> states, params;
    std::vector<TraceValue> u, p;
    std::map<std::string, double> defaults;
    for (std::size_t i = 0; i < u0.size(); ++i) {
        std::string name = "u" + std::to_string(i + 1);
        SymbolId s = sym_state(name, t);
        states.push_back(s);
        u.emplace_back(Expr::symbol(s));
        defaults[name] = u0[i];
    }
    for (std::size_t j = 0; j < p0.size(); ++j) {
        std::string name = "p" + std::to_string(j + 1);
        SymbolId s = sym_param(name);
        params.push_back(s);
        p.emplace_back(Expr::symbol(s));
        defaults[name] = p0[j];
    }

    TraceDu du(u0.size());
    f(du, u, p, TraceValue(Expr::symbol(t)));

    std::vector<Equation> eqs;
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (!du.slot(i))
            throw TraceError("du[" + std::to_string(i) + "] was never assigned");
        double m = opts.mass_diag.empty() ? 1.0 : opts.mass_diag[i];
        if (m == 1.0)
            eqs.push_back(eq(D(Expr::symbol(states[i]), t), *du.slot(i)));
        else if (m == 0.0)
            eqs.push_back(eq(Expr::integer(0), *du.slot(i)));
        else
            throw TraceError("mass diagonal entries must be 0 or 1");
    }

    return make_system(opts.name, t, std::move(eqs),
                       {.states = {std::move(states)},
                        .parameters = {std::move(params)},
                        .defaults = std::move(defaults)});
}

// A host function together with the numeric data needed to trace and solve it.
template <class F>
struct TraceProblem {
    F f;
    std::vector<double> u0;
    std::vector<double> p0;
    std::pair<double, double> tspan{0.0, 1.0};

    OdeSystem system(TraceOptions opts = {}) const { return trace_to_system(f, u0, p0, opts); }
};

} // namespace daeflow
