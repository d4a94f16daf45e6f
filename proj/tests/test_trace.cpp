#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "daeflow/compile.hpp"
#include "daeflow/simplify.hpp"
#include "daeflow/trace.hpp"

using namespace daeflow;

namespace {

struct LorenzRhs {
    template <class Du, class Vec, class T>
    void operator()(Du& du, const Vec& u, const Vec& p, T) const {
        du[0] = p[0] * (u[1] - u[0]);
        du[1] = u[0] * (p[1] - u[2]) - u[1];
        du[2] = u[0] * u[1] - p[2] * u[2];
    }
};

} // namespace

TEST_CASE("a host function is recorded as an equation system") {
    OdeSystem sys = trace_to_system(LorenzRhs{}, {1.0, 0.0, 0.0}, {10.0, 28.0, 8.0 / 3.0});
    FlatSystem flat = flatten(sys);
    REQUIRE(flat.states.size() == 3);
    REQUIRE(flat.parameters.size() == 3);
    CHECK(flat.states[0].full_name() == "u1");
    CHECK(flat.parameters[2].full_name() == "p3");
    CHECK(flat.defaults.at("u1") == 1.0);
    CHECK(flat.defaults.at("p2") == 28.0);

    Expr u1 = Expr::symbol(flat.states[0]), u2 = Expr::symbol(flat.states[1]),
         u3 = Expr::symbol(flat.states[2]);
    Expr p1 = Expr::symbol(flat.parameters[0]), p2 = Expr::symbol(flat.parameters[1]),
         p3 = Expr::symbol(flat.parameters[2]);
    REQUIRE(flat.equations.size() == 3);
    CHECK(simplify_basic(flat.equations[0].rhs) == simplify_basic(p1 * (u2 - u1)));
    CHECK(simplify_basic(flat.equations[1].rhs) == simplify_basic(u1 * (p2 - u3) - u2));
    CHECK(simplify_basic(flat.equations[2].rhs) == simplify_basic(u1 * u2 - p3 * u3));
}

TEST_CASE("the recorded system reproduces the numeric function") {
    OdeSystem sys = trace_to_system(LorenzRhs{}, {1.0, 0.0, 0.0}, {10.0, 28.0, 8.0 / 3.0});
    CompiledRhs rhs = compile_rhs(structural_simplify(flatten(sys)));

    std::vector<double> u = {1.3, -2.1, 0.7}, p = {10.0, 28.0, 8.0 / 3.0};
    std::vector<double> du_sym, du_num(3);
    rhs(du_sym, u, p, 0.0);
    LorenzRhs{}(du_num, u, p, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(du_sym[i] == Catch::Approx(du_num[i]).epsilon(1e-14));
}

TEST_CASE("elementary functions and the time variable are recorded") {
    auto f = [](TraceDu& du, const std::vector<TraceValue>& u, const std::vector<TraceValue>&,
                TraceValue t) { du[0] = sin(u[0]) * exp(t) + sqrt(abs(u[0])); };
    OdeSystem sys = trace_to_system(f, {0.5}, {});
    FlatSystem flat = flatten(sys);
    Expr u1 = Expr::symbol(flat.states[0]);
    Expr t = Expr::symbol(flat.ivar);
    CHECK(simplify_basic(flat.equations[0].rhs) ==
          simplify_basic(sin(u1) * exp(t) + sqrt(abs(u1))));
}

TEST_CASE("a zero mass row becomes an algebraic constraint") {
    auto f = [](TraceDu& du, const std::vector<TraceValue>& u, const std::vector<TraceValue>&,
                TraceValue) {
        du[0] = -u[0] * u[1];
        du[1] = u[0] + u[1] - 1.0;
    };
    TraceOptions opts;
    opts.mass_diag = {1.0, 0.0};
    OdeSystem sys = trace_to_system(f, {1.0, 0.0}, {}, opts);
    FlatSystem flat = flatten(sys);
    CHECK(flat.equations[0].lhs.kind() == ExprKind::deriv);
    CHECK(flat.equations[1].lhs.is_zero());

    opts.mass_diag = {1.0, 0.5};
    CHECK_THROWS_AS(trace_to_system(f, {1.0, 0.0}, {}, opts), TraceError);
}

TEST_CASE("data-dependent branches are rejected during recording") {
    auto f = [](TraceDu& du, const std::vector<TraceValue>& u, const std::vector<TraceValue>&,
                TraceValue) {
        if (u[0] > 1.0)
            du[0] = -u[0];
        else
            du[0] = u[0];
    };
    CHECK_THROWS_AS(trace_to_system(f, {2.0}, {}), TraceError);
    CHECK(TraceValue(2.0) > TraceValue(1.0)); // constants still compare
}

TEST_CASE("derivative slots are written exactly once") {
    auto twice = [](TraceDu& du, const std::vector<TraceValue>& u,
                    const std::vector<TraceValue>&, TraceValue) {
        du[0] = u[0];
        du[0] = -u[0];
    };
    CHECK_THROWS_AS(trace_to_system(twice, {1.0}, {}), TraceError);

    auto never = [](TraceDu&, const std::vector<TraceValue>&, const std::vector<TraceValue>&,
                    TraceValue) {};
    CHECK_THROWS_AS(trace_to_system(never, {1.0}, {}), TraceError);

    auto oob = [](TraceDu& du, const std::vector<TraceValue>& u, const std::vector<TraceValue>&,
                  TraceValue) { du[1] = u[0]; };
    CHECK_THROWS_AS(trace_to_system(oob, {1.0}, {}), TraceError);
}

TEST_CASE("non-finite trace inputs are rejected") {
    auto f = [](TraceDu& du, const std::vector<TraceValue>& u, const std::vector<TraceValue>&,
                TraceValue) { du[0] = u[0]; };
    CHECK_THROWS_AS(trace_to_system(f, {std::nan("")}, {}), TraceError);
    CHECK_THROWS_AS(trace_to_system(f, {1.0}, {std::numeric_limits<double>::infinity()}),
                    TraceError);
}

TEST_CASE("a bundled problem exposes its recorded system") {
    TraceProblem<LorenzRhs> prob{LorenzRhs{}, {1.0, 0.0, 0.0}, {10.0, 28.0, 8.0 / 3.0},
                                 {0.0, 100.0}};
    OdeSystem sys = prob.system({.name = "lorenz"});
    CHECK(sys.name == "lorenz");
    CHECK(sys.equations.size() == 3);
    CHECK(prob.tspan.second == 100.0);
}
