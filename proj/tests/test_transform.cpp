#include <catch2/catch_amalgamated.hpp>

#include "daeflow/expr_text.hpp"
#include "daeflow/liouville.hpp"
#include "daeflow/pantelides.hpp"
#include "daeflow/schedule.hpp"
#include "daeflow/spy.hpp"

using namespace daeflow;

namespace {

OdeSystem lorenz() {
    SymbolId t = sym_ivar("t");
    SymbolId xs = sym_state("x", t), ys = sym_state("y", t), zs = sym_state("z", t);
    SymbolId ss = sym_param("sigma"), rs = sym_param("rho"), bs = sym_param("beta");
    Expr x = Expr::symbol(xs), y = Expr::symbol(ys), z = Expr::symbol(zs);
    Expr sigma = Expr::symbol(ss), rho = Expr::symbol(rs), beta = Expr::symbol(bs);
    return make_system("lorenz", t,
                       {eq(D(x, t), sigma * (y - x)), eq(D(y, t), x * (rho - z) - y),
                        eq(D(z, t), x * y - beta * z)});
}

OdeSystem pendulum() {
    SymbolId t = sym_ivar("t");
    SymbolId xs = sym_state("x", t), vxs = sym_state("vx", t), ys = sym_state("y", t),
             vys = sym_state("vy", t), Ts = sym_state("T", t);
    SymbolId gs = sym_param("g");
    Expr x = Expr::symbol(xs), y = Expr::symbol(ys), vx = Expr::symbol(vxs),
         vy = Expr::symbol(vys), T = Expr::symbol(Ts), g = Expr::symbol(gs);
    return make_system("pendulum", t,
                       {eq(D(x, t), vx), eq(D(vx, t), T * x), eq(D(y, t), vy),
                        eq(D(vy, t), T * y - g),
                        eq(Expr::integer(0), pow(x, 2) + pow(y, 2) - 1)},
                       {.states = {{xs, vxs, ys, vys, Ts}}, .parameters = {{gs}}});
}

} // namespace

TEST_CASE("the volume state contracts at the divergence rate") {
    FlatSystem flat = flatten(lorenz());
    FlatSystem out = liouville_transform(flat);

    REQUIRE(out.states.size() == 4);
    REQUIRE(out.equations.size() == 4);
    CHECK(out.states[3].full_name() == "w");
    CHECK(out.defaults.at("w") == 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(out.equations[i].lhs == flat.equations[i].lhs);
        CHECK(out.equations[i].rhs == flat.equations[i].rhs);
    }

    Expr w = Expr::symbol(out.states[3]);
    Expr sigma = Expr::symbol(sym_param("sigma")), beta = Expr::symbol(sym_param("beta"));
    CHECK(out.equations[3].lhs == D(w, out.ivar));
    CHECK(out.equations[3].rhs == simplify_basic(w * (Expr::integer(-1) * sigma - 1 - beta)));
}

TEST_CASE("the volume transform refuses algebraic equations") {
    SymbolId t = sym_ivar("t");
    SymbolId xs = sym_state("x", t), ys = sym_state("y", t);
    Expr x = Expr::symbol(xs), y = Expr::symbol(ys);
    OdeSystem sys = make_system("mixed", t,
                                {eq(D(x, t), y), eq(Expr::integer(0), x - pow(y, 2))});
    CHECK_THROWS_AS(liouville_transform(flatten(sys)), SystemError);
}

TEST_CASE("the volume state name steps aside on collision") {
    SymbolId t = sym_ivar("t");
    SymbolId ws = sym_state("w", t);
    Expr w = Expr::symbol(ws);
    OdeSystem sys = make_system("taken", t, {eq(D(w, t), Expr::integer(-1) * w)});
    FlatSystem out = liouville_transform(flatten(sys));
    REQUIRE(out.states.size() == 2);
    CHECK(out.states[1].full_name() == "w_");
}

TEST_CASE("independent torn blocks land on one level") {
    SymbolId t = sym_ivar("t");
    SymbolId xs = sym_state("x", t), ys = sym_state("y", t);
    Expr x = Expr::symbol(xs), y = Expr::symbol(ys);
    OdeSystem sys = make_system("pair", t,
                                {eq(Expr::integer(0), pow(x, 2) + x - 2),
                                 eq(Expr::integer(0), pow(y, 2) + y - 6)},
                                {.states = {{xs, ys}}});
    SimplifiedSystem simp = structural_simplify(flatten(sys));
    REQUIRE(simp.torn.size() == 2);
    Schedule sched = build_schedule(simp);
    REQUIRE(sched.levels.size() == 1);
    CHECK(sched.levels[0] == std::vector<int>{0, 1});
}

TEST_CASE("a dependency through an assignment separates levels") {
    SymbolId t = sym_ivar("t");
    SymbolId xs = sym_state("x", t), as = sym_state("a", t), ys = sym_state("y", t);
    SymbolId gs = sym_param("gamma");
    Expr x = Expr::symbol(xs), a = Expr::symbol(as), y = Expr::symbol(ys);
    Expr gamma = Expr::symbol(gs);
    OdeSystem sys = make_system("chain", t,
                                {eq(Expr::integer(0), pow(x, 2) + x - 2),
                                 eq(gamma * a, x),
                                 eq(Expr::integer(0), pow(y, 2) - a)},
                                {.states = {{xs, as, ys}}, .parameters = {{gs}}});
    SimplifiedSystem simp = structural_simplify(flatten(sys));
    REQUIRE(simp.torn.size() == 2);
    REQUIRE(simp.solved.size() == 1);
    Schedule sched = build_schedule(simp);
    REQUIRE(sched.levels.size() == 2);
    CHECK(sched.levels[0] == std::vector<int>{0});
    CHECK(sched.levels[1] == std::vector<int>{1});
}

TEST_CASE("a pure ODE system has nothing to schedule") {
    SimplifiedSystem simp = structural_simplify(flatten(lorenz()));
    CHECK(simp.torn.empty());
    CHECK(build_schedule(simp).levels.empty());
}

TEST_CASE("the raw pendulum picture shows the empty constraint row") {
    FlatSystem flat = flatten(pendulum());
    IncidenceStructure inc = build_incidence(flat, IncidenceMode::highest);
    CHECK(render_spy_text(inc) ==
          "#....\n"
          ".#..#\n"
          "..#..\n"
          "...##\n"
          ".....\n");
}

TEST_CASE("the reduced pendulum picture is lower block triangular") {
    IndexReduction red = pantelides(flatten(pendulum()));
    SimplifiedSystem simp = structural_simplify(red.system);
    IncidenceStructure perm = permuted_incidence(simp);
    CHECK(render_spy_text(perm) ==
          "#....\n"
          ".#...\n"
          "..#..\n"
          "..##.\n"
          "..#.#\n");
    CHECK(render_spy_pbm(perm) ==
          "P1\n"
          "5 5\n"
          "10000\n"
          "01000\n"
          "00100\n"
          "00110\n"
          "00101\n");
}

TEST_CASE("index reduction keeps the equation count") {
    FlatSystem flat = flatten(pendulum());
    IncidenceStructure raw = build_incidence(flat, IncidenceMode::highest);
    IndexReduction red = pantelides(flat);
    SimplifiedSystem simp = structural_simplify(red.system);
    IncidenceStructure perm = permuted_incidence(simp);
    CHECK(perm.n_rows() == raw.n_rows());
    CHECK(perm.n_cols() == raw.n_cols());
}

TEST_CASE("the torn picture covers only iteration variables") {
    IndexReduction red = pantelides(flatten(pendulum()));
    SimplifiedSystem simp = structural_simplify(red.system);
    IncidenceStructure torn = torn_incidence(simp);
    CHECK(torn.n_rows() == 1);
    CHECK(torn.n_cols() == 1);
    CHECK(render_spy_text(torn) == "#\n");
}
