#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "daeflow/incidence.hpp"
#include "daeflow/matching.hpp"
#include "support/oracles.hpp"

using namespace daeflow;

namespace {

// Pendulum in Cartesian coordinates with tension; the canonical index-3 case.
struct Pendulum {
    SymbolId t = sym_ivar("t");
    SymbolId xs, ys, vxs, vys, Ts, gs;
    Expr x, y, vx, vy, T, g;
    OdeSystem sys;

    Pendulum() {
        xs = sym_state("x", t);
        vxs = sym_state("vx", t);
        ys = sym_state("y", t);
        vys = sym_state("vy", t);
        Ts = sym_state("T", t);
        gs = sym_param("g");
        x = Expr::symbol(xs);
        y = Expr::symbol(ys);
        vx = Expr::symbol(vxs);
        vy = Expr::symbol(vys);
        T = Expr::symbol(Ts);
        g = Expr::symbol(gs);
        sys = make_system("pendulum", t,
                          {eq(D(x, t), vx), eq(D(vx, t), T * x), eq(D(y, t), vy),
                           eq(D(vy, t), T * y - g),
                           eq(Expr::integer(0), pow(x, 2) + pow(y, 2) - 1)},
                          {.states = {{xs, vxs, ys, vys, Ts}},
                           .parameters = {{gs}},
                           .defaults = {{"x", 1.0},
                                        {"y", 0.0},
                                        {"vx", 0.0},
                                        {"vy", 0.0},
                                        {"T", 0.0},
                                        {"g", 9.8}}});
    }
};

IncidenceStructure random_incidence(std::mt19937& rng, int n_eqs, int n_cols) {
    IncidenceStructure inc;
    SymbolId t = sym_ivar("t");
    for (int j = 0; j < n_cols; ++j)
        inc.cols.emplace_back(sym_state("v" + std::to_string(j), t), 0);
    inc.rows.resize(n_eqs);
    inc.eq_index.resize(n_eqs);
    std::bernoulli_distribution flip(0.35);
    for (int i = 0; i < n_eqs; ++i) {
        inc.eq_index[i] = i;
        for (int j = 0; j < n_cols; ++j)
            if (flip(rng)) inc.rows[i].push_back(j);
    }
    return inc;
}

} // namespace

TEST_CASE("full incidence lists every state and order pair that occurs") {
    Pendulum p;
    FlatSystem flat = flatten(p.sys);
    IncidenceStructure inc = build_incidence(flat, IncidenceMode::full);
    REQUIRE(inc.n_rows() == 5);
    REQUIRE(inc.n_cols() == 9); // x,vx,y,vy at orders 0 and 1, T at order 0

    CHECK(inc.col_of("x", 0) >= 0);
    CHECK(inc.col_of("x", 1) >= 0);
    CHECK(inc.col_of("T", 0) >= 0);
    CHECK(inc.col_of("T", 1) < 0);

    // the constraint row touches only x and y at order 0
    std::vector<int> want{inc.col_of("x", 0), inc.col_of("y", 0)};
    std::sort(want.begin(), want.end());
    CHECK(inc.rows[4] == want);
}

TEST_CASE("highest incidence keeps one column per state") {
    Pendulum p;
    FlatSystem flat = flatten(p.sys);
    IncidenceStructure inc = build_incidence(flat, IncidenceMode::highest);
    REQUIRE(inc.n_cols() == 5);
    CHECK(inc.cols[0].second == 1);  // x appears differentiated
    CHECK(inc.cols[4].second == 0);  // T never does

    // a row is incident only where the state occurs at exactly its top order
    CHECK(inc.rows[0] == std::vector<int>{inc.col_of("x", 1)});
    std::vector<int> e2{inc.col_of("vx", 1), inc.col_of("T", 0)};
    std::sort(e2.begin(), e2.end());
    CHECK(inc.rows[1] == e2);
    CHECK(inc.rows[4].empty()); // constraint: x and y only at order 0
}

TEST_CASE("a state absent from all equations still gets a highest column") {
    SymbolId t = sym_ivar("t");
    SymbolId xs = sym_state("x", t), ys = sym_state("y", t);
    Expr x = Expr::symbol(xs);
    std::vector<Equation> eqs{eq(D(x, t), x)};
    IncidenceStructure inc = build_incidence(eqs, {xs, ys}, IncidenceMode::highest);
    REQUIRE(inc.n_cols() == 2);
    CHECK(inc.rows[0] == std::vector<int>{0});
    IncidenceStructure full = build_incidence(eqs, {xs, ys}, IncidenceMode::full);
    CHECK(full.n_cols() == 2); // x at orders 0 and 1; y contributes nothing
    CHECK(full.col_of("y", 0) < 0);
}

TEST_CASE("pendulum highest matching leaves the constraint unmatched") {
    Pendulum p;
    FlatSystem flat = flatten(p.sys);
    IncidenceStructure inc = build_incidence(flat, IncidenceMode::highest);
    Matching m = maximal_matching(inc);
    CHECK(m.cardinality == 4);
    CHECK_FALSE(m.perfect());
    CHECK(m.eq_to_col[4] == -1);
    CHECK(m.eq_to_col[0] == inc.col_of("x", 1));
    CHECK(m.eq_to_col[1] == inc.col_of("vx", 1));
    CHECK(m.eq_to_col[2] == inc.col_of("y", 1));
    CHECK(m.eq_to_col[3] == inc.col_of("vy", 1));
}

TEST_CASE("restricting a full incidence to highest orders changes eligibility") {
    Pendulum p;
    FlatSystem flat = flatten(p.sys);
    IncidenceStructure inc = build_incidence(flat, IncidenceMode::full);
    Matching unrestricted = maximal_matching(inc, false);
    CHECK(unrestricted.cardinality == 5);
    Matching restricted = maximal_matching(inc, true);
    CHECK(restricted.cardinality == 4);
    CHECK(restricted.eq_to_col[4] == -1);
}

TEST_CASE("matching matches the exhaustive oracle on random structures") {
    std::mt19937 rng(4242);
    for (int trial = 0; trial < 60; ++trial) {
        IncidenceStructure inc = random_incidence(
            rng, std::uniform_int_distribution<int>(1, 7)(rng),
            std::uniform_int_distribution<int>(1, 7)(rng));
        Matching m = maximal_matching(inc);
        CHECK(m.cardinality == test_support::brute_force_matching(inc));
    }
}

TEST_CASE("matching is deterministic") {
    std::mt19937 rng(7);
    IncidenceStructure inc = random_incidence(rng, 6, 6);
    Matching a = maximal_matching(inc);
    Matching b = maximal_matching(inc);
    CHECK(a.eq_to_col == b.eq_to_col);
    CHECK(a.col_to_eq == b.col_to_eq);
}

TEST_CASE("alternating reachability from an unmatched equation") {
    Pendulum p;
    FlatSystem flat = flatten(p.sys);
    IncidenceStructure inc = build_incidence(flat, IncidenceMode::highest);
    Matching m = maximal_matching(inc);
    // the constraint row has no highest-order incidences, so only itself
    CHECK(alternating_reachable(inc, m, 4) == std::vector<int>{4});

    // two equations sharing one column: the loser reaches the winner
    IncidenceStructure small;
    SymbolId t = sym_ivar("t");
    small.cols.emplace_back(sym_state("u", t), 0);
    small.cols.emplace_back(sym_state("w", t), 0);
    small.rows = {{0}, {0, 1}, {1}};
    small.eq_index = {0, 1, 2};
    Matching sm = maximal_matching(small);
    CHECK(sm.cardinality == 2);
    CHECK(alternating_reachable(small, sm, 2) == std::vector<int>{0, 1, 2});
}
