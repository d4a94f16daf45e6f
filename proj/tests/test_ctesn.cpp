#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "daeflow/ctesn.hpp"
#include "daeflow/surrogate_io.hpp"

using namespace daeflow;

namespace {

OdeSystem decay_model() {
    SymbolId t = sym_ivar("t");
    SymbolId xs = sym_state("x", t);
    SymbolId ks = sym_param("k");
    Expr x = Expr::symbol(xs), k = Expr::symbol(ks);
    return make_system("decay", t, {eq(D(x, t), Expr::integer(-1) * k * x)},
                       {.defaults = {{"x", 1.0}, {"k", 1.0}}});
}

// two-timescale pair with an algebraic sum; the fast rate sweeps an order of
// magnitude across the box
OdeSystem two_rate_model() {
    SymbolId t = sym_ivar("t");
    SymbolId x1s = sym_state("x1", t), x2s = sym_state("x2", t), ys = sym_state("y", t);
    SymbolId ks = sym_param("k");
    Expr x1 = Expr::symbol(x1s), x2 = Expr::symbol(x2s), y = Expr::symbol(ys),
         k = Expr::symbol(ks);
    return make_system("tworate", t,
                       {eq(D(x1, t), Expr::integer(-1) * k * (x1 - x2)),
                        eq(D(x2, t), Expr::integer(-1) * (0.5 + 100.0 / k) * x2),
                        eq(Expr::integer(0), y - (x1 + x2))},
                       {.states = {{x1s, x2s, ys}},
                        .parameters = {{ks}},
                        .defaults = {{"x1", 0.5}, {"x2", 0.5}, {"y", 1.0}, {"k", 1100.0}}});
}

double rel_l2(const std::vector<double>& got, const std::vector<double>& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
    }
    return std::sqrt(num / den);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("the reservoir coupling hits its target spectral radius") {
    std::mt19937_64 rng(7);
    Eigen::MatrixXd A = make_reservoir_matrix(80, 0.1, 0.7, rng);
    double est = power_radius(A);
    CHECK(std::abs(est - 0.7) <= 0.007);
}

TEST_CASE("thin-plate interpolation reproduces its nodes") {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd nodes = detail::latin_hypercube(12, 2, rng);
    Eigen::MatrixXd values(12, 3);
    for (int i = 0; i < 12; ++i) {
        double a = nodes(i, 0), b = nodes(i, 1);
        values(i, 0) = std::sin(3.0 * a) + b;
        values(i, 1) = a * b;
        values(i, 2) = std::exp(a - b);
    }
    ThinPlateInterp interp;
    interp.fit(nodes, values);
    for (int i = 0; i < 12; ++i) {
        Eigen::VectorXd got = interp.eval(nodes.row(i).transpose());
        for (int j = 0; j < 3; ++j) CHECK(std::abs(got(j) - values(i, j)) <= 1e-8);
    }
}

TEST_CASE("a decay family is reproduced at held-out parameters") {
    CtesnOptions opts;
    opts.reservoir = 50;
    opts.n_grid = 100;
    opts.seed = 1;
    CtesnSurrogate s = CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {0.5, 2.0}}},
                                             {0.0, 2.0}, 10, opts);
    REQUIRE(s.ts.size() == 100);
    for (double k : {0.77, 1.3}) {
        auto series = s.predict({k});
        std::vector<double> want(s.ts.size());
        for (std::size_t g = 0; g < s.ts.size(); ++g) want[g] = std::exp(-k * s.ts[g]);
        CHECK(rel_l2(series[0], want) <= 0.05);
    }
}

TEST_CASE("the two-timescale family generalizes inside its box") {
    CtesnOptions opts;
    opts.reservoir = 100;
    opts.n_grid = 200;
    opts.seed = 1;
    CtesnSurrogate s = CtesnSurrogate::train(two_rate_model(), {"y"}, {{"k", {200.0, 2000.0}}},
                                             {0.0, 3.0}, 40, opts);

    // ground truth at three parameters that were not sampled
    SimplifiedSystem simp = structural_simplify(pantelides(flatten(two_rate_model())).system);
    CompiledRhs rhs = compile_rhs(simp);
    for (double k : {333.0, 777.0, 1500.0}) {
        Solution sol = solve_tsit5(rhs, rhs.default_u0(), {k}, {0.0, 3.0});
        REQUIRE(sol.ok());
        std::vector<double> want(s.ts.size()), u;
        for (std::size_t g = 0; g < s.ts.size(); ++g) {
            detail::interp_state(sol, s.ts[g], u);
            want[g] = rhs.reconstruct(u, {k}, s.ts[g]).at("y");
        }
        auto series = s.predict({k});
        CHECK(rel_l2(series[0], want) <= 0.05);
    }
}

TEST_CASE("queries outside the sampled box are rejected") {
    CtesnOptions opts;
    opts.reservoir = 20;
    opts.n_grid = 40;
    CtesnSurrogate s = CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {0.5, 2.0}}},
                                             {0.0, 1.0}, 6, opts);
    CHECK_NOTHROW(s.predict({2.1}));  // within the 10% margin
    CHECK_THROWS_AS(s.predict({2.5}), SurrogateError);
    CHECK_THROWS_AS(s.predict({0.2}), SurrogateError);
    CHECK_THROWS_AS(s.predict({1.0, 2.0}), SurrogateError);
}

TEST_CASE("training validates its arguments up front") {
    CHECK_THROWS_AS(CtesnSurrogate::train(decay_model(), {}, {{"k", {0.5, 2.0}}}, {0.0, 1.0}, 6),
                    SurrogateError);
    CHECK_THROWS_AS(
        CtesnSurrogate::train(decay_model(), {"zz"}, {{"k", {0.5, 2.0}}}, {0.0, 1.0}, 6),
        SurrogateError);
    CHECK_THROWS_AS(
        CtesnSurrogate::train(decay_model(), {"x"}, {{"nope", {0.5, 2.0}}}, {0.0, 1.0}, 6),
        SurrogateError);
    CHECK_THROWS_AS(CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {0.5, 2.0}}}, {0.0, 1.0}, 2),
                    SurrogateError);
    CHECK_THROWS_AS(CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {2.0, 0.5}}}, {0.0, 1.0}, 6),
                    SurrogateError);
}

TEST_CASE("archives round-trip bitwise") {
    CtesnOptions opts;
    opts.reservoir = 20;
    opts.n_grid = 40;
    CtesnSurrogate s = CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {0.5, 2.0}}},
                                             {0.0, 1.0}, 6, opts);
    auto dir = std::filesystem::temp_directory_path();
    std::string p1 = (dir / "surr_a.bin").string(), p2 = (dir / "surr_b.bin").string();
    save_surrogate(s, p1);
    CtesnSurrogate loaded = load_surrogate(p1);
    save_surrogate(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));

    auto a = s.predict({1.1}), b = loaded.predict({1.1});
    REQUIRE(a[0].size() == b[0].size());
    for (std::size_t g = 0; g < a[0].size(); ++g) CHECK(a[0][g] == b[0][g]);

    std::string bad = (dir / "surr_bad.bin").string();
    std::ofstream(bad, std::ios::binary) << "XXXXnot an archive";
    CHECK_THROWS_AS(load_surrogate(bad), SurrogateError);
    std::string trunc = (dir / "surr_trunc.bin").string();
    std::ofstream(trunc, std::ios::binary) << slurp(p1).substr(0, 20);
    CHECK_THROWS_AS(load_surrogate(trunc), SurrogateError);
}

TEST_CASE("composed surrogates report namespaced series") {
    CtesnOptions opts;
    opts.reservoir = 20;
    opts.n_grid = 40;
    CtesnSurrogate left = CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {0.5, 2.0}}},
                                                {0.0, 1.0}, 6, opts);
    opts.seed = 2;
    CtesnSurrogate right = CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {0.5, 2.0}}},
                                                 {0.0, 1.0}, 6, opts);
    ComposedModel model{{{"left", left}, {"right", right}}};
    auto pred = model.predict({{"left", {0.8}}, {"right", {1.6}}});
    CHECK(pred.series.count("left.x") == 1);
    CHECK(pred.series.count("right.x") == 1);
    CHECK(pred.ts == left.ts);
    CHECK_THROWS_AS(model.predict({{"left", {0.8}}}), SurrogateError);

    opts.n_grid = 30;
    CtesnSurrogate other = CtesnSurrogate::train(decay_model(), {"x"}, {{"k", {0.5, 2.0}}},
                                                 {0.0, 1.0}, 6, opts);
    ComposedModel mixed{{{"left", left}, {"other", other}}};
    CHECK_THROWS_AS(mixed.predict({{"left", {0.8}}, {"other", {0.8}}}), SurrogateError);
}
