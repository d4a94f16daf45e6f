#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "daeflow/derivative.hpp"
#include "daeflow/evaluate.hpp"
#include "daeflow/expr.hpp"
#include "daeflow/expr_text.hpp"
#include "daeflow/simplify.hpp"

using namespace daeflow;

namespace {

const SymbolId t = sym_ivar("t");
const SymbolId xs = sym_state("x", t);
const SymbolId ys = sym_state("y", t);
const SymbolId zs = sym_state("z", t);
const SymbolId ap = sym_param("a");
const SymbolId bp = sym_param("b");

const Expr x = Expr::symbol(xs);
const Expr y = Expr::symbol(ys);
const Expr z = Expr::symbol(zs);
const Expr a = Expr::symbol(ap);
const Expr b = Expr::symbol(bp);

void check_expr_eq(const Expr& got, const Expr& want) {
    INFO("got:  " << to_string(got));
    INFO("want: " << to_string(want));
    CHECK(got == want);
}

// Random expressions over a fixed symbol pool, shaped to evaluate cleanly at
// positive sample points.
Expr random_expr(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 5 : 12);
    switch (pick(rng)) {
    case 0: return x;
    case 1: return y;
    case 2: return a;
    case 3: return Expr::integer(std::uniform_int_distribution<int>(-4, 4)(rng));
    case 4:
        return Expr::rational(std::uniform_int_distribution<int>(1, 9)(rng),
                              std::uniform_int_distribution<int>(1, 9)(rng));
    case 5: return Expr::real(std::uniform_real_distribution<double>(-2, 2)(rng));
    case 6: return random_expr(rng, depth - 1) + random_expr(rng, depth - 1);
    case 7: return random_expr(rng, depth - 1) - random_expr(rng, depth - 1);
    case 8: return random_expr(rng, depth - 1) * random_expr(rng, depth - 1);
    case 9: return sin(random_expr(rng, depth - 1));
    case 10: return cos(random_expr(rng, depth - 1));
    case 11: return pow(random_expr(rng, depth - 1),
                        std::uniform_int_distribution<int>(1, 3)(rng));
    default: return -random_expr(rng, depth - 1);
    }
}

EvalEnv sample_env(std::mt19937& rng) {
    EvalEnv env;
    std::uniform_real_distribution<double> d(0.3, 1.7);
    env.values["x"] = d(rng);
    env.values["y"] = d(rng);
    env.values["a"] = d(rng);
    return env;
}

} // namespace

TEST_CASE("integer and rational constants stay exact") {
    Expr third = Expr::rational(1, 3);
    Expr sixth = Expr::rational(1, 6);
    Expr sum = simplify_basic(third + sixth);
    REQUIRE(sum.is_const());
    REQUIRE(sum.is_rational());
    CHECK(sum.num() == 1);
    CHECK(sum.den() == 2);

    Expr eight_thirds = simplify_basic(Expr::integer(8) / Expr::integer(3));
    REQUIRE(eight_thirds.is_rational());
    CHECK(eight_thirds.num() == 8);
    CHECK(eight_thirds.den() == 3);

    Expr neg = Expr::rational(4, -6);
    CHECK(neg.num() == -2);
    CHECK(neg.den() == 3);
}

TEST_CASE("rational overflow falls back to floating point") {
    Expr big = Expr::rational(1, 1000000007);
    Expr acc = big;
    for (int i = 0; i < 4; ++i) acc = simplify_basic(acc * big);
    REQUIRE(acc.is_const());
    CHECK_FALSE(acc.is_rational());
    CHECK_THAT(acc.value(), Catch::Matchers::WithinRel(std::pow(1.0 / 1000000007, 5), 1e-12));
}

TEST_CASE("constant construction rejects non-finite values") {
    CHECK_THROWS_AS(Expr::real(std::nan("")), ConstructionError);
    CHECK_THROWS_AS(Expr::real(INFINITY), ConstructionError);
    CHECK_THROWS_AS(Expr::rational(1, 0), ConstructionError);
}

TEST_CASE("equal constants compare equal across representations") {
    CHECK(Expr::rational(1, 2) == Expr::real(0.5));
    CHECK(Expr::integer(2) == Expr::real(2.0));
    CHECK(Expr::real(0.0) == Expr::real(-0.0));
    CHECK(Expr::rational(1, 2).hash() == Expr::real(0.5).hash());
}

TEST_CASE("structural equality is hash consistent") {
    Expr e1 = simplify_basic(x * 2 + y);
    Expr e2 = simplify_basic(y + 2 * x);
    CHECK(e1 == e2);
    CHECK(e1.hash() == e2.hash());
}

TEST_CASE("canonical order sorts constants, symbols, applications, derivatives") {
    Expr d = Expr::deriv(x, t, 1);
    Expr app = sin(y);
    Expr c = Expr::integer(3);
    CHECK(expr_compare(c, x) < 0);
    CHECK(expr_compare(x, app) < 0);
    CHECK(expr_compare(app, d) < 0);
    CHECK(expr_compare(x, y) < 0);
    CHECK(expr_compare(d, Expr::deriv(y, t, 1)) < 0);
    CHECK(expr_compare(Expr::deriv(x, t, 1), Expr::deriv(x, t, 2)) < 0);
}

TEST_CASE("simplify applies identity and annihilator rules") {
    check_expr_eq(simplify_basic(x + 0), x);
    check_expr_eq(simplify_basic(x * 1), x);
    check_expr_eq(simplify_basic(x * 0), Expr::integer(0));
    check_expr_eq(simplify_basic(pow(x, 1)), x);
    check_expr_eq(simplify_basic(pow(x, 0)), Expr::integer(1));
    check_expr_eq(simplify_basic(-(-x)), x);
    check_expr_eq(simplify_basic(x - x), Expr::integer(0));
    check_expr_eq(simplify_basic(x / 1), x);
    check_expr_eq(simplify_basic(Expr::integer(0) / x), Expr::integer(0));
}

TEST_CASE("simplify flattens nested sums and products") {
    Expr e = simplify_basic((x + y) + z);
    REQUIRE(e.is_apply(Op::add));
    CHECK(e.nargs() == 3);
    Expr m = simplify_basic((x * y) * z);
    REQUIRE(m.is_apply(Op::mul));
    CHECK(m.nargs() == 3);
}

TEST_CASE("simplify merges repeated factors into powers") {
    check_expr_eq(simplify_basic(x * x), simplify_basic(pow(x, 2)));
    check_expr_eq(simplify_basic(pow(x, 2) * x), simplify_basic(pow(x, 3)));
    check_expr_eq(simplify_basic(pow(x, 2) * pow(x, -2)), Expr::integer(1));
}

TEST_CASE("simplify distributes constants over sums") {
    check_expr_eq(simplify_basic(2 * (x + y)), simplify_basic(2 * x + 2 * y));
    check_expr_eq(simplify_basic(-(x + y)), simplify_basic((-1) * x + (-1) * y));
    Expr undistributed = simplify_basic(x * (y + z));
    REQUIRE(undistributed.is_apply(Op::mul));
}

TEST_CASE("simplify cancels identical terms of opposite sign") {
    check_expr_eq(simplify_basic(sin(x) - sin(x)), Expr::integer(0));
    check_expr_eq(simplify_basic(2 * x + y - 2 * x), y);
    Expr kept = simplify_basic(x + x);
    REQUIRE(kept.is_apply(Op::add));
    CHECK(kept.nargs() == 2);
}

TEST_CASE("simplify orders arguments canonically and deterministically") {
    Expr e1 = simplify_basic(b + a + y + x + 3);
    Expr e2 = simplify_basic(x + 3 + b + y + a);
    check_expr_eq(e1, e2);
    CHECK(to_string(e1) == "3 + a + b + x + y");
}

TEST_CASE("division by a literal zero is rejected") {
    CHECK_THROWS_AS(simplify_basic(x / Expr::integer(0)), EvalDomainError);
}

TEST_CASE("simplify is idempotent and value preserving") {
    std::mt19937 rng(20260822);
    int checked = 0;
    while (checked < 200) {
        Expr e = random_expr(rng, 4);
        Expr s = simplify_basic(e);
        check_expr_eq(simplify_basic(s), s);
        EvalEnv env = sample_env(rng);
        double v0, v1;
        try {
            v0 = evaluate(e, env);
            v1 = evaluate(s, env);
        } catch (const EvalDomainError&) {
            continue;
        }
        INFO("expr: " << to_string(e));
        INFO("simplified: " << to_string(s));
        CHECK_THAT(v1, Catch::Matchers::WithinRel(v0, 1e-9) ||
                           Catch::Matchers::WithinAbs(v0, 1e-9));
        ++checked;
    }
}

TEST_CASE("substitution is simultaneous and does not revisit replacements") {
    Expr swapped = substitute(x + 2 * y, {{x, y}, {y, x}});
    check_expr_eq(simplify_basic(swapped), simplify_basic(y + 2 * x));

    Expr chained = substitute(x, {{x, y}});
    check_expr_eq(substitute(chained, {{x, z}}), y);
}

TEST_CASE("substitution reaches inside derivative arguments") {
    Expr d = Expr::deriv(x, t, 1);
    Expr out = substitute(d, x, y);
    check_expr_eq(out, Expr::deriv(y, t, 1));
    Expr lin = substitute(d, x, simplify_basic(y + 3));
    check_expr_eq(lin, Expr::deriv(y, t, 1));
}

TEST_CASE("derivative nodes collapse and fold at construction") {
    Expr dd = Expr::deriv(Expr::deriv(x, t, 1), t, 1);
    CHECK(dd.order() == 2);
    check_expr_eq(Expr::deriv(Expr::integer(5), t, 1), Expr::integer(0));
    check_expr_eq(Expr::deriv(a, t, 1), Expr::integer(0));
    check_expr_eq(Expr::deriv(Expr::symbol(t), t, 1), Expr::integer(1));
    check_expr_eq(Expr::deriv(simplify_basic(2 * x + a), t, 1),
                  simplify_basic(2 * Expr::deriv(x, t, 1)));
}

TEST_CASE("partial derivatives follow the standard rules") {
    check_expr_eq(partial_derivative(pow(x, 2), x), simplify_basic(2 * x));
    check_expr_eq(partial_derivative(x * y, x), y);
    check_expr_eq(partial_derivative(sin(x), x), cos(x));
    check_expr_eq(partial_derivative(exp(2 * x), x),
                  simplify_basic(2 * exp(2 * x)));
    check_expr_eq(partial_derivative(log(x), x), simplify_basic(1 / x));
    check_expr_eq(partial_derivative(x / y, y),
                  simplify_basic(-(x / pow(y, 2))));
    check_expr_eq(partial_derivative(y, x), Expr::integer(0));
}

TEST_CASE("absolute value has no derivative rule") {
    CHECK_THROWS_AS(partial_derivative(abs(x), x), DerivativeError);
    CHECK_THROWS_WITH(partial_derivative(abs(x), x),
                      Catch::Matchers::ContainsSubstring("abs(x)"));
}

TEST_CASE("total derivative threads through states and leaves parameters") {
    Expr dx = Expr::deriv(x, t, 1);
    check_expr_eq(total_derivative(sin(x), t), simplify_basic(cos(x) * dx));
    check_expr_eq(total_derivative(a * x, t), simplify_basic(a * dx));
    check_expr_eq(total_derivative(Expr::symbol(t), t), Expr::integer(1));
    check_expr_eq(total_derivative(dx, t), Expr::deriv(x, t, 2));
    check_expr_eq(total_derivative(pow(x, 2) + pow(y, 2), t),
                  simplify_basic(2 * x * dx + 2 * y * Expr::deriv(y, t, 1)));
}

TEST_CASE("partial derivatives can target derivative nodes") {
    Expr dx = Expr::deriv(x, t, 1);
    Expr res = simplify_basic(3 * dx + x);
    check_expr_eq(partial_derivative(res, dx), Expr::integer(3));
    check_expr_eq(partial_derivative(res, x), Expr::integer(1));
}

TEST_CASE("symbolic derivatives agree with finite differences") {
    std::mt19937 rng(7);
    int checked = 0;
    while (checked < 120) {
        Expr e = random_expr(rng, 3);
        Expr de = partial_derivative(e, x);
        EvalEnv env = sample_env(rng);
        double h = 1e-6;
        EvalEnv lo = env, hi = env;
        lo.values["x"] -= h;
        hi.values["x"] += h;
        double fd, sym;
        try {
            fd = (evaluate(e, hi) - evaluate(e, lo)) / (2 * h);
            sym = evaluate(de, env);
        } catch (const EvalDomainError&) {
            continue;
        }
        INFO("expr: " << to_string(e));
        INFO("deriv: " << to_string(de));
        CHECK_THAT(sym, Catch::Matchers::WithinRel(fd, 2e-4) ||
                            Catch::Matchers::WithinAbs(fd, 2e-4));
        ++checked;
    }
}

TEST_CASE("jacobian returns simplified entries in row major layout") {
    auto jac = jacobian({simplify_basic(x * y), simplify_basic(x + pow(y, 3))}, {x, y});
    REQUIRE(jac.size() == 2);
    REQUIRE(jac[0].size() == 2);
    check_expr_eq(jac[0][0], y);
    check_expr_eq(jac[0][1], x);
    check_expr_eq(jac[1][0], Expr::integer(1));
    check_expr_eq(jac[1][1], simplify_basic(3 * pow(y, 2)));
}

TEST_CASE("evaluate reports unbound symbols by name") {
    CHECK_THROWS_WITH(evaluate(x + y, EvalEnv{{{"x", 1.0}}, {}}),
                      Catch::Matchers::ContainsSubstring("y"));
    EvalEnv env;
    env.values["x"] = 2.0;
    CHECK_THROWS_AS(evaluate(Expr::deriv(x, t, 1), env), UnboundSymbolError);
    env.deriv_values[{"x", 1}] = 5.0;
    CHECK(evaluate(Expr::deriv(x, t, 1), env) == 5.0);
}

TEST_CASE("evaluate rejects domain violations") {
    EvalEnv env;
    env.values["x"] = -1.0;
    CHECK_THROWS_AS(evaluate(log(x), env), EvalDomainError);
    CHECK_THROWS_AS(evaluate(sqrt(x), env), EvalDomainError);
    env.values["x"] = 0.0;
    CHECK_THROWS_AS(evaluate(y / x, EvalEnv{{{"x", 0.0}, {"y", 1.0}}, {}}),
                    EvalDomainError);
    CHECK_THROWS_AS(evaluate(exp(Expr::symbol(sym_param("p"))),
                             EvalEnv{{{"p", 1e308}}, {}}),
                    EvalDomainError);
}

TEST_CASE("rendering produces canonical infix text") {
    CHECK(to_string(simplify_basic(2 * a * pow(x, 2))) == "2*a*x^2");
    CHECK(to_string(simplify_basic(x - y)) == "x - y");
    CHECK(to_string(simplify_basic(-x)) == "-x");
    CHECK(to_string(simplify_basic(x - 2 * y)) == "x - 2*y");
    CHECK(to_string(Expr::rational(8, 3)) == "8/3");
    CHECK(to_string(simplify_basic(Expr::rational(1, 2) * x)) == "1/2*x");
    CHECK(to_string(Expr::deriv(x, t, 2)) == "D(D(x))");
    CHECK(to_string(simplify_basic(pow(x + y, 2))) == "(x + y)^2");
    CHECK(to_string(simplify_basic(x / (y * z))) == "x/(y*z)");
    CHECK(to_string(sin(x * y)) == "sin(x*y)");
}

TEST_CASE("parsing resolves names, folds signs, and flattens chains") {
    auto resolve = [](const std::string& name) -> Expr {
        if (name == "x") return x;
        if (name == "y") return y;
        if (name == "a") return a;
        throw ParseError("unknown symbol '" + name + "'");
    };
    Expr e = parse_expr("a*x^2 - 3*y + 1/2", resolve, t);
    check_expr_eq(simplify_basic(e),
                  simplify_basic(a * pow(x, 2) - 3 * y + Expr::rational(1, 2)));
    Expr flat = parse_expr("x + y + a", resolve, t);
    REQUIRE(flat.is_apply(Op::add));
    CHECK(flat.nargs() == 3);
    Expr d = parse_expr("D(D(x))", resolve, t);
    CHECK(d.is_deriv());
    CHECK(d.order() == 2);
    CHECK_THROWS_AS(parse_expr("x +", resolve, t), ParseError);
    CHECK_THROWS_AS(parse_expr("foo(x)", resolve, t), ParseError);
    CHECK_THROWS_AS(parse_expr("q", resolve, t), ParseError);
}

TEST_CASE("greek identifiers map to ascii names") {
    bool saw_sigma = false;
    auto resolve = [&](const std::string& name) -> Expr {
        if (name == "sigma") {
            saw_sigma = true;
            return Expr::symbol(sym_param("sigma"));
        }
        throw ParseError("unknown symbol '" + name + "'");
    };
    Expr e = parse_expr("σ*σ", resolve, t);
    CHECK(saw_sigma);
    CHECK(to_string(simplify_basic(e)) == "sigma^2");
}

TEST_CASE("render and parse round trip structurally") {
    auto resolve = [](const std::string& name) -> Expr {
        if (name == "x") return x;
        if (name == "y") return y;
        if (name == "a") return a;
        throw ParseError("unknown symbol '" + name + "'");
    };
    std::mt19937 rng(99);
    for (int i = 0; i < 300; ++i) {
        Expr e;
        try {
            e = simplify_basic(random_expr(rng, 4));
        } catch (const EvalDomainError&) {
            continue;
        }
        std::string text = to_string(e);
        INFO("text: " << text);
        Expr back = parse_expr(text, resolve, t);
        check_expr_eq(back, e);
    }
}
