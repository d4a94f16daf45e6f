#pragma once

#include <charconv>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "daeflow/expr.hpp"
#include "daeflow/simplify.hpp"

namespace daeflow {

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Rendering precedence: sums 10, negated atoms 15, products and quotients 20,
// powers 30, atoms 40. A child is parenthesized when its level is below what
// the position requires.
inline int render_prec(const Expr& e);

inline bool term_is_negative(const Expr& t) {
    if (t.is_const()) return t.value() < 0;
    if (t.is_apply(Op::mul) && t.arg(0).is_const()) return t.arg(0).value() < 0;
    if (t.is_apply(Op::div)) return term_is_negative(t.arg(0));
    return false;
}

// For rendering "a - 2*x" instead of "a + -2*x": strip the sign off the
// leading constant of a term.
inline Expr term_negated(const Expr& t) {
    if (t.is_const()) return const_neg(t);
    if (t.is_apply(Op::div))
        return Expr::apply(Op::div, {term_negated(t.arg(0)), t.arg(1)});
    if (t.is_apply(Op::mul) && t.arg(0).is_const()) {
        Expr c = const_neg(t.arg(0));
        std::vector<Expr> rest(t.args().begin() + 1, t.args().end());
        if (c.is_one()) {
            if (rest.size() == 1) return rest[0];
            return Expr::apply(Op::mul, std::move(rest));
        }
        std::vector<Expr> args;
        args.push_back(c);
        for (auto& r : rest) args.push_back(r);
        return Expr::apply(Op::mul, std::move(args));
    }
    return Expr::apply(Op::neg, {t});
}

inline void render(const Expr& e, int need, std::string& out);

inline void render_wrapped(const Expr& e, int need, std::string& out) {
    if (render_prec(e) < need) {
        out += '(';
        render(e, 0, out);
        out += ')';
    } else {
        render(e, need, out);
    }
}

inline int render_prec(const Expr& e) {
    switch (e.kind()) {
    case ExprKind::constant:
        if (e.value() < 0) return 15;
        if (e.is_rational() && e.den() != 1) return 20;
        return 40;
    case ExprKind::symbol: return 40;
    case ExprKind::deriv: return 40;
    case ExprKind::apply:
        switch (e.op()) {
        case Op::add: return 10;
        case Op::mul: return term_is_negative(e) ? 15 : 20;
        case Op::div: return term_is_negative(e) ? 15 : 20;
        case Op::pow: return 30;
        case Op::neg: return 15;
        default: return 40;
        }
    }
    return 40;
}

inline void render(const Expr& e, int need, std::string& out) {
    switch (e.kind()) {
    case ExprKind::constant:
        if (e.is_rational()) {
            out += std::to_string(e.num());
            if (e.den() != 1) {
                out += '/';
                out += std::to_string(e.den());
            }
        } else {
            out += format_double(e.value());
        }
        return;
    case ExprKind::symbol: out += e.sym().full_name(); return;
    case ExprKind::deriv: {
        for (int i = 0; i < e.order(); ++i) out += "D(";
        render(e.arg(0), 0, out);
        for (int i = 0; i < e.order(); ++i) out += ')';
        return;
    }
    case ExprKind::apply: break;
    }
    switch (e.op()) {
    case Op::add: {
        render_wrapped(e.arg(0), 10, out);
        for (std::size_t i = 1; i < e.nargs(); ++i) {
            const Expr& t = e.arg(i);
            if (term_is_negative(t)) {
                out += " - ";
                render_wrapped(term_negated(t), 11, out);
            } else {
                out += " + ";
                render_wrapped(t, 11, out);
            }
        }
        return;
    }
    case Op::mul: {
        if (term_is_negative(e)) {
            out += '-';
            render_wrapped(term_negated(e), 16, out);
            return;
        }
        render_wrapped(e.arg(0), 20, out);
        for (std::size_t i = 1; i < e.nargs(); ++i) {
            out += '*';
            render_wrapped(e.arg(i), 21, out);
        }
        return;
    }
    case Op::div:
        if (term_is_negative(e)) {
            out += '-';
            render_wrapped(term_negated(e), 16, out);
            return;
        }
        render_wrapped(e.arg(0), 20, out);
        out += '/';
        render_wrapped(e.arg(1), 21, out);
        return;
    case Op::pow:
        render_wrapped(e.arg(0), 31, out);
        out += '^';
        render_wrapped(e.arg(1), 30, out);
        return;
    case Op::neg:
        out += '-';
        render_wrapped(e.arg(0), 16, out);
        return;
    default:
        out += op_name(e.op());
        out += '(';
        render(e.arg(0), 0, out);
        out += ')';
        return;
    }
}

inline const char* greek_name(unsigned cp) {
    switch (cp) {
    case 0x3B1: return "alpha";
    case 0x3B2: return "beta";
    case 0x3B3: return "gamma";
    case 0x3B4: return "delta";
    case 0x3B5: return "epsilon";
    case 0x3B6: return "zeta";
    case 0x3B7: return "eta";
    case 0x3B8: return "theta";
    case 0x3B9: return "iota";
    case 0x3BA: return "kappa";
    case 0x3BB: return "lambda";
    case 0x3BC: return "mu";
    case 0x3BD: return "nu";
    case 0x3BE: return "xi";
    case 0x3BF: return "omicron";
    case 0x3C0: return "pi";
    case 0x3C1: return "rho";
    case 0x3C2: return "sigma";
    case 0x3C3: return "sigma";
    case 0x3C4: return "tau";
    case 0x3C5: return "upsilon";
    case 0x3C6: return "phi";
    case 0x3C7: return "chi";
    case 0x3C8: return "psi";
    case 0x3C9: return "omega";
    case 0x391: return "Alpha";
    case 0x392: return "Beta";
    case 0x393: return "Gamma";
    case 0x394: return "Delta";
    case 0x395: return "Epsilon";
    case 0x396: return "Zeta";
    case 0x397: return "Eta";
    case 0x398: return "Theta";
    case 0x399: return "Iota";
    case 0x39A: return "Kappa";
    case 0x39B: return "Lambda";
    case 0x39C: return "Mu";
    case 0x39D: return "Nu";
    case 0x39E: return "Xi";
    case 0x39F: return "Omicron";
    case 0x3A0: return "Pi";
    case 0x3A1: return "Rho";
    case 0x3A3: return "Sigma";
    case 0x3A4: return "Tau";
    case 0x3A5: return "Upsilon";
    case 0x3A6: return "Phi";
    case 0x3A7: return "Psi";
    case 0x3A8: return "Chi";
    case 0x3A9: return "Omega";
    default: return nullptr;
    }
}

struct ExprLexer {
    const std::string& s;
    std::size_t i = 0;
    int line;

    ExprLexer(const std::string& text, int line_no) : s(text), line(line_no) {}

    void skip_ws() {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    }

    bool eof() {
        skip_ws();
        return i >= s.size();
    }

    char peek() {
        skip_ws();
        return i < s.size() ? s[i] : '\0';
    }

    bool accept(char c) {
        skip_ws();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c))
            throw ParseError(std::string("expected '") + c + "'", line);
    }

    // Decodes one UTF-8 codepoint for Greek identifier support.
    bool ident_char(std::string& out, bool first) {
        if (i >= s.size()) return false;
        unsigned char c = s[i];
        if (c < 0x80) {
            bool ok = (c == '_') || std::isalpha(c) || (!first && std::isdigit(c));
            if (!ok) return false;
            out += static_cast<char>(c);
            ++i;
            return true;
        }
        unsigned cp = 0;
        std::size_t len = 0;
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else {
            throw ParseError("unsupported character in identifier", line);
        }
        if (i + len > s.size()) throw ParseError("truncated UTF-8 sequence", line);
        for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (s[i + k] & 0x3F);
        const char* name = greek_name(cp);
        if (!name) throw ParseError("unsupported character in identifier", line);
        out += name;
        i += len;
        return true;
    }

    // Identifier with optional dotted segments: "rc1.v". Greek letters are
    // transliterated to their ASCII names.
    std::string ident() {
        skip_ws();
        std::string out;
        if (!ident_char(out, true)) return out;
        while (ident_char(out, false)) {
        }
        while (i + 1 < s.size() && s[i] == '.') {
            unsigned char nxt = s[i + 1];
            bool starts_ident = nxt >= 0x80 || nxt == '_' || std::isalpha(nxt);
            if (!starts_ident) break;
            out += '.';
            ++i;
            if (!ident_char(out, true))
                throw ParseError("expected identifier after '.'", line);
            while (ident_char(out, false)) {
            }
        }
        return out;
    }

    bool number_start() {
        skip_ws();
        return i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]));
    }

    Expr number() {
        skip_ws();
        std::size_t start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        bool is_int = true;
        if (i < s.size() && s[i] == '.' && i + 1 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            is_int = false;
            ++i;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
        if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
            std::size_t save = i;
            ++i;
            if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
            if (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
                is_int = false;
                while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            } else {
                i = save;
            }
        }
        std::string text = s.substr(start, i - start);
        if (is_int) {
            long long v = 0;
            auto res = std::from_chars(text.data(), text.data() + text.size(), v);
            if (res.ec == std::errc() && res.ptr == text.data() + text.size())
                return Expr::integer(v);
        }
        double d = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), d);
        if (res.ec != std::errc())
            throw ParseError("malformed number '" + text + "'", line);
        return Expr::real(d);
    }
};

} // namespace detail

using SymbolResolver = std::function<Expr(const std::string& dotted_name)>;

namespace detail {

struct ExprParser {
    ExprLexer lex;
    const SymbolResolver& resolve;
    const SymbolId& ivar;

    ExprParser(const std::string& text, const SymbolResolver& r, const SymbolId& iv,
               int line)
        : lex(text, line), resolve(r), ivar(iv) {}

    static Expr fold_neg(const Expr& e) {
        if (e.is_const()) return const_neg(e);
        if (e.is_apply(Op::div))
            return Expr::apply(Op::div, {fold_neg(e.arg(0)), e.arg(1)});
        if (e.is_apply(Op::mul)) {
            std::vector<Expr> args;
            if (e.arg(0).is_const()) {
                Expr c = const_neg(e.arg(0));
                if (!c.is_one()) args.push_back(c);
                for (std::size_t i = 1; i < e.nargs(); ++i) args.push_back(e.arg(i));
            } else {
                args.push_back(Expr::integer(-1));
                for (const Expr& a : e.args()) args.push_back(a);
            }
            if (args.size() == 1) return args[0];
            return Expr::apply(Op::mul, std::move(args));
        }
        return Expr::apply(Op::mul, {Expr::integer(-1), e});
    }

    // n-ary chains parse flat, matching the canonical layout.
    static Expr build_nary(Op op, std::vector<Expr> parts) {
        std::vector<Expr> flat;
        for (Expr& p : parts) {
            if (p.is_apply(op))
                for (const Expr& a : p.args()) flat.push_back(a);
            else
                flat.push_back(std::move(p));
        }
        if (flat.size() == 1) return flat[0];
        return Expr::apply(op, std::move(flat));
    }

    Expr sum() {
        std::vector<Expr> terms;
        terms.push_back(product());
        while (true) {
            if (lex.accept('+'))
                terms.push_back(product());
            else if (lex.accept('-'))
                terms.push_back(fold_neg(product()));
            else
                break;
        }
        return build_nary(Op::add, std::move(terms));
    }

    Expr product() {
        std::vector<Expr> factors;
        factors.push_back(unary());
        while (true) {
            if (lex.accept('*')) {
                factors.push_back(unary());
            } else if (lex.accept('/')) {
                Expr lhs = build_nary(Op::mul, std::move(factors));
                Expr rhs = unary();
                Expr q;
                if (lhs.is_const() && rhs.is_const() && rhs.value() != 0.0)
                    q = const_mul(lhs, const_recip(rhs));
                else
                    q = Expr::apply(Op::div, {lhs, rhs});
                factors.clear();
                factors.push_back(q);
            } else {
                break;
            }
        }
        return build_nary(Op::mul, std::move(factors));
    }

    Expr unary() {
        if (lex.accept('-')) return fold_neg(unary());
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (lex.accept('^')) {
            Expr e = unary();
            return Expr::apply(Op::pow, {base, e});
        }
        return base;
    }

    Expr atom() {
        if (lex.number_start()) return lex.number();
        if (lex.accept('(')) {
            Expr e = sum();
            lex.expect(')');
            return e;
        }
        std::string name = lex.ident();
        if (name.empty())
            throw ParseError("expected expression", lex.line);
        if (lex.accept('(')) {
            Expr arg = sum();
            lex.expect(')');
            if (name == "D") return Expr::deriv(arg, ivar, 1);
            if (name == "sin") return Expr::apply(Op::sin, {arg});
            if (name == "cos") return Expr::apply(Op::cos, {arg});
            if (name == "tan") return Expr::apply(Op::tan, {arg});
            if (name == "exp") return Expr::apply(Op::exp, {arg});
            if (name == "log") return Expr::apply(Op::log, {arg});
            if (name == "sqrt") return Expr::apply(Op::sqrt, {arg});
            if (name == "abs") return Expr::apply(Op::abs, {arg});
            throw ParseError("unknown function '" + name + "'", lex.line);
        }
        return resolve(name);
    }
};

} // namespace detail

// Canonical infix rendering. Parsing the result reproduces the expression
// node for node (exact for anything a parse produced or simplify_basic
// normalized; raw neg-of-symbol trees come back as -1 * symbol).
inline std::string to_string(const Expr& e) {
    std::string out;
    detail::render(e, 0, out);
    return out;
}

inline Expr parse_expr(const std::string& text, const SymbolResolver& resolve,
                       const SymbolId& ivar, int line = -1) {
    detail::ExprParser p(text, resolve, ivar, line);
    Expr e = p.sum();
    if (!p.lex.eof())
        throw ParseError("trailing input after expression", line);
    return e;
}

} // namespace daeflow
