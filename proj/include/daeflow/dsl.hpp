#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "daeflow/expr_text.hpp"
#include "daeflow/simplify.hpp"
#include "daeflow/system.hpp"

namespace daeflow {

namespace detail {

struct DslLine {
    int no;
    std::string text;
};

inline std::vector<DslLine> dsl_lines(const std::string& text) {
    std::vector<DslLine> out;
    std::istringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto h = line.find('#');
        if (h != std::string::npos) line.erase(h);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        out.push_back({no, line.substr(b, e - b + 1)});
    }
    return out;
}

inline std::string first_word(const std::string& s) {
    auto e = s.find_first_of(" \t");
    return e == std::string::npos ? s : s.substr(0, e);
}

inline std::string after_word(const std::string& s) {
    auto e = s.find_first_of(" \t");
    if (e == std::string::npos) return "";
    auto b = s.find_first_not_of(" \t", e);
    return b == std::string::npos ? "" : s.substr(b);
}

// a declaration name: one identifier, no dots
inline std::string decl_ident(ExprLexer& lex) {
    std::string id = lex.ident();
    if (id.empty()) throw ParseError("expected a name", lex.line);
    if (id.find('.') != std::string::npos)
        throw ParseError("'" + id + "': declared names cannot be dotted", lex.line);
    return id;
}

inline std::optional<SymbolId> resolve_symbol(const OdeSystem& sys, const std::string& dotted) {
    auto dot = dotted.find('.');
    if (dot == std::string::npos) {
        if (dotted == sys.ivar.name) return sys.ivar;
        for (const auto& s : sys.states)
            if (s.name == dotted) return s;
        for (const auto& p : sys.parameters)
            if (p.name == dotted) return p;
        return std::nullopt;
    }
    std::string head = dotted.substr(0, dot), rest = dotted.substr(dot + 1);
    for (const auto& sub : sys.subsystems)
        if (sub.name == head) {
            auto inner = resolve_symbol(sub, rest);
            if (!inner || inner->kind == SymKind::independent) return std::nullopt;
            return in_namespace(*inner, head);
        }
    return std::nullopt;
}

struct DslParser {
    const std::vector<DslLine>& lines;

    OdeSystem parse_scope(std::size_t begin, std::size_t end, std::string scope_name,
                          const SymbolId* inherited_ivar, int header_no) {
        OdeSystem sys;
        sys.name = scope_name;
        if (inherited_ivar) sys.ivar = *inherited_ivar;
        bool have_ivar = inherited_ivar != nullptr;

        struct Child {
            std::string name;
            std::size_t begin, end;
            int no;
        };
        std::vector<Child> children;
        std::vector<std::size_t> deferred;

        // first pass: declarations and subsystem extents
        for (std::size_t i = begin; i < end; ++i) {
            const auto& [no, text] = lines[i];
            std::string word = first_word(text), rest = after_word(text);
            if (word == "ivar") {
                if (inherited_ivar)
                    throw ParseError("a subsystem inherits the independent variable", no);
                if (have_ivar) throw ParseError("duplicate 'ivar' declaration", no);
                ExprLexer lex(rest, no);
                sys.ivar = sym_ivar(decl_ident(lex));
                if (!lex.eof()) throw ParseError("trailing input after 'ivar'", no);
                have_ivar = true;
            } else if (word == "param") {
                ExprLexer lex(rest, no);
                do {
                    sys.parameters.push_back(sym_param(decl_ident(lex)));
                } while (!lex.eof());
            } else if (word == "state") {
                if (!have_ivar)
                    throw ParseError("declare the independent variable before states", no);
                ExprLexer lex(rest, no);
                do {
                    std::string nm = decl_ident(lex);
                    lex.expect('(');
                    std::string dep = lex.ident();
                    lex.expect(')');
                    if (dep != sys.ivar.name)
                        throw ParseError("state '" + nm + "' must depend on '" +
                                             sys.ivar.name + "'",
                                         no);
                    sys.states.push_back(sym_state(nm, sys.ivar));
                } while (!lex.eof());
            } else if (word == "subsystem") {
                if (!have_ivar)
                    throw ParseError("declare the independent variable before subsystems", no);
                ExprLexer lex(rest, no);
                std::string nm = decl_ident(lex);
                lex.expect('{');
                if (!lex.eof()) throw ParseError("subsystem body starts on the next line", no);
                int depth = 1;
                std::size_t j = i + 1;
                for (; j < end && depth > 0; ++j) {
                    const std::string& t = lines[j].text;
                    if (t == "}")
                        --depth;
                    else if (first_word(t) == "subsystem")
                        ++depth;
                }
                if (depth != 0) throw ParseError("missing '}' for subsystem '" + nm + "'", no);
                children.push_back({nm, i + 1, j - 1, no});
                i = j - 1;
            } else if (word == "default" || word == "eq" || word == "connect-eq") {
                deferred.push_back(i);
            } else if (word == "}") {
                throw ParseError("unexpected '}'", no);
            } else {
                throw ParseError("unknown directive '" + word + "'", no);
            }
        }
        if (!have_ivar) throw ParseError("missing 'ivar' declaration", header_no);

        std::set<std::string> seen{sys.ivar.name};
        auto claim = [&](const std::string& nm, int no) {
            if (!seen.insert(nm).second)
                throw ParseError("duplicate name '" + nm + "'", no);
        };
        for (const auto& s : sys.states) claim(s.name, header_no);
        for (const auto& p : sys.parameters) claim(p.name, header_no);
        for (const auto& c : children) claim(c.name, c.no);

        for (const auto& c : children)
            sys.subsystems.push_back(parse_scope(c.begin, c.end, c.name, &sys.ivar, c.no));

        // second pass: equations and defaults against the full symbol table
        std::vector<Equation> eqs;
        for (std::size_t i : deferred) {
            const auto& [no, text] = lines[i];
            std::string word = first_word(text), rest = after_word(text);
            SymbolResolver resolver = [&](const std::string& dotted) -> Expr {
                auto sid = resolve_symbol(sys, dotted);
                if (!sid)
                    throw ParseError("symbol '" + dotted + "' is not declared in '" +
                                         sys.name + "'",
                                     no);
                return Expr::symbol(*sid);
            };
            if (word == "default") {
                ExprLexer lex(rest, no);
                std::string target = lex.ident();
                if (target.empty()) throw ParseError("expected a symbol name", no);
                auto sid = resolve_symbol(sys, target);
                if (!sid || sid->kind == SymKind::independent)
                    throw ParseError("cannot set a default for '" + target + "'", no);
                lex.expect('=');
                SymbolResolver none = [&](const std::string& s) -> Expr {
                    throw ParseError("default values must be numeric; '" + s +
                                         "' is a symbol",
                                     no);
                };
                Expr v = simplify_basic(
                    parse_expr(rest.substr(lex.i), none, sys.ivar, no));
                if (!v.is_const())
                    throw ParseError("default value must be a constant", no);
                sys.defaults[sid->full_name()] = v.value();
            } else {
                auto split = rest.find('=');
                if (split == std::string::npos)
                    throw ParseError("expected '=' between the two sides of the equation", no);
                Expr lhs = parse_expr(rest.substr(0, split), resolver, sys.ivar, no);
                Expr rhs = parse_expr(rest.substr(split + 1), resolver, sys.ivar, no);
                eqs.push_back(eq(std::move(lhs), std::move(rhs)));
            }
        }

        return make_system(sys.name, sys.ivar, std::move(eqs),
                           {.states = {sys.states},
                            .parameters = {sys.parameters},
                            .defaults = std::move(sys.defaults),
                            .subsystems = std::move(sys.subsystems)});
    }
};

} // namespace detail

inline OdeSystem parse_model(const std::string& text) {
    auto lines = detail::dsl_lines(text);
    if (lines.empty()) throw ParseError("empty model");
    const auto& [no, head] = lines[0];
    if (detail::first_word(head) != "system")
        throw ParseError("a model starts with 'system <name>'", no);
    detail::ExprLexer lex(detail::after_word(head), no);
    std::string name = detail::decl_ident(lex);
    if (!lex.eof()) throw ParseError("trailing input after the system name", no);
    detail::DslParser p{lines};
    return p.parse_scope(1, lines.size(), name, nullptr, no);
}

inline OdeSystem parse_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

namespace detail {

inline void render_scope(const OdeSystem& sys, int depth, std::string& out) {
    std::string ind(std::size_t(depth) * 2, ' ');
    if (!sys.parameters.empty()) {
        out += ind + "param";
        for (const auto& p : sys.parameters) out += " " + p.name;
        out += "\n";
    }
    if (!sys.states.empty()) {
        out += ind + "state";
        for (const auto& s : sys.states) out += " " + s.name + "(" + s.dep + ")";
        out += "\n";
    }
    for (const auto& [key, val] : sys.defaults)
        out += ind + "default " + key + " = " + format_double(val) + "\n";
    for (const auto& e : sys.equations)
        out += ind + "eq " + to_string(simplify_basic(e.lhs)) + " = " +
               to_string(simplify_basic(e.rhs)) + "\n";
    for (const auto& sub : sys.subsystems) {
        out += ind + "subsystem " + sub.name + " {\n";
        render_scope(sub, depth + 1, out);
        out += ind + "}\n";
    }
}

} // namespace detail

// Canonical form: parsing the result reproduces the model structurally.
inline std::string render_model(const OdeSystem& sys) {
    std::string out = "system " + sys.name + "\nivar " + sys.ivar.name + "\n";
    detail::render_scope(sys, 0, out);
    return out;
}

} // namespace daeflow
