#include <CLI11.hpp>

#include <daeflow/compile.hpp>
#include <daeflow/csv.hpp>
#include <daeflow/ctesn.hpp>
#include <daeflow/dsl.hpp>
#include <daeflow/liouville.hpp>
#include <daeflow/pantelides.hpp>
#include <daeflow/rc_benchmark.hpp>
#include <daeflow/schedule.hpp>
#include <daeflow/solvers.hpp>
#include <daeflow/spy.hpp>
#include <daeflow/surrogate_io.hpp>
#include <daeflow/tearing.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace {

using namespace daeflow;

// exit codes: 0 ok, 2 usage, 3 parse error, 4 structural failure, 5 numerical failure

void write_text_file(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw RuntimeSolveError("cannot open '" + tmp + "' for writing");
        f << text;
        f.flush();
        if (!f) {
            std::remove(tmp.c_str());
            throw RuntimeSolveError("writing '" + tmp + "' failed");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw RuntimeSolveError("cannot move '" + tmp + "' to '" + path + "'");
    }
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty())
        std::cout << text;
    else
        write_text_file(out, text);
}

// Model text for an already-flattened system. Names keep their dots, so the
// output of a hierarchical model is a report, not necessarily reparseable.
std::string render_flat(const FlatSystem& sys, const std::vector<int>* diff_counts = nullptr) {
    const std::string iv = sys.ivar.full_name();
    std::string out = "system " + sys.name + "\n";
    out += "ivar " + iv + "\n";
    if (!sys.parameters.empty()) {
        out += "param";
        for (const auto& p : sys.parameters) out += " " + p.full_name();
        out += "\n";
    }
    if (!sys.states.empty()) {
        out += "state";
        for (const auto& s : sys.states) out += " " + s.full_name() + "(" + iv + ")";
        out += "\n";
    }
    std::set<std::string> known;
    for (const auto& s : sys.states) known.insert(s.full_name());
    for (const auto& p : sys.parameters) known.insert(p.full_name());
    for (const auto& [name, val] : sys.defaults)
        if (known.count(name)) out += "default " + name + " = " + detail::format_double(val) + "\n";
    for (std::size_t i = 0; i < sys.equations.size(); ++i) {
        const auto& e = sys.equations[i];
        out += "eq " + to_string(simplify_basic(e.lhs)) + " = " + to_string(simplify_basic(e.rhs));
        if (diff_counts && i < diff_counts->size() && (*diff_counts)[i] > 0)
            out += "  # differentiated " + std::to_string((*diff_counts)[i]) + " time(s)";
        out += "\n";
    }
    return out;
}

std::string size_histogram(const std::vector<std::size_t>& sizes) {
    std::map<std::size_t, int> h;
    for (auto s : sizes) ++h[s];
    std::string out;
    for (const auto& [sz, n] : h) {
        if (!out.empty()) out += ", ";
        out += std::to_string(n) + " of size " + std::to_string(sz);
    }
    return out;
}

std::string csv_text(const std::vector<std::string>& cols, const std::vector<double>& ts,
                     const std::vector<std::vector<double>>& rows) {
    std::string out = "t";
    for (const auto& c : cols) out += "," + c;
    out += "\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        out += detail::format_double(ts[i]);
        for (double v : rows[i]) out += "," + detail::format_double(v);
        out += "\n";
    }
    return out;
}

int run_simplify(const std::string& model, const std::string& out) {
    auto red = pantelides(flatten(parse_model_file(model)));
    auto simp = structural_simplify(red.system);
    auto sched = build_schedule(simp);

    std::vector<std::size_t> block_sizes;
    for (const auto& b : simp.torn) block_sizes.push_back(b.unknowns.size());
    std::string widths;
    for (const auto& lvl : sched.levels) {
        if (!widths.empty()) widths += ", ";
        widths += std::to_string(lvl.size());
    }

    std::cout << "system " << simp.system.name << "\n";
    std::cout << "  equations:           " << simp.system.equations.size() << "\n";
    std::cout << "  index reduction:     " << red.rounds << " round(s)\n";
    std::cout << "  differential states: " << simp.differential_states.size() << "\n";
    std::cout << "  algebraic states:    " << simp.algebraic_states.size() << "\n";
    std::cout << "  observed:            " << simp.observed.size() << "\n";
    std::cout << "  solved assignments:  " << simp.solved.size() << "\n";
    std::cout << "  torn blocks:         " << simp.torn.size();
    if (!simp.torn.empty()) std::cout << " (" << size_histogram(block_sizes) << ")";
    std::cout << "\n";
    std::cout << "  schedule levels:     " << sched.levels.size();
    if (!sched.levels.empty()) std::cout << " (widths: " << widths << ")";
    std::cout << "\n";

    const std::string text = render_flat(simp.system);
    if (out.empty())
        std::cout << "\n" << text;
    else
        write_text_file(out, text);
    return 0;
}

int run_index_reduce(const std::string& model, const std::string& out) {
    auto red = pantelides(flatten(parse_model_file(model)));
    emit(out, render_flat(red.system, &red.diff_counts));
    return 0;
}

int run_spy(const std::string& model, const std::string& stage, const std::string& format,
            const std::string& out) {
    auto flat = flatten(parse_model_file(model));
    IncidenceStructure inc;
    if (stage == "raw") {
        inc = build_incidence(flat, IncidenceMode::highest);
    } else {
        auto simp = structural_simplify(pantelides(flat).system);
        inc = stage == "blt" ? permuted_incidence(simp) : torn_incidence(simp);
    }
    emit(out, format == "pbm" ? render_spy_pbm(inc) : render_spy_text(inc));
    return 0;
}

int finish_solve(const Solution& sol, const std::vector<std::string>& cols,
                 const std::vector<std::vector<double>>& rows, const std::string& out) {
    if (!sol.ok()) {
        std::cerr << "error: " << to_string(sol.status);
        if (!sol.message.empty()) std::cerr << ": " << sol.message;
        std::cerr << "\n";
        return 5;
    }
    if (out.empty())
        std::cout << csv_text(cols, sol.ts, rows);
    else
        write_csv(out, cols, sol.ts, rows);
    return 0;
}

// Backward Euler on the untransformed flat equations: derivatives become
// residual unknowns, no index reduction, no tearing.
int run_solve_raw(const FlatSystem& flat, std::pair<double, double> tspan, double dt,
                  const std::string& out) {
    const std::size_t n = flat.states.size();
    if (flat.equations.size() != n)
        throw StructuralError("system is not square: " + std::to_string(flat.equations.size()) +
                              " equation(s) for " + std::to_string(n) + " state(s)");

    const auto sm = detail::make_slot_map(flat);
    std::vector<SlotExpr> lhs, rhs;
    for (const auto& e : flat.equations) {
        lhs.push_back(detail::compile_expr(simplify_basic(e.lhs), sm));
        rhs.push_back(detail::compile_expr(simplify_basic(e.rhs), sm));
    }

    DaeResidualFn res = [n, sm, lhs, rhs, env = std::vector<double>(sm.total)](
                            std::vector<double>& r, const std::vector<double>& u,
                            const std::vector<double>& du, const std::vector<double>& p,
                            double t) mutable {
        for (std::size_t i = 0; i < n; ++i) env[i] = u[i];
        for (std::size_t j = 0; j < p.size(); ++j) env[n + j] = p[j];
        env[sm.t_slot] = t;
        for (std::size_t i = 0; i < n; ++i) env[sm.du_base + i] = du[i];
        for (std::size_t i = 0; i < n; ++i)
            r[i] = lhs[i].eval(env.data()) - rhs[i].eval(env.data());
    };

    auto dflt = [&](const SymbolId& s) {
        auto it = flat.defaults.find(s.full_name());
        return it == flat.defaults.end() ? 0.0 : it->second;
    };
    std::vector<double> u0, p0;
    for (const auto& s : flat.states) u0.push_back(dflt(s));
    for (const auto& p : flat.parameters) p0.push_back(dflt(p));

    Solution sol = solve_ieuler(res, u0, p0, tspan, dt);
    std::vector<std::string> cols;
    for (const auto& s : flat.states) cols.push_back(s.full_name());
    return finish_solve(sol, cols, sol.us, out);
}

int run_solve(const std::string& model, const std::string& method,
              std::pair<double, double> tspan, double dt, double abstol, double reltol,
              bool parallel, const std::vector<std::string>& observed, const std::string& out) {
    if (!(tspan.second > tspan.first)) {
        std::cerr << "error: --tspan must satisfy t0 < tf\n";
        return 2;
    }
    if ((method == "rk4" || method == "ieuler") && !(dt > 0.0)) {
        std::cerr << "error: --method " << method << " needs --dt > 0\n";
        return 2;
    }
    if (method == "ieuler" && !observed.empty()) {
        std::cerr << "error: --observed needs --method tsit5 or rk4\n";
        return 2;
    }

    auto flat = flatten(parse_model_file(model));
    if (method == "ieuler") return run_solve_raw(flat, tspan, dt, out);

    auto simp = structural_simplify(pantelides(flat).system);
    CompileOptions copts;
    copts.parallel = parallel;
    auto rhs = compile_rhs(simp, copts);
    const auto u0 = rhs.default_u0();
    const auto p = rhs.default_p();

    if (!observed.empty()) {
        auto probe = rhs.reconstruct(u0, p, tspan.first);
        for (const auto& name : observed)
            if (!probe.count(name)) {
                std::cerr << "error: no variable '" << name << "' in the solved model\n";
                return 2;
            }
    }

    RhsFn f = [&rhs](std::vector<double>& du, const std::vector<double>& u,
                     const std::vector<double>& pp, double t) { rhs(du, u, pp, t); };

    Solution sol;
    if (method == "rk4") {
        sol = solve_rk4(f, u0, p, tspan, dt);
    } else {
        SolverOptions sopts;
        sopts.abstol = abstol;
        sopts.reltol = reltol;
        if (dt > 0.0) sopts.dt0 = dt;
        sol = solve_tsit5(f, u0, p, tspan, sopts);
    }

    std::vector<std::string> cols = rhs.state_names();
    std::vector<std::vector<double>> rows = sol.us;
    if (!observed.empty() && sol.ok()) {
        for (std::size_t i = 0; i < sol.ts.size(); ++i) {
            auto m = rhs.reconstruct(sol.us[i], p, sol.ts[i]);
            for (const auto& name : observed) rows[i].push_back(m.at(name));
        }
        for (const auto& name : observed) cols.push_back(name);
    }
    return finish_solve(sol, cols, rows, out);
}

int run_liouville(const std::string& model, const std::string& out) {
    auto flat = flatten(parse_model_file(model));
    emit(out, render_flat(liouville_transform(flat)));
    return 0;
}

int run_surrogatize(const std::string& model, const std::vector<std::string>& outputs,
                    const std::vector<std::string>& box_spec, std::size_t samples,
                    std::pair<double, double> tspan, const CtesnOptions& opts,
                    const std::string& out) {
    auto sys = parse_model_file(model);
    auto flat = flatten(sys);
    if (box_spec.size() != flat.parameters.size()) {
        std::cerr << "error: --box needs one lo:hi range per parameter ("
                  << flat.parameters.size() << " declared, " << box_spec.size() << " given)\n";
        return 2;
    }
    std::vector<std::pair<std::string, std::pair<double, double>>> box;
    for (std::size_t i = 0; i < box_spec.size(); ++i) {
        const auto& s = box_spec[i];
        const auto colon = s.find(':');
        char* e1 = nullptr;
        char* e2 = nullptr;
        double lo = 0, hi = 0;
        if (colon != std::string::npos) {
            lo = std::strtod(s.c_str(), &e1);
            hi = std::strtod(s.c_str() + colon + 1, &e2);
        }
        if (colon == std::string::npos || e1 != s.c_str() + colon || *e2 != '\0') {
            std::cerr << "error: bad --box range '" << s << "', expected lo:hi\n";
            return 2;
        }
        box.emplace_back(flat.parameters[i].full_name(), std::make_pair(lo, hi));
    }

    auto surr = CtesnSurrogate::train(sys, outputs, box, tspan, samples, opts);
    const std::string tmp = out + ".tmp";
    save_surrogate(surr, tmp);
    if (std::rename(tmp.c_str(), out.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw RuntimeSolveError("cannot move '" + tmp + "' to '" + out + "'");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acausal modeling compiler"};
    app.require_subcommand(1);

    auto* c_sim = app.add_subcommand("simplify", "report the reduced structure of a model");
    std::string sim_model, sim_out;
    c_sim->add_option("model", sim_model, "model file")->required();
    c_sim->add_option("--out", sim_out, "write the reduced model here instead of stdout");

    auto* c_ir = app.add_subcommand("index-reduce", "differentiate constraints down to index 1");
    std::string ir_model, ir_out;
    c_ir->add_option("model", ir_model, "model file")->required();
    c_ir->add_option("--out", ir_out, "output path (stdout if omitted)");

    auto* c_spy = app.add_subcommand("spy", "render the structural incidence pattern");
    std::string spy_model, spy_stage = "raw", spy_format = "text", spy_out;
    c_spy->add_option("model", spy_model, "model file")->required();
    c_spy->add_option("--stage", spy_stage, "raw, blt, or torn")
        ->check(CLI::IsMember({"raw", "blt", "torn"}));
    c_spy->add_option("--format", spy_format, "text or pbm")
        ->check(CLI::IsMember({"text", "pbm"}));
    c_spy->add_option("--out", spy_out, "output path (stdout if omitted)");

    auto* c_sol = app.add_subcommand("solve", "integrate a model and write CSV");
    std::string sol_model, sol_method = "tsit5", sol_out;
    std::vector<double> sol_tspan;
    double sol_dt = 0.0, sol_abstol = 1e-6, sol_reltol = 1e-6;
    bool sol_parallel = false;
    std::vector<std::string> sol_observed;
    c_sol->add_option("model", sol_model, "model file")->required();
    c_sol->add_option("--method", sol_method, "tsit5, rk4, or ieuler")
        ->check(CLI::IsMember({"tsit5", "rk4", "ieuler"}));
    c_sol->add_option("--tspan", sol_tspan, "integration interval: t0 tf")
        ->expected(2)
        ->required();
    c_sol->add_option("--dt", sol_dt, "step size (fixed for rk4/ieuler, initial for tsit5)");
    c_sol->add_option("--abstol", sol_abstol, "absolute tolerance (tsit5)");
    c_sol->add_option("--reltol", sol_reltol, "relative tolerance (tsit5)");
    c_sol->add_flag("--parallel", sol_parallel, "run independent blocks on worker threads");
    c_sol->add_option("--observed", sol_observed, "extra reconstructed columns, comma separated")
        ->delimiter(',');
    c_sol->add_option("--out", sol_out, "CSV path (stdout if omitted)");

    auto* c_lio = app.add_subcommand("liouville", "append the phase-space volume state");
    std::string lio_model, lio_out;
    c_lio->add_option("model", lio_model, "model file")->required();
    c_lio->add_option("--out", lio_out, "output path (stdout if omitted)");

    auto* c_sur = app.add_subcommand("surrogatize", "train a reservoir surrogate and save it");
    std::string sur_model, sur_out;
    std::vector<std::string> sur_outputs, sur_box;
    std::vector<double> sur_tspan;
    std::size_t sur_samples = 8;
    CtesnOptions sur_opts;
    c_sur->add_option("model", sur_model, "model file")->required();
    c_sur->add_option("--outputs", sur_outputs, "variables the surrogate predicts")
        ->delimiter(',')
        ->required();
    c_sur->add_option("--box", sur_box, "lo:hi per parameter, comma separated")
        ->delimiter(',')
        ->required();
    c_sur->add_option("--samples", sur_samples, "training samples");
    c_sur->add_option("--tspan", sur_tspan, "training interval: t0 tf")->expected(2)->required();
    c_sur->add_option("--reservoir", sur_opts.reservoir, "reservoir size");
    c_sur->add_option("--grid", sur_opts.n_grid, "time grid points");
    c_sur->add_option("--seed", sur_opts.seed, "random seed");
    c_sur->add_option("--out", sur_out, "archive path")->required();

    auto* c_rc = app.add_subcommand("gen-rc", "emit the RC network benchmark model");
    int rc_n = 50;
    std::string rc_out;
    c_rc->add_option("--n", rc_n, "number of circuits")->check(CLI::PositiveNumber);
    c_rc->add_option("--out", rc_out, "output path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int r = app.exit(e);
        return r == 0 ? 0 : 2;
    }

    try {
        if (c_sim->parsed()) return run_simplify(sim_model, sim_out);
        if (c_ir->parsed()) return run_index_reduce(ir_model, ir_out);
        if (c_spy->parsed()) return run_spy(spy_model, spy_stage, spy_format, spy_out);
        if (c_sol->parsed())
            return run_solve(sol_model, sol_method, {sol_tspan[0], sol_tspan[1]}, sol_dt,
                             sol_abstol, sol_reltol, sol_parallel, sol_observed, sol_out);
        if (c_lio->parsed()) return run_liouville(lio_model, lio_out);
        if (c_sur->parsed()) {
            if (!(sur_tspan[1] > sur_tspan[0])) {
                std::cerr << "error: --tspan must satisfy t0 < tf\n";
                return 2;
            }
            return run_surrogatize(sur_model, sur_outputs, sur_box, sur_samples,
                                   {sur_tspan[0], sur_tspan[1]}, sur_opts, sur_out);
        }
        if (c_rc->parsed()) return emit(rc_out, render_model(rc_network(rc_n))), 0;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const StructuralError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const SystemError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const daeflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
