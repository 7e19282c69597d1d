#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fident/oracle.hpp"
#include "fident/pipeline.hpp"
#include "fident/separation.hpp"

namespace fident::cli {

inline VarSet split_vars(const std::string& csv) {
    VarSet out;
    std::istringstream in(csv);
    std::string v;
    while (std::getline(in, v, ','))
        if (!v.empty()) out.insert(v);
    return out;
}

inline std::string read_file_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw QueryError("cannot open graph file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline nlohmann::ordered_json constraints_json(const PositivityConstraintSet& cs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : cs.constraints) arr.push_back(c.text());
    return arr;
}

inline nlohmann::ordered_json verdict_json(const Verdict& v) {
    nlohmann::ordered_json j;
    j["schema"] = "fident/v1";
    j["status"] = to_string(v.status);
    j["detail"] = v.detail;
    if (v.formula) {
        FormulaAst pretty = simplify(*v.formula);
        j["formula"] = render(pretty, RenderStyle::Plain);
        j["formula_ast"] = ast_to_json(pretty);
    }
    if (v.hedge) {
        nlohmann::ordered_json h;
        h["roots"] = v.hedge->roots;
        h["f_nodes"] = v.hedge->f_nodes;
        h["f_prime_nodes"] = v.hedge->fp_nodes;
        j["hedge"] = h;
    }
    if (v.first_ancestor) j["first_ancestor_witness"] = v.first_ancestor->first_ancestor;
    j["required_positivity"] = constraints_json(v.required_positivity);
    j["assumptions"] = v.assumptions;
    j["warnings"] = v.warnings;
    j["removable"] = v.removable;
    if (!v.promoted.empty()) j["promoted"] = v.promoted;
    j["id_invoked"] = v.id_invoked;
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const auto& s : v.trace) {
        nlohmann::ordered_json e;
        e["rule"] = s.rule;
        e["vars"] = s.removed;
        steps.push_back(e);
    }
    j["trace"] = steps;
    nlohmann::ordered_json rep = nlohmann::ordered_json::array();
    for (const auto& e : v.report.entries) {
        nlohmann::ordered_json r;
        r["var"] = e.var;
        r["not_treatment_outcome"] = e.not_treatment_outcome;
        r["separable"] = e.separable_from_constraints;
        r["observed_parents"] = e.observed_parents;
        r["eliminated"] = e.eliminated;
        r["nonfunctional_hidden_parent"] = e.nonfunctional_hidden_parent;
        rep.push_back(r);
    }
    j["applicability"] = {{"entries", rep}, {"complete", v.report.complete}};
    return j;
}

struct CommonGraphArgs {
    std::string graph_path;
    std::string functional_csv;
    std::string hide_csv;

    CausalGraph load() const {
        CausalGraph g = parse_graph(read_file_or_throw(graph_path));
        for (const auto& v : split_vars(hide_csv)) {
            NodeRole r = g.role(v);
            r.observed = false;
            g.set_role(v, r);
        }
        for (const auto& v : split_vars(functional_csv)) {
            NodeRole r = g.role(v);
            if (g.parents(v).empty())
                throw QueryError("cannot mark root variable '" + v + "' functional");
            r.functional = true;
            g.set_role(v, r);
        }
        g.validate();
        return g;
    }
};

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"causal effect identification under functional dependencies"};
    app.require_subcommand(1);

    // ----- identify ------------------------------------------------------
    CommonGraphArgs ident_g;
    std::string treat_csv, outcome_csv, constraints_expr = "strict";
    bool show_latex = false, show_ast = false, show_trace = false, show_report = false;
    bool json_out = false;
    auto* ident = app.add_subcommand("identify", "decide (F-)identifiability of Pr_x(Y)");
    ident->add_option("-g,--graph", ident_g.graph_path, "graph DSL file")->required();
    ident->add_option("--treat", treat_csv, "treatment variables (comma separated)")->required();
    ident->add_option("--outcome", outcome_csv, "outcome variables")->required();
    ident->add_option("--functional", ident_g.functional_csv, "extra functional variables");
    ident->add_option("--hide", ident_g.hide_csv, "treat these variables as hidden");
    ident->add_option("--constraints", constraints_expr,
                      "positivity constraints: expression or macro (strict, strict-nonfunc, "
                      "treatments, none)");
    ident->add_flag("--latex", show_latex, "print the formula in LaTeX");
    ident->add_flag("--ast", show_ast, "print the formula as JSON AST");
    ident->add_flag("--trace", show_trace, "print the reduction trace");
    ident->add_flag("--report", show_report, "print the applicability report");
    ident->add_flag("--json", json_out, "machine-readable output");

    // ----- dsep / Dsep ----------------------------------------------------
    CommonGraphArgs sep_g;
    std::string x_csv, y_csv, z_csv;
    auto* dsep = app.add_subcommand("dsep", "classical d-separation query");
    dsep->add_option("-g,--graph", sep_g.graph_path)->required();
    dsep->add_option("--x", x_csv)->required();
    dsep->add_option("--y", y_csv)->required();
    dsep->add_option("--z", z_csv);
    dsep->add_flag("--json", json_out);

    auto* bigd = app.add_subcommand("Dsep", "D-separation query (functional closure)");
    bigd->add_option("-g,--graph", sep_g.graph_path)->required();
    bigd->add_option("--x", x_csv)->required();
    bigd->add_option("--y", y_csv)->required();
    bigd->add_option("--z", z_csv);
    bigd->add_option("--functional", sep_g.functional_csv);
    bigd->add_flag("--json", json_out);

    // ----- graph transforms ------------------------------------------------
    CommonGraphArgs tr_g;
    std::string eliminate_csv;
    auto* felim_cmd = app.add_subcommand("felim", "functionally eliminate variables");
    felim_cmd->add_option("-g,--graph", tr_g.graph_path)->required();
    felim_cmd->add_option("--eliminate", eliminate_csv, "variables to eliminate")->required();
    felim_cmd->add_option("--functional", tr_g.functional_csv);
    felim_cmd->add_option("--hide", tr_g.hide_csv);

    auto* project_cmd = app.add_subcommand("project", "latent projection onto the observed set");
    project_cmd->add_option("-g,--graph", tr_g.graph_path)->required();
    project_cmd->add_option("--hide", tr_g.hide_csv);

    auto* fproject_cmd =
        app.add_subcommand("fproject", "functional projection onto the observed set");
    fproject_cmd->add_option("-g,--graph", tr_g.graph_path)->required();
    fproject_cmd->add_option("--functional", tr_g.functional_csv);
    fproject_cmd->add_option("--hide", tr_g.hide_csv);

    // ----- oracle ----------------------------------------------------------
    auto* oracle_cmd = app.add_subcommand("oracle", "numeric ground-truth checks");
    oracle_cmd->require_subcommand(1);
    CommonGraphArgs or_g;
    int seeds = 100;
    std::uint64_t seed0 = 1;
    FalsifierConfig fcfg;
    auto* validate_cmd = oracle_cmd->add_subcommand("validate",
                                                    "validate the identifying formula numerically");
    validate_cmd->add_option("-g,--graph", or_g.graph_path)->required();
    validate_cmd->add_option("--treat", treat_csv)->required();
    validate_cmd->add_option("--outcome", outcome_csv)->required();
    validate_cmd->add_option("--functional", or_g.functional_csv);
    validate_cmd->add_option("--hide", or_g.hide_csv);
    validate_cmd->add_option("--constraints", constraints_expr);
    validate_cmd->add_option("--seeds", seeds);
    validate_cmd->add_option("--seed", seed0, "base RNG seed");
    validate_cmd->add_flag("--json", json_out);

    auto* falsify_cmd = oracle_cmd->add_subcommand("falsify", "search for an unidentifiability witness");
    falsify_cmd->add_option("-g,--graph", or_g.graph_path)->required();
    falsify_cmd->add_option("--treat", treat_csv)->required();
    falsify_cmd->add_option("--outcome", outcome_csv)->required();
    falsify_cmd->add_option("--functional", or_g.functional_csv);
    falsify_cmd->add_option("--hide", or_g.hide_csv);
    falsify_cmd->add_option("--constraints", constraints_expr);
    falsify_cmd->add_option("--restarts", fcfg.restarts);
    falsify_cmd->add_option("--budget", fcfg.iterations, "iterations per restart");
    falsify_cmd->add_option("--match-tol", fcfg.match_tol);
    falsify_cmd->add_option("--gap", fcfg.effect_gap);
    falsify_cmd->add_option("--seed", fcfg.seed);
    falsify_cmd->add_flag("--json", json_out);

    int n_graphs = 200;
    auto* soundness_cmd =
        oracle_cmd->add_subcommand("soundness", "elimination soundness suite on random networks");
    soundness_cmd->add_option("--graphs", n_graphs);
    soundness_cmd->add_option("--seed", seed0);
    soundness_cmd->add_flag("--json", json_out);

    args.insert(args.begin(), "fident");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (ident->parsed()) {
            CausalGraph g = ident_g.load();
            FQuery q = FQuery::make(g, split_vars(treat_csv), split_vars(outcome_csv));
            q.constraints = parse_constraints(constraints_expr, q.observed, q.functional, q.treatments);
            q.validate();
            Verdict v = decide(q);
            if (json_out) {
                out << verdict_json(v).dump(2) << "\n";
            } else {
                out << "status: " << to_string(v.status) << "\n";
                out << "detail: " << v.detail << "\n";
                if (v.formula) {
                    FormulaAst pretty = simplify(*v.formula);
                    out << "formula: " << render(pretty, RenderStyle::Plain) << "\n";
                    if (show_latex) out << "latex: " << render(pretty, RenderStyle::Latex) << "\n";
                    if (show_ast) out << "ast: " << render(pretty, RenderStyle::JsonAst) << "\n";
                    out << "required positivity: " << v.required_positivity.text() << "\n";
                }
                if (v.hedge) {
                    out << "hedge roots:";
                    for (const auto& r : v.hedge->roots) out << " " << r;
                    out << "\n";
                }
                if (v.first_ancestor)
                    out << "first-ancestor witness: " << v.first_ancestor->first_ancestor << "\n";
                if (!v.removable.empty()) {
                    out << "observation not needed:";
                    for (const auto& r : v.removable) out << " " << r;
                    out << "\n";
                }
                if (!v.promoted.empty()) {
                    out << "promoted observed set:";
                    for (const auto& r : v.promoted) out << " " << r;
                    out << "\n";
                }
                for (const auto& a : v.assumptions) out << "assumption: " << a << "\n";
                for (const auto& w : v.warnings) err << "warning: " << w << "\n";
                if (show_trace)
                    for (const auto& s : v.trace) {
                        out << "trace: " << s.rule;
                        for (const auto& r : s.removed) out << " " << r;
                        out << "\n";
                    }
                if (show_report) {
                    for (const auto& e : v.report.entries)
                        out << "report: " << e.var << (e.eliminated ? " eliminated" : " kept")
                            << (e.not_treatment_outcome ? "" : " [treatment/outcome]")
                            << (e.separable_from_constraints ? "" : " [not separable]")
                            << (e.observed_parents ? "" : " [hidden parent]")
                            << (e.nonfunctional_hidden_parent ? " [has nonfunctional hidden parent]"
                                                              : "")
                            << "\n";
                    out << "report: method " << (v.report.complete ? "complete" : "incomplete")
                        << " for this instance\n";
                }
            }
            return v.status == VerdictStatus::Inconclusive ? 2 : 0;
        }
        if (dsep->parsed() || bigd->parsed()) {
            CausalGraph g = sep_g.load();
            SeparationQuery q{split_vars(x_csv), split_vars(y_csv), split_vars(z_csv)};
            bool separated = dsep->parsed() ? d_separated(g, q)
                                            : D_separated(g, g.functional_vars(), q);
            std::string label = dsep->parsed() ? "d-separated" : "D-separated";
            if (json_out) {
                nlohmann::ordered_json j;
                j["schema"] = "fident/v1";
                j[label] = separated;
                out << j.dump(2) << "\n";
            } else {
                out << label << ": " << (separated ? "true" : "false") << "\n";
            }
            return 0;
        }
        if (felim_cmd->parsed()) {
            CausalGraph g = tr_g.load();
            out << serialize_graph(felim_dag(g, split_vars(eliminate_csv)));
            return 0;
        }
        if (project_cmd->parsed()) {
            CausalGraph g = tr_g.load();
            out << serialize_graph(project(g, g.observed_vars()).graph);
            return 0;
        }
        if (fproject_cmd->parsed()) {
            CausalGraph g = tr_g.load();
            VarSet hidden_functional = set_minus(g.functional_vars(), g.observed_vars());
            out << serialize_graph(fproject(g, g.observed_vars(), hidden_functional).graph);
            return 0;
        }
        if (validate_cmd->parsed()) {
            CausalGraph g = or_g.load();
            FQuery q = FQuery::make(g, split_vars(treat_csv), split_vars(outcome_csv));
            q.constraints = parse_constraints(constraints_expr, q.observed, q.functional, q.treatments);
            Verdict v = decide(q);
            if (!v.formula) {
                err << "no identifying formula to validate (status: " << to_string(v.status)
                    << ")\n";
                return 2;
            }
            ValidationReport rep = validate_formula(q.working_graph(), q.constraints, *v.formula,
                                                    q.treatments, q.outcomes, seeds, seed0);
            if (json_out) {
                nlohmann::ordered_json j;
                j["schema"] = "fident/v1";
                j["seeds_requested"] = rep.seeds_requested;
                j["seeds_checked"] = rep.seeds_checked;
                j["seeds_skipped"] = rep.seeds_skipped;
                j["positivity_errors"] = rep.positivity_errors;
                j["max_abs_error"] = rep.max_abs_error;
                j["inconclusive"] = rep.inconclusive;
                out << j.dump(2) << "\n";
            } else {
                out << "checked " << rep.seeds_checked << "/" << rep.seeds_requested
                    << " seeds (skipped " << rep.seeds_skipped << ")\n";
                out << "max abs error vs mutilation oracle: " << rep.max_abs_error << "\n";
                if (rep.inconclusive) out << "inconclusive: " << rep.note << "\n";
            }
            return rep.inconclusive ? 2 : 0;
        }
        if (falsify_cmd->parsed()) {
            CausalGraph g = or_g.load();
            PositivityConstraintSet cs = parse_constraints(
                constraints_expr, g.observed_vars(), g.functional_vars(), split_vars(treat_csv));
            FalsifyResult r = falsify(g, cs, split_vars(treat_csv), split_vars(outcome_csv), fcfg);
            if (json_out) {
                nlohmann::ordered_json j;
                j["schema"] = "fident/v1";
                j["found"] = r.found();
                j["restarts_used"] = r.restarts_used;
                if (r.found()) {
                    j["joint_mismatch"] = r.counterexample->joint_mismatch;
                    j["effect_gap"] = r.counterexample->gap;
                    j["treatment"] = r.counterexample->treatment;
                    j["outcome"] = r.counterexample->outcome;
                } else {
                    j["note"] = r.note;
                }
                out << j.dump(2) << "\n";
            } else if (r.found()) {
                out << "counterexample found (joint mismatch " << r.counterexample->joint_mismatch
                    << ", effect gap " << r.counterexample->gap << ")\n";
            } else {
                out << r.note << "\n";
            }
            return r.found() ? 0 : 2;
        }
        if (soundness_cmd->parsed()) {
            SoundnessReport rep = elimination_soundness_suite(n_graphs, seed0);
            if (json_out) {
                nlohmann::ordered_json j;
                j["schema"] = "fident/v1";
                j["graphs_checked"] = rep.graphs_checked;
                j["violations"] = rep.violations;
                j["max_marginal_error"] = rep.max_marginal_error;
                j["max_interventional_error"] = rep.max_interventional_error;
                j["max_order_difference"] = rep.max_order_difference;
                out << j.dump(2) << "\n";
            } else {
                out << "checked " << rep.graphs_checked << " random networks, " << rep.violations
                    << " violations\n";
                out << "max marginal error " << rep.max_marginal_error << ", max interventional error "
                    << rep.max_interventional_error << ", max order difference "
                    << rep.max_order_difference << "\n";
            }
            return rep.violations == 0 ? 0 : 1;
        }
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << "\n";
        return 1;
    } catch (const QueryError& e) {
        err << "query error: " << e.what() << "\n";
        return 1;
    } catch (const GraphError& e) {
        err << "graph error: " << e.what() << "\n";
        return 1;
    } catch (const StateSpaceOverflow& e) {
        err << "overflow: " << e.what() << "\n";
        return 1;
    }
    err << "usage error: no subcommand\n";
    return 1;
}

}  // namespace fident::cli
