#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fident/dsl.hpp"
#include "fident/elimination.hpp"
#include "fident/identify.hpp"
#include "fident/positivity.hpp"

namespace fident {

// F-identifiability query tuple <G, V, C_V, W> plus treatments and outcomes.
// `observed` overrides the DSL roles and `functional` is merged with them, so
// one fixture graph can serve several scenarios.
struct FQuery {
    CausalGraph graph;
    VarSet observed;
    PositivityConstraintSet constraints;
    VarSet functional;
    VarSet treatments;
    VarSet outcomes;

    static FQuery make(const CausalGraph& g, const VarSet& treatments, const VarSet& outcomes,
                       const VarSet& extra_functional = {}, const PositivityConstraintSet& cs = {},
                       const std::optional<VarSet>& observed_override = std::nullopt) {
        FQuery q;
        q.graph = g;
        q.observed = observed_override ? *observed_override : g.observed_vars();
        q.functional = set_union(g.functional_vars(), extra_functional);
        q.constraints = cs;
        q.treatments = treatments;
        q.outcomes = outcomes;
        q.validate();
        return q;
    }

    void validate() const {
        graph.require_nodes(observed);
        graph.require_nodes(functional);
        graph.require_nodes(treatments);
        graph.require_nodes(outcomes);
        if (treatments.empty()) throw QueryError("query: empty treatment set");
        if (outcomes.empty()) throw QueryError("query: empty outcome set");
        if (!set_intersect(treatments, outcomes).empty())
            throw QueryError("query: treatments and outcomes overlap");
        if (!is_subset(treatments, observed) || !is_subset(outcomes, observed))
            throw QueryError("query: treatments and outcomes must be observed");
        for (const auto& w : functional)
            if (graph.parents(w).empty())
                throw QueryError("query: functional variable '" + w + "' is a root");
        for (const auto& v : constraints.vars())
            if (!observed.count(v))
                throw QueryError("query: constraint mentions non-observed variable " + v);
    }

    // Graph with the query's roles applied.
    CausalGraph working_graph() const {
        CausalGraph g = graph;
        for (const auto& v : g.nodes()) {
            NodeRole r{observed.count(v) > 0, functional.count(v) > 0};
            g.set_role(v, r);
        }
        g.validate();
        return g;
    }
};

enum class VerdictStatus { Identifiable, NotIdentifiable, FIdentifiable, NotFIdentifiable, Inconclusive };

inline std::string to_string(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::Identifiable: return "identifiable";
        case VerdictStatus::NotIdentifiable: return "not identifiable";
        case VerdictStatus::FIdentifiable: return "F-identifiable";
        case VerdictStatus::NotFIdentifiable: return "not F-identifiable";
        case VerdictStatus::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct ReductionStep {
    std::string rule;
    std::vector<std::string> removed;
    std::string input_dsl;
    std::string output_dsl;
};

struct ObservedFunctionalEntry {
    std::string var;
    bool not_treatment_outcome = false;
    bool separable_from_constraints = false;
    bool observed_parents = false;
    bool eliminated = false;
    bool nonfunctional_hidden_parent = false;
};

struct ApplicabilityReport {
    std::vector<ObservedFunctionalEntry> entries;
    bool complete = true;  // every observed functional is eliminable or has a
                           // non-functional hidden parent
};

struct Verdict {
    VerdictStatus status = VerdictStatus::Inconclusive;
    std::optional<FormulaAst> formula;
    std::optional<Hedge> hedge;
    std::optional<FirstAncestorWitness> first_ancestor;
    ApplicabilityReport report;
    PositivityConstraintSet required_positivity;
    std::vector<std::string> assumptions;
    std::vector<std::string> warnings;
    std::vector<ReductionStep> trace;
    VarSet removable;   // observed functionals whose observation is not needed
    VarSet promoted;    // V' when the closure reduction was used
    bool id_invoked = false;
    std::string detail;
};

// --- individual reductions ------------------------------------------------

// Hidden functional variables can always be eliminated (both directions).
inline FQuery reduce_hidden(const FQuery& q, std::vector<ReductionStep>* trace = nullptr) {
    VarSet hidden_w = set_minus(q.functional, q.observed);
    if (hidden_w.empty()) return q;
    CausalGraph g = q.working_graph();
    CausalGraph g2 = felim_dag(g, hidden_w);
    if (trace)
        trace->push_back({"reduce_hidden", std::vector<std::string>(hidden_w.begin(), hidden_w.end()),
                          serialize_graph(g), serialize_graph(g2)});
    FQuery out = q;
    out.graph = g2;
    out.functional = set_intersect(q.functional, q.observed);
    return out;
}

// Observed functional variables that are neither treatments nor outcomes, are
// separable from the constraints, and have observed parents at elimination
// time. Processed one at a time in reverse topological order, re-checking the
// parent condition after each elimination; non-qualifying variables are
// skipped.
inline FQuery reduce_observed(const FQuery& q, std::vector<ReductionStep>* trace = nullptr,
                              ApplicabilityReport* report = nullptr, VarSet* removed_out = nullptr) {
    FQuery cur = q;
    VarSet xy = set_union(q.treatments, q.outcomes);
    bool changed = true;
    VarSet eliminated;
    while (changed) {
        changed = false;
        CausalGraph g = cur.working_graph();
        std::vector<std::string> order;
        for (const auto& v : g.topological_order())
            if (cur.functional.count(v) && cur.observed.count(v)) order.push_back(v);
        std::reverse(order.begin(), order.end());
        for (const auto& z : order) {
            bool not_xy = !xy.count(z);
            bool sep = separable(cur.constraints, VarSet{z});
            bool obs_parents = true;
            for (const auto& p : g.parents(z))
                if (!cur.observed.count(p)) obs_parents = false;
            if (!(not_xy && sep && obs_parents)) continue;
            CausalGraph g2 = felim_dag(g, VarSet{z});
            if (trace)
                trace->push_back({"reduce_observed", {z}, serialize_graph(g), serialize_graph(g2)});
            cur.graph = g2;
            cur.observed.erase(z);
            cur.functional.erase(z);
            eliminated.insert(z);
            changed = true;
            break;  // recompute order and conditions
        }
    }
    if (report) {
        CausalGraph g0 = q.working_graph();
        CausalGraph g_after = reduce_hidden(q).working_graph();  // judged after hidden elimination
        for (const auto& w : set_intersect(q.functional, q.observed)) {
            ObservedFunctionalEntry e;
            e.var = w;
            e.not_treatment_outcome = !xy.count(w);
            e.separable_from_constraints = separable(q.constraints, VarSet{w});
            e.observed_parents = true;
            const CausalGraph& gc = g_after.has_node(w) ? g_after : g0;
            for (const auto& p : gc.parents(w))
                if (!q.observed.count(p)) e.observed_parents = false;
            e.eliminated = eliminated.count(w) > 0;
            for (const auto& p : gc.parents(w))
                if (!q.observed.count(p) && !q.functional.count(p))
                    e.nonfunctional_hidden_parent = true;
            report->entries.push_back(e);
            bool eliminable = e.not_treatment_outcome && e.separable_from_constraints && e.observed_parents;
            if (!eliminable && !e.nonfunctional_hidden_parent) report->complete = false;
        }
    }
    if (removed_out) *removed_out = eliminated;
    return cur;
}

// Terminal reduction: when every remaining functional variable has at least
// one hidden parent, F-identifiability coincides with identifiability.
inline bool reduce_hidden_parent_applies(const FQuery& q) {
    CausalGraph g = q.working_graph();
    for (const auto& w : q.functional) {
        bool has_hidden = false;
        for (const auto& p : g.parents(w))
            if (!q.observed.count(p)) has_hidden = true;
        if (!has_hidden) return false;
    }
    return true;
}

// Closure reduction: pretend functionally-determined variables are observed.
// Least fixpoint V' >= V adding w in W whenever parents(w) are in V'.
inline VarSet promote_closure(const FQuery& q) {
    VarSet vp = q.observed;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& w : q.functional) {
            if (vp.count(w)) continue;
            bool all_in = true;
            for (const auto& p : q.graph.parents(w))
                if (!vp.count(p)) all_in = false;
            if (all_in) {
                vp.insert(w);
                changed = true;
            }
        }
    }
    return vp;
}

// --- decision procedure ----------------------------------------------------

namespace detail {

struct ProjectIdResult {
    IdOutcome outcome;
    bool strict_implied = false;       // constraints imply Pr(V_current) > 0
    bool required_implied = false;     // constraints imply the run's positivity contract
    std::string projected_dsl;
};

inline ProjectIdResult run_project_id(const CausalGraph& working, const VarSet& observed,
                                      const PositivityConstraintSet& cs, const VarSet& x,
                                      const VarSet& y, std::vector<ReductionStep>* trace) {
    ProjectIdResult r;
    SemiMarkovianGraph smg = project(working, observed);
    r.projected_dsl = serialize_graph(smg.graph);
    if (trace)
        trace->push_back({"project", {}, serialize_graph(working), r.projected_dsl});
    r.outcome = id_algorithm(smg, x, y);
    ImplicationChecker checker(cs);
    r.strict_implied = checker.set_positive(observed);
    if (r.outcome.ok())
        r.required_implied = checker.implies_all(r.outcome.identified->required_positivity);
    return r;
}

inline bool constraints_exactly_treatment_positivity(const PositivityConstraintSet& cs,
                                                     const VarSet& treatments) {
    PositivityConstraintSet want;
    for (const auto& x : treatments) want.add({{x}, {}});
    return cs == want;
}

}  // namespace detail

// The full decision procedure: first-ancestor shortcut, consistency report, hidden
// and observed functional elimination, project-ID, and the two terminal
// reductions.
inline Verdict decide(const FQuery& q0) {
    q0.validate();
    Verdict v;
    bool classical = q0.functional.empty();
    auto pos = classical ? VerdictStatus::Identifiable : VerdictStatus::FIdentifiable;
    auto neg = classical ? VerdictStatus::NotIdentifiable : VerdictStatus::NotFIdentifiable;
    CausalGraph g0 = q0.working_graph();

    // necessity shortcut: a first-ancestor treatment without implied
    // positivity kills identifiability outright
    auto [fa, witness] = first_ancestor_check(g0, q0.constraints, q0.treatments, q0.outcomes);
    if (fa == FirstAncestorResult::NotIdentifiable) {
        v.status = neg;
        v.first_ancestor = witness;
        v.detail = "treatment " + witness->first_ancestor +
                   " is a first ancestor of an outcome and Pr(" + witness->first_ancestor +
                   ")>0 is not implied by the constraints";
        return v;
    }

    if (consistency_sufficient(g0, q0.constraints, q0.functional) == ConsistencyResult::Unknown)
        v.warnings.push_back(
            "constraints may be inconsistent with the functional set (sufficient condition not met)");

    // eliminate hidden functionals, then qualifying observed ones
    FQuery q1 = reduce_hidden(q0, &v.trace);
    FQuery q2 = reduce_observed(q1, &v.trace, &v.report, &v.removable);

    auto conclude_project_id = [&](const FQuery& q) -> bool {
        detail::ProjectIdResult r =
            detail::run_project_id(q.working_graph(), q.observed, q.constraints, q.treatments,
                                   q.outcomes, &v.trace);
        v.id_invoked = true;
        if (r.outcome.ok()) {
            if (r.required_implied) {
                v.status = pos;
                v.formula = r.outcome.identified->formula;
                v.required_positivity = r.outcome.identified->required_positivity;
                v.assumptions.push_back("projection validity assumes Pr(" +
                                        [&] {
                                            std::string s;
                                            for (const auto& vv : q.observed) s += (s.empty() ? "" : ",") + vv;
                                            return s;
                                        }() +
                                        ") > 0");
                if (!r.strict_implied)
                    v.assumptions.push_back(
                        "identifiable direction only: constraints are weaker than strict positivity "
                        "on the reduced observed set");
                v.detail = "identifying formula found via project-ID";
                return true;
            }
            v.warnings.push_back(
                "project-ID produced a formula but its positivity contract is not implied by the "
                "given constraints");
            return false;
        }
        if (r.strict_implied) {
            v.status = neg;
            v.hedge = r.outcome.hedge;
            v.detail = "ID algorithm failed with a hedge under strict positivity";
            return true;
        }
        v.warnings.push_back(
            "ID algorithm failed, but the constraints are weaker than strict positivity so the "
            "failure is not conclusive");
        v.hedge = r.outcome.hedge;
        return false;
    };

    if (q2.functional.empty()) {
        if (conclude_project_id(q2)) return v;
    } else if (reduce_hidden_parent_applies(q2)) {
        v.trace.push_back({"reduce_hidden_parent",
                           std::vector<std::string>(q2.functional.begin(), q2.functional.end()),
                           serialize_graph(q2.working_graph()), serialize_graph(q2.working_graph())});
        if (conclude_project_id(q2)) return v;
    }

    // closure reduction on the original tuple
    ImplicationChecker checker(q0.constraints);
    bool treatments_positive = true;
    for (const auto& x : q0.treatments)
        if (!checker.var_positive(x)) treatments_positive = false;
    if (treatments_positive && !q0.functional.empty()) {
        bool iff_mode =
            detail::constraints_exactly_treatment_positivity(q0.constraints, q0.treatments);
        VarSet vp = promote_closure(q0);
        v.promoted = vp;
        FQuery qp = q0;
        qp.observed = vp;
        qp.functional = {};  // classical identifiability wrt <G, C, V'>
        CausalGraph gp = qp.working_graph();
        v.trace.push_back({"promote_closure", std::vector<std::string>(vp.begin(), vp.end()),
                           serialize_graph(g0), serialize_graph(gp)});
        detail::ProjectIdResult r = detail::run_project_id(gp, vp, q0.constraints, q0.treatments,
                                                           q0.outcomes, &v.trace);
        v.id_invoked = true;
        if (!r.outcome.ok()) {
            if (iff_mode) {
                v.status = neg;
                v.hedge = r.outcome.hedge;
                v.detail = "not identifiable with the closure variables treated as observed";
                return v;
            }
            v.warnings.push_back(
                "closure reduction is one-sided under these constraints; ID failure is not "
                "conclusive");
        } else if (r.required_implied) {
            v.status = pos;
            v.formula = r.outcome.identified->formula;
            v.required_positivity = r.outcome.identified->required_positivity;
            v.assumptions.push_back(
                "formula ranges over the promoted variable set; it certifies F-identifiability but "
                "is not an estimand over Pr(V)");
            v.detail = "identifiable with the closure variables treated as observed";
            return v;
        } else if (iff_mode) {
            v.status = neg;
            v.required_positivity = r.outcome.identified->required_positivity;
            v.detail =
                "the positivity contract of every identifying formula over the promoted variables "
                "is not implied by treatment positivity";
            return v;
        } else {
            v.warnings.push_back(
                "closure reduction found a formula whose positivity contract is not implied; "
                "one-sided mode cannot conclude");
        }
    }

    v.status = VerdictStatus::Inconclusive;
    if (v.detail.empty()) v.detail = "no reduction reached a definitive verdict";
    return v;
}

}  // namespace fident
