#include <catch2/catch_amalgamated.hpp>

#include "fident/oracle.hpp"
#include "fident/pipeline.hpp"
#include "support.hpp"

using namespace fident;
using fident::test::load_fixture;

namespace {

PositivityConstraintSet constraints_for(const FQuery& q, const std::string& expr) {
    return parse_constraints(expr, q.observed, q.functional, q.treatments);
}

FQuery fig4_query(const VarSet& extra_functional, const std::string& constraint_expr,
                  std::optional<VarSet> observed = std::nullopt) {
    CausalGraph g = load_fixture("fig4a.cg");
    FQuery q = FQuery::make(g, {"X"}, {"Y"}, extra_functional, {}, observed);
    q.constraints = constraints_for(q, constraint_expr);
    q.validate();
    return q;
}

// replays one recorded reduction step and checks the stored output
void replay(const ReductionStep& step) {
    CausalGraph in = parse_graph(step.input_dsl);
    CausalGraph expected = parse_graph(step.output_dsl);
    if (step.rule == "reduce_hidden" || step.rule == "reduce_observed") {
        REQUIRE(felim_dag(in, VarSet(step.removed.begin(), step.removed.end())) == expected);
    } else if (step.rule == "project") {
        REQUIRE(project(in, in.observed_vars()).graph == expected);
    } else if (step.rule == "promote_closure") {
        VarSet vp(step.removed.begin(), step.removed.end());
        CausalGraph g = in;
        for (const auto& v : g.nodes()) g.set_role(v, NodeRole{vp.count(v) > 0, false});
        REQUIRE(g == expected);
    } else if (step.rule == "reduce_hidden_parent") {
        REQUIRE(in == expected);  // marker step, graph unchanged
    } else {
        FAIL("unknown trace rule " + step.rule);
    }
}

int check_formula(const CausalGraph& base, const VarSet& functional, const FormulaAst& f,
                  const VarSet& xs, const VarSet& ys, int seeds, std::uint64_t seed0) {
    CausalGraph g = base;
    for (const auto& w : functional) {
        NodeRole r = g.role(w);
        r.functional = true;
        g.set_role(w, r);
    }
    ValidationReport rep = validate_formula(g, {}, f, xs, ys, seeds, seed0);
    REQUIRE(rep.max_abs_error <= kBehavioralTol);
    return rep.seeds_checked;
}

}  // namespace

TEST_CASE("reduce_hidden eliminates exactly the hidden functional variables") {
    // all functional variables hidden: the residual set is empty
    CausalGraph g = load_fixture("fig2a.cg");
    FQuery q = FQuery::make(g, {"G"}, {"I"});
    REQUIRE(q.functional == VarSet{"C", "D"});
    FQuery r = reduce_hidden(q);
    REQUIRE(r.functional.empty());
    REQUIRE(r.graph == load_fixture("fig2c.cg"));

    // W inside V: identity
    CausalGraph g2 = parse_graph("node A\nnode W functional\nnode Y\nedge A W\nedge W Y\n");
    FQuery q2 = FQuery::make(g2, {"A"}, {"Y"});
    FQuery r2 = reduce_hidden(q2);
    REQUIRE(r2.functional == VarSet{"W"});
    REQUIRE(r2.graph == g2);

    // fig4a with hidden W = {D, E}: projecting afterwards yields the F-projection
    FQuery q3 = fig4_query({}, "strict");
    FQuery r3 = reduce_hidden(q3);
    REQUIRE(project(r3.working_graph(), r3.observed).graph == load_fixture("fig4c.cg"));
}

TEST_CASE("reduce_observed eliminates qualifying observed functionals") {
    // scenario: F observed functional, constraints avoid F
    FQuery q = fig4_query({"F"}, "P(A,B,C,X,Y)>0");
    FQuery r1 = reduce_hidden(q);
    ApplicabilityReport report;
    VarSet removed;
    FQuery r2 = reduce_observed(r1, nullptr, &report, &removed);
    REQUIRE(removed == VarSet{"F"});
    REQUIRE(r2.observed == VarSet{"A", "B", "C", "X", "Y"});
    REQUIRE(project(r2.working_graph(), r2.observed).graph == load_fixture("fig4d.cg"));
    REQUIRE(report.complete);

    // scenario: B observed functional
    FQuery qb = fig4_query({"B"}, "P(A,C,F,X,Y)>0");
    VarSet removed_b;
    FQuery rb = reduce_observed(reduce_hidden(qb), nullptr, nullptr, &removed_b);
    REQUIRE(removed_b == VarSet{"B"});
    REQUIRE(project(rb.working_graph(), rb.observed).graph == load_fixture("fig4e.cg"));

    // unseparable variables are skipped
    FQuery qc = fig4_query({"B"}, "P(A,B,X)>0");
    VarSet removed_c;
    reduce_observed(reduce_hidden(qc), nullptr, nullptr, &removed_c);
    REQUIRE(removed_c.empty());

    // empty candidate set: identity
    FQuery qd = FQuery::make(load_fixture("fig3a.cg"), {"X"}, {"Y"});
    VarSet removed_d;
    FQuery rd = reduce_observed(qd, nullptr, nullptr, &removed_d);
    REQUIRE(removed_d.empty());
    REQUIRE(rd.graph == qd.graph);
}

TEST_CASE("reduce_hidden_parent applicability") {
    // vacuous when no functional variables remain
    FQuery q = FQuery::make(load_fixture("backdoor.cg"), {"X"}, {"Y"});
    REQUIRE(reduce_hidden_parent_applies(q));

    // observed functional with all-observed parents: not applicable
    CausalGraph g = parse_graph("node A\nnode W functional\nnode Y\nedge A W\nedge W Y\n");
    FQuery q2 = FQuery::make(g, {"A"}, {"Y"});
    REQUIRE_FALSE(reduce_hidden_parent_applies(q2));

    // functional with a hidden parent: applicable
    CausalGraph g3 = parse_graph(
        "node A\nnode H hidden\nnode W functional\nnode Y\nedge A W\nedge H W\nedge W Y\n");
    FQuery q3 = FQuery::make(g3, {"A"}, {"Y"});
    REQUIRE(reduce_hidden_parent_applies(q3));
}

TEST_CASE("promote_closure computes the observability fixpoint") {
    FQuery q = fig4_query({"D", "E", "F"}, "P(X)>0", VarSet{"A", "B", "C", "X", "Y"});
    REQUIRE(promote_closure(q) == VarSet{"A", "B", "C", "D", "E", "F", "X", "Y"});

    FQuery q2 = FQuery::make(load_fixture("backdoor.cg"), {"X"}, {"Y"});
    REQUIRE(promote_closure(q2) == q2.observed);  // W empty

    // no functional variable has all parents inside V
    CausalGraph g3 = parse_graph(
        "node A\nnode H hidden\nnode W hidden functional\nnode Y\nedge A W\nedge H W\nedge W Y\n");
    FQuery q3 = FQuery::make(g3, {"A"}, {"Y"});
    REQUIRE(promote_closure(q3) == q3.observed);
}

TEST_CASE("decide on fig3: hedge without functional knowledge, formula with it") {
    CausalGraph g = load_fixture("fig3a.cg");

    FQuery plain = FQuery::make(g, {"X"}, {"Y"});
    plain.constraints = constraints_for(plain, "strict");
    Verdict v1 = decide(plain);
    REQUIRE(v1.status == VerdictStatus::NotIdentifiable);
    REQUIRE(v1.hedge.has_value());
    REQUIRE(validate_hedge(*v1.hedge));

    FQuery func = FQuery::make(g, {"X"}, {"Y"}, {"B"});
    func.constraints = constraints_for(func, "strict");
    Verdict v2 = decide(func);
    REQUIRE(v2.status == VerdictStatus::FIdentifiable);
    REQUIRE(v2.formula.has_value());
    int checked = check_formula(g, {"B"}, *v2.formula, {"X"}, {"Y"}, 20, 11000);
    REQUIRE(checked >= 15);
    for (const auto& step : v2.trace) replay(step);
}

TEST_CASE("decide on the fig4 matrix") {
    // (i) hidden functional D,E under strict positivity
    FQuery qi = fig4_query({}, "strict");
    Verdict vi = decide(qi);
    REQUIRE(vi.status == VerdictStatus::FIdentifiable);
    REQUIRE(vi.formula.has_value());
    int checked = check_formula(load_fixture("fig4a.cg"), {"D", "E"}, *vi.formula, {"X"}, {"Y"}, 15,
                                12000);
    REQUIRE(checked >= 10);
    for (const auto& step : vi.trace) replay(step);

    // (ii) F additionally functional and observed
    FQuery qii = fig4_query({"F"}, "P(A,B,C,X,Y)>0");
    Verdict vii = decide(qii);
    REQUIRE(vii.status == VerdictStatus::NotFIdentifiable);
    REQUIRE(vii.hedge.has_value());
    REQUIRE(validate_hedge(*vii.hedge));
    REQUIRE(vii.removable == VarSet{"F"});

    // (iii) B functional and observed
    FQuery qiii = fig4_query({"B"}, "P(A,C,F,X,Y)>0");
    Verdict viii = decide(qiii);
    REQUIRE(viii.status == VerdictStatus::FIdentifiable);
    REQUIRE(viii.removable == VarSet{"B"});
    REQUIRE_FALSE(formula_mentions(viii.formula->root, "B"));
    CausalGraph base = load_fixture("fig4a.cg");
    {  // B is hidden in the evaluation scenario
        NodeRole r = base.role("B");
        r.observed = false;
        base.set_role("B", r);
    }
    checked = check_formula(base, {"B", "D", "E"}, *viii.formula, {"X"}, {"Y"}, 25, 12100);
    REQUIRE(checked >= 12);
    for (const auto& step : viii.trace) replay(step);

    // (iv) the closure reduction under bare treatment positivity
    FQuery qiv = fig4_query({"D", "E", "F"}, "P(X)>0", VarSet{"A", "B", "C", "X", "Y"});
    Verdict viv = decide(qiv);
    REQUIRE(viv.status == VerdictStatus::NotFIdentifiable);
    REQUIRE(viv.promoted == VarSet{"A", "B", "C", "D", "E", "F", "X", "Y"});
    for (const auto& step : viv.trace) replay(step);
}

TEST_CASE("first-ancestor shortcut fires only without implied treatment positivity") {
    CausalGraph g = load_fixture("backdoor.cg");
    FQuery q = FQuery::make(g, {"X"}, {"Y"});
    Verdict v = decide(q);  // no constraints at all
    REQUIRE(v.status == VerdictStatus::NotIdentifiable);
    REQUIRE(v.first_ancestor.has_value());
    REQUIRE(v.first_ancestor->first_ancestor == "X");
    REQUIRE_FALSE(v.id_invoked);

    q.constraints = constraints_for(q, "strict");
    Verdict v2 = decide(q);
    REQUIRE_FALSE(v2.first_ancestor.has_value());
    REQUIRE(v2.id_invoked);
    REQUIRE(v2.status == VerdictStatus::Identifiable);
    int checked = check_formula(g, {}, *v2.formula, {"X"}, {"Y"}, 20, 13000);
    REQUIRE(checked == 20);
}

TEST_CASE("decide reports one-sided situations as inconclusive") {
    CausalGraph g = load_fixture("fig3a.cg");
    FQuery q = FQuery::make(g, {"X"}, {"Y"}, {"B"});
    q.constraints = parse_constraints("P(X)>0; P(A)>0", q.observed, q.functional, q.treatments);
    Verdict v = decide(q);
    REQUIRE(v.status == VerdictStatus::Inconclusive);
    REQUIRE_FALSE(v.warnings.empty());
}

TEST_CASE("decide warns when the consistency condition fails") {
    CausalGraph g = parse_graph(
        "node A observed\nnode C observed functional\nnode Y observed\nedge A C\nedge C Y\nedge A Y\n");
    FQuery q = FQuery::make(g, {"A"}, {"Y"});
    q.constraints = parse_constraints("P(A,C)>0", q.observed, q.functional, q.treatments);
    Verdict v = decide(q);
    bool warned = false;
    for (const auto& w : v.warnings)
        if (w.find("inconsistent") != std::string::npos) warned = true;
    REQUIRE(warned);
}

TEST_CASE("every definitive verdict carries a certificate") {
    std::vector<Verdict> verdicts;
    verdicts.push_back(decide(FQuery::make(load_fixture("backdoor.cg"), {"X"}, {"Y"})));
    verdicts.push_back(decide(fig4_query({}, "strict")));
    verdicts.push_back(decide(fig4_query({"F"}, "P(A,B,C,X,Y)>0")));
    for (const auto& v : verdicts) {
        if (v.status == VerdictStatus::Inconclusive) continue;
        bool has_certificate = v.formula.has_value() || v.hedge.has_value() ||
                               v.first_ancestor.has_value() || !v.promoted.empty();
        REQUIRE(has_certificate);
    }
}

TEST_CASE("query validation") {
    CausalGraph g = load_fixture("fig3a.cg");
    REQUIRE_THROWS_AS(FQuery::make(g, {"X"}, {"X"}), QueryError);
    REQUIRE_THROWS_AS(FQuery::make(g, {}, {"Y"}), QueryError);
    REQUIRE_THROWS_AS(FQuery::make(g, {"B"}, {"Y"}), QueryError);         // hidden treatment
    REQUIRE_THROWS_AS(FQuery::make(g, {"X"}, {"Y"}, {"A"}), QueryError);  // functional root
}

TEST_CASE("hidden-parent reduction matches the classical verdict") {
    // when every functional variable keeps a hidden parent, the F-verdict and
    // the classical verdict on the same tuple coincide
    auto classical_of = [](VerdictStatus s) {
        if (s == VerdictStatus::FIdentifiable) return VerdictStatus::Identifiable;
        if (s == VerdictStatus::NotFIdentifiable) return VerdictStatus::NotIdentifiable;
        return s;
    };
    std::vector<std::string> graphs = {
        // bow through H plus a functional W fed by H
        "node H hidden\nnode W functional\nnode X\nnode Y\n"
        "edge H W\nedge H X\nedge H Y\nedge W Y\nedge X Y\n",
        // identifiable variant: the confounder's reach is observed
        "node A\nnode H hidden\nnode W functional\nnode X\nnode Y\n"
        "edge H A\nedge H W\nedge A X\nedge W Y\nedge X Y\n"};
    for (const auto& text : graphs) {
        CausalGraph g = parse_graph(text);
        FQuery fq = FQuery::make(g, {"X"}, {"Y"});
        fq.constraints = parse_constraints("strict", fq.observed, fq.functional, fq.treatments);
        REQUIRE(reduce_hidden_parent_applies(fq));
        Verdict fv = decide(fq);

        CausalGraph plain = g;
        for (const auto& v : g.functional_vars()) {
            NodeRole r = plain.role(v);
            r.functional = false;
            plain.set_role(v, r);
        }
        FQuery cq = FQuery::make(plain, {"X"}, {"Y"});
        cq.constraints = parse_constraints("strict", cq.observed, cq.functional, cq.treatments);
        Verdict cv = decide(cq);
        REQUIRE(classical_of(fv.status) == cv.status);
    }
}

TEST_CASE("decide is robust on random queries and its formulas are sound") {
    Rng rng(24601);
    int decided = 0, formulas = 0, replayed = 0;
    for (int i = 0; i < 60; ++i) {
        CausalGraph g = random_dag(rng, 7, 0.45, 0.3, 0.35);
        VarSet observed = g.observed_vars();
        if (observed.size() < 3) continue;
        std::vector<std::string> obs(observed.begin(), observed.end());
        std::string x = obs[rng.uniform_int((int)obs.size())];
        VarSet downstream = set_minus(set_intersect(descendants(g, {x}), observed), VarSet{x});
        if (downstream.empty()) continue;
        std::vector<std::string> cand(downstream.begin(), downstream.end());
        std::string y = cand[rng.uniform_int((int)cand.size())];

        FQuery q;
        try {
            q = FQuery::make(g, {x}, {y});
        } catch (const QueryError&) {
            continue;
        }
        const char* macros[] = {"strict", "strict-nonfunc", "treatments", "none"};
        std::string macro = macros[rng.uniform_int(4)];
        try {
            q.constraints = parse_constraints(macro, q.observed, q.functional, q.treatments);
        } catch (const QueryError&) {
            continue;  // e.g. strict-nonfunc with everything functional
        }
        Verdict v = decide(q);
        ++decided;
        for (const auto& step : v.trace) {
            replay(step);
            ++replayed;
        }
        if (v.status == VerdictStatus::FIdentifiable || v.status == VerdictStatus::Identifiable) {
            if (v.formula && v.promoted.empty()) {
                ++formulas;
                ValidationReport rep = validate_formula(q.working_graph(), q.constraints,
                                                        *v.formula, q.treatments, q.outcomes, 3,
                                                        91000 + 7 * i);
                REQUIRE(rep.max_abs_error <= kBehavioralTol);
            }
        }
        if (v.status != VerdictStatus::Inconclusive) {
            bool has_certificate = v.formula.has_value() || v.hedge.has_value() ||
                                   v.first_ancestor.has_value() || !v.promoted.empty();
            REQUIRE(has_certificate);
        }
    }
    REQUIRE(decided > 25);
    REQUIRE(formulas > 5);
    REQUIRE(replayed > 25);
}
