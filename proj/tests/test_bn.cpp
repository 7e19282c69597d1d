#include <catch2/catch_amalgamated.hpp>

#include "fident/bn.hpp"
#include "fident/inference.hpp"
#include "fident/oracle.hpp"
#include "support.hpp"

using namespace fident;
using fident::test::load_fixture;

namespace {

double brute_lookup(const std::map<std::vector<int>, double>& table, const std::vector<int>& key) {
    auto it = table.find(key);
    return it == table.end() ? 0.0 : it->second;
}

}  // namespace

TEST_CASE("cpt validation") {
    Cpt c;
    c.child = "B";
    c.parents = {"A"};
    c.child_card = 2;
    c.parent_cards = {2};
    c.values = {0.2, 0.8, 0.6, 0.4};
    REQUIRE_NOTHROW(c.validate(false));
    REQUIRE_FALSE(c.is_zero_one());
    REQUIRE_THROWS_AS(c.validate(true), GraphError);  // functional flag demands 0/1

    c.values = {0.2, 0.7, 0.6, 0.4};
    REQUIRE_THROWS_AS(c.validate(false), GraphError);  // column sum
}

TEST_CASE("bn fixture format round-trips; the functional-vs-random table") {
    // two children of the same parent: B is random, C is functional
    std::string text =
        "node A observed\n"
        "node B observed\n"
        "node C observed functional\n"
        "edge A B\n"
        "edge A C\n"
        "cpt A |\n"
        " : 0.5 0.5\n"
        "cpt B | A\n"
        "0 : 0.2 0.8\n"
        "1 : 0.6 0.4\n"
        "cpt C | A\n"
        "0 : 0 1\n"
        "1 : 1 0\n";
    DiscreteBN bn = parse_bn(text);
    REQUIRE(bn.cpts.at("C").is_zero_one());
    REQUIRE_FALSE(bn.cpts.at("B").is_zero_one());
    DiscreteBN bn2 = parse_bn(serialize_bn(bn));
    REQUIRE(bn2.graph == bn.graph);
    for (const auto& [v, c] : bn.cpts) REQUIRE(bn2.cpts.at(v).values == c.values);

    // a non-0/1 table on a functional variable is rejected
    std::string bad = text;
    bad.replace(bad.find("0 : 0 1"), 7, "0 : .3 .7");
    REQUIRE_THROWS_AS(parse_bn(bad), GraphError);
}

TEST_CASE("joint marginal basics") {
    DiscreteBN root = parse_bn("node A observed\ncpt A |\n : 0.3 0.7\n");
    Factor f = joint_marginal(root, {"A"});
    REQUIRE(f.values[0] == Catch::Approx(0.3).margin(1e-15));
    REQUIRE(f.values[1] == Catch::Approx(0.7).margin(1e-15));

    DiscreteBN chain = parse_bn(
        "node A observed\nnode B observed\nedge A B\n"
        "cpt A |\n : 0.5 0.5\ncpt B | A\n0 : 1 0\n1 : 0 1\n");
    Factor fb = joint_marginal(chain, {"B"});
    REQUIRE(fb.values[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(fb.values[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("joint marginal equals brute-force enumeration on random networks") {
    Rng rng(11);
    for (int i = 0; i < 25; ++i) {
        CausalGraph g = random_dag(rng, 6, 0.45, 0.2, 0.3);
        DiscreteBN bn = random_parameterization(g, g.functional_vars(), 500 + i);
        VarSet keep;
        for (const auto& v : g.nodes())
            if (rng.uniform() < 0.6) keep.insert(v);
        if (keep.empty()) keep.insert(g.nodes()[0]);
        Factor f = joint_marginal(bn, keep);
        REQUIRE(f.sum() == Catch::Approx(1.0).margin(kBehavioralTol));
        auto truth = brute_force_joint(bn, f.scope);
        std::vector<int> state(f.scope.size(), 0);
        for (std::size_t idx = 0; idx < f.values.size(); ++idx) {
            REQUIRE(f.values[idx] == Catch::Approx(brute_lookup(truth, state)).margin(kBehavioralTol));
            for (int k = static_cast<int>(state.size()) - 1; k >= 0; --k) {
                if (++state[k] < f.cards[k]) break;
                state[k] = 0;
            }
        }
    }
}

TEST_CASE("state-space overflow is reported") {
    Rng rng(1);
    CausalGraph g = random_dag(rng, 8, 0.9, 0.0, 0.0);
    DiscreteBN bn = random_parameterization(g, {}, 1);
    REQUIRE_THROWS_AS(joint_marginal(bn, g.observed_vars(), 8), StateSpaceOverflow);
}

TEST_CASE("interventional basics") {
    // no path from X to Y: intervening equals the plain marginal
    DiscreteBN bn = parse_bn(
        "node X observed\nnode Y observed\n"
        "cpt X |\n : 0.4 0.6\ncpt Y |\n : 0.25 0.75\n");
    Factor fy = interventional(bn, {{"X", 1}}, {"Y"});
    REQUIRE(fy.values[0] == Catch::Approx(0.25).margin(1e-12));

    REQUIRE_THROWS_AS(interventional(bn, {{"X", 5}}, {"Y"}), QueryError);
}

TEST_CASE("intervening on a root equals conditioning on it") {
    Rng rng(17);
    for (int i = 0; i < 15; ++i) {
        CausalGraph g = random_dag(rng, 5, 0.5, 0.0, 0.0);
        DiscreteBN bn = random_parameterization(g, {}, 900 + i);
        std::string root;
        for (const auto& v : g.nodes())
            if (g.parents(v).empty()) root = v;
        if (root.empty()) continue;
        VarSet rest;
        for (const auto& v : g.nodes())
            if (v != root) rest.insert(v);
        if (rest.empty()) continue;
        std::vector<std::string> all(g.nodes());
        std::size_t rpos = std::find(all.begin(), all.end(), root) - all.begin();
        auto joint = brute_force_joint(bn, all);
        for (int s = 0; s < bn.card(root); ++s) {
            auto truth =
                brute_force_interventional(bn, {{root, s}}, std::vector<std::string>(rest.begin(), rest.end()));
            double pr_root = 0;
            for (const auto& [k, p] : joint)
                if (k[rpos] == s) pr_root += p;
            REQUIRE(pr_root > 0);  // Dirichlet parameterizations are positive
            for (const auto& [k, p] : joint) {
                if (k[rpos] != s) continue;
                std::vector<int> restkey;
                for (std::size_t j = 0; j < all.size(); ++j)
                    if (j != rpos) restkey.push_back(k[j]);
                REQUIRE(p / pr_root ==
                        Catch::Approx(brute_lookup(truth, restkey)).margin(kBehavioralTol));
            }
        }
    }
}

TEST_CASE("fig3a with functional B satisfies the adjustment identity") {
    CausalGraph g = load_fixture("fig3a.cg");
    for (int seed = 0; seed < 20; ++seed) {
        DiscreteBN bn = random_parameterization(g, {"B"}, 3000 + seed);
        Factor obs = joint_marginal(bn, {"A", "X", "Y"});
        Factor fa = marginalize_to(obs, {"A"});
        Factor fax = marginalize_to(obs, {"A", "X"});
        for (int x = 0; x < 2; ++x) {
            Factor truth = interventional(bn, {{"X", x}}, {"Y"});
            for (int y = 0; y < 2; ++y) {
                double total = 0;
                for (int a = 0; a < 2; ++a) {
                    double pax = fax.at({a, x});
                    if (pax == 0) continue;
                    total += fa.values[a] * obs.at({a, x, y}) / pax;
                }
                REQUIRE(total == Catch::Approx(truth.values[y]).margin(kBehavioralTol));
            }
        }
    }
}

TEST_CASE("felim_bn composes a deterministic mid-chain variable") {
    // A -> C -> D with C = not A: after eliminating C, D|A=a equals old D|C=not a
    DiscreteBN bn = parse_bn(
        "node A observed\nnode C observed functional\nnode D observed\n"
        "edge A C\nedge C D\n"
        "cpt A |\n : 0.3 0.7\n"
        "cpt C | A\n0 : 0 1\n1 : 1 0\n"
        "cpt D | C\n0 : 0.9 0.1\n1 : 0.2 0.8\n");
    DiscreteBN out = felim_bn(bn, {"C"});
    REQUIRE(out.graph.has_edge("A", "D"));
    const Cpt& d = out.cpts.at("D");
    REQUIRE(d.at(0, {0}) == Catch::Approx(0.2).margin(1e-15));
    REQUIRE(d.at(0, {1}) == Catch::Approx(0.9).margin(1e-15));
}

TEST_CASE("felim_bn preserves marginals and interventionals on random networks") {
    Rng rng(23);
    for (int i = 0; i < 25; ++i) {
        CausalGraph g = random_dag(rng, 8, 0.4, 0.0, 0.5);
        DiscreteBN bn = random_parameterization(g, g.functional_vars(), 700 + i);
        VarSet w;
        for (const auto& v : g.functional_vars())
            if (rng.uniform() < 0.6) w.insert(v);
        DiscreteBN reduced = felim_bn(bn, w);
        REQUIRE_NOTHROW(reduced.validate());
        auto survivors = reduced.graph.nodes();
        auto truth = brute_force_joint(bn, survivors);
        auto got = brute_force_joint(reduced, survivors);
        for (const auto& [k, p] : truth)
            REQUIRE(p == Catch::Approx(brute_lookup(got, k)).margin(kBehavioralTol));

        if (!survivors.empty()) {
            std::map<std::string, int> x{
                {survivors[rng.uniform_int((int)survivors.size())], rng.uniform_int(2)}};
            auto t1 = brute_force_interventional(bn, x, survivors);
            auto t2 = brute_force_interventional(reduced, x, survivors);
            for (const auto& [k, p] : t1)
                REQUIRE(p == Catch::Approx(brute_lookup(t2, k)).margin(kBehavioralTol));
        }
    }
}

TEST_CASE("felim_bn rejects non-functional targets") {
    CausalGraph g = load_fixture("fig2a.cg");
    DiscreteBN bn = random_parameterization(g, {"C", "D"}, 5);
    REQUIRE_THROWS_AS(felim_bn(bn, {"A"}), GraphError);
}

TEST_CASE("random parameterization is deterministic and well-formed") {
    CausalGraph g = load_fixture("fig2a.cg");
    DiscreteBN a = random_parameterization(g, {"C", "D"}, 42);
    DiscreteBN b = random_parameterization(g, {"C", "D"}, 42);
    REQUIRE(serialize_bn(a) == serialize_bn(b));  // byte-identical
    DiscreteBN c = random_parameterization(g, {"C", "D"}, 43);
    REQUIRE(serialize_bn(a) != serialize_bn(c));

    REQUIRE(a.cpts.at("C").is_zero_one());
    REQUIRE(a.cpts.at("D").is_zero_one());
    for (const auto& [v, cpt] : a.cpts) REQUIRE_NOTHROW(cpt.validate(a.graph.role(v).functional));
}

TEST_CASE("felim_bn order invariance at the table level") {
    Rng rng(31);
    int done = 0;
    for (int i = 0; i < 20 && done < 8; ++i) {
        CausalGraph g = random_dag(rng, 7, 0.45, 0.0, 0.6);
        VarSet w = g.functional_vars();
        if (w.size() < 2) continue;
        ++done;
        DiscreteBN bn = random_parameterization(g, w, 1200 + i);
        DiscreteBN all_at_once = felim_bn(bn, w);
        std::vector<std::string> perm(w.begin(), w.end());
        for (int k = static_cast<int>(perm.size()) - 1; k > 0; --k)
            std::swap(perm[k], perm[rng.uniform_int(k + 1)]);
        DiscreteBN seq = bn;
        for (const auto& t : perm) seq = felim_bn(seq, VarSet{t});
        REQUIRE(seq.graph == all_at_once.graph);
        for (const auto& [v, cpt] : all_at_once.cpts) {
            const Cpt& other = seq.cpts.at(v);
            REQUIRE(cpt.parents == other.parents);
            for (std::size_t j = 0; j < cpt.values.size(); ++j)
                REQUIRE(cpt.values[j] == Catch::Approx(other.values[j]).margin(kStructuralTol));
        }
    }
    REQUIRE(done >= 5);
}

TEST_CASE("bn fixture files load and validate") {
    DiscreteBN fig3 = parse_bn(fident::test::read_file(fident::test::fixture_path("fig3a_example.bn")));
    REQUIRE(fig3.graph == load_fixture("fig3a.cg"));
    Factor obs = joint_marginal(fig3, {"A", "X", "Y"});
    REQUIRE(obs.sum() == Catch::Approx(1.0).margin(kBehavioralTol));
    for (double p : obs.values) REQUIRE(p > 0);

    DiscreteBN table = parse_bn(fident::test::read_file(fident::test::fixture_path("functable.bn")));
    REQUIRE(table.cpts.at("C").is_zero_one());
    REQUIRE_FALSE(table.cpts.at("B").is_zero_one());
    REQUIRE(serialize_bn(parse_bn(serialize_bn(table))) == serialize_bn(table));
}

TEST_CASE("felim_bn handles mixed cardinalities") {
    CausalGraph g = load_fixture("fig2a.cg");
    std::map<std::string, int> cards{{"C", 3}, {"G", 4}, {"A", 2}, {"B", 3}, {"D", 2}, {"H", 2},
                                     {"I", 3}};
    DiscreteBN bn = random_parameterization(g, {"C", "D"}, 4242, cards);
    DiscreteBN reduced = felim_bn(bn, {"C", "D"});
    REQUIRE_NOTHROW(reduced.validate());
    auto survivors = reduced.graph.nodes();
    auto truth = brute_force_joint(bn, survivors);
    auto got = brute_force_joint(reduced, survivors);
    for (const auto& [k, p] : truth)
        REQUIRE(p == Catch::Approx(brute_lookup(got, k)).margin(kBehavioralTol));
}
