#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fident/bn.hpp"
#include "fident/elimination.hpp"
#include "fident/factor.hpp"

namespace fident {

// Exact marginal Pr(S) via variable elimination, min-degree ordering with
// lexicographic tie-break. Intermediate factors are capped at `cell_cap`
// cells.
inline Factor joint_marginal(const DiscreteBN& bn, const VarSet& keep,
                             std::size_t cell_cap = kDefaultCellCap) {
    bn.graph.require_nodes(keep);
    std::vector<Factor> factors;
    for (const auto& [name, cpt] : bn.cpts) factors.push_back(cpt.as_factor());

    VarSet to_eliminate;
    for (const auto& v : bn.graph.nodes())
        if (!keep.count(v)) to_eliminate.insert(v);

    while (!to_eliminate.empty()) {
        // min-degree: count distinct co-occurring variables
        std::string best;
        std::size_t best_deg = SIZE_MAX;
        for (const auto& v : to_eliminate) {
            VarSet nb;
            for (const auto& f : factors)
                if (std::find(f.scope.begin(), f.scope.end(), v) != f.scope.end())
                    nb.insert(f.scope.begin(), f.scope.end());
            nb.erase(v);
            if (nb.size() < best_deg) {
                best_deg = nb.size();
                best = v;
            }
        }
        std::vector<Factor> rest;
        Factor prod = Factor::unit();
        for (auto& f : factors) {
            if (std::find(f.scope.begin(), f.scope.end(), best) != f.scope.end())
                prod = multiply(prod, f, cell_cap);
            else
                rest.push_back(std::move(f));
        }
        rest.push_back(sum_out(prod, best));
        factors = std::move(rest);
        to_eliminate.erase(best);
    }
    Factor result = Factor::unit();
    for (const auto& f : factors) result = multiply(result, f, cell_cap);
    return result;
}

// Mutilated network for do(x): incoming edges of treated variables are cut
// and their CPTs replaced by point-mass indicators on the treated state.
inline DiscreteBN mutilate_bn(const DiscreteBN& bn, const std::map<std::string, int>& treatment) {
    VarSet tv;
    for (const auto& [v, s] : treatment) {
        bn.graph.require_node(v);
        if (s < 0 || s >= bn.card(v)) throw QueryError("treatment state out of range for " + v);
        tv.insert(v);
    }
    DiscreteBN out;
    out.graph = mutilate(bn.graph, tv);
    out.cpts = bn.cpts;
    for (const auto& [v, s] : treatment) {
        Cpt c;
        c.child = v;
        c.child_card = bn.card(v);
        c.values.assign(c.child_card, 0.0);
        c.values[s] = 1.0;
        out.cpts[v] = c;
    }
    return out;
}

// Causal effect Pr_x(Y): exact marginal of Y in the mutilated network.
inline Factor interventional(const DiscreteBN& bn, const std::map<std::string, int>& treatment,
                             const VarSet& outcomes, std::size_t cell_cap = kDefaultCellCap) {
    return joint_marginal(mutilate_bn(bn, treatment), outcomes, cell_cap);
}

// BN-level functional elimination: the graph transforms per felim_dag and,
// for each child C of an eliminated X, the new CPT is sum_X f_X * f_C.
inline DiscreteBN felim_bn(const DiscreteBN& bn, const VarSet& targets) {
    for (const auto& w : targets) {
        bn.graph.require_node(w);
        if (!bn.graph.role(w).functional)
            throw GraphError("felim_bn: target '" + w + "' is not functional");
        if (!bn.cpts.at(w).is_zero_one())
            throw GraphError("felim_bn: target '" + w + "' has a non-0/1 table");
    }
    CausalGraph g = bn.graph;
    std::map<std::string, Cpt> cpts = bn.cpts;
    std::vector<std::string> order;
    for (const auto& v : g.topological_order())
        if (targets.count(v)) order.push_back(v);
    std::reverse(order.begin(), order.end());
    for (const auto& w : order) {
        Factor fw = cpts.at(w).as_factor();
        VarSet children = g.children(w);
        for (const auto& c : children) {
            Factor fc = cpts.at(c).as_factor();
            Factor merged = sum_out(multiply(fw, fc), w);
            cpts[c] = Cpt::from_factor(merged, c);
        }
        cpts.erase(w);
        g = felim_dag(g, VarSet{w});
    }
    DiscreteBN out;
    out.graph = g;
    out.cpts = cpts;
    out.validate();
    return out;
}

// Deterministic, portable uniform source (mt19937_64 plus fixed float
// mapping; std:: distributions are implementation-defined).
struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    std::uint64_t next() { return eng(); }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    int uniform_int(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
    double exp1() { return -std::log(1.0 - uniform()); }
};

// Random parameterization: non-functional CPT columns are Dirichlet(1,...,1);
// functional variables get a uniformly random function of their parents.
// Deterministic given the seed.
inline DiscreteBN random_parameterization(const CausalGraph& g, const VarSet& functional_set,
                                          std::uint64_t seed,
                                          const std::map<std::string, int>& cardinalities = {},
                                          int default_card = 2) {
    for (const auto& w : functional_set) {
        g.require_node(w);
        if (g.parents(w).empty())
            throw GraphError("random_parameterization: functional root '" + w + "'");
    }
    DiscreteBN bn;
    bn.graph = g;
    for (const auto& w : functional_set) {
        NodeRole r = g.role(w);
        r.functional = true;
        bn.graph.set_role(w, r);
    }
    auto card_of = [&](const std::string& v) {
        auto it = cardinalities.find(v);
        return it == cardinalities.end() ? default_card : it->second;
    };
    Rng rng(seed);
    for (const auto& v : bn.graph.nodes()) {
        Cpt cpt;
        cpt.child = v;
        cpt.child_card = card_of(v);
        for (const auto& p : bn.graph.parents(v)) {
            cpt.parents.push_back(p);
            cpt.parent_cards.push_back(card_of(p));
        }
        cpt.values.assign(cpt.parent_space() * cpt.child_card, 0.0);
        bool functional = bn.graph.role(v).functional;
        for (std::size_t p = 0; p < cpt.parent_space(); ++p) {
            if (functional) {
                cpt.values[p * cpt.child_card + rng.uniform_int(cpt.child_card)] = 1.0;
            } else {
                double total = 0;
                std::vector<double> draw(cpt.child_card);
                for (int c = 0; c < cpt.child_card; ++c) total += draw[c] = rng.exp1();
                for (int c = 0; c < cpt.child_card; ++c)
                    cpt.values[p * cpt.child_card + c] = draw[c] / total;
            }
        }
        bn.cpts[v] = cpt;
    }
    bn.validate();
    return bn;
}

}  // namespace fident
