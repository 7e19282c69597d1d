#pragma once

#include <set>
#include <string>
#include <vector>

#include "fident/graph.hpp"

namespace fident {

// Functional elimination on the DAG: every parent of the eliminated variable
// gains an edge to every child, then the variable is removed. Targets are
// processed in reverse topological order for determinism; the result is
// order-independent.
inline CausalGraph felim_dag(const CausalGraph& g, const VarSet& targets) {
    for (const auto& w : targets) {
        g.require_node(w);
        if (!g.role(w).functional)
            throw GraphError("felim: target '" + w + "' is not a functional variable");
    }
    // adjacency copies we can mutate
    std::map<std::string, std::set<std::string>> parents, children;
    for (const auto& v : g.nodes()) {
        parents[v] = g.parents(v);
        children[v] = g.children(v);
    }
    std::vector<std::string> order;
    for (const auto& v : g.topological_order())
        if (targets.count(v)) order.push_back(v);
    std::reverse(order.begin(), order.end());
    for (const auto& w : order) {
        for (const auto& p : parents[w]) {
            children[p].erase(w);
            for (const auto& c : children[w]) {
                if (p == c) continue;
                children[p].insert(c);
                parents[c].insert(p);
            }
        }
        for (const auto& c : children[w]) parents[c].erase(w);
        parents.erase(w);
        children.erase(w);
    }
    CausalGraph out;
    for (const auto& [v, ps] : parents) out.add_node(v, g.role(v));
    for (const auto& [p, cs] : children)
        for (const auto& c : cs) out.add_edge(p, c);
    out.validate();
    return out;
}

// Classical latent projection onto the observed variables. Directed edge
// X -> Y iff X is a parent of Y or a directed path X ~> Y exists whose
// internal nodes are all hidden. Bidirected edge X <-> Y (desugared into a
// fresh hidden root U__X__Y) iff a divergent path X <= ... <= U => ... => Y
// exists whose internal nodes are all hidden.
inline SemiMarkovianGraph project(const CausalGraph& g, const VarSet& observed) {
    g.require_nodes(observed);
    if (observed != g.observed_vars())
        throw GraphError("project: V must be exactly the observed variables of G");

    CausalGraph out;
    for (const auto& v : observed) out.add_node(v, g.role(v));

    // directed edges: from each observed source, reach observed targets
    // through hidden-only interiors
    for (const auto& src : observed) {
        VarSet seen;
        std::vector<std::string> queue;
        for (const auto& c : g.children(src)) queue.push_back(c);
        VarSet targets;
        while (!queue.empty()) {
            std::string v = queue.back();
            queue.pop_back();
            if (observed.count(v)) {
                targets.insert(v);
                continue;  // internal nodes must be hidden
            }
            if (!seen.insert(v).second) continue;
            for (const auto& c : g.children(v)) queue.push_back(c);
        }
        for (const auto& t : targets) out.add_edge(src, t);
    }

    // bidirected edges: observed pairs reachable from a common hidden node
    // through hidden-only interiors. Walking every hidden summit covers all
    // divergent paths; branch sharing is subsumed by a lower summit.
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& h : g.hidden_vars()) {
        VarSet reach;
        VarSet seen{h};
        std::vector<std::string> queue{h};
        while (!queue.empty()) {
            std::string v = queue.back();
            queue.pop_back();
            for (const auto& c : g.children(v)) {
                if (observed.count(c)) {
                    reach.insert(c);
                } else if (seen.insert(c).second) {
                    queue.push_back(c);
                }
            }
        }
        for (auto it = reach.begin(); it != reach.end(); ++it) {
            auto jt = it;
            for (++jt; jt != reach.end(); ++jt) pairs.insert({*it, *jt});
        }
    }
    for (const auto& [a, b] : pairs) {
        std::string aux = "U__" + a + "__" + b;
        out.add_node(aux, NodeRole{false, false});
        out.add_edge(aux, a);
        out.add_edge(aux, b);
    }
    out.validate();
    return SemiMarkovianGraph(std::move(out));
}

// Functional projection: eliminate the hidden functional variables, then
// project onto the observed variables.
inline SemiMarkovianGraph fproject(const CausalGraph& g, const VarSet& observed,
                                   const VarSet& hidden_functional) {
    if (!set_intersect(hidden_functional, observed).empty())
        throw GraphError("fproject: hidden functional set intersects the observed set");
    for (const auto& w : hidden_functional) {
        g.require_node(w);
        if (g.role(w).observed) throw GraphError("fproject: '" + w + "' is not hidden");
    }
    return project(felim_dag(g, hidden_functional), observed);
}

}  // namespace fident
