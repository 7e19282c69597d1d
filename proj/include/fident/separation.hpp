#pragma once

#include <deque>
#include <set>
#include <string>

#include "fident/graph.hpp"

namespace fident {

struct SeparationQuery {
    VarSet x, y, z;

    void validate(const CausalGraph& g) const {
        g.require_nodes(x);
        g.require_nodes(y);
        g.require_nodes(z);
        if (x.empty() || y.empty()) throw QueryError("separation query: X and Y must be non-empty");
        if (!set_intersect(x, y).empty() || !set_intersect(x, z).empty() ||
            !set_intersect(y, z).empty())
            throw QueryError("separation query: X, Y, Z must be pairwise disjoint");
    }
};

// Classical d-separation via active-trail reachability (Bayes-ball style),
// O(|V|+|E|) per query. A sequential/divergent valve is closed iff its
// variable is in Z; a convergent valve is closed iff neither its variable nor
// any descendant is in Z.
inline bool d_separated(const CausalGraph& g, const SeparationQuery& q) {
    q.validate(g);
    VarSet anc_z = ancestors(g, q.z);

    // state: (node, direction); direction=true means we arrived from a child
    // (moving up), false means we arrived from a parent (moving down).
    std::set<std::pair<std::string, bool>> seen;
    std::deque<std::pair<std::string, bool>> queue;
    for (const auto& x : q.x) queue.push_back({x, true});
    while (!queue.empty()) {
        auto [v, up] = queue.front();
        queue.pop_front();
        if (!seen.insert({v, up}).second) continue;
        if (q.y.count(v)) return false;
        if (up) {
            if (!q.z.count(v)) {
                for (const auto& p : g.parents(v)) queue.push_back({p, true});
                for (const auto& c : g.children(v)) queue.push_back({c, false});
            }
        } else {
            if (!q.z.count(v)) {
                for (const auto& c : g.children(v)) queue.push_back({c, false});
            }
            if (anc_z.count(v)) {
                // convergent valve open: some descendant (or v itself) in Z
                for (const auto& p : g.parents(v)) queue.push_back({p, true});
            }
        }
    }
    return true;
}

// Least fixpoint Z' >= Z under: add w in W whenever parents(w) are already in
// Z'. Output is a subset of Z union W.
inline VarSet functional_closure(const CausalGraph& g, const VarSet& functional_set, const VarSet& z) {
    g.require_nodes(z);
    for (const auto& w : functional_set) {
        g.require_node(w);
        if (!g.role(w).functional)
            throw QueryError("functional_closure: '" + w + "' is not a functional variable");
    }
    VarSet closed = z;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& w : functional_set) {
            if (closed.count(w)) continue;
            bool all_in = true;
            for (const auto& p : g.parents(w))
                if (!closed.count(p)) {
                    all_in = false;
                    break;
                }
            if (all_in) {
                closed.insert(w);
                changed = true;
            }
        }
    }
    return closed;
}

// D-separation (uppercase): d-separation after closing the conditioning set
// under functional determination. Members of X and Y are never added to the
// conditioning set.
inline bool D_separated(const CausalGraph& g, const VarSet& functional_set, const SeparationQuery& q) {
    q.validate(g);
    VarSet w = set_minus(functional_set, set_union(q.x, q.y));
    VarSet closed = functional_closure(g, w, q.z);
    SeparationQuery q2{q.x, q.y, set_minus(closed, set_union(q.x, q.y))};
    return d_separated(g, q2);
}

}  // namespace fident
