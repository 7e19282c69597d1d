#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fident/formula.hpp"
#include "fident/graph.hpp"
#include "fident/positivity.hpp"

namespace fident {

// Observed-variable view of a semi-Markovian graph: directed edges among the
// observed variables plus bidirected adjacency derived from the hidden roots.
struct Admg {
    VarSet vars;
    std::map<std::string, VarSet> pa;   // directed parents
    std::map<std::string, VarSet> ch;   // directed children
    std::set<std::pair<std::string, std::string>> bidir;  // canonical a<b

    static Admg from_semi_markovian(const SemiMarkovianGraph& smg) {
        Admg g;
        const CausalGraph& cg = smg.graph;
        for (const auto& v : cg.nodes()) {
            if (!cg.role(v).observed) continue;
            g.vars.insert(v);
            g.pa[v];
            g.ch[v];
        }
        for (const auto& [p, c] : cg.edges()) {
            if (g.vars.count(p) && g.vars.count(c)) {
                g.pa[c].insert(p);
                g.ch[p].insert(c);
            }
        }
        for (const auto& h : cg.hidden_vars()) {
            auto it = cg.children(h).begin();
            std::string a = *it++;
            std::string b = *it;
            if (b < a) std::swap(a, b);
            g.bidir.insert({a, b});
        }
        return g;
    }

    Admg induced(const VarSet& keep) const {
        Admg out;
        out.vars = keep;
        for (const auto& v : keep) {
            out.pa[v] = set_intersect(pa.at(v), keep);
            out.ch[v] = set_intersect(ch.at(v), keep);
        }
        for (const auto& [a, b] : bidir)
            if (keep.count(a) && keep.count(b)) out.bidir.insert({a, b});
        return out;
    }

    // remove directed edges into x and bidirected edges touching x
    Admg cut_incoming(const VarSet& x) const {
        Admg out;
        out.vars = vars;
        for (const auto& v : vars) {
            out.pa[v] = x.count(v) ? VarSet{} : pa.at(v);
            out.ch[v];
        }
        for (const auto& [v, ps] : out.pa)
            for (const auto& p : ps) out.ch[p].insert(v);
        for (const auto& [a, b] : bidir)
            if (!x.count(a) && !x.count(b)) out.bidir.insert({a, b});
        return out;
    }

    VarSet an(const VarSet& seeds) const {
        VarSet out = set_intersect(seeds, vars);
        std::vector<std::string> queue(out.begin(), out.end());
        while (!queue.empty()) {
            std::string v = queue.back();
            queue.pop_back();
            for (const auto& p : pa.at(v))
                if (out.insert(p).second) queue.push_back(p);
        }
        return out;
    }

    // C-components: connected components under bidirected adjacency.
    std::vector<VarSet> c_components() const {
        std::map<std::string, std::string> rep;
        std::function<std::string(const std::string&)> find = [&](const std::string& v) {
            if (rep[v] == v) return v;
            return rep[v] = find(rep[v]);
        };
        for (const auto& v : vars) rep[v] = v;
        for (const auto& [a, b] : bidir) {
            std::string ra = find(a), rb = find(b);
            if (ra != rb) rep[ra] = rb;
        }
        std::map<std::string, VarSet> groups;
        for (const auto& v : vars) groups[find(v)].insert(v);
        std::vector<VarSet> out;
        for (const auto& [r, g] : groups) out.push_back(g);
        std::sort(out.begin(), out.end(),
                  [](const VarSet& a, const VarSet& b) { return *a.begin() < *b.begin(); });
        return out;
    }

    std::vector<std::string> topo() const {
        std::map<std::string, int> indeg;
        for (const auto& v : vars) indeg[v] = static_cast<int>(pa.at(v).size());
        std::set<std::string> ready;
        for (const auto& [v, d] : indeg)
            if (d == 0) ready.insert(v);
        std::vector<std::string> order;
        while (!ready.empty()) {
            std::string v = *ready.begin();
            ready.erase(ready.begin());
            order.push_back(v);
            for (const auto& c : ch.at(v))
                if (--indeg[c] == 0) ready.insert(c);
        }
        if (order.size() != vars.size()) throw GraphError("admg: cycle detected");
        return order;
    }
};

// Witness structure for unidentifiability: a pair of C-forests sharing the
// root set R, one intersecting the treatments, the other not.
struct Hedge {
    VarSet roots;
    VarSet f_nodes, fp_nodes;
    std::set<std::pair<std::string, std::string>> f_edges, fp_edges;    // directed, child-pruned
    std::set<std::pair<std::string, std::string>> f_bidir, fp_bidir;
    VarSet treatments_at_failure;
};

// Structural validation used by tests: F' is a subgraph of F, both are single
// C-components, every node has at most one child, shared root set, and only F
// intersects the treatments.
inline bool validate_hedge(const Hedge& h) {
    if (!is_subset(h.fp_nodes, h.f_nodes)) return false;
    for (const auto& e : h.fp_edges)
        if (!h.f_edges.count(e)) return false;
    if (!is_subset(h.roots, h.fp_nodes)) return false;
    if (!set_intersect(h.fp_nodes, h.treatments_at_failure).empty()) return false;
    if (set_intersect(h.f_nodes, h.treatments_at_failure).empty()) return false;
    auto check_forest = [](const VarSet& nodes, const std::set<std::pair<std::string, std::string>>& edges,
                           const std::set<std::pair<std::string, std::string>>& bidir, const VarSet& roots) {
        std::map<std::string, int> out_deg;
        for (const auto& v : nodes) out_deg[v] = 0;
        for (const auto& [p, c] : edges) {
            if (!nodes.count(p) || !nodes.count(c)) return false;
            ++out_deg[p];
        }
        for (const auto& v : nodes) {
            if (roots.count(v) && out_deg[v] != 0) return false;
            if (!roots.count(v) && out_deg[v] != 1) return false;
        }
        // single C-component under bidirected adjacency
        if (nodes.size() > 1) {
            std::map<std::string, VarSet> adj;
            for (const auto& [a, b] : bidir) {
                adj[a].insert(b);
                adj[b].insert(a);
            }
            VarSet seen{*nodes.begin()};
            std::vector<std::string> queue{*nodes.begin()};
            while (!queue.empty()) {
                std::string v = queue.back();
                queue.pop_back();
                for (const auto& n : adj[v])
                    if (seen.insert(n).second) queue.push_back(n);
            }
            if (seen != nodes) return false;
        }
        return true;
    };
    return check_forest(h.fp_nodes, h.fp_edges, h.fp_bidir, h.roots) &&
           check_forest(h.f_nodes, h.f_edges, h.f_bidir, h.roots);
}

struct Identified {
    FormulaAst formula;
    PositivityConstraintSet required_positivity;
};

struct IdOutcome {
    std::optional<Identified> identified;
    std::optional<Hedge> hedge;
    bool ok() const { return identified.has_value(); }
};

namespace detail {

struct IdFail {
    Hedge hedge;
};

struct IdState {
    std::vector<std::string> pi;  // fixed global topological order
    int next_slot = 0;
    std::set<VarSet> denominators;  // conditioning scopes considered

    VarSet predecessors(const std::string& v, const VarSet& within) const {
        VarSet out;
        for (const auto& u : pi) {
            if (u == v) break;
            if (within.count(u)) out.insert(u);
        }
        return out;
    }
};

struct Dist {
    FormulaPtr expr;
    std::map<std::string, SlotId> scope;

    SlotId slot(const std::string& v) const { return scope.at(v); }
};

inline Dist marginal(const Dist& d, const VarSet& keep, IdState&) {
    std::vector<SlotRef> bound;
    Dist out;
    for (const auto& [v, s] : d.scope) {
        if (keep.count(v))
            out.scope[v] = s;
        else
            bound.push_back({v, s});
    }
    out.expr = Formula::sum(bound, d.expr);
    return out;
}

// conditional P_d(v | given); records the conditioning scope for the
// positivity contract of the run
inline FormulaPtr conditional(const Dist& d, const std::string& v, const VarSet& given, IdState& st) {
    VarSet num_vars = given;
    num_vars.insert(v);
    Dist num = marginal(d, num_vars, st);
    if (given.empty()) return num.expr;
    Dist den = marginal(d, given, st);
    st.denominators.insert(given);
    return Formula::quotient(num.expr, den.expr);
}

inline Dist id_rec(const VarSet& y, const VarSet& x, const Dist& p, const Admg& g, IdState& st) {
    // line 1
    if (x.empty()) return marginal(p, y, st);

    // line 2: restrict to ancestors of y
    VarSet an_y = g.an(y);
    if (an_y != g.vars) return id_rec(y, set_intersect(x, an_y), marginal(p, an_y, st), g.induced(an_y), st);

    // line 3: expand interventions by variables that cannot affect y
    VarSet an_xbar = g.cut_incoming(x).an(y);
    VarSet w = set_minus(set_minus(g.vars, x), an_xbar);
    if (!w.empty()) return id_rec(y, set_union(x, w), p, g, st);

    // line 4: factorize over C-components of G[V \ X]
    std::vector<VarSet> comps = g.induced(set_minus(g.vars, x)).c_components();
    if (comps.size() > 1) {
        std::vector<FormulaPtr> factors;
        for (const auto& s : comps) factors.push_back(id_rec(s, set_minus(g.vars, s), p, g, st).expr);
        std::vector<SlotRef> bound;
        for (const auto& v : set_minus(set_minus(g.vars, y), x)) bound.push_back({v, p.slot(v)});
        Dist out;
        out.expr = Formula::sum(bound, Formula::product(factors));
        for (const auto& v : y) out.scope[v] = p.slot(v);
        return out;
    }

    const VarSet& s = comps.at(0);
    std::vector<VarSet> g_comps = g.c_components();

    // line 5: fail with a hedge witness
    if (g_comps.size() == 1) {
        throw IdFail{[&] {
            // root set: sinks of G[S]; prune both graphs to R-rooted C-forests
            Admg gs = g.induced(s);
            VarSet roots;
            for (const auto& v : s)
                if (gs.ch.at(v).empty()) roots.insert(v);
            Hedge h;
            h.roots = roots;
            h.treatments_at_failure = x;
            h.fp_nodes = s;
            h.f_nodes = g.vars;
            // reverse BFS from the roots assigns each node its single child
            std::map<std::string, std::string> child_of;
            VarSet reached = roots;
            std::vector<std::string> queue(roots.begin(), roots.end());
            while (!queue.empty()) {
                std::string v = queue.front();
                queue.erase(queue.begin());
                for (const auto& u : gs.pa.at(v)) {
                    if (reached.insert(u).second) {
                        child_of[u] = v;
                        queue.push_back(u);
                    }
                }
            }
            for (const auto& [u, c] : child_of) h.fp_edges.insert({u, c});
            h.f_edges = h.fp_edges;
            // attach the remaining nodes of G towards the already-built forest
            std::map<std::string, std::string> attach;
            bool grew = true;
            while (grew) {
                grew = false;
                for (const auto& u : g.vars) {
                    if (reached.count(u)) continue;
                    for (const auto& c : g.ch.at(u)) {
                        if (reached.count(c)) {
                            attach[u] = c;
                            reached.insert(u);
                            grew = true;
                            break;
                        }
                    }
                }
            }
            for (const auto& [u, c] : attach) h.f_edges.insert({u, c});
            h.f_nodes = reached;  // nodes with a directed path into the root set
            for (const auto& [a, b] : g.bidir) {
                if (h.f_nodes.count(a) && h.f_nodes.count(b)) h.f_bidir.insert({a, b});
                if (s.count(a) && s.count(b)) h.fp_bidir.insert({a, b});
            }
            return h;
        }()};
    }

    // line 6: base case, S is a C-component of G itself
    for (const auto& comp : g_comps) {
        if (comp == s) {
            std::vector<FormulaPtr> factors;
            for (const auto& v : s) factors.push_back(conditional(p, v, st.predecessors(v, g.vars), st));
            std::vector<SlotRef> bound;
            for (const auto& v : set_minus(s, y)) bound.push_back({v, p.slot(v)});
            Dist out;
            out.expr = Formula::sum(bound, Formula::product(factors));
            for (const auto& v : y) out.scope[v] = p.slot(v);
            return out;
        }
    }

    // line 7: recurse into the C-component S' that strictly contains S
    for (const auto& sp : g_comps) {
        if (is_subset(s, sp)) {
            std::vector<FormulaPtr> factors;
            Dist np;
            for (const auto& v : sp) {
                factors.push_back(conditional(p, v, st.predecessors(v, g.vars), st));
                np.scope[v] = p.slot(v);
            }
            np.expr = Formula::product(factors);
            return id_rec(y, set_intersect(x, sp), np, g.induced(sp), st);
        }
    }
    throw GraphError("id: no containing C-component found");  // unreachable
}

}  // namespace detail

// The ID algorithm on a semi-Markovian graph. Returns an identifying formula
// plus the positivity constraints the run relies on, or the hedge that
// witnesses failure.
inline IdOutcome id_algorithm(const SemiMarkovianGraph& smg, const VarSet& treatments,
                              const VarSet& outcomes) {
    Admg g = Admg::from_semi_markovian(smg);
    for (const auto& v : set_union(treatments, outcomes)) {
        if (!g.vars.count(v)) throw QueryError("id: variable not observed in graph: " + v);
    }
    if (!set_intersect(treatments, outcomes).empty())
        throw QueryError("id: treatments and outcomes overlap");
    if (treatments.empty()) throw QueryError("id: empty treatment set");
    if (outcomes.empty()) throw QueryError("id: empty outcome set");

    detail::IdState st;
    st.pi = g.topo();
    detail::Dist p0;
    {
        std::vector<SlotRef> entries;
        for (const auto& v : g.vars) {
            SlotId s = st.next_slot++;
            p0.scope[v] = s;
            entries.push_back({v, s});
        }
        p0.expr = Formula::joint(entries);
    }

    IdOutcome out;
    try {
        detail::Dist result = detail::id_rec(outcomes, treatments, p0, g, st);
        Identified id;
        id.formula.root = result.expr;
        std::set<SlotId> fs = free_slots(result.expr);
        for (const auto& [v, s] : p0.scope) {
            if (!fs.count(s)) continue;
            if (treatments.count(v))
                id.formula.free.push_back({v, s, BindKind::Treatment, 0});
            else if (outcomes.count(v))
                id.formula.free.push_back({v, s, BindKind::Outcome, 0});
            else
                id.formula.free.push_back({v, s, BindKind::Fixed, 0});
        }
        std::sort(id.formula.free.begin(), id.formula.free.end(),
                  [](const FreeBinding& a, const FreeBinding& b) { return a.slot < b.slot; });
        // positivity contract: Pr(X | Parents(X) \ X) > 0 plus one marginal
        // constraint per conditioning scope considered during the run
        VarSet xpar;
        for (const auto& xv : treatments) xpar.insert(g.pa.at(xv).begin(), g.pa.at(xv).end());
        xpar = set_minus(xpar, treatments);
        id.required_positivity.add({treatments, xpar});
        for (const auto& d : st.denominators) id.required_positivity.add({d, {}});
        out.identified = std::move(id);
    } catch (const detail::IdFail& fail) {
        out.hedge = fail.hedge;
    }
    return out;
}

}  // namespace fident
