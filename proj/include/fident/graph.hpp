#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fident/common.hpp"

namespace fident {

using VarSet = std::set<std::string>;

struct NodeRole {
    bool observed = true;
    bool functional = false;
};

// Causal DAG with per-variable role flags. Immutable by convention: all
// operations build a new graph. Node order is canonical (lexicographic by
// name) so every iteration over nodes or edges is deterministic.
class CausalGraph {
public:
    CausalGraph() = default;

    static bool valid_name(const std::string& name) {
        if (name.empty()) return false;
        for (char c : name) {
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
        }
        return true;
    }

    void add_node(const std::string& name, NodeRole role = {}) {
        if (!valid_name(name)) throw GraphError("invalid variable name: '" + name + "'");
        if (roles_.count(name)) throw GraphError("duplicate node: " + name);
        roles_[name] = role;
        adj_[name];  // ensure entry
        radj_[name];
    }

    void add_edge(const std::string& parent, const std::string& child) {
        require_node(parent);
        require_node(child);
        if (parent == child) throw GraphError("self-edge on " + parent);
        if (adj_[parent].count(child)) throw GraphError("duplicate edge " + parent + " -> " + child);
        adj_[parent].insert(child);
        radj_[child].insert(parent);
    }

    bool has_node(const std::string& name) const { return roles_.count(name) > 0; }

    bool has_edge(const std::string& parent, const std::string& child) const {
        auto it = adj_.find(parent);
        return it != adj_.end() && it->second.count(child) > 0;
    }

    const NodeRole& role(const std::string& name) const {
        require_node(name);
        return roles_.at(name);
    }

    void set_role(const std::string& name, NodeRole role) {
        require_node(name);
        roles_[name] = role;
    }

    std::vector<std::string> nodes() const {
        std::vector<std::string> out;
        out.reserve(roles_.size());
        for (const auto& [name, r] : roles_) out.push_back(name);
        return out;  // std::map keeps lexicographic order
    }

    std::size_t node_count() const { return roles_.size(); }

    const std::set<std::string>& children(const std::string& name) const {
        require_node(name);
        return adj_.at(name);
    }

    const std::set<std::string>& parents(const std::string& name) const {
        require_node(name);
        return radj_.at(name);
    }

    std::vector<std::pair<std::string, std::string>> edges() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [p, cs] : adj_)
            for (const auto& c : cs) out.emplace_back(p, c);
        return out;
    }

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& [p, cs] : adj_) n += cs.size();
        return n;
    }

    VarSet observed_vars() const {
        VarSet out;
        for (const auto& [name, r] : roles_)
            if (r.observed) out.insert(name);
        return out;
    }

    VarSet hidden_vars() const {
        VarSet out;
        for (const auto& [name, r] : roles_)
            if (!r.observed) out.insert(name);
        return out;
    }

    VarSet functional_vars() const {
        VarSet out;
        for (const auto& [name, r] : roles_)
            if (r.functional) out.insert(name);
        return out;
    }

    // Full structural validation: acyclicity plus the "no functional root"
    // rule (root variables cannot be functional).
    void validate() const {
        topological_order();  // throws on cycle
        for (const auto& [name, r] : roles_) {
            if (r.functional && radj_.at(name).empty())
                throw GraphError("functional variable '" + name + "' has no parents");
        }
    }

    // Kahn's algorithm with lexicographic tie-breaking.
    std::vector<std::string> topological_order() const {
        std::map<std::string, int> indeg;
        for (const auto& [name, ps] : radj_) indeg[name] = static_cast<int>(ps.size());
        std::set<std::string> ready;
        for (const auto& [name, d] : indeg)
            if (d == 0) ready.insert(name);
        std::vector<std::string> order;
        while (!ready.empty()) {
            std::string v = *ready.begin();
            ready.erase(ready.begin());
            order.push_back(v);
            for (const auto& c : adj_.at(v)) {
                if (--indeg[c] == 0) ready.insert(c);
            }
        }
        if (order.size() != roles_.size()) throw GraphError("cycle detected");
        return order;
    }

    void require_node(const std::string& name) const {
        if (!roles_.count(name)) throw GraphError("unknown variable: " + name);
    }

    void require_nodes(const VarSet& vars) const {
        for (const auto& v : vars) require_node(v);
    }

    bool operator==(const CausalGraph& other) const {
        return normalized_key() == other.normalized_key();
    }
    bool operator!=(const CausalGraph& other) const { return !(*this == other); }

private:
    // Graph equality normalizes the names of auxiliary hidden roots that
    // encode bidirected edges (U__a__b) by their endpoint pair, so graphs
    // produced by different projection runs compare equal.
    using Key = std::pair<std::vector<std::tuple<std::string, bool, bool>>,
                          std::vector<std::pair<std::string, std::string>>>;

    Key normalized_key() const {
        std::map<std::string, std::string> rename;
        for (const auto& [name, r] : roles_) {
            if (!r.observed && name.rfind("U__", 0) == 0 && radj_.at(name).empty() &&
                adj_.at(name).size() == 2) {
                auto it = adj_.at(name).begin();
                std::string a = *it++;
                std::string b = *it;
                if (b < a) std::swap(a, b);
                rename[name] = "U__" + a + "__" + b;
            }
        }
        auto mapped = [&](const std::string& n) {
            auto it = rename.find(n);
            return it == rename.end() ? n : it->second;
        };
        Key key;
        for (const auto& [name, r] : roles_) key.first.emplace_back(mapped(name), r.observed, r.functional);
        std::sort(key.first.begin(), key.first.end());
        for (const auto& [p, cs] : adj_)
            for (const auto& c : cs) key.second.emplace_back(mapped(p), mapped(c));
        std::sort(key.second.begin(), key.second.end());
        return key;
    }

    std::map<std::string, NodeRole> roles_;
    std::map<std::string, std::set<std::string>> adj_;   // parent -> children
    std::map<std::string, std::set<std::string>> radj_;  // child -> parents
};

// Reflexive-transitive closure of the parent relation over S.
inline VarSet ancestors(const CausalGraph& g, const VarSet& seeds) {
    g.require_nodes(seeds);
    VarSet out = seeds;
    std::vector<std::string> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
        std::string v = queue.back();
        queue.pop_back();
        for (const auto& p : g.parents(v)) {
            if (out.insert(p).second) queue.push_back(p);
        }
    }
    return out;
}

inline VarSet descendants(const CausalGraph& g, const VarSet& seeds) {
    g.require_nodes(seeds);
    VarSet out = seeds;
    std::vector<std::string> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
        std::string v = queue.back();
        queue.pop_back();
        for (const auto& c : g.children(v)) {
            if (out.insert(c).second) queue.push_back(c);
        }
    }
    return out;
}

// Treatments X that reach some outcome in Y through a directed path avoiding
// the other treatments.
inline VarSet first_ancestors(const CausalGraph& g, const VarSet& treatments, const VarSet& outcomes) {
    g.require_nodes(treatments);
    g.require_nodes(outcomes);
    VarSet result;
    for (const auto& x : treatments) {
        // forward reachability from x, never stepping through another treatment
        VarSet seen{x};
        std::vector<std::string> queue{x};
        bool hit = false;
        while (!queue.empty() && !hit) {
            std::string v = queue.back();
            queue.pop_back();
            for (const auto& c : g.children(v)) {
                if (outcomes.count(c)) {
                    hit = true;
                    break;
                }
                if (treatments.count(c)) continue;  // intercepted
                if (seen.insert(c).second) queue.push_back(c);
            }
        }
        if (hit) result.insert(x);
    }
    return result;
}

// Cut all incoming edges of the treated variables. Treated variables lose
// functional status (their CPTs become point-mass constants downstream).
inline CausalGraph mutilate(const CausalGraph& g, const VarSet& treatments) {
    g.require_nodes(treatments);
    CausalGraph out;
    for (const auto& name : g.nodes()) {
        NodeRole r = g.role(name);
        if (treatments.count(name)) r.functional = false;
        out.add_node(name, r);
    }
    for (const auto& [p, c] : g.edges()) {
        if (treatments.count(c)) continue;
        out.add_edge(p, c);
    }
    return out;
}

inline VarSet set_union(const VarSet& a, const VarSet& b) {
    VarSet out = a;
    out.insert(b.begin(), b.end());
    return out;
}

inline VarSet set_minus(const VarSet& a, const VarSet& b) {
    VarSet out;
    for (const auto& v : a)
        if (!b.count(v)) out.insert(v);
    return out;
}

inline VarSet set_intersect(const VarSet& a, const VarSet& b) {
    VarSet out;
    for (const auto& v : a)
        if (b.count(v)) out.insert(v);
    return out;
}

inline bool is_subset(const VarSet& a, const VarSet& b) {
    for (const auto& v : a)
        if (!b.count(v)) return false;
    return true;
}

// A causal graph in which every hidden variable is a root with exactly two
// children. This is the input form required by the ID algorithm.
struct SemiMarkovianGraph {
    CausalGraph graph;

    explicit SemiMarkovianGraph(CausalGraph g) : graph(std::move(g)) {
        for (const auto& h : graph.hidden_vars()) {
            if (!graph.parents(h).empty() || graph.children(h).size() != 2)
                throw GraphError("not semi-Markovian: hidden variable '" + h +
                                 "' must be a root with exactly two children");
        }
    }
};

}  // namespace fident
