#pragma once

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fident/dsl.hpp"
#include "fident/factor.hpp"
#include "fident/graph.hpp"

namespace fident {

// Conditional probability table. Parents are kept lexicographically sorted;
// values are laid out parent-major (mixed radix over the sorted parents, first
// parent most significant) with the child state fastest:
//   values[parent_index * child_card + child_state]
struct Cpt {
    std::string child;
    std::vector<std::string> parents;
    int child_card = 2;
    std::vector<int> parent_cards;
    std::vector<double> values;

    std::size_t parent_space() const {
        std::size_t n = 1;
        for (int c : parent_cards) n *= static_cast<std::size_t>(c);
        return n;
    }

    double at(int child_state, const std::vector<int>& parent_states) const {
        std::size_t pidx = 0;
        for (std::size_t i = 0; i < parents.size(); ++i)
            pidx = pidx * parent_cards[i] + parent_states[i];
        return values[pidx * child_card + child_state];
    }

    bool is_zero_one() const {
        for (double v : values)
            if (v != 0.0 && v != 1.0) return false;
        return true;
    }

    void validate(bool functional) const {
        if (values.size() != parent_space() * child_card)
            throw GraphError("cpt " + child + ": table size mismatch");
        for (std::size_t p = 0; p < parent_space(); ++p) {
            double s = 0;
            for (int c = 0; c < child_card; ++c) {
                double v = values[p * child_card + c];
                if (v < 0.0 || v > 1.0) throw GraphError("cpt " + child + ": entry out of [0,1]");
                s += v;
            }
            if (std::abs(s - 1.0) > kStructuralTol)
                throw GraphError("cpt " + child + ": column does not sum to 1");
        }
        if (functional && !is_zero_one())
            throw GraphError("cpt " + child + ": functional variable with non-0/1 entries");
    }

    Factor as_factor() const {
        Factor f;
        std::vector<std::string> fam = parents;
        fam.push_back(child);
        std::sort(fam.begin(), fam.end());
        f.scope = fam;
        for (const auto& v : fam) {
            if (v == child)
                f.cards.push_back(child_card);
            else {
                auto it = std::find(parents.begin(), parents.end(), v);
                f.cards.push_back(parent_cards[it - parents.begin()]);
            }
        }
        f.values.assign(Factor::cells_for(f.cards), 0.0);
        // walk all (parent assignment, child state) pairs, map into factor order
        std::vector<int> pstate(parents.size(), 0);
        for (std::size_t p = 0; p < parent_space(); ++p) {
            for (int c = 0; c < child_card; ++c) {
                std::size_t idx = 0;
                for (std::size_t i = 0; i < f.scope.size(); ++i) {
                    int st;
                    if (f.scope[i] == child)
                        st = c;
                    else {
                        auto it = std::find(parents.begin(), parents.end(), f.scope[i]);
                        st = pstate[it - parents.begin()];
                    }
                    idx = idx * f.cards[i] + st;
                }
                f.values[idx] = values[p * child_card + c];
            }
            for (int i = static_cast<int>(parents.size()) - 1; i >= 0; --i) {
                if (++pstate[i] < parent_cards[i]) break;
                pstate[i] = 0;
            }
        }
        return f;
    }

    // Inverse of as_factor: read a factor over {child} + parents back into the
    // canonical CPT layout.
    static Cpt from_factor(const Factor& f, const std::string& child) {
        Cpt cpt;
        cpt.child = child;
        for (std::size_t i = 0; i < f.scope.size(); ++i) {
            if (f.scope[i] == child) {
                cpt.child_card = f.cards[i];
            } else {
                cpt.parents.push_back(f.scope[i]);
                cpt.parent_cards.push_back(f.cards[i]);
            }
        }
        cpt.values.assign(cpt.parent_space() * cpt.child_card, 0.0);
        std::vector<int> pstate(cpt.parents.size(), 0);
        for (std::size_t p = 0; p < cpt.parent_space(); ++p) {
            for (int c = 0; c < cpt.child_card; ++c) {
                std::vector<int> full(f.scope.size());
                for (std::size_t i = 0; i < f.scope.size(); ++i) {
                    if (f.scope[i] == child)
                        full[i] = c;
                    else {
                        auto it = std::find(cpt.parents.begin(), cpt.parents.end(), f.scope[i]);
                        full[i] = pstate[it - cpt.parents.begin()];
                    }
                }
                cpt.values[p * cpt.child_card + c] = f.at(full);
            }
            for (int i = static_cast<int>(cpt.parents.size()) - 1; i >= 0; --i) {
                if (++pstate[i] < cpt.parent_cards[i]) break;
                pstate[i] = 0;
            }
        }
        return cpt;
    }
};

// Fully parameterized discrete Bayesian network: a causal graph plus one CPT
// per variable. The joint is the product of the CPTs.
struct DiscreteBN {
    CausalGraph graph;
    std::map<std::string, Cpt> cpts;

    int card(const std::string& var) const {
        auto it = cpts.find(var);
        if (it == cpts.end()) throw GraphError("bn: no cpt for " + var);
        return it->second.child_card;
    }

    void validate() const {
        graph.validate();
        for (const auto& v : graph.nodes()) {
            auto it = cpts.find(v);
            if (it == cpts.end()) throw GraphError("bn: missing cpt for " + v);
            const Cpt& c = it->second;
            std::vector<std::string> gp(graph.parents(v).begin(), graph.parents(v).end());
            if (c.parents != gp) throw GraphError("bn: cpt parents for " + v + " do not match graph");
            for (std::size_t i = 0; i < c.parents.size(); ++i) {
                if (c.parent_cards[i] != card(c.parents[i]))
                    throw GraphError("bn: cardinality mismatch for parent " + c.parents[i]);
            }
            c.validate(graph.role(v).functional);
        }
    }
};

// BN fixture format: the graph DSL followed by one `cpt` block per variable.
//   cpt <child> | <parents...>
//   <parent-states> : <p_0 ... p_{k-1}>
inline DiscreteBN parse_bn(const std::string& text) {
    // split graph lines from cpt blocks
    std::istringstream in(text);
    std::string line;
    std::ostringstream graph_text;
    std::vector<std::string> cpt_lines;
    bool in_cpts = false;
    while (std::getline(in, line)) {
        std::string stripped = line;
        if (!stripped.empty() && stripped.back() == '\r') stripped.pop_back();
        std::istringstream probe(stripped);
        std::string first;
        probe >> first;
        if (first == "cpt") in_cpts = true;
        if (in_cpts)
            cpt_lines.push_back(stripped);
        else
            graph_text << stripped << '\n';
    }
    DiscreteBN bn;
    bn.graph = parse_graph(graph_text.str());

    Cpt current;
    bool have = false;
    std::map<std::string, std::vector<std::pair<std::vector<int>, std::vector<double>>>> rows;
    std::vector<std::string> order;
    for (const auto& l : cpt_lines) {
        std::istringstream ls(l);
        std::string first;
        if (!(ls >> first)) continue;
        if (first[0] == '#') continue;
        if (first == "cpt") {
            std::string child, bar;
            ls >> child;
            ls >> bar;
            if (bar != "|") throw GraphError("bn: malformed cpt header for " + child);
            current = Cpt{};
            current.child = child;
            std::string p;
            while (ls >> p) current.parents.push_back(p);
            std::sort(current.parents.begin(), current.parents.end());
            have = true;
            order.push_back(child);
            rows[child];
        } else {
            if (!have) throw GraphError("bn: row before cpt header");
            // row: "<s1 s2 ...> : <p0 p1 ...>"
            auto colon = l.find(':');
            if (colon == std::string::npos) throw GraphError("bn: cpt row missing ':'");
            std::istringstream left(l.substr(0, colon)), right(l.substr(colon + 1));
            std::vector<int> states;
            int s;
            while (left >> s) states.push_back(s);
            std::vector<double> probs;
            double pr;
            while (right >> pr) probs.push_back(pr);
            rows[current.child].push_back({states, probs});
        }
    }
    for (const auto& child : order) {
        const auto& rs = rows[child];
        if (rs.empty()) throw GraphError("bn: cpt " + child + " has no rows");
        Cpt cpt;
        cpt.child = child;
        std::vector<std::string> gp(bn.graph.parents(child).begin(), bn.graph.parents(child).end());
        cpt.parents = gp;
        cpt.child_card = static_cast<int>(rs[0].second.size());
        cpt.parent_cards.assign(cpt.parents.size(), 0);
        for (const auto& [states, probs] : rs) {
            if (states.size() != cpt.parents.size())
                throw GraphError("bn: cpt " + child + " row has wrong number of parent states");
            if (static_cast<int>(probs.size()) != cpt.child_card)
                throw GraphError("bn: cpt " + child + " rows disagree on child cardinality");
            for (std::size_t i = 0; i < states.size(); ++i)
                cpt.parent_cards[i] = std::max(cpt.parent_cards[i], states[i] + 1);
        }
        if (rs.size() != cpt.parent_space())
            throw GraphError("bn: cpt " + child + " has incomplete rows");
        cpt.values.assign(cpt.parent_space() * cpt.child_card, -1.0);
        for (const auto& [states, probs] : rs) {
            std::size_t pidx = 0;
            for (std::size_t i = 0; i < states.size(); ++i)
                pidx = pidx * cpt.parent_cards[i] + states[i];
            for (int c = 0; c < cpt.child_card; ++c) cpt.values[pidx * cpt.child_card + c] = probs[c];
        }
        for (double v : cpt.values)
            if (v < 0) throw GraphError("bn: cpt " + child + " has duplicate or missing rows");
        bn.cpts[child] = cpt;
    }
    bn.validate();
    return bn;
}

inline std::string serialize_bn(const DiscreteBN& bn) {
    std::ostringstream out;
    out << serialize_graph(bn.graph);
    out << std::setprecision(17);
    for (const auto& [child, cpt] : bn.cpts) {
        out << "cpt " << child << " |";
        for (const auto& p : cpt.parents) out << ' ' << p;
        out << '\n';
        std::vector<int> pstate(cpt.parents.size(), 0);
        for (std::size_t p = 0; p < cpt.parent_space(); ++p) {
            for (std::size_t i = 0; i < pstate.size(); ++i) out << pstate[i] << ' ';
            out << ':';
            for (int c = 0; c < cpt.child_card; ++c) out << ' ' << cpt.values[p * cpt.child_card + c];
            out << '\n';
            for (int i = static_cast<int>(pstate.size()) - 1; i >= 0; --i) {
                if (++pstate[i] < cpt.parent_cards[i]) break;
                pstate[i] = 0;
            }
        }
    }
    return out.str();
}

}  // namespace fident
