#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "fident/graph.hpp"

namespace fident {

// Line-oriented graph DSL:
//   # comment
//   node <name> [observed|hidden] [functional]
//   edge <parent> <child>
//   bidir <a> <b>
// Defaults: observed, non-functional. A bidir line desugars into a fresh
// hidden root U__<a>__<b> with children a and b.
inline CausalGraph parse_graph(const std::string& text) {
    CausalGraph g;
    struct PendingEdge {
        std::string a, b;
        int line;
        bool bidir;
    };
    std::vector<PendingEdge> pending;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::vector<std::string> tok;
        std::string t;
        while (ls >> t) {
            if (t[0] == '#') break;
            tok.push_back(t);
        }
        if (tok.empty()) continue;
        auto col_of = [&](const std::string& word) {
            auto pos = line.find(word);
            return pos == std::string::npos ? 1 : static_cast<int>(pos) + 1;
        };
        try {
            if (tok[0] == "node") {
                if (tok.size() < 2) throw ParseError("node requires a name", lineno, 1);
                NodeRole role;
                for (std::size_t i = 2; i < tok.size(); ++i) {
                    if (tok[i] == "observed")
                        role.observed = true;
                    else if (tok[i] == "hidden")
                        role.observed = false;
                    else if (tok[i] == "functional")
                        role.functional = true;
                    else
                        throw ParseError("unknown node flag '" + tok[i] + "'", lineno, col_of(tok[i]));
                }
                if (!CausalGraph::valid_name(tok[1]))
                    throw ParseError("invalid variable name '" + tok[1] + "'", lineno, col_of(tok[1]));
                g.add_node(tok[1], role);
            } else if (tok[0] == "edge") {
                if (tok.size() != 3) throw ParseError("edge requires parent and child", lineno, 1);
                pending.push_back({tok[1], tok[2], lineno, false});
            } else if (tok[0] == "bidir") {
                if (tok.size() != 3) throw ParseError("bidir requires two endpoints", lineno, 1);
                pending.push_back({tok[1], tok[2], lineno, true});
            } else {
                throw ParseError("unknown directive '" + tok[0] + "'", lineno, col_of(tok[0]));
            }
        } catch (const GraphError& e) {
            throw ParseError(e.what(), lineno, 1);
        }
    }
    for (const auto& pe : pending) {
        try {
            if (pe.bidir) {
                std::string a = pe.a, b = pe.b;
                if (b < a) std::swap(a, b);
                std::string aux = "U__" + a + "__" + b;
                g.add_node(aux, NodeRole{false, false});
                g.add_edge(aux, pe.a);
                g.add_edge(aux, pe.b);
            } else {
                g.add_edge(pe.a, pe.b);
            }
        } catch (const GraphError& e) {
            throw ParseError(e.what(), pe.line, 1);
        }
    }
    try {
        g.validate();
    } catch (const GraphError& e) {
        throw ParseError(e.what(), lineno, 1);
    }
    return g;
}

// Canonical form: nodes first, then edges, each lexicographically sorted, one
// per line, LF endings. Auxiliary hidden roots that encode bidirected edges
// are re-sugared into bidir lines.
inline std::string serialize_graph(const CausalGraph& g) {
    auto is_aux = [&](const std::string& name) {
        return !g.role(name).observed && name.rfind("U__", 0) == 0 && g.parents(name).empty() &&
               g.children(name).size() == 2;
    };
    std::ostringstream out;
    for (const auto& name : g.nodes()) {
        if (is_aux(name)) continue;
        const NodeRole& r = g.role(name);
        out << "node " << name << ' ' << (r.observed ? "observed" : "hidden");
        if (r.functional) out << " functional";
        out << '\n';
    }
    std::vector<std::string> edge_lines;
    std::vector<std::string> bidir_lines;
    for (const auto& name : g.nodes()) {
        if (is_aux(name)) {
            auto it = g.children(name).begin();
            std::string a = *it++;
            std::string b = *it;
            if (b < a) std::swap(a, b);
            bidir_lines.push_back("bidir " + a + " " + b);
        }
    }
    for (const auto& [p, c] : g.edges()) {
        if (is_aux(p)) continue;
        edge_lines.push_back("edge " + p + " " + c);
    }
    std::sort(edge_lines.begin(), edge_lines.end());
    std::sort(bidir_lines.begin(), bidir_lines.end());
    for (const auto& l : edge_lines) out << l << '\n';
    for (const auto& l : bidir_lines) out << l << '\n';
    return out.str();
}

}  // namespace fident
