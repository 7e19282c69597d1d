#pragma once

#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fident/graph.hpp"
#include "fident/inference.hpp"

namespace fident {

// A positivity constraint Pr(S|Z) > 0: for every instantiation (s,z), if
// Pr(z) > 0 then Pr(s,z) > 0. Z empty means a marginal constraint Pr(S) > 0.
struct PositivityConstraint {
    VarSet s;
    VarSet z;

    bool operator<(const PositivityConstraint& o) const {
        return std::tie(s, z) < std::tie(o.s, o.z);
    }
    bool operator==(const PositivityConstraint& o) const { return s == o.s && z == o.z; }

    std::string text() const {
        std::ostringstream out;
        out << "P(";
        bool first = true;
        for (const auto& v : s) {
            if (!first) out << ",";
            out << v;
            first = false;
        }
        if (!z.empty()) {
            out << "|";
            first = true;
            for (const auto& v : z) {
                if (!first) out << ",";
                out << v;
                first = false;
            }
        }
        out << ")>0";
        return out.str();
    }
};

struct PositivityConstraintSet {
    std::set<PositivityConstraint> constraints;

    VarSet vars() const {
        VarSet out;
        for (const auto& c : constraints) {
            out.insert(c.s.begin(), c.s.end());
            out.insert(c.z.begin(), c.z.end());
        }
        return out;
    }

    void add(PositivityConstraint c) {
        if (c.s.empty()) throw QueryError("positivity constraint with empty S");
        if (!set_intersect(c.s, c.z).empty())
            throw QueryError("positivity constraint with overlapping S and Z");
        constraints.insert(std::move(c));
    }

    void validate_observed(const CausalGraph& g) const {
        for (const auto& v : vars()) {
            g.require_node(v);
            if (!g.role(v).observed)
                throw QueryError("positivity constraint mentions hidden variable " + v);
        }
    }

    std::string text() const {
        std::string out;
        for (const auto& c : constraints) {
            if (!out.empty()) out += "; ";
            out += c.text();
        }
        return out.empty() ? "(none)" : out;
    }

    bool operator==(const PositivityConstraintSet& o) const { return constraints == o.constraints; }
};

// Constraint expression syntax: `P(A,B|C)>0; P(X)>0`, whitespace-insensitive.
// Macros (resolved against the query): `strict` = P(V)>0,
// `strict-nonfunc` = P(V\W)>0, `treatments` = {P(X)>0 per treatment}.
inline PositivityConstraintSet parse_constraints(const std::string& expr, const VarSet& observed,
                                                 const VarSet& functional, const VarSet& treatments) {
    PositivityConstraintSet cs;
    std::string cleaned;
    for (char c : expr)
        if (!std::isspace(static_cast<unsigned char>(c))) cleaned += c;
    std::istringstream in(cleaned);
    std::string item;
    while (std::getline(in, item, ';')) {
        if (item.empty()) continue;
        if (item == "strict") {
            if (observed.empty()) throw QueryError("strict macro with no observed variables");
            cs.add({observed, {}});
            continue;
        }
        if (item == "strict-nonfunc") {
            VarSet s = set_minus(observed, functional);
            if (s.empty()) throw QueryError("strict-nonfunc macro yields empty set");
            cs.add({s, {}});
            continue;
        }
        if (item == "treatments") {
            for (const auto& x : treatments) cs.add({{x}, {}});
            continue;
        }
        if (item == "none") continue;
        if (item.rfind("P(", 0) != 0) throw QueryError("bad constraint syntax: " + item);
        auto close = item.find(')');
        if (close == std::string::npos || item.substr(close + 1) != ">0")
            throw QueryError("bad constraint syntax: " + item);
        std::string inner = item.substr(2, close - 2);
        auto bar = inner.find('|');
        auto split = [](const std::string& t) {
            VarSet out;
            std::istringstream s(t);
            std::string v;
            while (std::getline(s, v, ','))
                if (!v.empty()) out.insert(v);
            return out;
        };
        PositivityConstraint c;
        if (bar == std::string::npos) {
            c.s = split(inner);
        } else {
            c.s = split(inner.substr(0, bar));
            c.z = split(inner.substr(bar + 1));
        }
        cs.add(c);
    }
    return cs;
}

// Exact satisfaction check against a BN: for every constraint and every
// instantiation, Pr(z) > tol implies Pr(s,z) > tol.
inline bool satisfied_by(const PositivityConstraintSet& cs, const DiscreteBN& bn,
                         double tol = kStructuralTol, std::size_t cell_cap = kDefaultCellCap) {
    cs.validate_observed(bn.graph);
    for (const auto& c : cs.constraints) {
        VarSet sz = set_union(c.s, c.z);
        Factor joint = joint_marginal(bn, sz, cell_cap);
        Factor zmarg = marginalize_to(joint, std::vector<std::string>(c.z.begin(), c.z.end()));
        // walk all instantiations of S u Z; compare against the z-marginal
        std::vector<int> state(joint.scope.size(), 0);
        std::vector<int> zpos;
        for (const auto& v : zmarg.scope) zpos.push_back(joint.position(v));
        for (std::size_t idx = 0; idx < joint.values.size(); ++idx) {
            std::vector<int> zstate;
            zstate.reserve(zpos.size());
            for (int p : zpos) zstate.push_back(state[p]);
            double pz = c.z.empty() ? 1.0 : zmarg.at(zstate);
            if (pz > tol && joint.values[idx] <= tol) return false;
            for (int i = static_cast<int>(state.size()) - 1; i >= 0; --i) {
                if (++state[i] < joint.cards[i]) break;
                state[i] = 0;
            }
        }
    }
    return true;
}

inline bool separable(const PositivityConstraintSet& cs, const VarSet& functional_set) {
    return set_intersect(functional_set, cs.vars()).empty();
}

enum class ConsistencyResult { GuaranteedConsistent, Unknown };

// Sufficient consistency condition: for every constraint mentioning a
// functional variable w, the constraint's other variables must not intercept
// all directed paths from non-functional variables to w. Checked by
// reachability: look for a path  u -> f1 -> ... -> fk -> w  where u is
// non-functional, all intermediate nodes are functional, and no node except w
// itself lies in the constraint.
inline ConsistencyResult consistency_sufficient(const CausalGraph& g,
                                                const PositivityConstraintSet& cs,
                                                const VarSet& functional_set) {
    for (const auto& w : functional_set) g.require_node(w);
    for (const auto& c : cs.constraints) {
        VarSet mentioned = set_union(c.s, c.z);
        for (const auto& w : mentioned) {
            if (!functional_set.count(w)) continue;
            VarSet blocked = mentioned;
            blocked.erase(w);
            // reverse search from w through functional-only interior
            bool found = false;
            VarSet seen{w};
            std::vector<std::string> queue{w};
            while (!queue.empty() && !found) {
                std::string v = queue.back();
                queue.pop_back();
                for (const auto& p : g.parents(v)) {
                    if (blocked.count(p)) continue;
                    if (!functional_set.count(p)) {
                        found = true;
                        break;
                    }
                    if (seen.insert(p).second) queue.push_back(p);
                }
            }
            if (!found) return ConsistencyResult::Unknown;
        }
    }
    return ConsistencyResult::GuaranteedConsistent;
}

// Conservative implication checker. Derives "Pr over T is everywhere
// positive" for: (i) T = S of a marginal constraint, (ii) T = S of a
// conditional constraint (Pr(S) = sum_z Pr(S|z) Pr(z) and some Pr(z) > 0),
// and (iii) any subset of a derived set. Never reports a false implication.
struct ImplicationChecker {
    std::vector<VarSet> positive_sets;

    explicit ImplicationChecker(const PositivityConstraintSet& cs) {
        for (const auto& c : cs.constraints) positive_sets.push_back(c.s);
    }

    bool set_positive(const VarSet& t) const {
        for (const auto& p : positive_sets)
            if (is_subset(t, p)) return true;
        return false;
    }

    bool var_positive(const std::string& v) const { return set_positive(VarSet{v}); }

    // Pr(S|Z) > 0 is implied when some derived set covers S u Z entirely.
    bool implies(const PositivityConstraint& c) const { return set_positive(set_union(c.s, c.z)); }

    bool implies_all(const PositivityConstraintSet& cs) const {
        for (const auto& c : cs.constraints)
            if (!implies(c)) return false;
        return true;
    }
};

enum class FirstAncestorResult { NotIdentifiable, Inconclusive };

struct FirstAncestorWitness {
    std::string first_ancestor;
};

// Treatment-positivity necessity test: a causal effect is unidentifiable if
// some treatment is a first ancestor of an outcome and the constraints do not
// imply positivity of that treatment.
inline std::pair<FirstAncestorResult, std::optional<FirstAncestorWitness>>
first_ancestor_check(const CausalGraph& g, const PositivityConstraintSet& cs,
                     const VarSet& treatments, const VarSet& outcomes) {
    ImplicationChecker checker(cs);
    for (const auto& x : first_ancestors(g, treatments, outcomes)) {
        if (!checker.var_positive(x))
            return {FirstAncestorResult::NotIdentifiable, FirstAncestorWitness{x}};
    }
    return {FirstAncestorResult::Inconclusive, std::nullopt};
}

}  // namespace fident
