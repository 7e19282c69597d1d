#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fident/bn.hpp"
#include "fident/inference.hpp"

namespace fident {

// Symbolic identifying formula over joint-probability terms of the observed
// distribution. Variable occurrences reference slots: each Sum binds fresh
// slots, so a variable can appear both as an outer constant and as an inner
// summation index (rendered with primes) without capture.
using SlotId = int;

struct SlotRef {
    std::string var;
    SlotId slot;
    bool operator<(const SlotRef& o) const { return std::tie(var, slot) < std::tie(o.var, o.slot); }
    bool operator==(const SlotRef& o) const { return var == o.var && slot == o.slot; }
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    enum class Kind { One, Joint, Sum, Product, Quotient };
    Kind kind = Kind::One;
    std::vector<SlotRef> entries;   // Joint: sorted by (var, slot)
    std::vector<SlotRef> bound;     // Sum
    std::vector<FormulaPtr> children;

    static FormulaPtr one() { return std::make_shared<Formula>(Formula{Kind::One, {}, {}, {}}); }

    static FormulaPtr joint(std::vector<SlotRef> entries) {
        std::sort(entries.begin(), entries.end());
        return std::make_shared<Formula>(Formula{Kind::Joint, std::move(entries), {}, {}});
    }

    static FormulaPtr sum(std::vector<SlotRef> bound, FormulaPtr child) {
        if (bound.empty()) return child;
        std::sort(bound.begin(), bound.end());
        return std::make_shared<Formula>(Formula{Kind::Sum, {}, std::move(bound), {std::move(child)}});
    }

    static FormulaPtr product(std::vector<FormulaPtr> children) {
        if (children.empty()) return one();
        if (children.size() == 1) return children[0];
        return std::make_shared<Formula>(Formula{Kind::Product, {}, {}, std::move(children)});
    }

    static FormulaPtr quotient(FormulaPtr num, FormulaPtr den) {
        if (den->kind == Kind::One) return num;
        return std::make_shared<Formula>(Formula{Kind::Quotient, {}, {}, {std::move(num), std::move(den)}});
    }
};

enum class BindKind { Treatment, Outcome, Fixed };

struct FreeBinding {
    std::string var;
    SlotId slot;
    BindKind kind;
    int state = 0;  // Fixed only
};

struct FormulaAst {
    FormulaPtr root;
    std::vector<FreeBinding> free;  // sorted by slot

    const FreeBinding* binding_for(SlotId slot) const {
        for (const auto& b : free)
            if (b.slot == slot) return &b;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// structural helpers

inline void collect_slots(const FormulaPtr& f, std::set<SlotId>& used, std::set<SlotId>& bound) {
    switch (f->kind) {
        case Formula::Kind::One:
            break;
        case Formula::Kind::Joint:
            for (const auto& e : f->entries) used.insert(e.slot);
            break;
        case Formula::Kind::Sum:
            for (const auto& b : f->bound) bound.insert(b.slot);
            collect_slots(f->children[0], used, bound);
            break;
        default:
            for (const auto& c : f->children) collect_slots(c, used, bound);
    }
}

namespace detail {
inline void collect_free(const FormulaPtr& f, std::map<SlotId, int>& binders,
                         std::set<SlotId>& out) {
    switch (f->kind) {
        case Formula::Kind::One:
            break;
        case Formula::Kind::Joint:
            for (const auto& e : f->entries) {
                auto it = binders.find(e.slot);
                if (it == binders.end() || it->second == 0) out.insert(e.slot);
            }
            break;
        case Formula::Kind::Sum:
            for (const auto& b : f->bound) ++binders[b.slot];
            collect_free(f->children[0], binders, out);
            for (const auto& b : f->bound) --binders[b.slot];
            break;
        default:
            for (const auto& c : f->children) collect_free(c, binders, out);
    }
}
}  // namespace detail

// Slots used somewhere outside the scope of any binder for them.
inline std::set<SlotId> free_slots(const FormulaPtr& f) {
    std::map<SlotId, int> binders;
    std::set<SlotId> out;
    detail::collect_free(f, binders, out);
    return out;
}

// Canonical structural key; used for equality tests and product ordering.
inline std::string formula_key(const FormulaPtr& f) {
    std::ostringstream out;
    switch (f->kind) {
        case Formula::Kind::One:
            out << "1";
            break;
        case Formula::Kind::Joint: {
            out << "J(";
            for (const auto& e : f->entries) out << e.var << '@' << e.slot << ',';
            out << ')';
            break;
        }
        case Formula::Kind::Sum: {
            out << "S[";
            for (const auto& b : f->bound) out << b.var << '@' << b.slot << ',';
            out << "](" << formula_key(f->children[0]) << ')';
            break;
        }
        case Formula::Kind::Product: {
            std::vector<std::string> keys;
            for (const auto& c : f->children) keys.push_back(formula_key(c));
            std::sort(keys.begin(), keys.end());
            out << "P(";
            for (const auto& k : keys) out << k << ';';
            out << ')';
            break;
        }
        case Formula::Kind::Quotient:
            out << "Q(" << formula_key(f->children[0]) << '/' << formula_key(f->children[1]) << ')';
            break;
    }
    return out.str();
}

// Scan for any occurrence of a graph variable (used by the "removable
// observation never appears in the formula" report check).
inline bool formula_mentions(const FormulaPtr& f, const std::string& var) {
    switch (f->kind) {
        case Formula::Kind::One:
            return false;
        case Formula::Kind::Joint:
            for (const auto& e : f->entries)
                if (e.var == var) return true;
            return false;
        case Formula::Kind::Sum:
            for (const auto& b : f->bound)
                if (b.var == var) return true;
            return formula_mentions(f->children[0], var);
        default:
            for (const auto& c : f->children)
                if (formula_mentions(c, var)) return true;
            return false;
    }
}

// ---------------------------------------------------------------------------
// evaluation

// Evaluates formulas against the exact observed joint of a BN (and nothing
// else). Marginals are cached per scope.
class FormulaEvaluator {
public:
    explicit FormulaEvaluator(const DiscreteBN& bn, std::size_t cell_cap = kDefaultCellCap)
        : bn_(bn) {
        VarSet obs = bn.graph.observed_vars();
        joint_ = joint_marginal(bn, obs, cell_cap);
    }

    double evaluate(const FormulaAst& ast, const std::map<std::string, int>& treatment,
                    const std::map<std::string, int>& outcome) {
        std::map<SlotId, int> env;
        for (const auto& b : ast.free) {
            switch (b.kind) {
                case BindKind::Treatment: {
                    auto it = treatment.find(b.var);
                    if (it == treatment.end())
                        throw QueryError("evaluate: no treatment value for " + b.var);
                    env[b.slot] = it->second;
                    break;
                }
                case BindKind::Outcome: {
                    auto it = outcome.find(b.var);
                    if (it == outcome.end())
                        throw QueryError("evaluate: no outcome value for " + b.var);
                    env[b.slot] = it->second;
                    break;
                }
                case BindKind::Fixed:
                    env[b.slot] = b.state;
                    break;
            }
        }
        return eval(ast.root, env);
    }

    int card(const std::string& var) const { return bn_.card(var); }

private:
    double joint_prob(const std::vector<std::pair<std::string, int>>& assignment) {
        VarSet scope;
        for (const auto& [v, s] : assignment) scope.insert(v);
        auto it = cache_.find(scope);
        if (it == cache_.end()) {
            Factor m = marginalize_to(joint_, std::vector<std::string>(scope.begin(), scope.end()));
            it = cache_.emplace(scope, std::move(m)).first;
        }
        const Factor& m = it->second;
        std::vector<int> state(m.scope.size());
        for (const auto& [v, s] : assignment) state[m.position(v)] = s;
        return m.at(state);
    }

    double eval(const FormulaPtr& f, std::map<SlotId, int>& env) {
        switch (f->kind) {
            case Formula::Kind::One:
                return 1.0;
            case Formula::Kind::Joint: {
                std::vector<std::pair<std::string, int>> assignment;
                for (const auto& e : f->entries) {
                    auto it = env.find(e.slot);
                    if (it == env.end()) throw QueryError("evaluate: unbound slot for " + e.var);
                    // repeated variable: consistent states collapse, others zero out
                    bool dup = false;
                    for (const auto& [v, s] : assignment)
                        if (v == e.var) {
                            if (s != it->second) return 0.0;
                            dup = true;
                        }
                    if (!dup) assignment.push_back({e.var, it->second});
                }
                return joint_prob(assignment);
            }
            case Formula::Kind::Sum: {
                double total = 0.0;
                std::vector<int> cards;
                // a nested sum may rebind a slot an enclosing sum already
                // bound; save and restore the shadowed values
                std::vector<std::pair<bool, int>> saved;
                for (const auto& b : f->bound) {
                    auto it = env.find(b.slot);
                    saved.push_back(it == env.end() ? std::make_pair(false, 0)
                                                    : std::make_pair(true, it->second));
                    cards.push_back(bn_.card(b.var));
                }
                std::vector<int> state(cards.size(), 0);
                bool done = false;
                while (!done) {
                    for (std::size_t i = 0; i < state.size(); ++i) env[f->bound[i].slot] = state[i];
                    total += eval(f->children[0], env);
                    done = true;
                    for (int i = static_cast<int>(state.size()) - 1; i >= 0; --i) {
                        if (++state[i] < cards[i]) {
                            done = false;
                            break;
                        }
                        state[i] = 0;
                    }
                }
                for (std::size_t i = 0; i < f->bound.size(); ++i) {
                    if (saved[i].first)
                        env[f->bound[i].slot] = saved[i].second;
                    else
                        env.erase(f->bound[i].slot);
                }
                return total;
            }
            case Formula::Kind::Product: {
                double p = 1.0;
                for (const auto& c : f->children) p *= eval(c, env);
                return p;
            }
            case Formula::Kind::Quotient: {
                double n = eval(f->children[0], env);
                double d = eval(f->children[1], env);
                if (d == 0.0) {
                    if (n == 0.0) return 0.0;  // 0/0 under a zero numerator
                    std::vector<std::string> scope;
                    for (SlotId s : free_slots(f->children[1])) (void)s;
                    std::set<std::string> vars;
                    collect_vars(f->children[1], vars);
                    scope.assign(vars.begin(), vars.end());
                    std::string msg = "positivity violation: zero denominator P(";
                    for (std::size_t i = 0; i < scope.size(); ++i)
                        msg += (i ? "," : "") + scope[i];
                    msg += ") with nonzero numerator";
                    throw PositivityViolation(msg, scope);
                }
                return n / d;
            }
        }
        return 0.0;
    }

    static void collect_vars(const FormulaPtr& f, std::set<std::string>& vars) {
        if (f->kind == Formula::Kind::Joint)
            for (const auto& e : f->entries) vars.insert(e.var);
        for (const auto& c : f->children) collect_vars(c, vars);
    }

    const DiscreteBN& bn_;
    Factor joint_;
    std::map<VarSet, Factor> cache_;
};

inline double evaluate_formula(const FormulaAst& ast, const DiscreteBN& bn,
                               const std::map<std::string, int>& treatment,
                               const std::map<std::string, int>& outcome,
                               std::size_t cell_cap = kDefaultCellCap) {
    FormulaEvaluator ev(bn, cell_cap);
    return ev.evaluate(ast, treatment, outcome);
}

// ---------------------------------------------------------------------------
// simplification (semantics-preserving on distributions with positive
// denominators): cancels identical terms, merges nested sums, pushes sums
// into the factor that uses them, collapses sums over full conditionals, and
// merges conditional-times-marginal products into joints.

namespace detail {

inline FormulaPtr simplify_node(const FormulaPtr& f);

inline bool slot_used_count(const FormulaPtr& f, SlotId s, int& count) {
    std::set<SlotId> used, bound;
    collect_slots(f, used, bound);
    if (used.count(s) || bound.count(s)) {
        ++count;
        return true;
    }
    return false;
}

inline FormulaPtr simplify_sum(std::vector<SlotRef> bound, FormulaPtr child) {
    child = simplify_node(child);
    // merge nested sums
    if (child->kind == Formula::Kind::Sum) {
        for (const auto& b : child->bound) bound.push_back(b);
        child = child->children[0];
    }
    // sum over an entry of a plain joint: drop both
    if (child->kind == Formula::Kind::Joint) {
        std::vector<SlotRef> keep_bound;
        std::vector<SlotRef> entries = child->entries;
        for (const auto& b : bound) {
            auto it = std::find_if(entries.begin(), entries.end(),
                                   [&](const SlotRef& e) { return e.slot == b.slot; });
            if (it != entries.end())
                entries.erase(it);
            else
                keep_bound.push_back(b);
        }
        if (keep_bound.size() != bound.size()) {
            FormulaPtr j = entries.empty() ? Formula::one() : Formula::joint(entries);
            return simplify_sum(keep_bound, j);
        }
    }
    // sum over a full conditional: sum_s P(E+s)/P(E) = 1
    if (bound.size() >= 1 && child->kind == Formula::Kind::Quotient &&
        child->children[0]->kind == Formula::Kind::Joint &&
        child->children[1]->kind == Formula::Kind::Joint) {
        for (std::size_t i = 0; i < bound.size(); ++i) {
            std::vector<SlotRef> num = child->children[0]->entries;
            auto it = std::find_if(num.begin(), num.end(),
                                   [&](const SlotRef& e) { return e.slot == bound[i].slot; });
            if (it == num.end()) continue;
            num.erase(it);
            if (num == child->children[1]->entries) {
                std::vector<SlotRef> rest = bound;
                rest.erase(rest.begin() + i);
                return simplify_sum(rest, Formula::one());
            }
        }
    }
    // push each bound slot into the unique product factor that uses it
    if (child->kind == Formula::Kind::Product) {
        std::vector<FormulaPtr> children = child->children;
        std::vector<SlotRef> keep_bound;
        bool changed = false;
        for (const auto& b : bound) {
            int count = 0;
            int where = -1;
            for (std::size_t i = 0; i < children.size(); ++i) {
                if (slot_used_count(children[i], b.slot, count)) where = static_cast<int>(i);
            }
            if (count == 1) {
                children[where] = simplify_sum({b}, children[where]);
                changed = true;
            } else {
                keep_bound.push_back(b);
            }
        }
        if (changed) return simplify_sum(keep_bound, simplify_node(Formula::product(children)));
    }
    if (child->kind == Formula::Kind::One && bound.empty()) return child;
    if (bound.empty()) return child;
    return Formula::sum(bound, child);
}

inline FormulaPtr simplify_product(std::vector<FormulaPtr> children) {
    std::vector<FormulaPtr> flat;
    for (auto& c : children) {
        FormulaPtr s = simplify_node(c);
        if (s->kind == Formula::Kind::Product)
            for (const auto& cc : s->children) flat.push_back(cc);
        else if (s->kind != Formula::Kind::One)
            flat.push_back(s);
    }
    // conditional * marginal = joint:  [P(A)/P(B)] * P(B)  ->  P(A)
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < flat.size() && !changed; ++i) {
            if (flat[i]->kind != Formula::Kind::Quotient) continue;
            const FormulaPtr& den = flat[i]->children[1];
            for (std::size_t j = 0; j < flat.size(); ++j) {
                if (i == j) continue;
                if (formula_key(flat[j]) == formula_key(den)) {
                    flat[i] = flat[i]->children[0];
                    flat.erase(flat.begin() + j);
                    changed = true;
                    break;
                }
            }
        }
    }
    std::sort(flat.begin(), flat.end(),
              [](const FormulaPtr& a, const FormulaPtr& b) { return formula_key(a) < formula_key(b); });
    return Formula::product(flat);
}

inline FormulaPtr simplify_node(const FormulaPtr& f) {
    switch (f->kind) {
        case Formula::Kind::One:
        case Formula::Kind::Joint:
            return f;
        case Formula::Kind::Sum:
            return simplify_sum(f->bound, f->children[0]);
        case Formula::Kind::Product:
            return simplify_product(f->children);
        case Formula::Kind::Quotient: {
            FormulaPtr num = simplify_node(f->children[0]);
            FormulaPtr den = simplify_node(f->children[1]);
            if (formula_key(num) == formula_key(den)) return Formula::one();
            if (den->kind == Formula::Kind::One) return num;
            // cancel common factors of product/product quotients
            if (num->kind == Formula::Kind::Product || den->kind == Formula::Kind::Product) {
                std::vector<FormulaPtr> ns =
                    num->kind == Formula::Kind::Product ? num->children : std::vector<FormulaPtr>{num};
                std::vector<FormulaPtr> ds =
                    den->kind == Formula::Kind::Product ? den->children : std::vector<FormulaPtr>{den};
                bool cancelled = false;
                for (std::size_t i = 0; i < ns.size(); ++i) {
                    for (std::size_t j = 0; j < ds.size(); ++j) {
                        if (formula_key(ns[i]) == formula_key(ds[j])) {
                            ns.erase(ns.begin() + i);
                            ds.erase(ds.begin() + j);
                            cancelled = true;
                            break;
                        }
                    }
                    if (cancelled) break;
                }
                if (cancelled)
                    return simplify_node(
                        Formula::quotient(Formula::product(ns), Formula::product(ds)));
            }
            return Formula::quotient(num, den);
        }
    }
    return f;
}

}  // namespace detail

inline FormulaAst simplify(const FormulaAst& ast) {
    FormulaAst out;
    out.root = detail::simplify_node(ast.root);
    std::set<SlotId> still_free = free_slots(out.root);
    for (const auto& b : ast.free)
        if (still_free.count(b.slot)) out.free.push_back(b);
    return out;
}

// ---------------------------------------------------------------------------
// rendering

enum class RenderStyle { Plain, Latex, JsonAst };

namespace detail {

struct DisplayEnv {
    std::map<SlotId, std::string> names;
    std::set<std::string> taken;
    const FormulaAst* ast;
    bool latex;

    std::string base_name(const std::string& var) const {
        std::string out;
        for (char c : var) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    }

    std::string display(const std::string& base) const {
        if (!latex) return base;
        // x1 -> x_1, keep primes
        std::string core = base, primes;
        while (!core.empty() && core.back() == '\'') {
            primes += '\'';
            core.pop_back();
        }
        std::size_t d = core.size();
        while (d > 0 && std::isdigit(static_cast<unsigned char>(core[d - 1]))) --d;
        if (d < core.size()) core = core.substr(0, d) + "_{" + core.substr(d) + "}";
        return core + primes;
    }

    std::string name_for(const SlotRef& ref) {
        auto it = names.find(ref.slot);
        if (it != names.end()) return it->second;
        std::string base = base_name(ref.var);
        const FreeBinding* fb = ast->binding_for(ref.slot);
        if (fb && fb->kind == BindKind::Fixed) {
            std::string n = display(base) + (latex ? "{=}" : "=") + std::to_string(fb->state);
            names[ref.slot] = n;
            return n;
        }
        std::string candidate = base;
        while (taken.count(candidate)) candidate += '\'';
        taken.insert(candidate);
        std::string n = display(candidate);
        names[ref.slot] = n;
        return n;
    }

    // scoped rebinding for sums that shadow an enclosing binding of the slot
    struct Saved {
        SlotId slot;
        bool had;
        std::string name;
        std::string candidate;
    };

    Saved push_binding(const SlotRef& ref) {
        Saved s{ref.slot, false, "", ""};
        auto it = names.find(ref.slot);
        if (it != names.end()) {
            s.had = true;
            s.name = it->second;
            names.erase(it);
        }
        std::string base = base_name(ref.var);
        std::string candidate = base;
        while (taken.count(candidate)) candidate += '\'';
        taken.insert(candidate);
        s.candidate = candidate;
        names[ref.slot] = display(candidate);
        return s;
    }

    void pop_binding(const Saved& s) {
        taken.erase(s.candidate);
        if (s.had)
            names[s.slot] = s.name;
        else
            names.erase(s.slot);
    }
};

inline std::string render_node(const FormulaPtr& f, DisplayEnv& env) {
    bool latex = env.latex;
    auto prob = [&](const std::string& inner) {
        return (latex ? std::string("\\Pr(") : std::string("P(")) + inner + ")";
    };
    switch (f->kind) {
        case Formula::Kind::One:
            return "1";
        case Formula::Kind::Joint: {
            std::string inner;
            for (std::size_t i = 0; i < f->entries.size(); ++i)
                inner += (i ? "," : "") + env.name_for(f->entries[i]);
            return prob(inner);
        }
        case Formula::Kind::Sum: {
            std::vector<DisplayEnv::Saved> saved;
            std::string idx;
            for (const auto& b : f->bound) {
                saved.push_back(env.push_binding(b));
                idx += env.names.at(b.slot);
            }
            std::string body = render_node(f->children[0], env);
            for (auto it = saved.rbegin(); it != saved.rend(); ++it) env.pop_binding(*it);
            return (latex ? "\\sum_{" : "sum_{") + idx + "} " + body;
        }
        case Formula::Kind::Product: {
            std::string out;
            for (std::size_t i = 0; i < f->children.size(); ++i) {
                std::string part = render_node(f->children[i], env);
                if (f->children[i]->kind == Formula::Kind::Sum && f->children.size() > 1)
                    part = latex ? "\\left[" + part + "\\right]" : "[" + part + "]";
                out += (i ? " " : "") + part;
            }
            return out;
        }
        case Formula::Kind::Quotient: {
            const FormulaPtr& num = f->children[0];
            const FormulaPtr& den = f->children[1];
            // conditional pattern: P(S u Z) / P(Z) with slot-exact match
            if (num->kind == Formula::Kind::Joint && den->kind == Formula::Kind::Joint) {
                std::vector<SlotRef> s;
                bool subset = true;
                for (const auto& e : num->entries) {
                    bool in_den = std::find(den->entries.begin(), den->entries.end(), e) !=
                                  den->entries.end();
                    if (!in_den) s.push_back(e);
                }
                for (const auto& e : den->entries)
                    if (std::find(num->entries.begin(), num->entries.end(), e) == num->entries.end())
                        subset = false;
                if (subset && !s.empty()) {
                    std::string inner;
                    for (std::size_t i = 0; i < s.size(); ++i)
                        inner += (i ? "," : "") + env.name_for(s[i]);
                    inner += "|";
                    for (std::size_t i = 0; i < den->entries.size(); ++i)
                        inner += (i ? "," : "") + env.name_for(den->entries[i]);
                    return prob(inner);
                }
            }
            std::string n = render_node(num, env);
            std::string d = render_node(den, env);
            return latex ? "\\frac{" + n + "}{" + d + "}" : "(" + n + " / " + d + ")";
        }
    }
    return "";
}

}  // namespace detail

inline nlohmann::ordered_json formula_to_json(const FormulaPtr& f) {
    nlohmann::ordered_json j;
    switch (f->kind) {
        case Formula::Kind::One:
            j["kind"] = "one";
            break;
        case Formula::Kind::Joint: {
            j["kind"] = "joint";
            auto& vars = j["vars"] = nlohmann::ordered_json::array();
            for (const auto& e : f->entries) vars.push_back({{"var", e.var}, {"slot", e.slot}});
            break;
        }
        case Formula::Kind::Sum: {
            j["kind"] = "sum";
            auto& vars = j["vars"] = nlohmann::ordered_json::array();
            for (const auto& b : f->bound) vars.push_back({{"var", b.var}, {"slot", b.slot}});
            j["children"] = {formula_to_json(f->children[0])};
            break;
        }
        case Formula::Kind::Product: {
            j["kind"] = "product";
            auto& ch = j["children"] = nlohmann::ordered_json::array();
            for (const auto& c : f->children) ch.push_back(formula_to_json(c));
            break;
        }
        case Formula::Kind::Quotient:
            j["kind"] = "quotient";
            j["children"] = {formula_to_json(f->children[0]), formula_to_json(f->children[1])};
            break;
    }
    return j;
}

inline FormulaPtr formula_from_json(const nlohmann::json& j) {
    std::string kind = j.at("kind");
    auto refs = [&](const char* field) {
        std::vector<SlotRef> out;
        if (j.contains(field))
            for (const auto& e : j.at(field)) out.push_back({e.at("var"), e.at("slot")});
        return out;
    };
    if (kind == "one") return Formula::one();
    if (kind == "joint") return Formula::joint(refs("vars"));
    if (kind == "sum") return Formula::sum(refs("vars"), formula_from_json(j.at("children").at(0)));
    if (kind == "product") {
        std::vector<FormulaPtr> ch;
        for (const auto& c : j.at("children")) ch.push_back(formula_from_json(c));
        return Formula::product(ch);
    }
    if (kind == "quotient")
        return Formula::quotient(formula_from_json(j.at("children").at(0)),
                                 formula_from_json(j.at("children").at(1)));
    throw QueryError("bad formula json kind: " + kind);
}

inline nlohmann::ordered_json ast_to_json(const FormulaAst& ast) {
    nlohmann::ordered_json j;
    j["schema"] = "fident-ast/v1";
    auto& free = j["free"] = nlohmann::ordered_json::array();
    for (const auto& b : ast.free) {
        nlohmann::ordered_json e;
        e["var"] = b.var;
        e["slot"] = b.slot;
        e["bind"] = b.kind == BindKind::Treatment ? "treatment"
                    : b.kind == BindKind::Outcome ? "outcome"
                                                  : "fixed";
        if (b.kind == BindKind::Fixed) e["state"] = b.state;
        free.push_back(e);
    }
    j["expr"] = formula_to_json(ast.root);
    return j;
}

inline FormulaAst ast_from_json(const nlohmann::json& j) {
    if (j.at("schema") != "fident-ast/v1") throw QueryError("unsupported formula schema");
    FormulaAst ast;
    ast.root = formula_from_json(j.at("expr"));
    for (const auto& e : j.at("free")) {
        FreeBinding b;
        b.var = e.at("var");
        b.slot = e.at("slot");
        std::string k = e.at("bind");
        b.kind = k == "treatment" ? BindKind::Treatment
                 : k == "outcome" ? BindKind::Outcome
                                  : BindKind::Fixed;
        if (b.kind == BindKind::Fixed) b.state = e.value("state", 0);
        ast.free.push_back(b);
    }
    return ast;
}

inline std::string render(const FormulaAst& ast, RenderStyle style) {
    if (style == RenderStyle::JsonAst) return ast_to_json(ast).dump(2);
    detail::DisplayEnv env;
    env.ast = &ast;
    env.latex = style == RenderStyle::Latex;
    // reserve names for free slots first (outer constants), deterministic by slot
    for (const auto& b : ast.free) env.name_for({b.var, b.slot});
    return detail::render_node(ast.root, env);
}

// ---------------------------------------------------------------------------
// test/construction convenience: tokens name slots by string key.
//   "X!"  treatment constant     "Y?"  outcome variable
//   "A"   bound or reusable key  "A'"  a distinct key for the same variable
//   "A=0" fixed-state literal
struct FormulaBuilder {
    std::map<std::string, SlotRef> slots;
    std::vector<FreeBinding> free;
    int next_slot = 0;

    SlotRef ref(const std::string& token) {
        std::string key = token;
        BindKind kind = BindKind::Outcome;
        bool is_free = false;
        int state = 0;
        if (!key.empty() && key.back() == '!') {
            key.pop_back();
            kind = BindKind::Treatment;
            is_free = true;
        } else if (!key.empty() && key.back() == '?') {
            key.pop_back();
            kind = BindKind::Outcome;
            is_free = true;
        } else if (auto eq = key.find('='); eq != std::string::npos) {
            state = std::stoi(key.substr(eq + 1));
            key = key.substr(0, eq);
            kind = BindKind::Fixed;
            is_free = true;
        }
        std::string var = key;
        while (!var.empty() && var.back() == '\'') var.pop_back();
        std::string full = token;
        auto it = slots.find(full);
        if (it != slots.end()) return it->second;
        SlotRef r{var, next_slot++};
        slots[full] = r;
        if (is_free) free.push_back({var, r.slot, kind, state});
        return r;
    }

    std::vector<SlotRef> refs(const std::vector<std::string>& tokens) {
        std::vector<SlotRef> out;
        for (const auto& t : tokens) out.push_back(ref(t));
        return out;
    }

    FormulaPtr P(const std::vector<std::string>& vars) { return Formula::joint(refs(vars)); }

    // conditional P(s | given) as a quotient of joints
    FormulaPtr P(const std::vector<std::string>& s, const std::vector<std::string>& given) {
        if (given.empty()) return P(s);
        std::vector<std::string> all = s;
        all.insert(all.end(), given.begin(), given.end());
        return Formula::quotient(P(all), P(given));
    }

    FormulaPtr sum(const std::vector<std::string>& bound, FormulaPtr body) {
        return Formula::sum(refs(bound), std::move(body));
    }

    FormulaPtr prod(std::vector<FormulaPtr> children) { return Formula::product(std::move(children)); }

    FormulaAst ast(FormulaPtr root) {
        FormulaAst out;
        out.root = std::move(root);
        std::set<SlotId> fs = free_slots(out.root);
        for (const auto& b : free)
            if (fs.count(b.slot)) out.free.push_back(b);
        return out;
    }
};

}  // namespace fident
