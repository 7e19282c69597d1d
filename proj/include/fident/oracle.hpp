#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fident/formula.hpp"
#include "fident/inference.hpp"
#include "fident/positivity.hpp"

namespace fident {

// --------------------------------------------------------------------------
// Brute-force ground truth. Enumerates full joint instantiations and
// multiplies CPT entries directly; deliberately independent of the factor /
// variable-elimination machinery it is used to check.

inline std::map<std::vector<int>, double> brute_force_joint(const DiscreteBN& bn,
                                                            const std::vector<std::string>& keep) {
    std::vector<std::string> all = bn.graph.nodes();
    std::vector<int> cards;
    for (const auto& v : all) cards.push_back(bn.card(v));
    std::map<std::string, int> pos;
    for (std::size_t i = 0; i < all.size(); ++i) pos[all[i]] = static_cast<int>(i);

    std::map<std::vector<int>, double> out;
    std::vector<int> state(all.size(), 0);
    bool done = false;
    while (!done) {
        double p = 1.0;
        for (const auto& v : all) {
            const Cpt& cpt = bn.cpts.at(v);
            std::vector<int> ps;
            for (const auto& par : cpt.parents) ps.push_back(state[pos[par]]);
            p *= cpt.at(state[pos[v]], ps);
        }
        std::vector<int> key;
        for (const auto& v : keep) key.push_back(state[pos[v]]);
        out[key] += p;
        done = true;
        for (int i = static_cast<int>(state.size()) - 1; i >= 0; --i) {
            if (++state[i] < cards[i]) {
                done = false;
                break;
            }
            state[i] = 0;
        }
    }
    return out;
}

inline std::map<std::vector<int>, double> brute_force_interventional(
    const DiscreteBN& bn, const std::map<std::string, int>& treatment,
    const std::vector<std::string>& keep) {
    return brute_force_joint(mutilate_bn(bn, treatment), keep);
}

// Random DAG with roles, used by the property suites. Nodes are named V0..Vn
// over a random order; edge probability and role probabilities are fixed.
inline CausalGraph random_dag(Rng& rng, int max_nodes, double edge_prob = 0.4,
                              double hidden_prob = 0.25, double functional_prob = 0.35) {
    int n = 3 + rng.uniform_int(std::max(1, max_nodes - 2));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    CausalGraph g;
    for (int i = 0; i < n; ++i) g.add_node("V" + std::to_string(i));
    std::vector<std::vector<int>> edges(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < edge_prob) g.add_edge("V" + std::to_string(order[i]),
                                                      "V" + std::to_string(order[j]));
    for (int i = 0; i < n; ++i) {
        std::string name = "V" + std::to_string(i);
        NodeRole r;
        r.observed = rng.uniform() >= hidden_prob;
        r.functional = !g.parents(name).empty() && rng.uniform() < functional_prob;
        g.set_role(name, r);
    }
    g.validate();
    return g;
}

// --------------------------------------------------------------------------
// Formula validation against the mutilation oracle.

struct ValidationReport {
    int seeds_requested = 0;
    int seeds_checked = 0;
    int seeds_skipped = 0;        // constraint set unsatisfied by the sample
    int positivity_errors = 0;    // formula evaluation hit a zero denominator
    double max_abs_error = 0.0;
    bool inconclusive = false;    // every seed was skipped
    std::string note;
};

// For each seed: sample a parameterization (functional set respected), skip
// it if the constraints are unsatisfied, then compare evaluate_formula
// against exact mutilation for every treatment/outcome instantiation.
inline ValidationReport validate_formula(const CausalGraph& working,
                                         const PositivityConstraintSet& constraints,
                                         const FormulaAst& formula, const VarSet& treatments,
                                         const VarSet& outcomes, int n_seeds,
                                         std::uint64_t seed0 = 1,
                                         const std::map<std::string, int>& cardinalities = {},
                                         std::size_t cell_cap = kDefaultCellCap) {
    ValidationReport rep;
    rep.seeds_requested = n_seeds;
    for (int i = 0; i < n_seeds; ++i) {
        DiscreteBN bn = random_parameterization(working, working.functional_vars(), seed0 + i,
                                                cardinalities);
        if (!satisfied_by(constraints, bn, kStructuralTol, cell_cap)) {
            ++rep.seeds_skipped;
            continue;
        }
        FormulaEvaluator ev(bn, cell_cap);
        std::vector<std::string> xv(treatments.begin(), treatments.end());
        std::vector<std::string> yv(outcomes.begin(), outcomes.end());
        std::vector<int> xstate(xv.size(), 0), ystate(yv.size(), 0);
        bool xdone = false;
        bool skipped = false;
        while (!xdone && !skipped) {
            std::map<std::string, int> x;
            for (std::size_t k = 0; k < xv.size(); ++k) x[xv[k]] = xstate[k];
            Factor truth = interventional(bn, x, outcomes, cell_cap);
            std::fill(ystate.begin(), ystate.end(), 0);
            bool ydone = false;
            while (!ydone) {
                std::map<std::string, int> y;
                for (std::size_t k = 0; k < yv.size(); ++k) y[yv[k]] = ystate[k];
                std::vector<int> lookup(truth.scope.size());
                for (std::size_t k = 0; k < truth.scope.size(); ++k) lookup[k] = y[truth.scope[k]];
                try {
                    double got = ev.evaluate(formula, x, y);
                    rep.max_abs_error = std::max(rep.max_abs_error, std::abs(got - truth.at(lookup)));
                } catch (const PositivityViolation&) {
                    ++rep.positivity_errors;
                    skipped = true;
                    break;
                }
                ydone = true;
                for (int k = static_cast<int>(ystate.size()) - 1; k >= 0; --k) {
                    if (++ystate[k] < bn.card(yv[k])) {
                        ydone = false;
                        break;
                    }
                    ystate[k] = 0;
                }
            }
            xdone = true;
            for (int k = static_cast<int>(xstate.size()) - 1; k >= 0; --k) {
                if (++xstate[k] < bn.card(xv[k])) {
                    xdone = false;
                    break;
                }
                xstate[k] = 0;
            }
        }
        if (!skipped) ++rep.seeds_checked;
    }
    if (rep.seeds_checked == 0) {
        rep.inconclusive = true;
        rep.note = "all seeds skipped; constraints unsatisfiable within the seed budget";
    }
    return rep;
}

// --------------------------------------------------------------------------
// Optimization-based unidentifiability falsifier.

struct FalsifierConfig {
    int restarts = 50;
    int iterations = 2000;     // budget per restart, spent on perturb+repair macro steps
    double match_tol = 1e-6;   // max-abs agreement required on the observed joint
    double effect_gap = 1e-2;  // minimum causal-effect disagreement
    double init_step = 0.5;
    double step_decay = 0.9;   // geometric macro-step schedule
    std::uint64_t seed = 1;
    int hidden_card = 4;
    std::size_t cell_cap = kDefaultCellCap;

    void validate() const {
        if (match_tol <= 0 || effect_gap <= 0 || match_tol >= effect_gap)
            throw QueryError("falsifier config requires 0 < match_tol < effect_gap");
    }
};

struct Counterexample {
    DiscreteBN m1, m2;
    double joint_mismatch = 0.0;
    double gap = 0.0;
    std::map<std::string, int> treatment;
    std::map<std::string, int> outcome;
};

struct FalsifyResult {
    std::optional<Counterexample> counterexample;
    int restarts_used = 0;
    std::string note;  // none-found is explicitly non-conclusive
    bool found() const { return counterexample.has_value(); }
};

namespace detail {

// Continuous search parameterization: log-weights for every column of every
// CPT whose family touches a hidden variable. Softmax per column keeps the
// tables normalized; functional CPTs are held as discrete function tables.
struct SearchSpace {
    DiscreteBN base;
    std::vector<std::string> mutable_vars;       // non-functional, hidden-touching
    std::vector<double> logw;                     // concatenated columns
    std::vector<std::pair<std::string, std::size_t>> layout;  // var, offset

    static bool family_touches_hidden(const DiscreteBN& bn, const std::string& v) {
        if (!bn.graph.role(v).observed) return true;
        for (const auto& p : bn.graph.parents(v))
            if (!bn.graph.role(p).observed) return true;
        return false;
    }

    explicit SearchSpace(const DiscreteBN& bn) : base(bn) {
        for (const auto& v : bn.graph.nodes()) {
            if (!family_touches_hidden(bn, v)) continue;
            if (bn.graph.role(v).functional) continue;  // discrete moves only
            layout.push_back({v, logw.size()});
            mutable_vars.push_back(v);
            const Cpt& c = bn.cpts.at(v);
            for (double p : c.values) logw.push_back(std::log(std::max(p, 1e-9)));
        }
    }

    DiscreteBN realize() const {
        DiscreteBN bn = base;
        for (const auto& [v, off] : layout) {
            Cpt& c = bn.cpts.at(v);
            for (std::size_t col = 0; col < c.parent_space(); ++col) {
                double mx = -1e300;
                for (int k = 0; k < c.child_card; ++k)
                    mx = std::max(mx, logw[off + col * c.child_card + k]);
                double total = 0;
                for (int k = 0; k < c.child_card; ++k)
                    total += std::exp(logw[off + col * c.child_card + k] - mx);
                for (int k = 0; k < c.child_card; ++k)
                    c.values[col * c.child_card + k] =
                        std::exp(logw[off + col * c.child_card + k] - mx) / total;
            }
        }
        return bn;
    }
};

struct EffectTable {
    std::vector<double> values;  // all (x instantiation, y instantiation) pairs
};

}  // namespace detail

// Searches for two parameterizations that agree on the observed joint but
// disagree on the causal effect. Fixes M1 at random, then walks M2 along the
// observed-joint fiber: random perturbations of the hidden-family CPTs
// followed by coordinate-descent repair of the observed-joint mismatch,
// keeping steps that grow the effect gap. Returns none-found (explicitly
// non-conclusive) when the budget is exhausted.
inline FalsifyResult falsify(const CausalGraph& working, const PositivityConstraintSet& constraints,
                             const VarSet& treatments, const VarSet& outcomes,
                             const FalsifierConfig& cfg = {}) {
    cfg.validate();
    FalsifyResult result;

    std::map<std::string, int> cards;
    for (const auto& v : working.nodes())
        if (!working.role(v).observed) cards[v] = cfg.hidden_card;

    VarSet observed = working.observed_vars();
    std::vector<std::string> obs(observed.begin(), observed.end());
    std::vector<std::string> xv(treatments.begin(), treatments.end());
    std::vector<std::string> yv(outcomes.begin(), outcomes.end());

    auto joint_vec = [&](const DiscreteBN& bn) {
        Factor f = joint_marginal(bn, observed, cfg.cell_cap);
        return f.values;  // scope order is canonical, so comparable directly
    };
    auto effect_vec = [&](const DiscreteBN& bn) {
        std::vector<double> out;
        std::vector<int> xstate(xv.size(), 0);
        bool done = false;
        while (!done) {
            std::map<std::string, int> x;
            for (std::size_t k = 0; k < xv.size(); ++k) x[xv[k]] = xstate[k];
            Factor f = interventional(bn, x, outcomes, cfg.cell_cap);
            for (double v : f.values) out.push_back(v);
            done = true;
            for (int k = static_cast<int>(xstate.size()) - 1; k >= 0; --k) {
                if (++xstate[k] < bn.card(xv[k])) {
                    done = false;
                    break;
                }
                xstate[k] = 0;
            }
        }
        return out;
    };
    auto linf = [](const std::vector<double>& a, const std::vector<double>& b) {
        double m = 0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
        return m;
    };
    auto l2 = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s;
    };

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        result.restarts_used = restart + 1;
        Rng rng(cfg.seed + 1000003ULL * restart);

        DiscreteBN m1 = random_parameterization(working, working.functional_vars(),
                                                cfg.seed + 7919ULL * restart + 13, cards);
        if (!satisfied_by(constraints, m1, kStructuralTol, cfg.cell_cap)) continue;
        std::vector<double> p1 = joint_vec(m1);
        std::vector<double> e1 = effect_vec(m1);

        detail::SearchSpace space(m1);
        if (space.logw.empty()) continue;  // nothing hidden to vary

        // hidden functional tables admit discrete moves: swap the function's
        // output on one parent instantiation
        std::vector<std::string> flippable;
        for (const auto& v : m1.graph.nodes())
            if (!m1.graph.role(v).observed && m1.graph.role(v).functional) flippable.push_back(v);

        std::vector<double> best = space.logw;
        DiscreteBN best_base = space.base;
        double best_gap = 0.0;

        auto mismatch_of = [&](const std::vector<double>& w) {
            space.logw = w;
            return l2(joint_vec(space.realize()), p1);
        };
        auto repair = [&](std::vector<double> w, int max_sweeps) {
            std::vector<double> h(w.size(), 0.1);
            double cur = mismatch_of(w);
            for (int sweep = 0; sweep < max_sweeps && cur > 1e-18; ++sweep) {
                double before = cur;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    for (int dir : {+1, -1}) {
                        std::vector<double> cand = w;
                        cand[i] += dir * h[i];
                        double m = mismatch_of(cand);
                        if (m < cur) {
                            w = cand;
                            cur = m;
                            h[i] *= 1.6;
                            break;
                        }
                    }
                    h[i] *= 0.6;
                }
                if (before - cur < 1e-20 && cur > 1e-18) break;
            }
            space.logw = w;
            return std::make_pair(w, cur);
        };

        double step = cfg.init_step;
        int macro_steps = std::max(1, cfg.iterations / 50);
        for (int it = 0; it < macro_steps; ++it) {
            space.base = best_base;
            std::vector<double> cand = best;
            if (!flippable.empty() && rng.uniform() < 0.3) {
                Cpt& cpt = space.base.cpts.at(flippable[rng.uniform_int((int)flippable.size())]);
                std::size_t col = rng.uniform_int(static_cast<int>(cpt.parent_space()));
                int cur = 0;
                for (int k = 0; k < cpt.child_card; ++k)
                    if (cpt.values[col * cpt.child_card + k] == 1.0) cur = k;
                int alt = (cur + 1 + rng.uniform_int(cpt.child_card - 1)) % cpt.child_card;
                for (int k = 0; k < cpt.child_card; ++k)
                    cpt.values[col * cpt.child_card + k] = k == alt ? 1.0 : 0.0;
            }
            for (auto& wi : cand)
                if (rng.uniform() < 0.3) wi += step * (2 * rng.uniform() - 1);
            auto [repaired, l2m] = repair(cand, 40);
            space.logw = repaired;
            DiscreteBN m2 = space.realize();
            double mism = linf(joint_vec(m2), p1);
            double gap = linf(effect_vec(m2), e1);
            if (mism <= cfg.match_tol && gap > best_gap) {
                best = repaired;
                best_base = space.base;
                best_gap = gap;
            } else {
                step *= cfg.step_decay;
            }
            if (best_gap >= cfg.effect_gap) break;
        }

        if (best_gap >= cfg.effect_gap) {
            // independent re-verification from scratch before reporting
            space.base = best_base;
            space.logw = best;
            DiscreteBN m2 = space.realize();
            m2.validate();
            double mism = linf(joint_vec(m2), p1);
            std::vector<double> e2 = effect_vec(m2);
            double gap = linf(e2, e1);
            if (mism <= cfg.match_tol && gap >= cfg.effect_gap &&
                satisfied_by(constraints, m2, kStructuralTol, cfg.cell_cap)) {
                Counterexample ce;
                ce.m1 = m1;
                ce.m2 = m2;
                ce.joint_mismatch = mism;
                ce.gap = gap;
                // locate the witnessing (x, y) pair
                std::size_t arg = 0;
                double bestd = -1;
                for (std::size_t i = 0; i < e2.size(); ++i)
                    if (std::abs(e2[i] - e1[i]) > bestd) {
                        bestd = std::abs(e2[i] - e1[i]);
                        arg = i;
                    }
                std::size_t ycells = 1;
                for (const auto& v : yv) ycells *= m1.card(v);
                std::size_t xflat = arg / ycells, yflat = arg % ycells;
                for (int k = static_cast<int>(xv.size()) - 1; k >= 0; --k) {
                    ce.treatment[xv[k]] = static_cast<int>(xflat % m1.card(xv[k]));
                    xflat /= m1.card(xv[k]);
                }
                Factor yf = interventional(m1, ce.treatment, outcomes, cfg.cell_cap);
                std::vector<int> ystate(yf.scope.size());
                std::size_t rem = yflat;
                for (int k = static_cast<int>(yf.scope.size()) - 1; k >= 0; --k) {
                    ystate[k] = static_cast<int>(rem % yf.cards[k]);
                    rem /= yf.cards[k];
                }
                for (std::size_t k = 0; k < yf.scope.size(); ++k) ce.outcome[yf.scope[k]] = ystate[k];
                result.counterexample = std::move(ce);
                return result;
            }
        }
    }
    result.note = "none-found: search budget exhausted; NOT a proof of identifiability";
    return result;
}

// --------------------------------------------------------------------------
// Elimination soundness suite: random BNs, random functional subsets, checks
// of marginal preservation, interventional preservation, CPT validity,
// functionality preservation, and order invariance.

struct SoundnessReport {
    int graphs_checked = 0;
    int violations = 0;
    double max_marginal_error = 0.0;
    double max_interventional_error = 0.0;
    double max_order_difference = 0.0;
    std::vector<std::string> failures;
};

inline SoundnessReport elimination_soundness_suite(int n_graphs, std::uint64_t seed,
                                                   int max_nodes = 8) {
    SoundnessReport rep;
    Rng rng(seed);
    for (int g_i = 0; g_i < n_graphs; ++g_i) {
        CausalGraph g = random_dag(rng, max_nodes, 0.4, 0.0, 0.5);  // all observed
        DiscreteBN bn = random_parameterization(g, g.functional_vars(), seed + 31 * g_i + 7);
        VarSet w;
        for (const auto& v : g.functional_vars())
            if (rng.uniform() < 0.7) w.insert(v);
        DiscreteBN reduced = felim_bn(bn, w);
        ++rep.graphs_checked;

        std::vector<std::string> survivors = reduced.graph.nodes();

        // marginal preservation vs brute-force enumeration
        auto truth = brute_force_joint(bn, survivors);
        auto got = brute_force_joint(reduced, survivors);
        for (const auto& [k, p] : truth) {
            double err = std::abs(p - got[k]);
            rep.max_marginal_error = std::max(rep.max_marginal_error, err);
            if (err > kBehavioralTol) {
                ++rep.violations;
                rep.failures.push_back("marginal mismatch on graph " + std::to_string(g_i));
                break;
            }
        }

        // interventional preservation for a random treatment among survivors
        if (!survivors.empty()) {
            std::map<std::string, int> x;
            x[survivors[rng.uniform_int(static_cast<int>(survivors.size()))]] = rng.uniform_int(2);
            auto t1 = brute_force_interventional(bn, x, survivors);
            auto t2 = brute_force_interventional(reduced, x, survivors);
            for (const auto& [k, p] : t1) {
                double err = std::abs(p - t2[k]);
                rep.max_interventional_error = std::max(rep.max_interventional_error, err);
                if (err > kBehavioralTol) {
                    ++rep.violations;
                    rep.failures.push_back("interventional mismatch on graph " + std::to_string(g_i));
                    break;
                }
            }
        }

        // functionality preservation
        for (const auto& v : reduced.graph.functional_vars()) {
            if (!reduced.cpts.at(v).is_zero_one()) {
                ++rep.violations;
                rep.failures.push_back("functionality lost on graph " + std::to_string(g_i));
            }
        }

        // order invariance over two random permutations
        std::vector<std::string> perm(w.begin(), w.end());
        for (int rep_i = 0; rep_i < 2 && perm.size() > 1; ++rep_i) {
            for (int i = static_cast<int>(perm.size()) - 1; i > 0; --i)
                std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
            DiscreteBN seq = bn;
            for (const auto& t : perm) seq = felim_bn(seq, VarSet{t});
            for (const auto& [v, c] : reduced.cpts) {
                const Cpt& c2 = seq.cpts.at(v);
                for (std::size_t i = 0; i < c.values.size(); ++i) {
                    double d = std::abs(c.values[i] - c2.values[i]);
                    rep.max_order_difference = std::max(rep.max_order_difference, d);
                    if (d > kStructuralTol) {
                        ++rep.violations;
                        rep.failures.push_back("order variance on graph " + std::to_string(g_i));
                        break;
                    }
                }
            }
        }
    }
    return rep;
}

}  // namespace fident
