#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fident/common.hpp"

namespace fident {

// Dense table over an ordered (lexicographically sorted) variable scope.
// Index layout is row-major with the last scope variable fastest.
struct Factor {
    std::vector<std::string> scope;
    std::vector<int> cards;
    std::vector<double> values;

    static Factor unit() { return Factor{{}, {}, {1.0}}; }

    std::size_t size() const { return values.size(); }

    static std::size_t cells_for(const std::vector<int>& cards) {
        std::size_t n = 1;
        for (int c : cards) n *= static_cast<std::size_t>(c);
        return n;
    }

    int position(const std::string& var) const {
        auto it = std::find(scope.begin(), scope.end(), var);
        if (it == scope.end()) throw GraphError("factor: variable not in scope: " + var);
        return static_cast<int>(it - scope.begin());
    }

    double at(const std::vector<int>& states) const {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < scope.size(); ++i) idx = idx * cards[i] + states[i];
        return values[idx];
    }

    double sum() const {
        double s = 0;
        for (double v : values) s += v;
        return s;
    }
};

namespace detail {

// Odometer walk over a union scope, tracking the flat index into each input.
inline Factor combine(const Factor& a, const Factor& b, bool multiply,
                      std::size_t cell_cap = kDefaultCellCap) {
    Factor out;
    std::size_t ia = 0, ib = 0;
    std::vector<int> apos, bpos;  // per union var: position in a/b or -1
    while (ia < a.scope.size() || ib < b.scope.size()) {
        if (ib == b.scope.size() || (ia < a.scope.size() && a.scope[ia] < b.scope[ib])) {
            out.scope.push_back(a.scope[ia]);
            out.cards.push_back(a.cards[ia]);
            apos.push_back(static_cast<int>(ia++));
            bpos.push_back(-1);
        } else if (ia == a.scope.size() || b.scope[ib] < a.scope[ia]) {
            out.scope.push_back(b.scope[ib]);
            out.cards.push_back(b.cards[ib]);
            apos.push_back(-1);
            bpos.push_back(static_cast<int>(ib++));
        } else {
            if (a.cards[ia] != b.cards[ib])
                throw GraphError("factor: cardinality mismatch on " + a.scope[ia]);
            out.scope.push_back(a.scope[ia]);
            out.cards.push_back(a.cards[ia]);
            apos.push_back(static_cast<int>(ia++));
            bpos.push_back(static_cast<int>(ib++));
        }
    }
    std::size_t n = Factor::cells_for(out.cards);
    if (n > cell_cap)
        throw StateSpaceOverflow("state-space overflow: factor with " + std::to_string(n) +
                                 " cells exceeds cap " + std::to_string(cell_cap));
    out.values.assign(n, 0.0);

    // strides in a and b for each union variable
    std::vector<std::size_t> astr(out.scope.size(), 0), bstr(out.scope.size(), 0);
    {
        std::size_t s = 1;
        for (int i = static_cast<int>(a.scope.size()) - 1; i >= 0; --i) {
            for (std::size_t u = 0; u < out.scope.size(); ++u)
                if (apos[u] == i) astr[u] = s;
            s *= a.cards[i];
        }
        s = 1;
        for (int i = static_cast<int>(b.scope.size()) - 1; i >= 0; --i) {
            for (std::size_t u = 0; u < out.scope.size(); ++u)
                if (bpos[u] == i) bstr[u] = s;
            s *= b.cards[i];
        }
    }
    std::vector<int> state(out.scope.size(), 0);
    std::size_t aidx = 0, bidx = 0;
    for (std::size_t idx = 0; idx < n; ++idx) {
        double av = a.values.empty() ? 1.0 : a.values[aidx];
        double bv = b.values.empty() ? 1.0 : b.values[bidx];
        out.values[idx] = multiply ? av * bv : av / bv;
        // advance odometer (last var fastest)
        for (int u = static_cast<int>(out.scope.size()) - 1; u >= 0; --u) {
            if (++state[u] < out.cards[u]) {
                aidx += astr[u];
                bidx += bstr[u];
                break;
            }
            state[u] = 0;
            aidx -= astr[u] * (out.cards[u] - 1);
            bidx -= bstr[u] * (out.cards[u] - 1);
        }
    }
    return out;
}

}  // namespace detail

inline Factor multiply(const Factor& a, const Factor& b, std::size_t cell_cap = kDefaultCellCap) {
    return detail::combine(a, b, true, cell_cap);
}

inline Factor sum_out(const Factor& f, const std::string& var) {
    int pos = f.position(var);
    Factor out;
    for (std::size_t i = 0; i < f.scope.size(); ++i) {
        if (static_cast<int>(i) == pos) continue;
        out.scope.push_back(f.scope[i]);
        out.cards.push_back(f.cards[i]);
    }
    out.values.assign(Factor::cells_for(out.cards), 0.0);
    std::size_t inner = 1;  // product of cards after pos
    for (std::size_t i = pos + 1; i < f.scope.size(); ++i) inner *= f.cards[i];
    std::size_t vcard = f.cards[pos];
    std::size_t outer = f.values.size() / (inner * vcard);
    std::size_t src = 0;
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t v = 0; v < vcard; ++v)
            for (std::size_t in = 0; in < inner; ++in) out.values[o * inner + in] += f.values[src++];
    return out;
}

inline Factor sum_out_all(Factor f, const std::vector<std::string>& vars) {
    for (const auto& v : vars) f = sum_out(f, v);
    return f;
}

inline Factor restrict_var(const Factor& f, const std::string& var, int state) {
    int pos = f.position(var);
    Factor out;
    for (std::size_t i = 0; i < f.scope.size(); ++i) {
        if (static_cast<int>(i) == pos) continue;
        out.scope.push_back(f.scope[i]);
        out.cards.push_back(f.cards[i]);
    }
    out.values.reserve(Factor::cells_for(out.cards));
    std::size_t inner = 1;
    for (std::size_t i = pos + 1; i < f.scope.size(); ++i) inner *= f.cards[i];
    std::size_t vcard = f.cards[pos];
    std::size_t outer = f.values.size() / (inner * vcard);
    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t base = (o * vcard + state) * inner;
        for (std::size_t in = 0; in < inner; ++in) out.values.push_back(f.values[base + in]);
    }
    return out;
}

// Marginalize down to exactly `keep` (which must be a subset of the scope).
inline Factor marginalize_to(Factor f, const std::vector<std::string>& keep) {
    std::vector<std::string> drop;
    for (const auto& v : f.scope)
        if (std::find(keep.begin(), keep.end(), v) == keep.end()) drop.push_back(v);
    return sum_out_all(std::move(f), drop);
}

}  // namespace fident
