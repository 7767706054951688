#include "mbiv/graph.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "mbiv/error.hpp"

namespace mbiv {

Dag::Dag(const std::vector<std::string>& names) {
    for (const auto& n : names) add_vertex(n);
}

Vid Dag::add_vertex(const std::string& name, bool latent) {
    if (name.empty()) throw DataError("empty vertex name");
    if (has_vertex(name)) throw DataError("duplicate vertex '" + name + "'");
    names_.push_back(name);
    latent_.push_back(latent ? 1 : 0);
    stamps_.emplace_back();
    par_.emplace_back();
    chi_.emplace_back();
    return names_.size() - 1;
}

Vid Dag::ensure_vertex(const std::string& name) { return has_vertex(name) ? index(name) : add_vertex(name); }

bool Dag::has_vertex(const std::string& name) const noexcept {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Vid Dag::index(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw DataError("unknown vertex '" + name + "'");
    return static_cast<Vid>(it - names_.begin());
}

bool Dag::has_edge(Vid from, Vid to) const { return directed_.count({from, to}) > 0; }

bool Dag::has_undirected(Vid a, Vid b) const { return undirected_.count({std::min(a, b), std::max(a, b)}) > 0; }

bool Dag::adjacent(Vid a, Vid b) const { return has_edge(a, b) || has_edge(b, a) || has_undirected(a, b); }

void Dag::add_edge(const std::string& from, const std::string& to) { add_edge(index(from), index(to)); }

void Dag::add_edge(Vid from, Vid to) {
    if (from >= size() || to >= size()) throw DataError("edge endpoint out of range");
    if (from == to) throw DataError("self-loop on '" + names_[from] + "'");
    if (adjacent(from, to))
        throw DataError("duplicate or conflicting edge between '" + names_[from] + "' and '" + names_[to] + "'");
    if (reaches(to, from)) throw DataError("edge " + names_[from] + " -> " + names_[to] + " would create a cycle");
    directed_.insert({from, to});
    par_[to].insert(std::upper_bound(par_[to].begin(), par_[to].end(), from), from);
    chi_[from].insert(std::upper_bound(chi_[from].begin(), chi_[from].end(), to), to);
}

void Dag::add_undirected(const std::string& a, const std::string& b) { add_undirected(index(a), index(b)); }

void Dag::add_undirected(Vid a, Vid b) {
    if (a >= size() || b >= size()) throw DataError("edge endpoint out of range");
    if (a == b) throw DataError("self-loop on '" + names_[a] + "'");
    if (adjacent(a, b)) throw DataError("duplicate or conflicting edge between '" + names_[a] + "' and '" + names_[b] + "'");
    undirected_.insert({std::min(a, b), std::max(a, b)});
}

void Dag::remove_edge(Vid from, Vid to) {
    if (!directed_.erase({from, to})) throw DataError("no edge " + name(from) + " -> " + name(to));
    par_[to].erase(std::find(par_[to].begin(), par_[to].end(), from));
    chi_[from].erase(std::find(chi_[from].begin(), chi_[from].end(), to));
}

void Dag::remove_undirected(Vid a, Vid b) {
    if (!undirected_.erase({std::min(a, b), std::max(a, b)})) throw DataError("no edge " + name(a) + " -- " + name(b));
}

std::vector<Vid> Dag::parents(Vid v) const { return par_.at(v); }
std::vector<Vid> Dag::children(Vid v) const { return chi_.at(v); }

std::vector<Vid> Dag::undirected_neighbors(Vid v) const {
    std::vector<Vid> out;
    for (const auto& [a, b] : undirected_) {
        if (a == v) out.push_back(b);
        if (b == v) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool Dag::reaches(Vid from, Vid to) const {
    std::vector<char> seen(size(), 0);
    std::vector<Vid> stack{from};
    while (!stack.empty()) {
        const Vid v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        if (seen[v]) continue;
        seen[v] = 1;
        for (auto c : chi_[v]) stack.push_back(c);
    }
    return false;
}

std::vector<Vid> Dag::descendants(Vid v) const {
    std::vector<char> seen(size(), 0);
    std::vector<Vid> stack = chi_.at(v);
    while (!stack.empty()) {
        const Vid w = stack.back();
        stack.pop_back();
        if (seen[w]) continue;
        seen[w] = 1;
        for (auto c : chi_[w]) stack.push_back(c);
    }
    std::vector<Vid> out;
    for (Vid w = 0; w < size(); ++w)
        if (seen[w]) out.push_back(w);
    return out;
}

std::vector<Vid> Dag::topological_order() const {
    // Kahn's algorithm, smallest index first for a deterministic order.
    std::vector<std::size_t> indeg(size());
    for (Vid v = 0; v < size(); ++v) indeg[v] = par_[v].size();
    std::set<Vid> ready;
    for (Vid v = 0; v < size(); ++v)
        if (indeg[v] == 0) ready.insert(v);
    std::vector<Vid> out;
    while (!ready.empty()) {
        const Vid v = *ready.begin();
        ready.erase(ready.begin());
        out.push_back(v);
        for (auto c : chi_[v])
            if (--indeg[c] == 0) ready.insert(c);
    }
    return out;
}

bool Dag::operator==(const Dag& o) const {
    return names_ == o.names_ && latent_ == o.latent_ && stamps_ == o.stamps_ && directed_ == o.directed_ &&
           undirected_ == o.undirected_;
}

// ---------------------------------------------------------------- trails

bool Trail::is_collider(std::size_t i) const {
    if (i == 0 || i + 1 >= vertices.size()) return false;
    return steps[i - 1] == Step::forward && steps[i] == Step::backward;
}

std::string Trail::to_string(const Dag& g) const {
    std::string s = g.name(vertices[0]);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        s += steps[i] == Step::forward ? " -> " : steps[i] == Step::backward ? " <- " : " -- ";
        s += g.name(vertices[i + 1]);
    }
    return s;
}

std::vector<Trail> enumerate_trails(const Dag& g, const std::string& a, const std::string& b, std::size_t max_len) {
    const Vid va = g.index(a);
    const Vid vb = g.index(b);
    if (va == vb) throw UsageError("trail endpoints must differ");
    // Neighbours visited in name order so the output is lexicographic in vertex names.
    std::vector<std::vector<std::pair<Vid, Step>>> nbr(g.size());
    for (Vid v = 0; v < g.size(); ++v) {
        for (auto c : g.children(v)) nbr[v].push_back({c, Step::forward});
        for (auto p : g.parents(v)) nbr[v].push_back({p, Step::backward});
        for (auto u : g.undirected_neighbors(v)) nbr[v].push_back({u, Step::undirected});
        std::sort(nbr[v].begin(), nbr[v].end(), [&](const auto& x, const auto& y) { return g.name(x.first) < g.name(y.first); });
    }
    std::vector<Trail> out;
    Trail cur;
    cur.vertices.push_back(va);
    std::vector<char> on(g.size(), 0);
    on[va] = 1;
    std::function<void(Vid)> dfs = [&](Vid v) {
        if (v == vb) {
            out.push_back(cur);
            return;
        }
        if (cur.steps.size() >= max_len) return;
        for (const auto& [w, st] : nbr[v]) {
            if (on[w]) continue;
            on[w] = 1;
            cur.vertices.push_back(w);
            cur.steps.push_back(st);
            dfs(w);
            cur.vertices.pop_back();
            cur.steps.pop_back();
            on[w] = 0;
        }
    };
    dfs(va);
    return out;
}

bool trail_active(const Dag& g, const Trail& t, const std::vector<char>& in_z) {
    for (std::size_t i = 1; i + 1 < t.vertices.size(); ++i) {
        const Vid m = t.vertices[i];
        if (t.steps[i - 1] == Step::undirected || t.steps[i] == Step::undirected)
            throw DataError("undirected edge at '" + g.name(m) + "' on a trail; orientation required");
        if (t.is_collider(i)) {
            bool opened = in_z[m] != 0;
            if (!opened)
                for (auto d : g.descendants(m))
                    if (in_z[d]) {
                        opened = true;
                        break;
                    }
            if (!opened) return false;
        } else if (in_z[m]) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- d-separation

bool d_separated(const Dag& g, Vid a, Vid b, const std::vector<Vid>& given) {
    const std::size_t n = g.size();
    if (a >= n || b >= n) throw DataError("vertex out of range");
    if (a == b) throw UsageError("d-separation needs distinct vertices");
    std::vector<char> in_z(n, 0);
    for (auto z : given) {
        if (z >= n) throw DataError("conditioning vertex out of range");
        in_z[z] = 1;
    }
    if (in_z[a] || in_z[b]) throw UsageError("endpoints may not be in the conditioning set");

    // Vertices that are in Z or have a descendant in Z (collider opening set).
    std::vector<char> anc(n, 0);
    {
        std::vector<Vid> stack(given.begin(), given.end());
        while (!stack.empty()) {
            const Vid v = stack.back();
            stack.pop_back();
            if (anc[v]) continue;
            anc[v] = 1;
            for (auto p : g.parents(v)) stack.push_back(p);
        }
    }
    auto undirected_here = [&](Vid v) {
        if (!g.undirected_neighbors(v).empty())
            throw DataError("undirected edge at '" + g.name(v) + "' on a relevant trail; orientation required");
    };
    // Reachability over (vertex, arrived-from-child?) states.
    std::vector<char> seen_up(n, 0), seen_down(n, 0);
    std::vector<std::pair<Vid, bool>> stack{{a, true}};
    while (!stack.empty()) {
        const auto [v, up] = stack.back();
        stack.pop_back();
        auto& seen = up ? seen_up : seen_down;
        if (seen[v]) continue;
        seen[v] = 1;
        if (v == b && !in_z[v]) return false;
        if (up) {
            if (in_z[v]) continue;
            undirected_here(v);
            for (auto p : g.parents(v)) stack.push_back({p, true});
            for (auto c : g.children(v)) stack.push_back({c, false});
        } else {
            if (!in_z[v]) {
                undirected_here(v);
                for (auto c : g.children(v)) stack.push_back({c, false});
            }
            if (anc[v]) {
                if (in_z[v]) undirected_here(v);
                for (auto p : g.parents(v)) stack.push_back({p, true});
            }
        }
    }
    return true;
}

bool d_separated(const Dag& g, const std::string& a, const std::string& b, const std::vector<std::string>& given) {
    std::vector<Vid> z;
    for (const auto& s : given) z.push_back(g.index(s));
    return d_separated(g, g.index(a), g.index(b), z);
}

// ---------------------------------------------------------------- blankets, skeletons, equivalence

std::vector<std::string> markov_blanket(const Dag& g, const std::string& v) {
    const Vid x = g.index(v);
    if (!g.undirected_neighbors(x).empty())
        throw DataError("vertex '" + v + "' has undirected edges; Markov blanket needs orientation");
    std::set<Vid> mb;
    for (auto p : g.parents(x)) mb.insert(p);
    for (auto c : g.children(x)) {
        mb.insert(c);
        for (auto s : g.parents(c)) mb.insert(s);
    }
    mb.erase(x);
    std::vector<std::string> out;
    for (auto w : mb) out.push_back(g.name(w));
    return out;
}

Pdag skeleton(const Dag& g) {
    Pdag s;
    for (Vid v = 0; v < g.size(); ++v) {
        s.add_vertex(g.name(v), g.latent(v));
        s.set_stamp(v, g.stamp(v));
    }
    for (const auto& [a, b] : g.edges()) s.add_undirected(a, b);
    for (const auto& [a, b] : g.undirected_edges()) s.add_undirected(a, b);
    return s;
}

std::set<VStructure> v_structures(const Dag& g) {
    std::set<VStructure> out;
    for (Vid c = 0; c < g.size(); ++c) {
        const auto ps = g.parents(c);
        for (std::size_t i = 0; i < ps.size(); ++i)
            for (std::size_t j = i + 1; j < ps.size(); ++j)
                if (!g.adjacent(ps[i], ps[j])) out.insert({std::min(ps[i], ps[j]), c, std::max(ps[i], ps[j])});
    }
    return out;
}

std::vector<Dag> equivalence_class(const Dag& g, std::size_t max_members) {
    if (g.size() > 12) throw BoundError("equivalence_class: " + std::to_string(g.size()) + " vertices exceeds the bound of 12");
    if (!g.undirected_edges().empty()) throw DataError("equivalence_class expects a fully directed graph");
    const auto target = v_structures(g);
    std::vector<std::pair<Vid, Vid>> edges(g.edges().begin(), g.edges().end());
    for (auto& e : edges)
        if (e.first > e.second) std::swap(e.first, e.second);
    std::sort(edges.begin(), edges.end());

    Dag base;
    for (Vid v = 0; v < g.size(); ++v) {
        base.add_vertex(g.name(v), g.latent(v));
        base.set_stamp(v, g.stamp(v));
    }
    // Creates a v-structure absent from the target?
    auto creates_foreign = [&](const Dag& d, Vid from, Vid to) {
        for (auto p : d.parents(to)) {
            if (p == from || g.adjacent(p, from)) continue;
            if (!target.count({std::min(p, from), to, std::max(p, from)})) return true;
        }
        return false;
    };
    std::vector<Dag> out;
    std::function<void(Dag&, std::size_t)> rec = [&](Dag& d, std::size_t k) {
        if (k == edges.size()) {
            if (v_structures(d) == target) {
                if (out.size() >= max_members) throw BoundError("equivalence_class: member cap exceeded");
                out.push_back(d);
            }
            return;
        }
        const auto [lo, hi] = edges[k];
        for (const auto& [from, to] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
            if (d.reaches(to, from) || creates_foreign(d, from, to)) continue;
            d.add_edge(from, to);
            rec(d, k + 1);
            d.remove_edge(from, to);
        }
    };
    rec(base, 0);
    return out;
}

// ---------------------------------------------------------------- orientation and cuts

Pdag orient_with_timestamps(const Pdag& sk, const std::map<std::string, long long>& stamps) {
    std::vector<long long> ts(sk.size());
    for (Vid v = 0; v < sk.size(); ++v) {
        auto it = stamps.find(sk.name(v));
        if (it != stamps.end())
            ts[v] = it->second;
        else if (sk.stamp(v))
            ts[v] = *sk.stamp(v);
        else
            throw DataError("vertex '" + sk.name(v) + "' has no timestamp");
    }
    for (const auto& [name, _] : stamps)
        if (!sk.has_vertex(name)) throw DataError("timestamp for unknown vertex '" + name + "'");
    Pdag out;
    for (Vid v = 0; v < sk.size(); ++v) {
        out.add_vertex(sk.name(v), sk.latent(v));
        out.set_stamp(v, ts[v]);
    }
    for (const auto& [a, b] : sk.edges()) {
        if (ts[a] > ts[b])
            throw DataError("edge " + sk.name(a) + " -> " + sk.name(b) + " runs from a later to an earlier timestamp");
        out.add_edge(a, b);
    }
    for (const auto& [a, b] : sk.undirected_edges()) {
        if (ts[a] < ts[b])
            out.add_edge(a, b);
        else if (ts[b] < ts[a])
            out.add_edge(b, a);
        else
            out.add_undirected(a, b);
    }
    return out;
}

Dag cut_effect(const Dag& g, const std::string& x, const std::string& y, CutMode mode) {
    Dag out = g;
    const Vid vx = g.index(x);
    if (mode == CutMode::edge) {
        const Vid vy = g.index(y);
        if (!g.has_edge(vx, vy)) throw DataError("no edge " + x + " -> " + y + " to cut");
        out.remove_edge(vx, vy);
    } else {
        for (auto p : g.parents(vx)) out.remove_edge(p, vx);
    }
    return out;
}

}  // namespace mbiv
