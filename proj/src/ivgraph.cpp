#include <algorithm>
#include <atomic>

#include "mbiv/error.hpp"
#include "mbiv/graph.hpp"

namespace mbiv {

const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::valid: return "valid";
        case Verdict::invalid: return "invalid";
        case Verdict::conditional: return "conditional";
    }
    return "invalid";
}

namespace {

std::vector<Vid> subset_of(const std::vector<Vid>& base, const std::vector<Vid>& pool, std::uint64_t mask) {
    std::vector<Vid> z = base;
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (mask >> k & 1U) z.push_back(pool[k]);
    return z;
}

void check_pool(const std::vector<Vid>& pool) {
    if (pool.size() > 40) throw BoundError("subset scan over " + std::to_string(pool.size()) + " vertices");
}

}  // namespace

std::optional<std::uint64_t> first_subset_violation_serial(const Dag& g, Vid a, Vid b, const std::vector<Vid>& base,
                                                           const std::vector<Vid>& pool, bool want_separated) {
    check_pool(pool);
    const std::uint64_t total = std::uint64_t{1} << pool.size();
    for (std::uint64_t m = 0; m < total; ++m)
        if (d_separated(g, a, b, subset_of(base, pool, m)) != want_separated) return m;
    return std::nullopt;
}

std::optional<std::uint64_t> first_subset_violation(const Dag& g, Vid a, Vid b, const std::vector<Vid>& base,
                                                    const std::vector<Vid>& pool, bool want_separated) {
    check_pool(pool);
    const std::uint64_t total = std::uint64_t{1} << pool.size();
    std::atomic<std::uint64_t> best{total};
    std::atomic<bool> failed{false};
    // Striped scan; the minimum violating mask is the same one the serial scan stops at.
#pragma omp parallel for schedule(static, 64)
    for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(total); ++mi) {
        const auto m = static_cast<std::uint64_t>(mi);
        if (m >= best.load(std::memory_order_relaxed) || failed.load(std::memory_order_relaxed)) continue;
        bool sep = false;
        try {
            sep = d_separated(g, a, b, subset_of(base, pool, m));
        } catch (...) {
            failed = true;
            continue;
        }
        if (sep != want_separated) {
            std::uint64_t cur = best.load();
            while (m < cur && !best.compare_exchange_weak(cur, m)) {
            }
        }
    }
    if (failed) return first_subset_violation_serial(g, a, b, base, pool, want_separated);
    if (best.load() == total) return std::nullopt;
    return best.load();
}

namespace {

struct CriterionCheck {
    bool g1 = false;
    bool g2 = false;
    std::vector<Vid> g1_given;  // violating conditioning set for G1
    std::vector<Vid> g2_given;  // separating set for G2
};

CriterionCheck check_criteria(const Dag& g, const Dag& cut, Vid z, Vid x, Vid y, const std::vector<Vid>& controls,
                              bool parallel) {
    auto scan = parallel ? first_subset_violation : first_subset_violation_serial;
    std::vector<char> fixed(g.size(), 0);
    for (auto c : controls) fixed[c] = 1;
    CriterionCheck r;
    // G1: z and y separated in the cut graph under every observable superset of the controls.
    std::vector<Vid> pool1;
    for (Vid v = 0; v < g.size(); ++v)
        if (v != z && v != y && !fixed[v] && !g.latent(v)) pool1.push_back(v);
    const auto v1 = scan(cut, z, y, controls, pool1, true);
    r.g1 = !v1.has_value();
    if (v1) r.g1_given = subset_of(controls, pool1, *v1);
    // G2: no observable superset of the controls separates z and x.
    std::vector<Vid> pool2;
    for (Vid v = 0; v < g.size(); ++v)
        if (v != z && v != x && !fixed[v] && !g.latent(v)) pool2.push_back(v);
    const auto v2 = scan(g, z, x, controls, pool2, false);
    r.g2 = !v2.has_value();
    if (v2) r.g2_given = subset_of(controls, pool2, *v2);
    return r;
}

// Subsets of `items` in order of size, then lexicographic by position.
template <class F>
bool for_each_subset_by_size(const std::vector<Vid>& items, std::size_t max_size, F&& f) {
    const std::size_t n = items.size();
    for (std::size_t k = 0; k <= std::min(max_size, n); ++k) {
        std::vector<std::size_t> idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = i;
        while (true) {
            std::vector<Vid> s;
            for (auto i : idx) s.push_back(items[i]);
            if (f(s)) return true;
            std::size_t i = k;
            while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return false;
}

std::vector<std::string> names_of(const Dag& g, std::vector<Vid> v) {
    std::sort(v.begin(), v.end());
    std::vector<std::string> out;
    for (auto w : v) out.push_back(g.name(w));
    return out;
}

std::string set_text(const std::vector<std::string>& s) {
    std::string t = "{";
    for (std::size_t i = 0; i < s.size(); ++i) t += (i ? ", " : "") + s[i];
    return t + "}";
}

}  // namespace

std::vector<IvCandidateReport> iv_candidates(const Dag& g, const std::string& x, const std::string& y,
                                             const std::vector<std::string>& controls, const IvOptions& opt) {
    if (g.size() > opt.subset_cap)
        throw BoundError("iv_candidates: " + std::to_string(g.size()) + " vertices exceeds the subset cap of " +
                         std::to_string(opt.subset_cap));
    const Vid vx = g.index(x);
    const Vid vy = g.index(y);
    const Dag cut = cut_effect(g, x, y, CutMode::edge);
    std::vector<Vid> ctrl;
    std::vector<char> is_ctrl(g.size(), 0);
    for (const auto& c : controls) {
        const Vid v = g.index(c);
        if (v == vx || v == vy) throw UsageError("controls may not contain the endogenous variable or the outcome");
        ctrl.push_back(v);
        is_ctrl[v] = 1;
    }

    std::vector<IvCandidateReport> out;
    for (Vid z = 0; z < g.size(); ++z) {
        if (z == vx || z == vy || is_ctrl[z] || g.latent(z)) continue;
        IvCandidateReport rep;
        rep.candidate = g.name(z);
        const CriterionCheck given = check_criteria(g, cut, z, vx, vy, ctrl, opt.parallel);

        std::optional<std::vector<Vid>> required;
        std::optional<CriterionCheck> at_required;
        if (given.g1 && given.g2) {
            // Smallest subset of the supplied controls that still works.
            for_each_subset_by_size(ctrl, ctrl.size(), [&](const std::vector<Vid>& s) {
                const CriterionCheck c = check_criteria(g, cut, z, vx, vy, s, opt.parallel);
                if (c.g1 && c.g2) {
                    required = s;
                    at_required = c;
                    return true;
                }
                return false;
            });
        } else {
            std::vector<Vid> extra_pool;
            for (Vid v = 0; v < g.size(); ++v)
                if (v != z && v != vx && v != vy && !is_ctrl[v] && !g.latent(v)) extra_pool.push_back(v);
            for_each_subset_by_size(extra_pool, opt.max_extra_controls, [&](const std::vector<Vid>& extra) {
                if (extra.empty()) return false;
                std::vector<Vid> s = ctrl;
                s.insert(s.end(), extra.begin(), extra.end());
                const CriterionCheck c = check_criteria(g, cut, z, vx, vy, s, opt.parallel);
                if (c.g1 && c.g2) {
                    required = s;
                    at_required = c;
                    return true;
                }
                return false;
            });
        }

        const CriterionCheck& shown = at_required ? *at_required : given;
        rep.g1_holds = shown.g1;
        rep.g2_holds = shown.g2;
        if (required) {
            rep.required_controls = names_of(g, *required);
            rep.verdict = required->empty() ? Verdict::valid : Verdict::conditional;
        } else {
            rep.verdict = Verdict::invalid;
        }
        std::string text;
        if (!given.g1) {
            // An open trail in the cut graph under the violating set.
            std::vector<char> in_z(g.size(), 0);
            for (auto v : given.g1_given) in_z[v] = 1;
            for (const auto& t : enumerate_trails(cut, g.name(z), y, g.size())) {
                if (trail_active(cut, t, in_z)) {
                    rep.g1_witness_trail = t;
                    break;
                }
            }
            rep.g1_witness_given = names_of(g, given.g1_given);
            text += "G1 fails: open trail " + (rep.g1_witness_trail ? rep.g1_witness_trail->to_string(cut) : "?") +
                    " given " + set_text(rep.g1_witness_given);
        }
        if (!given.g2) {
            rep.g2_separating_set = names_of(g, given.g2_given);
            if (!text.empty()) text += "; ";
            text += "G2 fails: " + rep.candidate + " and " + x + " separated by " + set_text(*rep.g2_separating_set);
        }
        if (rep.verdict == Verdict::conditional) {
            if (!text.empty()) text += "; ";
            text += "holds given controls " + set_text(rep.required_controls);
        }
        rep.witness_text = text;
        out.push_back(std::move(rep));
    }
    return out;
}

nlohmann::ordered_json to_json(const IvCandidateReport& r, const Dag& g) {
    nlohmann::ordered_json j;
    j["candidate"] = r.candidate;
    j["verdict"] = to_string(r.verdict);
    j["g1_holds"] = r.g1_holds;
    j["g2_holds"] = r.g2_holds;
    j["required_controls"] = r.required_controls;
    if (r.g1_witness_trail) {
        j["g1_witness"] = {{"trail", r.g1_witness_trail->to_string(g)}, {"given", r.g1_witness_given}};
    }
    if (r.g2_separating_set) j["g2_separating_set"] = *r.g2_separating_set;
    j["witness"] = r.witness_text;
    return j;
}

std::vector<BackdoorTrail> backdoor_paths(const Dag& g, const std::string& z, const std::string& y, const std::string& via) {
    const Vid vv = g.index(via);
    std::vector<BackdoorTrail> out;
    for (auto& t : enumerate_trails(g, z, y, g.size())) {
        if (std::find(t.vertices.begin(), t.vertices.end(), vv) != t.vertices.end()) continue;
        BackdoorTrail bt;
        bool has_collider = false;
        for (std::size_t i = 1; i + 1 < t.vertices.size(); ++i) {
            if (t.steps[i - 1] == Step::undirected || t.steps[i] == Step::undirected)
                throw DataError("undirected edge on trail " + t.to_string(g) + "; orientation required");
            if (t.is_collider(i)) has_collider = true;
        }
        if (has_collider) {
            bt.minimal_blocking_sets.push_back({});
        } else {
            for (std::size_t i = 1; i + 1 < t.vertices.size(); ++i) bt.minimal_blocking_sets.push_back({g.name(t.vertices[i])});
        }
        bt.trail = std::move(t);
        out.push_back(std::move(bt));
    }
    return out;
}

}  // namespace mbiv
