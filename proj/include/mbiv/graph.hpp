#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mbiv {

using Vid = std::size_t;

// Directed acyclic graph that may also carry undirected edges (a PDAG).
class Dag {
public:
    Dag() = default;
    explicit Dag(const std::vector<std::string>& names);

    Vid add_vertex(const std::string& name, bool latent = false);
    Vid ensure_vertex(const std::string& name);
    void add_edge(const std::string& from, const std::string& to);
    void add_edge(Vid from, Vid to);
    void add_undirected(const std::string& a, const std::string& b);
    void add_undirected(Vid a, Vid b);
    void remove_edge(Vid from, Vid to);
    void remove_undirected(Vid a, Vid b);

    [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }
    [[nodiscard]] const std::string& name(Vid v) const { return names_.at(v); }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] bool has_vertex(const std::string& name) const noexcept;
    [[nodiscard]] Vid index(const std::string& name) const;

    [[nodiscard]] bool latent(Vid v) const { return latent_.at(v) != 0; }
    void set_latent(Vid v, bool on) { latent_.at(v) = on ? 1 : 0; }
    [[nodiscard]] std::optional<long long> stamp(Vid v) const { return stamps_.at(v); }
    void set_stamp(Vid v, std::optional<long long> ts) { stamps_.at(v) = ts; }

    [[nodiscard]] bool has_edge(Vid from, Vid to) const;
    [[nodiscard]] bool has_undirected(Vid a, Vid b) const;
    [[nodiscard]] bool adjacent(Vid a, Vid b) const;

    [[nodiscard]] const std::set<std::pair<Vid, Vid>>& edges() const noexcept { return directed_; }
    [[nodiscard]] const std::set<std::pair<Vid, Vid>>& undirected_edges() const noexcept { return undirected_; }

    [[nodiscard]] std::vector<Vid> parents(Vid v) const;
    [[nodiscard]] std::vector<Vid> children(Vid v) const;
    [[nodiscard]] std::vector<Vid> undirected_neighbors(Vid v) const;
    [[nodiscard]] std::vector<Vid> descendants(Vid v) const;  // excludes v
    [[nodiscard]] std::vector<Vid> topological_order() const;
    [[nodiscard]] bool reaches(Vid from, Vid to) const;  // directed path, length >= 0

    bool operator==(const Dag& o) const;

private:
    std::vector<std::string> names_;
    std::vector<char> latent_;
    std::vector<std::optional<long long>> stamps_;
    std::set<std::pair<Vid, Vid>> directed_;
    std::set<std::pair<Vid, Vid>> undirected_;  // stored as (min, max)
    std::vector<std::vector<Vid>> par_, chi_;
};

using Pdag = Dag;

enum class Step { forward, backward, undirected };  // a -> b, a <- b, a -- b

struct Trail {
    std::vector<Vid> vertices;
    std::vector<Step> steps;  // steps[i] joins vertices[i] and vertices[i+1]

    [[nodiscard]] std::string to_string(const Dag& g) const;
    [[nodiscard]] bool is_collider(std::size_t i) const;  // interior position i
};

[[nodiscard]] std::vector<Trail> enumerate_trails(const Dag& g, const std::string& a, const std::string& b,
                                                  std::size_t max_len);
[[nodiscard]] bool trail_active(const Dag& g, const Trail& t, const std::vector<char>& in_z);

[[nodiscard]] bool d_separated(const Dag& g, Vid a, Vid b, const std::vector<Vid>& given);
[[nodiscard]] bool d_separated(const Dag& g, const std::string& a, const std::string& b,
                               const std::vector<std::string>& given);

[[nodiscard]] std::vector<std::string> markov_blanket(const Dag& g, const std::string& v);
[[nodiscard]] Pdag skeleton(const Dag& g);

struct VStructure {
    Vid a, c, b;  // a -> c <- b with a < b nonadjacent
    auto operator<=>(const VStructure&) const = default;
};
[[nodiscard]] std::set<VStructure> v_structures(const Dag& g);
[[nodiscard]] std::vector<Dag> equivalence_class(const Dag& g, std::size_t max_members = 1000000);

[[nodiscard]] Pdag orient_with_timestamps(const Pdag& sk, const std::map<std::string, long long>& stamps);

enum class CutMode { edge, incoming };
[[nodiscard]] Dag cut_effect(const Dag& g, const std::string& x, const std::string& y, CutMode mode);

enum class Verdict { valid, invalid, conditional };
[[nodiscard]] const char* to_string(Verdict v) noexcept;

struct IvCandidateReport {
    std::string candidate;
    bool g1_holds = false;
    bool g2_holds = false;
    Verdict verdict = Verdict::invalid;
    std::vector<std::string> required_controls;
    std::optional<Trail> g1_witness_trail;
    std::vector<std::string> g1_witness_given;
    std::optional<std::vector<std::string>> g2_separating_set;
    std::string witness_text;
};

struct IvOptions {
    std::size_t subset_cap = 14;
    std::size_t max_extra_controls = 4;
    bool parallel = true;
};

[[nodiscard]] std::vector<IvCandidateReport> iv_candidates(const Dag& g, const std::string& x, const std::string& y,
                                                           const std::vector<std::string>& controls,
                                                           const IvOptions& opt = {});
[[nodiscard]] nlohmann::ordered_json to_json(const IvCandidateReport& r, const Dag& g);

struct BackdoorTrail {
    Trail trail;
    std::vector<std::vector<std::string>> minimal_blocking_sets;
};
[[nodiscard]] std::vector<BackdoorTrail> backdoor_paths(const Dag& g, const std::string& z, const std::string& y,
                                                        const std::string& via);

// Exhaustive scan used by G1/G2: smallest mask over `pool` (added to `base`) whose separation status
// differs from `want_separated`; nullopt when every subset agrees.
[[nodiscard]] std::optional<std::uint64_t> first_subset_violation(const Dag& g, Vid a, Vid b,
                                                                  const std::vector<Vid>& base,
                                                                  const std::vector<Vid>& pool, bool want_separated);
[[nodiscard]] std::optional<std::uint64_t> first_subset_violation_serial(const Dag& g, Vid a, Vid b,
                                                                         const std::vector<Vid>& base,
                                                                         const std::vector<Vid>& pool,
                                                                         bool want_separated);

// Plain-text edge list ("a -> b", "a -- b", "node a ts=1990 latent") and DOT output.
[[nodiscard]] Dag parse_graph(const std::string& text);
[[nodiscard]] Dag load_graph(const std::string& path);
[[nodiscard]] std::string format_graph(const Dag& g);
[[nodiscard]] std::string to_dot(const Dag& g, const std::string& graph_name = "G");
[[nodiscard]] nlohmann::ordered_json to_json(const Dag& g);

}  // namespace mbiv
