#include <fstream>
#include <sstream>

#include "mbiv/error.hpp"
#include "mbiv/graph.hpp"

namespace mbiv {

namespace {

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

}  // namespace

Dag parse_graph(const std::string& text) {
    Dag g;
    std::istringstream in(text);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        const auto tk = tokens(line);
        if (tk.empty()) continue;
        const std::string where = " (line " + std::to_string(no) + ")";
        if (tk[0] == "node") {
            if (tk.size() < 2) throw DataError("node declaration without a name" + where);
            const Vid v = g.ensure_vertex(tk[1]);
            for (std::size_t k = 2; k < tk.size(); ++k) {
                if (tk[k] == "latent") {
                    g.set_latent(v, true);
                } else if (tk[k].rfind("ts=", 0) == 0) {
                    try {
                        std::size_t used = 0;
                        const long long ts = std::stoll(tk[k].substr(3), &used);
                        if (used != tk[k].size() - 3) throw std::invalid_argument("trailing");
                        g.set_stamp(v, ts);
                    } catch (const std::exception&) {
                        throw DataError("bad timestamp '" + tk[k] + "'" + where);
                    }
                } else {
                    throw DataError("unknown node attribute '" + tk[k] + "'" + where);
                }
            }
            continue;
        }
        if (tk.size() != 3 || (tk[1] != "->" && tk[1] != "--"))
            throw DataError("expected 'a -> b', 'a -- b' or 'node a'" + where);
        const Vid a = g.ensure_vertex(tk[0]);
        const Vid b = g.ensure_vertex(tk[2]);
        try {
            if (tk[1] == "->")
                g.add_edge(a, b);
            else
                g.add_undirected(a, b);
        } catch (const DataError& e) {
            throw DataError(std::string(e.what()) + where);
        }
    }
    return g;
}

Dag load_graph(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open graph file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_graph(ss.str());
}

std::string format_graph(const Dag& g) {
    std::string out;
    for (Vid v = 0; v < g.size(); ++v) {
        out += "node " + g.name(v);
        if (g.stamp(v)) out += " ts=" + std::to_string(*g.stamp(v));
        if (g.latent(v)) out += " latent";
        out += '\n';
    }
    for (const auto& [a, b] : g.edges()) out += g.name(a) + " -> " + g.name(b) + "\n";
    for (const auto& [a, b] : g.undirected_edges()) out += g.name(a) + " -- " + g.name(b) + "\n";
    return out;
}

std::string to_dot(const Dag& g, const std::string& graph_name) {
    std::string out = "digraph " + graph_name + " {\n";
    for (Vid v = 0; v < g.size(); ++v) {
        out += "  \"" + g.name(v) + "\"";
        std::string attrs;
        if (g.latent(v)) attrs += "style=dashed";
        if (g.stamp(v)) attrs += std::string(attrs.empty() ? "" : ", ") + "xlabel=\"ts=" + std::to_string(*g.stamp(v)) + "\"";
        if (!attrs.empty()) out += " [" + attrs + "]";
        out += ";\n";
    }
    for (const auto& [a, b] : g.edges()) out += "  \"" + g.name(a) + "\" -> \"" + g.name(b) + "\";\n";
    for (const auto& [a, b] : g.undirected_edges())
        out += "  \"" + g.name(a) + "\" -> \"" + g.name(b) + "\" [dir=none];\n";
    out += "}\n";
    return out;
}

nlohmann::ordered_json to_json(const Dag& g) {
    nlohmann::ordered_json j;
    auto vs = nlohmann::ordered_json::array();
    for (Vid v = 0; v < g.size(); ++v) {
        nlohmann::ordered_json e{{"name", g.name(v)}};
        if (g.stamp(v)) e["ts"] = *g.stamp(v);
        if (g.latent(v)) e["latent"] = true;
        vs.push_back(e);
    }
    j["vertices"] = vs;
    auto d = nlohmann::ordered_json::array();
    for (const auto& [a, b] : g.edges()) d.push_back({g.name(a), g.name(b)});
    j["directed"] = d;
    auto u = nlohmann::ordered_json::array();
    for (const auto& [a, b] : g.undirected_edges()) u.push_back({g.name(a), g.name(b)});
    j["undirected"] = u;
    return j;
}

}  // namespace mbiv
