#include "mbiv/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mbiv/error.hpp"

namespace mbiv {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kSchemaVersion = "1";
constexpr const char* kToolVersion = "0.1.0";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(b, e - b + 1);
    if (out.size() >= 2 && (out.front() == '"' || out.front() == '\'') && out.back() == out.front())
        out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw UsageError("setting '" + key + "' expects a number, got '" + v + "'");
    return out;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw UsageError("setting '" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

long long to_stamp(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw UsageError("timestamp for '" + key + "' must be an integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw UsageError("setting '" + key + "' expects true/false, got '" + v + "'");
}

template <class F>
auto stage(const char* label, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(label) + ": " + e.what());
    }
}

class Stopwatch {
public:
    explicit Stopwatch(ojson& sink) : sink_(sink) {}
    void lap(const std::string& name) {
        const auto now = std::chrono::steady_clock::now();
        sink_[name] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }

private:
    ojson& sink_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::vector<std::string> ordered_subset(const std::vector<std::string>& order, const std::set<std::string>& keep) {
    std::vector<std::string> out;
    for (const auto& s : order)
        if (keep.count(s)) out.push_back(s);
    return out;
}

struct SelectionBlock {
    SelectionResult solar_fit;
    SelectionResult lasso_fit;
    SelectionResult enet_fit;
};

SelectionBlock run_selectors(const Dataset& ds, const std::string& response, const std::vector<std::string>& cands,
                             const PipelineConfig& cfg) {
    const Eigen::VectorXd y = ds.values(response);
    const Eigen::MatrixXd X = ds.matrix(cands);
    SolarOptions so = cfg.solar;
    so.seed = cfg.seed;
    CvOptions co;
    co.folds = cfg.cv_folds;
    co.grid_size = cfg.cv_grid;
    co.seed = cfg.seed;
    SelectionBlock b;
    b.solar_fit = solar(y, X, cands, so);
    co.algorithm = CvAlgorithm::lasso;
    b.lasso_fit = cv_select(y, X, cands, co);
    co.algorithm = CvAlgorithm::elastic_net;
    b.enet_fit = cv_select(y, X, cands, co);
    return b;
}

ojson block_json(const SelectionBlock& b) {
    ojson j;
    j["solar"] = to_json(b.solar_fit);
    j["cv_lasso"] = to_json(b.lasso_fit);
    j["cv_elastic_net"] = to_json(b.enet_fit);
    return j;
}

std::string join(const std::vector<std::string>& v, const std::string& sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string cell(const SelectionResult& s, const std::string& name) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%s", fmt6(s.score_of(name)).c_str(), s.selects(name) ? "*" : "");
    return buf;
}

}  // namespace

// ---------------------------------------------------------------- configuration

void PipelineConfig::set(const std::string& key_in, const std::string& value_in) {
    const std::string key = trim(key_in);
    const std::string v = trim(value_in);
    if (key == "input") {
        input = v;
    } else if (key == "scenario") {
        scenario = v;
    } else if (key.rfind("scenario.", 0) == 0) {
        scenario_params[key.substr(9)] = to_double(key, v);
    } else if (key == "rows" || key == "n") {
        rows = to_count(key, v);
    } else if (key == "header") {
        header = to_bool(key, v);
    } else if (key == "response") {
        response = v;
    } else if (key == "stamps") {
        for (const auto& item : split_list(v)) {
            const auto c = item.find(':');
            if (c == std::string::npos) throw UsageError("stamps entries look like name:stamp, got '" + item + "'");
            stamps[trim(item.substr(0, c))] = to_stamp(item, trim(item.substr(c + 1)));
        }
    } else if (key.rfind("ts.", 0) == 0) {
        stamps[key.substr(3)] = to_stamp(key, v);
    } else if (key == "log") {
        if (v == "auto") {
            log_mode = LogMode::automatic;
        } else if (v == "none" || v.empty()) {
            log_mode = LogMode::none;
        } else {
            log_mode = LogMode::listed;
            log_columns = split_list(v);
        }
    } else if (key == "standardize") {
        standardize = to_bool(key, v);
    } else if (key == "isis.B") {
        isis.B = to_count(key, v);
    } else if (key == "isis.threshold") {
        isis.threshold = to_double(key, v);
    } else if (key == "isis.keep_fraction") {
        isis.keep_fraction = to_double(key, v);
    } else if (key == "isis.max_rounds") {
        isis.max_rounds = to_count(key, v);
    } else if (key == "solar.K") {
        solar.K = to_count(key, v);
    } else if (key == "solar.fraction") {
        solar.fraction = to_double(key, v);
    } else if (key == "solar.c") {
        solar.c = to_double(key, v);
    } else if (key == "cv.folds") {
        cv_folds = to_count(key, v);
    } else if (key == "cv.grid") {
        cv_grid = to_count(key, v);
    } else if (key == "grouping_cutoff") {
        grouping_cutoff = to_double(key, v);
    } else if (key == "subset_cap") {
        subset_cap = to_count(key, v);
    } else if (key == "seed") {
        seed = to_count(key, v);
    } else if (key == "out") {
        out_dir = v;
    } else if (key == "rule") {
        if (v == "intersection")
            union_rule = false;
        else if (v == "union")
            union_rule = true;
        else
            throw UsageError("rule must be intersection or union");
    } else if (key == "structure_graph") {
        structure_graph = v;
    } else {
        throw UsageError("unknown pipeline setting '" + key + "'");
    }
}

void PipelineConfig::validate() const {
    if (input.has_value() == scenario.has_value()) throw UsageError("set exactly one of input= or scenario=");
    if (scenario && rows < 2) throw UsageError("scenario runs need rows >= 2");
    if (input && response.empty()) throw UsageError("response= is required for CSV input");
    if (!(grouping_cutoff > 0.0 && grouping_cutoff < 1.0)) throw UsageError("grouping_cutoff must lie in (0, 1)");
    if (cv_folds < 2) throw UsageError("cv.folds must be at least 2");
    if (solar.K < 1) throw UsageError("solar.K must be at least 1");
}

PipelineConfig parse_pipeline_config(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(no) + " is not key=value: '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        cfg.set(key, line.substr(eq + 1));
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_pipeline_config(ss.str());
}

ojson to_json(const PipelineConfig& cfg) {
    ojson j;
    j["input"] = cfg.input ? ojson(*cfg.input) : ojson(nullptr);
    j["scenario"] = cfg.scenario ? ojson(*cfg.scenario) : ojson(nullptr);
    j["scenario_params"] = cfg.scenario_params;
    j["rows"] = cfg.rows;
    j["response"] = cfg.response;
    j["stamps"] = cfg.stamps;
    j["log"] = cfg.log_mode == LogMode::automatic ? ojson("auto")
               : cfg.log_mode == LogMode::none    ? ojson("none")
                                                  : ojson(cfg.log_columns);
    j["standardize"] = cfg.standardize;
    j["isis"] = {{"B", cfg.isis.B},
                 {"threshold", cfg.isis.threshold},
                 {"keep_fraction", cfg.isis.keep_fraction ? ojson(*cfg.isis.keep_fraction) : ojson(nullptr)},
                 {"max_rounds", cfg.isis.max_rounds}};
    j["solar"] = {{"K", cfg.solar.K},
                  {"fraction", cfg.solar.fraction},
                  {"c", cfg.solar.c ? ojson(*cfg.solar.c) : ojson(nullptr)}};
    j["cv"] = {{"folds", cfg.cv_folds}, {"grid", cfg.cv_grid}};
    j["grouping_cutoff"] = cfg.grouping_cutoff;
    j["subset_cap"] = cfg.subset_cap;
    j["seed"] = cfg.seed;
    j["rule"] = cfg.union_rule ? "union" : "intersection";
    j["structure_graph"] = cfg.structure_graph ? ojson(*cfg.structure_graph) : ojson(nullptr);
    return j;
}

// ---------------------------------------------------------------- run

PipelineReport run_pipeline(const PipelineConfig& cfg_in) {
    PipelineConfig cfg = cfg_in;
    cfg.validate();
    PipelineReport rep;
    Stopwatch clock(rep.timings);
    ojson& J = rep.json;
    J["schema_version"] = kSchemaVersion;
    J["tool"] = {{"name", "mbiv"}, {"version", kToolVersion}};
    auto& notes = rep.notes;

    // Ingestion.
    std::optional<Scenario> scen;
    Dataset raw = stage("ingest", [&] {
        if (cfg.scenario) {
            scen = make_scenario(*cfg.scenario, cfg.scenario_params);
            if (cfg.response.empty()) cfg.response = scen->response;
            for (const auto& [k, v] : scen->stamps)
                if (!cfg.stamps.count(k)) cfg.stamps[k] = v;
            return sample(scen->sem, cfg.rows, cfg.seed);
        }
        return load_csv(*cfg.input, cfg.header);
    });
    J["config"] = to_json(cfg);
    if (!raw.has(cfg.response)) throw DataError("ingest: response column '" + cfg.response + "' not found");
    for (const auto& [k, _] : cfg.stamps)
        if (!raw.has(k)) throw DataError("ingest: timestamp refers to unknown column '" + k + "'");
    J["data"] = {{"source", cfg.scenario ? "scenario:" + *cfg.scenario : *cfg.input},
                 {"rows", raw.rows()},
                 {"columns", raw.names()},
                 {"response", cfg.response}};
    if (scen) J["data"]["scenario_params"] = scen->params;
    clock.lap("ingest");

    // Transforms: the linear form, plus a logged form when any column qualifies.
    Dataset linear = cfg.standardize ? standardize(raw, raw.names()) : raw;
    std::optional<Dataset> logged;
    std::vector<std::string> log_cols;
    stage("transform", [&] {
        if (cfg.log_mode == LogMode::listed) {
            log_cols = cfg.log_columns;
        } else if (cfg.log_mode == LogMode::automatic) {
            for (const auto& c : raw.columns())
                if ((c.values.array() > 0.0).all()) log_cols.push_back(c.name);
        }
        if (!log_cols.empty()) {
            Dataset l = log_transform(raw, log_cols);
            logged = cfg.standardize ? standardize(l, l.names()) : l;
        }
        return 0;
    });
    J["transforms"] = {{"logged_columns", log_cols}, {"standardize", cfg.standardize}};
    if (!logged) notes.push_back("no column qualifies for a log transform; the final selection uses the linear run only");
    clock.lap("transform");

    // Screening.
    std::vector<std::string> cands;
    for (const auto& nm : raw.names())
        if (nm != cfg.response) cands.push_back(nm);
    if (cands.empty()) throw DataError("select: no candidate columns besides the response");
    const double n = static_cast<double>(raw.rows());
    if (static_cast<double>(cands.size()) >= n / 2.0) {
        IsisOptions io = cfg.isis;
        io.seed = cfg.seed;
        const SelectionResult scr =
            stage("screen", [&] { return isis_bootstrap(linear.values(cfg.response), linear.matrix(cands), cands, io); });
        J["screening"] = to_json(scr);
        cands = scr.selected;
        if (cands.empty()) notes.push_back("screening retained no candidate");
    } else {
        J["screening"] = {{"skipped", true}, {"reason", "p < n/2"}};
    }
    clock.lap("screen");

    // Selection on both forms.
    std::set<std::string> mb_set;
    std::optional<SelectionBlock> lin_sel, log_sel;
    if (!cands.empty()) {
        lin_sel = stage("select", [&] { return run_selectors(linear, cfg.response, cands, cfg); });
        if (logged) log_sel = stage("select (logged)", [&] { return run_selectors(*logged, cfg.response, cands, cfg); });
        std::set<std::string> a(lin_sel->solar_fit.selected.begin(), lin_sel->solar_fit.selected.end());
        if (log_sel) {
            std::set<std::string> b(log_sel->solar_fit.selected.begin(), log_sel->solar_fit.selected.end());
            for (const auto& s : cands)
                if (cfg.union_rule ? (a.count(s) || b.count(s)) : (a.count(s) && b.count(s))) mb_set.insert(s);
        } else {
            mb_set = a;
        }
    }
    {
        ojson sj;
        sj["candidates"] = cands;
        sj["linear"] = lin_sel ? block_json(*lin_sel) : ojson(nullptr);
        sj["logged"] = log_sel ? block_json(*log_sel) : ojson(nullptr);
        sj["rule"] = cfg.union_rule ? "union" : "intersection";
        sj["markov_blanket"] = ordered_subset(cands, mb_set);
        J["selection"] = std::move(sj);
    }
    clock.lap("select");

    // Grouping diagnostics and rectification.
    std::vector<GroupReport> groups;
    SelectionResult mb_sel;
    mb_sel.algorithm = "markov_blanket";
    mb_sel.candidates = cands;
    for (const auto& c : cands) mb_sel.scores.push_back(mb_set.count(c) ? 1.0 : 0.0);
    mb_sel.selected = ordered_subset(cands, mb_set);
    if (!mb_sel.selected.empty()) {
        const Dataset cand_ds = linear.select(cands);
        stage("groups", [&] {
            for (const auto& a : mb_sel.selected) groups.push_back(grouping_diagnostic(cand_ds, a, cfg.grouping_cutoff));
            return 0;
        });
    }
    const SelectionResult rect = rectify(mb_sel, groups);
    rep.final_mb = rect.selected;
    {
        auto gj = ojson::array();
        for (const auto& g : groups) gj.push_back(to_json(g));
        J["groups"] = std::move(gj);
        J["final_markov_blanket"] = rep.final_mb;
    }
    clock.lap("groups");

    if (rep.final_mb.empty()) {
        rep.no_selection = true;
        J["verdict"] = "no selection";
        notes.push_back("the Markov blanket of '" + cfg.response + "' is empty; later stages skipped");
    } else {
        J["verdict"] = "selected";
    }

    // Orientation of the Markov-blanket graph by timestamps.
    ojson orient_log = ojson::array();
    ojson simult = ojson::array();
    rep.data_graph = Dag();
    if (!rep.no_selection) {
        stage("orient", [&] {
            Dag& g = rep.data_graph;
            g.add_vertex(cfg.response);
            for (const auto& m : rep.final_mb) g.add_vertex(m);
            for (Vid v = 0; v < g.size(); ++v)
                if (auto it = cfg.stamps.find(g.name(v)); it != cfg.stamps.end()) g.set_stamp(v, it->second);
            const auto rs = cfg.stamps.find(cfg.response);
            std::vector<std::string> earlier, later;
            for (const auto& m : rep.final_mb) {
                const auto ms = cfg.stamps.find(m);
                if (rs == cfg.stamps.end() || ms == cfg.stamps.end()) {
                    g.add_undirected(cfg.response, m);
                    orient_log.push_back("'" + m + "' -- '" + cfg.response + "' left undirected: missing timestamp");
                } else if (ms->second < rs->second) {
                    earlier.push_back(m);
                } else if (ms->second > rs->second) {
                    later.push_back(m);
                } else {
                    g.add_undirected(cfg.response, m);
                    orient_log.push_back("'" + m + "' -- '" + cfg.response +
                                         "' left undirected: equal timestamps (possible simultaneity)");
                }
            }
            SolarOptions so = cfg.solar;
            so.seed = cfg.seed;
            if (!earlier.empty()) {
                const SelectionResult s =
                    solar(linear.values(cfg.response), linear.matrix(earlier), earlier, so);
                for (const auto& e : earlier) {
                    if (s.selects(e)) {
                        g.add_edge(e, cfg.response);
                        orient_log.push_back(e + " -> " + cfg.response + " (earlier, selected for " + cfg.response + ")");
                    } else {
                        orient_log.push_back("'" + e + "' kept as a co-parent candidate (earlier, not selected for " +
                                             cfg.response + ")");
                    }
                }
            }
            for (const auto& c : later) {
                g.add_edge(cfg.response, c);
                orient_log.push_back(cfg.response + " -> " + c + " (later timestamp)");
                const long long cs = cfg.stamps.at(c);
                std::vector<std::string> pool;
                for (Vid v = 0; v < g.size(); ++v) {
                    const auto& nm = g.name(v);
                    if (nm == c) continue;
                    auto it = cfg.stamps.find(nm);
                    if (it != cfg.stamps.end() && it->second < cs) pool.push_back(nm);
                }
                const SelectionResult s = solar(linear.values(c), linear.matrix(pool), pool, so);
                for (const auto& q : pool) {
                    if (!s.selects(q) || q == cfg.response) continue;
                    const Vid qv = g.index(q), cv = g.index(c);
                    if (!g.adjacent(qv, cv)) {
                        g.add_edge(qv, cv);
                        orient_log.push_back(q + " -> " + c + " (selected for " + c + ")");
                    }
                }
                if (s.selects(cfg.response)) {
                    simult.push_back({{"equation", c + " ~ " + join(s.selected, " + ")},
                                      {"downstream", c},
                                      {"response", cfg.response}});
                }
            }
            for (const auto& m : rep.final_mb) {
                const Vid v = g.index(m);
                if (g.parents(v).empty() && g.children(v).empty() && g.undirected_neighbors(v).empty())
                    notes.push_back("'" + m + "' is in the Markov blanket but no edge was oriented for it");
            }
            return 0;
        });
    }
    J["graph"] = {{"data_graph", to_json(rep.data_graph)},
                  {"orientation_log", orient_log},
                  {"simultaneity", simult}};
    clock.lap("orient");

    // Backdoor comparisons for every parent -> response -> child triple.
    auto bj = ojson::array();
    if (!rep.no_selection) {
        const Dag& g = rep.data_graph;
        const Vid r = g.index(cfg.response);
        for (Vid p : g.parents(r)) {
            for (Vid c : g.children(r)) {
                std::vector<std::string> controls;
                for (Vid q : g.parents(c))
                    if (q != r && q != p) controls.push_back(g.name(q));
                try {
                    rep.backdoor.push_back(
                        stage("score", [&] { return compare_backdoor(linear, g.name(p), cfg.response, g.name(c), controls); }));
                    bj.push_back(to_json(rep.backdoor.back()));
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::numeric) throw;
                    notes.push_back(e.what());
                }
            }
        }
    }
    J["backdoor"] = std::move(bj);
    clock.lap("score");

    // Instrument validation and 2SLS.
    std::string structure_source = "data_graph";
    if (scen) {
        rep.structure_graph = scen->structure;
        structure_source = "scenario";
    } else if (cfg.structure_graph) {
        rep.structure_graph = stage("iv", [&] { return load_graph(*cfg.structure_graph); });
        structure_source = *cfg.structure_graph;
    }
    auto ivj = ojson::array();
    const Dag* sg = rep.structure_graph ? &*rep.structure_graph : (rep.no_selection ? nullptr : &rep.data_graph);
    if (sg && sg->has_vertex(cfg.response)) {
        const Vid r = sg->index(cfg.response);
        IvOptions io;
        io.subset_cap = cfg.subset_cap;
        for (Vid c : sg->children(r)) {
            if (sg->latent(c) || !raw.has(sg->name(c))) continue;
            IvStage st;
            st.endogenous = cfg.response;
            st.outcome = sg->name(c);
            for (Vid q : sg->parents(c))
                if (q != r && !sg->latent(q) && raw.has(sg->name(q))) st.controls.push_back(sg->name(q));
            try {
                st.candidates = stage("iv", [&] { return iv_candidates(*sg, st.endogenous, st.outcome, st.controls, io); });
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::data) throw;
                notes.push_back(std::string(e.what()) + "; instrument search skipped for " + st.outcome);
                continue;
            }
            ojson sj;
            sj["endogenous"] = st.endogenous;
            sj["outcome"] = st.outcome;
            sj["controls"] = st.controls;
            auto cj = ojson::array();
            for (const auto& cr : st.candidates) cj.push_back(to_json(cr, *sg));
            sj["candidates"] = std::move(cj);
            auto ej = ojson::array();
            for (const auto& cr : st.candidates) {
                if (cr.verdict == Verdict::invalid) continue;
                if (!raw.has(cr.candidate)) {
                    notes.push_back("instrument '" + cr.candidate + "' has no data column; estimate skipped");
                    continue;
                }
                std::vector<std::string> exog = st.controls;
                for (const auto& rc : cr.required_controls)
                    if (std::find(exog.begin(), exog.end(), rc) == exog.end() && raw.has(rc)) exog.push_back(rc);
                try {
                    IvReport ivr = stage("ivtest", [&] {
                        return endogeneity_tests(linear.values(st.outcome), linear.matrix(exog),
                                                 linear.values(st.endogenous), linear.matrix({cr.candidate}), true,
                                                 exog, st.endogenous, {cr.candidate});
                    });
                    ojson e;
                    e["instrument"] = cr.candidate;
                    e["verdict"] = to_string(cr.verdict);
                    e["exogenous_controls"] = exog;
                    e["endogeneity_detected"] = ivr.test("durbin").p_value < 0.05;
                    e["report"] = to_json(ivr);
                    ej.push_back(std::move(e));
                    st.estimates.emplace_back(cr.candidate, std::move(ivr));
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::numeric) throw;
                    notes.push_back(e.what());
                }
            }
            sj["estimates"] = std::move(ej);
            ivj.push_back(std::move(sj));
            rep.iv.push_back(std::move(st));
        }
    }
    J["iv"] = {{"structure_source", structure_source},
               {"structure_graph", rep.structure_graph ? to_json(*rep.structure_graph) : ojson(nullptr)},
               {"stages", std::move(ivj)}};
    clock.lap("iv");
    J["notes"] = notes;

    // Text projection of the JSON report.
    std::string& T = rep.text;
    T += "mbiv pipeline report (schema " + std::string(kSchemaVersion) + ", seed " + std::to_string(cfg.seed) + ")\n";
    T += "data: " + J["data"]["source"].get<std::string>() + ", " + std::to_string(raw.rows()) + " rows, response " +
         cfg.response + "\n";
    T += "logged columns: " + (log_cols.empty() ? std::string("none") : join(log_cols)) + "\n\n";
    if (J["screening"].contains("skipped"))
        T += "screening: skipped (p < n/2)\n\n";
    else
        T += "screening: kept " + std::to_string(cands.size()) + " candidates\n\n";
    if (lin_sel) {
        T += "selection scores (* = selected)\n";
        char buf[256];
        std::snprintf(buf, sizeof buf, "  %-14s %12s %12s %12s", "variable", "solar", "cv_lasso", "cv_enet");
        T += buf;
        if (log_sel) {
            std::snprintf(buf, sizeof buf, " %12s %12s %12s", "solar_log", "cv_lasso_log", "cv_enet_log");
            T += buf;
        }
        T += "\n";
        for (const auto& c : cands) {
            std::snprintf(buf, sizeof buf, "  %-14s %12s %12s %12s", c.c_str(), cell(lin_sel->solar_fit, c).c_str(),
                          cell(lin_sel->lasso_fit, c).c_str(), cell(lin_sel->enet_fit, c).c_str());
            T += buf;
            if (log_sel) {
                std::snprintf(buf, sizeof buf, " %12s %12s %12s", cell(log_sel->solar_fit, c).c_str(),
                              cell(log_sel->lasso_fit, c).c_str(), cell(log_sel->enet_fit, c).c_str());
                T += buf;
            }
            T += "\n";
        }
        T += "\n";
    }
    T += "markov blanket (" + std::string(cfg.union_rule ? "union" : "intersection") + "): " +
         (rep.final_mb.empty() ? std::string("no selection") : join(rep.final_mb)) + "\n";
    for (const auto& g : groups) {
        if (g.members.empty()) continue;
        T += "  group of " + g.anchor + ": " + join(g.members) + " (sum |coef| " + fmt6(g.abs_coef_sum) + ")" +
             (g.flag ? " flagged" : "") + "\n";
    }
    T += "\n";
    if (!rep.no_selection) {
        T += "data graph\n";
        std::istringstream gl(format_graph(rep.data_graph));
        for (std::string l; std::getline(gl, l);) T += "  " + l + "\n";
        for (const auto& s : simult) T += "  simultaneity: " + s["equation"].get<std::string>() + "\n";
        T += "\n";
    }
    for (const auto& d : rep.backdoor) T += to_text(d) + "\n";
    for (const auto& st : rep.iv) {
        T += "instrument candidates for " + st.endogenous + " in the equation of " + st.outcome;
        if (!st.controls.empty()) T += " (controls: " + join(st.controls) + ")";
        T += "\n";
        for (const auto& cr : st.candidates) {
            T += "  " + cr.candidate + ": " + to_string(cr.verdict);
            if (!cr.required_controls.empty()) T += " given " + join(cr.required_controls);
            if (!cr.witness_text.empty()) T += "; " + cr.witness_text;
            T += "\n";
        }
        for (const auto& [z, ivr] : st.estimates) T += "\n" + to_text(ivr);
        T += "\n";
    }
    for (const auto& nt : notes) T += "note: " + nt + "\n";
    clock.lap("report");
    return rep;
}

void write_report(const PipelineReport& rep, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
    auto put = [&](const std::string& name, const std::string& body) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw DataError("cannot write '" + (fs::path(dir) / name).string() + "'");
        f << body;
    };
    put("report.json", rep.json.dump(2) + "\n");
    put("report.txt", rep.text);
    put("graph.txt", format_graph(rep.data_graph));
    put("graph.dot", to_dot(rep.data_graph, "markov_blanket"));
    if (rep.structure_graph) {
        put("structure_graph.txt", format_graph(*rep.structure_graph));
        put("structure_graph.dot", to_dot(*rep.structure_graph, "structure"));
    }
    put("timings.json", rep.timings.dump(2) + "\n");
}

}  // namespace mbiv
