#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <omp.h>
#include <sstream>

#include "mbiv/dataset.hpp"
#include "mbiv/error.hpp"
#include "mbiv/graph.hpp"
#include "mbiv/pipeline.hpp"
#include "mbiv/regress.hpp"
#include "mbiv/score.hpp"
#include "mbiv/select.hpp"
#include "mbiv/sem.hpp"

using namespace mbiv;
using ojson = nlohmann::ordered_json;

namespace {

struct Common {
    std::uint64_t seed = 1;
    std::string out = "-";
    std::string format = "text";
    int threads = 0;
};

void emit(const Common& c, const std::string& body) {
    if (c.out == "-") {
        std::cout << body;
        if (!body.empty() && body.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw DataError("cannot write '" + c.out + "'");
    f << body;
}

std::string list_text(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += x + "\n";
    return s;
}

std::string selection_text(const SelectionResult& s) {
    std::string out = s.algorithm + " selection\n";
    for (std::size_t i = 0; i < s.candidates.size(); ++i) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "  %-20s %12s%s\n", s.candidates[i].c_str(), fmt6(s.scores[i]).c_str(),
                      s.selects(s.candidates[i]) ? "  selected" : "");
        out += buf;
    }
    out += "selected:";
    for (const auto& v : s.selected) out += " " + v;
    out += "\n";
    for (const auto& n : s.notes) out += "note: " + n + "\n";
    return out;
}

std::string selection_csv(const SelectionResult& s) {
    std::string out = "variable,score,selected\n";
    for (std::size_t i = 0; i < s.candidates.size(); ++i)
        out += s.candidates[i] + "," + format_double(s.scores[i]) + "," + (s.selects(s.candidates[i]) ? "1" : "0") + "\n";
    return out;
}

void emit_selection(const Common& c, const SelectionResult& s) {
    if (c.format == "json")
        emit(c, to_json(s).dump(2));
    else if (c.format == "csv")
        emit(c, selection_csv(s));
    else
        emit(c, selection_text(s));
}

void emit_graph(const Common& c, const Dag& g) {
    if (c.format == "json")
        emit(c, to_json(g).dump(2));
    else if (c.format == "dot")
        emit(c, to_dot(g));
    else
        emit(c, format_graph(g));
}

ScenarioParams parse_params(const std::vector<std::string>& kvs) {
    ScenarioParams p;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + kv + "'");
        try {
            std::size_t used = 0;
            const std::string v = kv.substr(eq + 1);
            p[kv.substr(0, eq)] = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing");
        } catch (const std::invalid_argument&) {
            throw UsageError("--param value for '" + kv.substr(0, eq) + "' is not a number");
        }
    }
    return p;
}

std::map<std::string, long long> parse_stamps(const std::vector<std::string>& items) {
    std::map<std::string, long long> out;
    for (const auto& it : items) {
        const auto c = it.find(':');
        if (c == std::string::npos) throw UsageError("--stamps entries look like name:stamp, got '" + it + "'");
        try {
            out[it.substr(0, c)] = std::stoll(it.substr(c + 1));
        } catch (const std::exception&) {
            throw UsageError("bad timestamp in '" + it + "'");
        }
    }
    return out;
}

Dataset load_data(const std::string& path, bool no_header, const std::vector<std::string>& log_cols) {
    Dataset ds = load_csv(path, !no_header);
    if (log_cols.size() == 1 && log_cols[0] == "auto") {
        std::vector<std::string> pos;
        for (const auto& c : ds.columns())
            if ((c.values.array() > 0.0).all()) pos.push_back(c.name);
        return pos.empty() ? ds : log_transform(ds, pos);
    }
    return log_cols.empty() ? ds : log_transform(ds, log_cols);
}

std::vector<std::string> candidates_of(const Dataset& ds, const std::string& response,
                                       const std::vector<std::string>& columns) {
    if (!ds.has(response)) throw DataError("response column '" + response + "' not found");
    if (!columns.empty()) return columns;
    std::vector<std::string> out;
    for (const auto& n : ds.names())
        if (n != response) out.push_back(n);
    return out;
}

ojson iv_candidates_json(const Dag& g, const std::vector<IvCandidateReport>& reps) {
    auto arr = ojson::array();
    for (const auto& r : reps) arr.push_back(to_json(r, g));
    return arr;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markov-blanket selection, causal graphs and instrumental-variable diagnostics"};
    app.require_subcommand(1);
    app.fallthrough();
    Common com;
    app.add_option("--seed", com.seed, "Random seed")->capture_default_str();
    app.add_option("--out", com.out, "Output file ('-' for stdout; a directory for pipeline)");
    app.add_option("--format", com.format, "Output format")
        ->check(CLI::IsMember({"json", "csv", "text", "dot"}))
        ->capture_default_str();
    app.add_option("--threads", com.threads, "Cap on worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Sample a canned scenario or SEM config to CSV");
    std::string scen_name, sem_path;
    std::size_t rows = 1000;
    std::vector<std::string> params;
    std::optional<double> w1, w2;
    sim->add_option("scenario", scen_name, "Scenario name");
    sim->add_option("--sem", sem_path, "SEM config file instead of a scenario")->check(CLI::ExistingFile);
    sim->add_option("-n,--rows", rows, "Rows to draw")->check(CLI::PositiveNumber);
    sim->add_option("--param", params, "Scenario parameter key=value (repeatable)");
    sim->add_option("--w1", w1, "irc: weight of x1 in x3");
    sim->add_option("--w2", w2, "irc: weight of x2 in x3");
    bool list_scen = false;
    sim->add_flag("--list", list_scen, "List scenario names");

    // screen
    auto* scr = app.add_subcommand("screen", "Bootstrap ISIS screening");
    std::string data_path, response;
    bool no_header = false;
    std::vector<std::string> columns, log_cols;
    IsisOptions isis;
    std::optional<double> keep_fraction, moderate;
    auto data_opts = [&](CLI::App* s) {
        s->add_option("--data", data_path, "CSV file")->required()->check(CLI::ExistingFile);
        s->add_flag("--no-header", no_header, "CSV has no header row");
        s->add_option("--log", log_cols, "Columns to log-transform ('auto' = every positive column)")->delimiter(',');
    };
    data_opts(scr);
    scr->add_option("--response,-y", response, "Response column")->required();
    scr->add_option("--columns", columns, "Candidate columns (default: all others)")->delimiter(',');
    scr->add_option("--B", isis.B, "Bootstrap replications")->capture_default_str();
    scr->add_option("--threshold", isis.threshold, "Inclusion frequency threshold")->capture_default_str();
    scr->add_option("--keep-fraction", keep_fraction, "Per-round keep size as a fraction of n");
    scr->add_option("--max-rounds", isis.max_rounds, "Refitting rounds")->capture_default_str();
    scr->add_option("--moderate-corr", moderate, "Also keep columns with |corr| above this cutoff");

    // select
    auto* sel = app.add_subcommand("select", "Variable selection (solar, cv-lasso, cv-en)");
    data_opts(sel);
    std::string algorithm = "solar";
    SolarOptions so;
    std::optional<double> solar_c;
    std::size_t folds = 10, grid = 100;
    sel->add_option("--response,-y", response, "Response column")->required();
    sel->add_option("--columns", columns, "Candidate columns (default: all others)")->delimiter(',');
    sel->add_option("--algorithm", algorithm, "Selector")
        ->check(CLI::IsMember({"solar", "cv-lasso", "cv-en"}))
        ->capture_default_str();
    sel->add_option("--K", so.K, "solar: subsamples")->capture_default_str();
    sel->add_option("--fraction", so.fraction, "solar: subsample fraction")->capture_default_str();
    sel->add_option("--c", solar_c, "solar: fixed frequency threshold (default: tuned)");
    sel->add_option("--folds", folds, "cv: folds")->capture_default_str();
    sel->add_option("--grid", grid, "cv: lambda grid size")->capture_default_str();

    // diagnose-groups
    auto* grp = app.add_subcommand("diagnose-groups", "Grouping-effect diagnostic and rectified selection");
    data_opts(grp);
    std::vector<std::string> anchors, selection;
    double cutoff = 0.9;
    grp->add_option("--anchor", anchors, "Anchor column(s)")->delimiter(',')->required();
    grp->add_option("--cutoff", cutoff, "|corr| cutoff for group membership")->capture_default_str();
    grp->add_option("--selection", selection, "Selection to rectify")->delimiter(',');
    grp->add_option("--exclude", columns, "Columns to leave out (e.g. the response)")->delimiter(',');

    // graph
    auto* gph = app.add_subcommand("graph", "Graph operations");
    gph->require_subcommand(1);
    std::string graph_path;
    std::vector<std::string> stamps;
    auto* gor = gph->add_subcommand("orient", "Orient undirected edges by timestamps; directed edges are checked");
    gor->add_option("--graph", graph_path, "Graph file")->required()->check(CLI::ExistingFile);
    gor->add_option("--stamps", stamps, "name:stamp pairs (override node ts=)")->delimiter(',');
    auto* gq = gph->add_subcommand("query", "Structural queries");
    std::string what, vertex, qa, qb, via;
    std::size_t max_len = 12;
    gq->add_option("--graph", graph_path, "Graph file")->required()->check(CLI::ExistingFile);
    gq->add_option("--what", what, "Query")
        ->required()
        ->check(CLI::IsMember({"mb", "parents", "children", "descendants", "topo", "skeleton", "vstructures",
                               "equivalence", "trails", "backdoor"}));
    gq->add_option("--vertex,-v", vertex, "Vertex for mb/parents/children/descendants");
    gq->add_option("--a", qa, "Trail/backdoor start");
    gq->add_option("--b", qb, "Trail/backdoor end");
    gq->add_option("--via", via, "backdoor: the endogenous vertex the trail must avoid");
    gq->add_option("--max-len", max_len, "trails: maximal length")->capture_default_str();
    auto* gd = gph->add_subcommand("dsep", "d-separation test");
    std::vector<std::string> given;
    gd->add_option("--graph", graph_path, "Graph file")->required()->check(CLI::ExistingFile);
    gd->add_option("--a", qa, "First vertex")->required();
    gd->add_option("--b", qb, "Second vertex")->required();
    gd->add_option("--given", given, "Conditioning set")->delimiter(',');
    auto* giv = gph->add_subcommand("iv-candidates", "Graphical instrument validation");
    std::string xv, yv;
    std::vector<std::string> controls;
    std::size_t subset_cap = 14;
    giv->add_option("--graph", graph_path, "Graph file")->required()->check(CLI::ExistingFile);
    giv->add_option("--x", xv, "Endogenous regressor")->required();
    giv->add_option("--y", yv, "Outcome")->required();
    giv->add_option("--controls", controls, "Controls already in the equation")->delimiter(',');
    giv->add_option("--subset-cap", subset_cap, "Largest conditioning pool searched exhaustively")->capture_default_str();

    // score-backdoor
    auto* sb = app.add_subcommand("score-backdoor", "Compare models with and without a backdoor edge");
    data_opts(sb);
    std::string parent, mediator, child, criterion;
    sb->add_option("--parent", parent, "Parent of the mediator");
    sb->add_option("--mediator", mediator, "Mediator");
    sb->add_option("--child", child, "Child of the mediator");
    sb->add_option("--controls", controls, "Extra parents of the child")->delimiter(',');
    sb->add_option("--graph", graph_path, "Score this graph instead of a backdoor pair")->check(CLI::ExistingFile);

    // ivtest
    auto* ivt = app.add_subcommand("ivtest", "2SLS with endogeneity tests");
    data_opts(ivt);
    std::string endog;
    std::vector<std::string> instruments, exog;
    bool no_intercept = false;
    ivt->add_option("--y", yv, "Outcome")->required();
    ivt->add_option("--endog", endog, "Endogenous regressor")->required();
    ivt->add_option("--instruments", instruments, "Excluded instruments")->delimiter(',')->required();
    ivt->add_option("--exog", exog, "Exogenous regressors")->delimiter(',');
    ivt->add_flag("--no-intercept", no_intercept, "Fit without an intercept");

    // pipeline
    auto* pip = app.add_subcommand("pipeline", "End-to-end run writing a report directory");
    std::string config_path;
    std::vector<std::string> sets;
    pip->add_option("--config", config_path, "key=value config file");
    pip->add_option("--set", sets, "Override key=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (com.threads > 0) omp_set_num_threads(com.threads);

    try {
        if (*sim) {
            if (list_scen) {
                emit(com, list_text(scenario_names()));
                return 0;
            }
            LinearSem sem;
            if (!sem_path.empty()) {
                if (!scen_name.empty()) throw UsageError("give either a scenario name or --sem, not both");
                sem = load_sem(sem_path);
            } else {
                if (scen_name.empty()) throw UsageError("simulate needs a scenario name or --sem");
                ScenarioParams p = parse_params(params);
                if (w1) p["w1"] = *w1;
                if (w2) p["w2"] = *w2;
                sem = make_scenario(scen_name, p).sem;
            }
            if (com.format == "json") {
                const Dataset ds = sample(sem, rows, com.seed);
                ojson j;
                for (const auto& c : ds.columns()) j[c.name] = std::vector<double>(c.values.begin(), c.values.end());
                emit(com, j.dump());
            } else if (com.format == "dot") {
                emit(com, to_dot(sem.dag));
            } else {
                emit(com, to_csv(sample(sem, rows, com.seed)));
            }
        } else if (*scr) {
            const Dataset ds = load_data(data_path, no_header, log_cols);
            const auto cands = candidates_of(ds, response, columns);
            isis.seed = com.seed;
            isis.keep_fraction = keep_fraction;
            isis.moderate_corr_cutoff = moderate;
            emit_selection(com, isis_bootstrap(ds.values(response), ds.matrix(cands), cands, isis));
        } else if (*sel) {
            const Dataset ds = load_data(data_path, no_header, log_cols);
            const auto cands = candidates_of(ds, response, columns);
            const Eigen::VectorXd y = ds.values(response);
            const Eigen::MatrixXd X = ds.matrix(cands);
            if (algorithm == "solar") {
                so.seed = com.seed;
                so.c = solar_c;
                emit_selection(com, solar(y, X, cands, so));
            } else {
                CvOptions co;
                co.algorithm = algorithm == "cv-lasso" ? CvAlgorithm::lasso : CvAlgorithm::elastic_net;
                co.folds = folds;
                co.grid_size = grid;
                co.seed = com.seed;
                emit_selection(com, cv_select(y, X, cands, co));
            }
        } else if (*grp) {
            Dataset ds = load_data(data_path, no_header, log_cols);
            if (!columns.empty()) {
                std::vector<std::string> keep;
                for (const auto& n : ds.names())
                    if (std::find(columns.begin(), columns.end(), n) == columns.end()) keep.push_back(n);
                ds = ds.select(keep);
            }
            std::vector<GroupReport> reps;
            for (const auto& a : anchors) {
                if (!ds.has(a)) throw DataError("anchor column '" + a + "' not found");
                reps.push_back(grouping_diagnostic(ds, a, cutoff));
            }
            ojson j;
            j["groups"] = ojson::array();
            for (const auto& r : reps) j["groups"].push_back(to_json(r));
            std::optional<SelectionResult> rect;
            if (!selection.empty()) {
                SelectionResult s;
                s.algorithm = "given";
                s.candidates = ds.names();
                for (const auto& n : s.candidates)
                    s.scores.push_back(std::find(selection.begin(), selection.end(), n) != selection.end() ? 1.0 : 0.0);
                for (const auto& n : s.candidates)
                    if (std::find(selection.begin(), selection.end(), n) != selection.end()) s.selected.push_back(n);
                rect = rectify(s, reps);
                j["rectified"] = to_json(*rect);
            }
            if (com.format == "json") {
                emit(com, j.dump(2));
            } else {
                std::string t;
                for (const auto& r : reps) {
                    t += "anchor " + r.anchor + ": ";
                    if (r.members.empty()) {
                        t += "no member above cutoff\n";
                        continue;
                    }
                    for (std::size_t i = 0; i < r.members.size(); ++i)
                        t += (i ? ", " : "") + r.members[i] + " (r=" + fmt6(r.member_corr[i]) + ")";
                    t += "; sum |coef| = " + fmt6(r.abs_coef_sum) + (r.flag ? "  flagged" : "") + "\n";
                    if (r.fit) t += to_text(*r.fit, "  regression of " + r.anchor + " on its group");
                }
                if (rect) {
                    t += "rectified selection:";
                    for (const auto& s : rect->selected) t += " " + s;
                    t += "\n";
                }
                emit(com, t);
            }
        } else if (*gph) {
            const Dag g = load_graph(graph_path);
            if (*gor) {
                std::map<std::string, long long> st;
                for (Vid v = 0; v < g.size(); ++v)
                    if (g.stamp(v)) st[g.name(v)] = *g.stamp(v);
                for (const auto& [k, v] : parse_stamps(stamps)) st[k] = v;
                emit_graph(com, orient_with_timestamps(g, st));
            } else if (*gd) {
                const bool sep = d_separated(g, qa, qb, given);
                emit(com, com.format == "json" ? ojson({{"a", qa}, {"b", qb}, {"given", given}, {"d_separated", sep}}).dump()
                                               : std::string(sep ? "true" : "false"));
            } else if (*giv) {
                IvOptions io;
                io.subset_cap = subset_cap;
                const auto reps = iv_candidates(g, xv, yv, controls, io);
                if (com.format == "json") {
                    emit(com, iv_candidates_json(g, reps).dump(2));
                } else {
                    std::string t;
                    for (const auto& r : reps) {
                        t += r.candidate + ": " + to_string(r.verdict);
                        if (!r.required_controls.empty()) {
                            t += " given";
                            for (const auto& c : r.required_controls) t += " " + c;
                        }
                        if (!r.witness_text.empty()) t += "; " + r.witness_text;
                        t += "\n";
                    }
                    if (reps.empty()) t = "no candidate vertices\n";
                    emit(com, t);
                }
            } else if (*gq) {
                auto need = [](const std::string& v, const char* what) {
                    if (v.empty()) throw UsageError(std::string("this query needs ") + what);
                };
                auto names_of = [&](const std::vector<Vid>& vs) {
                    std::vector<std::string> out;
                    for (auto v : vs) out.push_back(g.name(v));
                    return out;
                };
                auto emit_list = [&](const std::vector<std::string>& v) {
                    emit(com, com.format == "json" ? ojson(v).dump() : list_text(v));
                };
                if (what == "mb") {
                    need(vertex, "--vertex");
                    emit_list(markov_blanket(g, vertex));
                } else if (what == "parents") {
                    need(vertex, "--vertex");
                    emit_list(names_of(g.parents(g.index(vertex))));
                } else if (what == "children") {
                    need(vertex, "--vertex");
                    emit_list(names_of(g.children(g.index(vertex))));
                } else if (what == "descendants") {
                    need(vertex, "--vertex");
                    emit_list(names_of(g.descendants(g.index(vertex))));
                } else if (what == "topo") {
                    emit_list(names_of(g.topological_order()));
                } else if (what == "skeleton") {
                    emit_graph(com, skeleton(g));
                } else if (what == "vstructures") {
                    std::vector<std::string> out;
                    for (const auto& v : v_structures(g))
                        out.push_back(g.name(v.a) + " -> " + g.name(v.c) + " <- " + g.name(v.b));
                    emit_list(out);
                } else if (what == "equivalence") {
                    const auto cls = equivalence_class(g);
                    if (com.format == "json") {
                        auto arr = ojson::array();
                        for (const auto& m : cls) arr.push_back(to_json(m));
                        emit(com, arr.dump(2));
                    } else {
                        std::string t;
                        for (std::size_t i = 0; i < cls.size(); ++i)
                            t += "# member " + std::to_string(i + 1) + "\n" + format_graph(cls[i]);
                        emit(com, t);
                    }
                } else if (what == "trails") {
                    need(qa, "--a");
                    need(qb, "--b");
                    std::vector<std::string> out;
                    for (const auto& t : enumerate_trails(g, qa, qb, max_len)) out.push_back(t.to_string(g));
                    emit_list(out);
                } else {
                    need(qa, "--a");
                    need(qb, "--b");
                    need(via, "--via");
                    const auto bps = backdoor_paths(g, qa, qb, via);
                    if (com.format == "json") {
                        auto arr = ojson::array();
                        for (const auto& b : bps)
                            arr.push_back({{"trail", b.trail.to_string(g)}, {"minimal_blocking_sets", b.minimal_blocking_sets}});
                        emit(com, arr.dump(2));
                    } else {
                        std::string t;
                        for (const auto& b : bps) {
                            t += b.trail.to_string(g) + "  blocked by:";
                            for (const auto& s : b.minimal_blocking_sets) {
                                t += " {";
                                for (std::size_t i = 0; i < s.size(); ++i) t += (i ? ", " : "") + s[i];
                                t += "}";
                            }
                            t += "\n";
                        }
                        emit(com, t);
                    }
                }
            }
        } else if (*sb) {
            const Dataset ds = load_data(data_path, no_header, log_cols);
            if (!graph_path.empty()) {
                const GraphScore s = score_graph(load_graph(graph_path), ds);
                if (com.format == "json") {
                    emit(com, to_json(s).dump(2));
                } else {
                    std::string t = "aic " + fmt6(s.aic) + "\nbic " + fmt6(s.bic) + "\nbge " + fmt6(s.bge) + "\n";
                    for (const auto& w : s.warnings) t += "warning: " + w + "\n";
                    emit(com, t);
                }
            } else {
                if (parent.empty() || mediator.empty() || child.empty())
                    throw UsageError("score-backdoor needs --parent, --mediator and --child (or --graph)");
                const BackdoorDecision d = compare_backdoor(ds, parent, mediator, child, controls);
                emit(com, com.format == "json" ? to_json(d).dump(2) : to_text(d));
            }
        } else if (*ivt) {
            const Dataset ds = load_data(data_path, no_header, log_cols);
            for (const auto* v : {&yv, &endog})
                if (!ds.has(*v)) throw DataError("column '" + *v + "' not found");
            const IvReport r = endogeneity_tests(ds.values(yv), ds.matrix(exog), ds.values(endog),
                                                 ds.matrix(instruments), !no_intercept, exog, endog, instruments);
            if (com.format == "json") {
                emit(com, to_json(r).dump(2));
            } else if (com.format == "csv") {
                std::string t = "test,statistic,df1,df2,p_value\n";
                for (const auto& x : r.tests)
                    t += x.name + "," + format_double(x.statistic) + "," + format_double(x.df1) + "," +
                         format_double(x.df2) + "," + format_double(x.p_value) + "\n";
                emit(com, t);
            } else {
                emit(com, to_text(r));
            }
        } else if (*pip) {
            PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);
            if (app.get_option("--seed")->count() > 0) cfg.seed = com.seed;
            for (const auto& s : sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
                cfg.set(s.substr(0, eq), s.substr(eq + 1));
            }
            if (com.out != "-") cfg.out_dir = com.out;
            if (cfg.out_dir.empty()) cfg.out_dir = "mbiv_out";
            const PipelineReport rep = run_pipeline(cfg);
            write_report(rep, cfg.out_dir);
            std::cout << rep.text;
            std::cout << "report written to " << cfg.out_dir << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::numeric);
    }
    return 0;
}
