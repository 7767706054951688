#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mbiv/error.hpp"
#include "mbiv/pipeline.hpp"

using namespace mbiv;

namespace {

PipelineConfig scenario_config(const std::string& name, std::size_t rows, std::uint64_t seed) {
    PipelineConfig cfg;
    cfg.scenario = name;
    cfg.rows = rows;
    cfg.seed = seed;
    return cfg;
}

const IvCandidateReport* candidate(const PipelineReport& rep, const std::string& name) {
    for (const auto& st : rep.iv)
        for (const auto& c : st.candidates)
            if (c.candidate == name) return &c;
    return nullptr;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("blanket recovery and orientation end to end") {
    const PipelineReport rep = run_pipeline(scenario_config("mb_reduced", 5000, 7));
    auto mb = rep.final_mb;
    std::sort(mb.begin(), mb.end());
    CHECK(mb == std::vector<std::string>{"x1", "x2", "x3", "x4"});
    CHECK_FALSE(rep.no_selection);
    const Dag& g = rep.data_graph;
    auto e = [&](const char* a, const char* b) { return g.has_edge(g.index(a), g.index(b)); };
    CHECK(e("x1", "y"));
    CHECK(e("x2", "y"));
    CHECK(e("y", "x4"));
    CHECK(e("x3", "x4"));
    CHECK(g.edges().size() == 4);
    CHECK(g.undirected_edges().empty());
    CHECK(rep.json["schema_version"] == "1");
    CHECK(rep.json["final_markov_blanket"].size() == 4);
}

TEST_CASE("endogeneity and a valid instrument") {
    const PipelineReport rep = run_pipeline(scenario_config("iv_basic", 2000, 3));
    const IvCandidateReport* z = candidate(rep, "z");
    REQUIRE(z != nullptr);
    CHECK(z->verdict == Verdict::valid);
    bool found = false;
    for (const auto& st : rep.iv)
        for (const auto& [inst, r] : st.estimates)
            if (inst == "z") {
                found = true;
                CHECK(r.test("durbin").p_value < 0.05);
            }
    CHECK(found);
}

TEST_CASE("invalid instrument is reported with its open trail") {
    const PipelineReport rep = run_pipeline(scenario_config("iv_invalid", 2000, 3));
    const IvCandidateReport* z = candidate(rep, "z");
    REQUIRE(z != nullptr);
    CHECK(z->verdict == Verdict::invalid);
    CHECK(z->witness_text.find("z -> u -> y") != std::string::npos);
    CHECK(rep.text.find("z -> u -> y") != std::string::npos);
    for (const auto& st : rep.iv)
        for (const auto& est : st.estimates) CHECK(est.first != "z");
}

TEST_CASE("reports are reproducible byte for byte") {
    const auto dir = std::filesystem::temp_directory_path() / "mbiv_pipeline_test";
    std::filesystem::remove_all(dir);
    for (const auto& name : {"mb_reduced", "rent_price_sem"}) {
        const PipelineConfig cfg = scenario_config(name, 800, 21);
        write_report(run_pipeline(cfg), (dir / "a").string());
        write_report(run_pipeline(cfg), (dir / "b").string());
        const std::string a = slurp(dir / "a" / "report.json");
        CHECK(!a.empty());
        CHECK(a == slurp(dir / "b" / "report.json"));
        CHECK(slurp(dir / "a" / "report.txt") == slurp(dir / "b" / "report.txt"));
        CHECK(std::filesystem::exists(dir / "a" / "graph.dot"));
        CHECK(std::filesystem::exists(dir / "a" / "timings.json"));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("stage errors carry their kind") {
    PipelineConfig cfg = scenario_config("mb_reduced", 300, 1);
    cfg.response = "nope";
    try {
        (void)run_pipeline(cfg);
        FAIL("expected a data error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
        CHECK(std::string(e.what()).find("nope") != std::string::npos);
    }
    PipelineConfig none;
    CHECK_THROWS_AS(none.validate(), UsageError);
}

TEST_CASE("configuration text") {
    const PipelineConfig cfg = parse_pipeline_config(
        "# run\nscenario = mb_reduced\nrows = 400\nseed = 9\nstamps = x1:1,x2:1\nts.y = 2\nlog = none\n"
        "rule = union\nscenario.b1 = 0.6\nout = \"somewhere\"\n[solar]\nK = 5\nc = 0.5\n[isis]\nB = 20\n");
    CHECK(cfg.scenario == "mb_reduced");
    CHECK(cfg.rows == 400);
    CHECK(cfg.seed == 9);
    CHECK(cfg.solar.K == 5);
    CHECK(cfg.solar.c == 0.5);
    CHECK(cfg.isis.B == 20);
    CHECK(cfg.stamps.at("x2") == 1);
    CHECK(cfg.stamps.at("y") == 2);
    CHECK(cfg.log_mode == LogMode::none);
    CHECK(cfg.union_rule);
    CHECK(cfg.scenario_params.at("b1") == 0.6);
    CHECK(cfg.out_dir == "somewhere");
    CHECK(to_json(cfg)["seed"] == 9);

    PipelineConfig c2;
    CHECK_THROWS_AS(c2.set("colour", "red"), UsageError);
    CHECK_THROWS_AS(c2.set("rows", "many"), UsageError);
    CHECK_THROWS_AS((void)load_pipeline_config("/nonexistent.cfg"), DataError);
}
