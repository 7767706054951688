#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbiv/dataset.hpp"
#include "mbiv/graph.hpp"
#include "mbiv/regress.hpp"
#include "mbiv/score.hpp"
#include "mbiv/select.hpp"
#include "mbiv/sem.hpp"

namespace mbiv {

enum class LogMode { none, automatic, listed };

struct PipelineConfig {
    std::optional<std::string> input;     // CSV path
    std::optional<std::string> scenario;  // or a canned scenario, sampled with `rows` and `seed`
    ScenarioParams scenario_params;
    std::size_t rows = 1000;
    bool header = true;
    std::string response;                 // empty: scenario default
    std::map<std::string, long long> stamps;
    LogMode log_mode = LogMode::automatic;  // automatic: every strictly positive column
    std::vector<std::string> log_columns;
    bool standardize = false;
    IsisOptions isis;
    SolarOptions solar;
    std::size_t cv_folds = 10;
    std::size_t cv_grid = 100;
    double grouping_cutoff = 0.9;
    std::size_t subset_cap = 14;
    std::uint64_t seed = 1;
    std::string out_dir;
    bool union_rule = false;
    std::optional<std::string> structure_graph;

    // Applies one "key=value" setting; unknown keys are usage errors.
    void set(const std::string& key, const std::string& value);
    void validate() const;
};

[[nodiscard]] PipelineConfig parse_pipeline_config(const std::string& text);
[[nodiscard]] PipelineConfig load_pipeline_config(const std::string& path);
[[nodiscard]] nlohmann::ordered_json to_json(const PipelineConfig& cfg);

struct IvStage {
    std::string endogenous;
    std::string outcome;
    std::vector<std::string> controls;
    std::vector<IvCandidateReport> candidates;
    std::vector<std::pair<std::string, IvReport>> estimates;  // instrument -> report
};

struct PipelineReport {
    std::vector<std::string> final_mb;  // after rectification
    bool no_selection = false;
    Dag data_graph;
    std::optional<Dag> structure_graph;
    std::vector<BackdoorDecision> backdoor;
    std::vector<IvStage> iv;
    std::vector<std::string> notes;
    nlohmann::ordered_json json;
    std::string text;
    nlohmann::ordered_json timings;  // kept out of report.json so reruns compare byte-for-byte
};

[[nodiscard]] PipelineReport run_pipeline(const PipelineConfig& cfg);
// report.json, report.txt, graph.txt, graph.dot, optional structure_graph.{txt,dot}, timings.json.
void write_report(const PipelineReport& rep, const std::string& dir);

}  // namespace mbiv
