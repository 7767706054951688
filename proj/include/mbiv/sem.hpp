#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbiv/dataset.hpp"
#include "mbiv/graph.hpp"

namespace mbiv {

struct LinearSem {
    Dag dag;                                   // directed only; latent vertices are not emitted by sample()
    std::map<std::pair<Vid, Vid>, double> weights;
    Eigen::VectorXd intercepts;
    Eigen::VectorXd scales;
    Eigen::MatrixXd noise_corr;                // identity when no correlated noises

    LinearSem() = default;
    explicit LinearSem(Dag g);

    void set_weight(const std::string& from, const std::string& to, double w);
    void set_intercept(const std::string& v, double c);
    void set_scale(const std::string& v, double s);
    void set_noise_corr(const std::string& a, const std::string& b, double r);
    [[nodiscard]] double weight(const std::string& from, const std::string& to) const;
    [[nodiscard]] Eigen::MatrixXd weight_matrix() const;  // W(parent, child)
    [[nodiscard]] Eigen::MatrixXd noise_covariance() const;
    [[nodiscard]] std::vector<std::string> observed_names() const;
    void validate() const;
};

[[nodiscard]] Dataset sample(const LinearSem& sem, std::size_t n, std::uint64_t seed);
[[nodiscard]] Dataset sample_serial(const LinearSem& sem, std::size_t n, std::uint64_t seed);

// Over every vertex, latent included, in vertex order.
[[nodiscard]] Eigen::MatrixXd population_covariance(const LinearSem& sem);
[[nodiscard]] Eigen::MatrixXd population_covariance(const LinearSem& sem, const std::vector<std::string>& names);

// Population OLS coefficients (no intercept, centred variables) of y on `regressors`.
[[nodiscard]] Eigen::VectorXd ovb_oracle(const LinearSem& sem, const std::string& y,
                                         const std::vector<std::string>& regressors);

using ScenarioParams = std::map<std::string, double>;

struct Scenario {
    std::string name;
    LinearSem sem;
    Dag structure;                 // causal drawing with latent noise vertices, used for instrument checks
    std::string response;          // default pipeline response
    std::optional<std::string> endogenous;
    std::optional<std::string> outcome;
    std::map<std::string, long long> stamps;
    ScenarioParams params;         // resolved parameter values
};

[[nodiscard]] std::vector<std::string> scenario_names();
[[nodiscard]] Scenario make_scenario(const std::string& name, const ScenarioParams& params = {});
// Analytic regression of y on {x1..x4} for mb_reduced, from the scenario parameters.
[[nodiscard]] Eigen::Vector4d mb_reduced_gamma(const ScenarioParams& resolved);

// Config text: "vertex NAME intercept=0 scale=1 [ts=..] [latent]", "a -> b w=0.8", "u ~ v r=0.6".
[[nodiscard]] LinearSem parse_sem(const std::string& text, std::map<std::string, long long>* stamps = nullptr);
[[nodiscard]] LinearSem load_sem(const std::string& path, std::map<std::string, long long>* stamps = nullptr);
[[nodiscard]] std::string format_sem(const LinearSem& sem);

// Random SEM over a random DAG; weights drawn from +-[lo, hi].
[[nodiscard]] LinearSem random_sem(std::size_t vertices, double edge_prob, std::uint64_t seed, double lo = 0.5,
                                   double hi = 1.5);

}  // namespace mbiv
