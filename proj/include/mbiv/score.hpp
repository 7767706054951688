#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "mbiv/dataset.hpp"
#include "mbiv/graph.hpp"
#include "mbiv/sem.hpp"

namespace mbiv {

enum class Criterion { aic, bic, bge };
[[nodiscard]] const char* to_string(Criterion c) noexcept;
[[nodiscard]] Criterion parse_criterion(const std::string& s);

struct VertexScore {
    std::string vertex;
    std::vector<std::string> parents;
    double loglik = 0.0;  // Gaussian log-likelihood of the family regression at the MLE
    std::size_t k = 0;    // weights + intercept + noise variance
    double aic = 0.0;
    double bic = 0.0;
    double bge = 0.0;     // negated log marginal likelihood of the family
};

// All criteria are lower-is-better.
struct GraphScore {
    double aic = 0.0;
    double bic = 0.0;
    double bge = 0.0;
    double loglik = 0.0;
    std::size_t k = 0;
    std::size_t n = 0;
    std::vector<VertexScore> per_vertex;  // vertex order of the graph
    std::vector<std::string> warnings;

    [[nodiscard]] double value(Criterion c) const;
};

// Per-vertex OLS on parents with intercept; noise scale uses the n denominator.
[[nodiscard]] LinearSem fit_mle(const Dag& g, const Dataset& ds);

[[nodiscard]] GraphScore score_graph(const Dag& g, const Dataset& ds);
[[nodiscard]] GraphScore score_graph_serial(const Dag& g, const Dataset& ds);

// Joint multivariate-normal log-likelihood of ds under the mean and covariance implied by sem.
[[nodiscard]] double joint_loglik(const LinearSem& sem, const Dataset& ds);

// BGe log marginal likelihood of a vertex subset of standardized data (used by the family terms).
[[nodiscard]] double bge_log_marginal(const Eigen::MatrixXd& standardized_data, const std::vector<Eigen::Index>& subset);

enum class Winner { backdoor, no_backdoor, tie };
[[nodiscard]] const char* to_string(Winner w) noexcept;

struct BackdoorDecision {
    std::string parent;
    std::string mediator;
    std::string child;
    std::vector<std::string> controls;
    GraphScore with_backdoor;
    GraphScore without_backdoor;
    Winner aic = Winner::tie;
    Winner bic = Winner::tie;
    Winner bge = Winner::tie;
    bool unanimous = false;
    std::vector<std::string> warnings;

    [[nodiscard]] Winner winner(Criterion c) const;
};

[[nodiscard]] BackdoorDecision compare_backdoor(const Dataset& ds, const std::string& parent,
                                                const std::string& mediator, const std::string& child,
                                                const std::vector<std::string>& controls = {});

[[nodiscard]] nlohmann::ordered_json to_json(const GraphScore& s);
[[nodiscard]] nlohmann::ordered_json to_json(const BackdoorDecision& d);
[[nodiscard]] std::string to_text(const BackdoorDecision& d);

}  // namespace mbiv
