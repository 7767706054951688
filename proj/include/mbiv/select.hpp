#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mbiv/dataset.hpp"
#include "mbiv/regress.hpp"

namespace mbiv {

struct LarsPath {
    std::vector<std::size_t> entry_order;
    std::vector<Eigen::VectorXd> coefs;  // coefs[k]: coefficients after step k; coefs[0] is zero
    std::vector<double> bic;             // bic[k]: least-squares refit of the first k entries
    std::vector<double> max_corr;        // common absolute correlation at the start of each step

    [[nodiscard]] std::size_t steps() const noexcept { return entry_order.size(); }
    // Earliest step with minimal BIC.
    [[nodiscard]] std::size_t best_step() const;
    [[nodiscard]] std::vector<std::size_t> prefix(std::size_t k) const;
};

// Classical least-angle regression without the lasso modification. Columns are centered and scaled
// internally; coefficients are reported on the scale of X.
[[nodiscard]] LarsPath lars_path(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t max_steps);

struct CdOptions {
    double tol = 1e-9;
    std::size_t max_sweeps = 200000;
};

// Minimizes (1/2n) RSS + lambda * (alpha |b|_1 + (1 - alpha)/2 |b|_2^2) with an unpenalized intercept
// absorbed by centering. alpha = 1 gives the lasso.
[[nodiscard]] Eigen::VectorXd elastic_net_cd(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double lambda,
                                             double alpha, const CdOptions& opt = {},
                                             const Eigen::VectorXd* warm = nullptr);
[[nodiscard]] Eigen::VectorXd lasso_cd(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double lambda,
                                       const CdOptions& opt = {});
// Largest |x_j' r / n| - lambda * sign(b_j) violation over all coordinates (lasso form).
[[nodiscard]] double lasso_kkt_residual(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                                        double lambda);
[[nodiscard]] double lambda_max(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double alpha = 1.0);

struct SelectionResult {
    std::string algorithm;
    std::vector<std::string> candidates;
    std::vector<double> scores;  // aligned with candidates
    std::vector<std::string> selected;
    nlohmann::ordered_json hyperparameters = nlohmann::ordered_json::object();
    std::vector<std::string> notes;

    [[nodiscard]] bool selects(const std::string& name) const;
    [[nodiscard]] double score_of(const std::string& name) const;
};

[[nodiscard]] nlohmann::ordered_json to_json(const SelectionResult& s);

enum class CvAlgorithm { lasso, elastic_net };

struct CvOptions {
    CvAlgorithm algorithm = CvAlgorithm::lasso;
    std::size_t folds = 10;
    std::vector<double> lambdas;                                             // empty: per-alpha log grid
    std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};  // elastic net only
    std::size_t grid_size = 100;
    double grid_ratio = 1e-3;
    std::uint64_t seed = 1;
};

[[nodiscard]] SelectionResult cv_select(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                        const std::vector<std::string>& names, const CvOptions& opt);
[[nodiscard]] SelectionResult cv_select_serial(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                               const std::vector<std::string>& names, const CvOptions& opt);

struct IsisOptions {
    std::size_t B = 200;
    std::optional<double> keep_fraction;  // unset: keep ceil(n / ln n) per round
    double threshold = 0.7;
    std::size_t max_rounds = 10;
    std::optional<double> moderate_corr_cutoff;  // optional post-pass, off by default
    std::uint64_t seed = 1;
};

// One screening run on a single sample; returns selected column indices in ascending order.
[[nodiscard]] std::vector<std::size_t> isis_once(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t keep);
[[nodiscard]] std::size_t isis_keep_size(std::size_t n, std::optional<double> keep_fraction);
[[nodiscard]] SelectionResult isis_bootstrap(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                             const std::vector<std::string>& names, const IsisOptions& opt);
[[nodiscard]] SelectionResult isis_bootstrap_serial(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                                    const std::vector<std::string>& names, const IsisOptions& opt);

struct SolarOptions {
    std::size_t K = 10;
    double fraction = 0.9;
    std::optional<double> c;  // unset: tuned on a validation split
    double validation_fraction = 0.2;
    std::vector<double> c_grid = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
    std::uint64_t seed = 1;
};

// Fraction of K subsamples whose BIC-optimal LARS prefix contains each column.
[[nodiscard]] Eigen::VectorXd solar_scores(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t K,
                                           double fraction, std::uint64_t seed);
[[nodiscard]] Eigen::VectorXd solar_scores_serial(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t K,
                                                  double fraction, std::uint64_t seed);
[[nodiscard]] SelectionResult solar(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                    const std::vector<std::string>& names, const SolarOptions& opt);

[[nodiscard]] double irc_value(const Eigen::MatrixXd& sigma, const std::vector<std::size_t>& support);
[[nodiscard]] double irc_value(const Dataset& ds, const std::vector<std::string>& support);

struct GroupReport {
    std::string anchor;
    std::vector<std::string> members;
    std::vector<double> member_corr;
    std::optional<RegressionFit> fit;
    double abs_coef_sum = 0.0;
    bool flag = false;
};

[[nodiscard]] GroupReport grouping_diagnostic(const Dataset& ds, const std::string& anchor, double cutoff);
[[nodiscard]] SelectionResult rectify(const SelectionResult& sel, const std::vector<GroupReport>& groups);
[[nodiscard]] nlohmann::ordered_json to_json(const GroupReport& g);

}  // namespace mbiv
