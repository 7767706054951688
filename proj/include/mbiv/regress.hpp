#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

namespace mbiv {

struct RegressionFit {
    std::vector<std::string> names;  // "(intercept)" first when present
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
    Eigen::VectorXd t;
    Eigen::VectorXd p;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double sigma2 = 0.0;  // residual variance, df-corrected
    double rss = 0.0;
    std::size_t n = 0;
    std::size_t p_regressors = 0;  // excluding intercept
    bool intercept = true;
    Eigen::VectorXd residuals;

    [[nodiscard]] double coef_of(const std::string& name) const;
    [[nodiscard]] double se_of(const std::string& name) const;
    [[nodiscard]] std::size_t df_resid() const noexcept { return n - coef.size(); }
};

// Column names default to x1..xp. Throws NumericError naming the first linearly dependent column.
[[nodiscard]] RegressionFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool intercept = true,
                                std::vector<std::string> names = {});

[[nodiscard]] RegressionFit two_sls(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_exog,
                                    const Eigen::VectorXd& x_endog, const Eigen::MatrixXd& Z, bool intercept = true,
                                    std::vector<std::string> exog_names = {}, std::string endog_name = "x",
                                    std::vector<std::string> instrument_names = {});

enum class Distribution { chi2, f };

struct TestResult {
    std::string name;
    double statistic = 0.0;
    Distribution dist = Distribution::chi2;
    double df1 = 1.0;
    double df2 = 0.0;
    double p_value = 1.0;
};

struct IvReport {
    RegressionFit ols_fit;
    RegressionFit first_stage_fit;
    RegressionFit tsls_fit;
    std::vector<TestResult> tests;  // durbin, wu_hausman, wooldridge_regression, wooldridge_score
    double first_stage_f = 0.0;
    double first_stage_f_p = 1.0;
    bool weak_instrument = false;
    std::vector<std::string> instrument_names;
    std::string endogenous_name;

    [[nodiscard]] const TestResult& test(const std::string& name) const;
};

[[nodiscard]] IvReport endogeneity_tests(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_exog,
                                         const Eigen::VectorXd& x_endog, const Eigen::MatrixXd& Z,
                                         bool intercept = true, std::vector<std::string> exog_names = {},
                                         std::string endog_name = "x", std::vector<std::string> instrument_names = {});

[[nodiscard]] nlohmann::ordered_json to_json(const RegressionFit& fit);
[[nodiscard]] nlohmann::ordered_json to_json(const TestResult& t);
[[nodiscard]] nlohmann::ordered_json to_json(const IvReport& r);
[[nodiscard]] std::string to_text(const RegressionFit& fit, const std::string& title);
[[nodiscard]] std::string to_text(const IvReport& r);
// 6 significant digits, used by every human-readable table.
[[nodiscard]] std::string fmt6(double v);

}  // namespace mbiv
