#include "mbiv/regress.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mbiv/error.hpp"
#include "mbiv/stats.hpp"

namespace mbiv {

namespace {

constexpr const char* kIntercept = "(intercept)";

std::vector<std::string> default_names(std::vector<std::string> names, Eigen::Index p, const std::string& stem) {
    if (names.empty())
        for (Eigen::Index j = 0; j < p; ++j) names.push_back(stem + std::to_string(j + 1));
    if (static_cast<Eigen::Index>(names.size()) != p) throw UsageError("regressor name count does not match columns");
    return names;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X, bool intercept) {
    if (!intercept) return X;
    Eigen::MatrixXd D(X.rows(), X.cols() + 1);
    D.col(0).setOnes();
    D.rightCols(X.cols()) = X;
    return D;
}

// First column (in order) lying in the span of the columns before it.
Eigen::Index first_dependent_column(const Eigen::MatrixXd& D) {
    for (Eigen::Index k = 1; k <= D.cols(); ++k) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D.leftCols(k));
        qr.setThreshold(1e-10);
        if (qr.rank() < k) return k - 1;
    }
    return -1;
}

struct LsSolution {
    Eigen::VectorXd coef;
    Eigen::MatrixXd xtx_inv;
};

LsSolution least_squares(const Eigen::MatrixXd& D, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    if (qr.rank() < D.cols()) {
        const Eigen::Index bad = first_dependent_column(D);
        const std::string who = bad >= 0 ? names[static_cast<std::size_t>(bad)] : std::string("?");
        throw NumericError("rank-deficient design: column '" + who + "' is linearly dependent on earlier columns");
    }
    LsSolution s;
    s.coef = qr.solve(y);
    const Eigen::Index k = D.cols();
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
    s.xtx_inv = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
    return s;
}

void fill_inference(RegressionFit& f, const Eigen::MatrixXd& xtx_inv) {
    const auto k = f.coef.size();
    const double df = static_cast<double>(f.n) - static_cast<double>(k);
    f.sigma2 = f.rss / df;
    f.se.resize(k);
    f.t.resize(k);
    f.p.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        f.se[j] = std::sqrt(std::max(0.0, f.sigma2 * xtx_inv(j, j)));
        if (f.se[j] > 0.0) {
            f.t[j] = f.coef[j] / f.se[j];
            f.p[j] = t_two_sided_p(f.t[j], df);
        } else {
            f.t[j] = f.coef[j] == 0.0 ? 0.0 : std::copysign(INFINITY, f.coef[j]);
            f.p[j] = f.coef[j] == 0.0 ? 1.0 : 0.0;
        }
    }
}

void fill_r2(RegressionFit& f, const Eigen::VectorXd& y) {
    const double n = static_cast<double>(f.n);
    const double p = static_cast<double>(f.p_regressors);
    if (f.intercept) {
        const double tss = (y.array() - y.mean()).square().sum();
        f.r2 = tss > 0.0 ? 1.0 - f.rss / tss : 0.0;
        f.adj_r2 = 1.0 - (1.0 - f.r2) * (n - 1.0) / (n - p - 1.0);
    } else {
        const double tss = y.squaredNorm();
        f.r2 = tss > 0.0 ? 1.0 - f.rss / tss : 0.0;
        f.adj_r2 = 1.0 - (1.0 - f.r2) * n / (n - p);
    }
}

void check_sizes(const Eigen::VectorXd& y, const Eigen::MatrixXd& D) {
    if (D.rows() != y.size()) throw UsageError("design and response lengths differ");
    if (y.size() <= D.cols())
        throw NumericError("too few observations: n=" + std::to_string(y.size()) + " for " + std::to_string(D.cols()) +
                           " coefficients");
}

}  // namespace

double RegressionFit::coef_of(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return coef[static_cast<Eigen::Index>(j)];
    throw UsageError("no coefficient named '" + name + "'");
}

double RegressionFit::se_of(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return se[static_cast<Eigen::Index>(j)];
    throw UsageError("no coefficient named '" + name + "'");
}

RegressionFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, bool intercept, std::vector<std::string> names) {
    names = default_names(std::move(names), X.cols(), "x");
    const Eigen::MatrixXd D = with_intercept(X, intercept);
    check_sizes(y, D);
    RegressionFit f;
    if (intercept) f.names.push_back(kIntercept);
    f.names.insert(f.names.end(), names.begin(), names.end());
    const LsSolution s = least_squares(D, y, f.names);
    f.coef = s.coef;
    f.residuals = y - D * f.coef;
    f.rss = f.residuals.squaredNorm();
    f.n = static_cast<std::size_t>(y.size());
    f.p_regressors = static_cast<std::size_t>(X.cols());
    f.intercept = intercept;
    fill_inference(f, s.xtx_inv);
    fill_r2(f, y);
    return f;
}

namespace {

void check_instruments(const Eigen::MatrixXd& X_exog, const Eigen::MatrixXd& Z, const std::vector<std::string>& zn,
                       const std::vector<std::string>& xn) {
    if (Z.cols() < 1) throw UsageError("two-stage least squares needs at least one instrument");
    for (Eigen::Index a = 0; a < Z.cols(); ++a)
        for (Eigen::Index b = 0; b < X_exog.cols(); ++b)
            if (Z.col(a) == X_exog.col(b))
                throw NumericError("instrument '" + zn[static_cast<std::size_t>(a)] + "' is identical to exogenous column '" +
                                   xn[static_cast<std::size_t>(b)] + "'");
}

Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd m(a.rows(), a.cols() + b.cols());
    m << a, b;
    return m;
}

}  // namespace

RegressionFit two_sls(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_exog, const Eigen::VectorXd& x_endog,
                      const Eigen::MatrixXd& Z, bool intercept, std::vector<std::string> exog_names,
                      std::string endog_name, std::vector<std::string> instrument_names) {
    exog_names = default_names(std::move(exog_names), X_exog.cols(), "w");
    instrument_names = default_names(std::move(instrument_names), Z.cols(), "z");
    check_instruments(X_exog, Z, instrument_names, exog_names);
    std::vector<std::string> stage1_names = exog_names;
    stage1_names.insert(stage1_names.end(), instrument_names.begin(), instrument_names.end());
    const RegressionFit first = ols(x_endog, hcat(X_exog, Z), intercept, stage1_names);
    const Eigen::VectorXd fitted = x_endog - first.residuals;

    const Eigen::MatrixXd D2 = with_intercept(hcat(X_exog, fitted), intercept);
    const Eigen::MatrixXd Dx = with_intercept(hcat(X_exog, x_endog), intercept);
    check_sizes(y, D2);
    RegressionFit f;
    if (intercept) f.names.push_back(kIntercept);
    f.names.insert(f.names.end(), exog_names.begin(), exog_names.end());
    f.names.push_back(endog_name);
    const LsSolution s = least_squares(D2, y, f.names);
    f.coef = s.coef;
    f.residuals = y - Dx * f.coef;  // structural residuals use the observed endogenous column
    f.rss = f.residuals.squaredNorm();
    f.n = static_cast<std::size_t>(y.size());
    f.p_regressors = static_cast<std::size_t>(X_exog.cols() + 1);
    f.intercept = intercept;
    fill_inference(f, s.xtx_inv);
    fill_r2(f, y);
    return f;
}

const TestResult& IvReport::test(const std::string& name) const {
    for (const auto& t : tests)
        if (t.name == name) return t;
    throw UsageError("no test named '" + name + "'");
}

IvReport endogeneity_tests(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_exog, const Eigen::VectorXd& x_endog,
                           const Eigen::MatrixXd& Z, bool intercept, std::vector<std::string> exog_names,
                           std::string endog_name, std::vector<std::string> instrument_names) {
    exog_names = default_names(std::move(exog_names), X_exog.cols(), "w");
    instrument_names = default_names(std::move(instrument_names), Z.cols(), "z");
    IvReport r;
    r.endogenous_name = endog_name;
    r.instrument_names = instrument_names;
    r.tsls_fit = two_sls(y, X_exog, x_endog, Z, intercept, exog_names, endog_name, instrument_names);

    std::vector<std::string> stage1_names = exog_names;
    stage1_names.insert(stage1_names.end(), instrument_names.begin(), instrument_names.end());
    r.first_stage_fit = ols(x_endog, hcat(X_exog, Z), intercept, stage1_names);

    std::vector<std::string> struct_names = exog_names;
    struct_names.push_back(endog_name);
    const Eigen::MatrixXd W = hcat(X_exog, x_endog);
    r.ols_fit = ols(y, W, intercept, struct_names);

    const double n = static_cast<double>(y.size());
    const auto m = static_cast<double>(Z.cols());

    // First-stage F on the excluded instruments.
    {
        const double rss_u = r.first_stage_fit.rss;
        double rss_r = 0.0;
        if (X_exog.cols() > 0 || intercept) {
            rss_r = ols(x_endog, X_exog, intercept, exog_names).rss;
        } else {
            rss_r = x_endog.squaredNorm();
        }
        const double df2 = static_cast<double>(r.first_stage_fit.df_resid());
        r.first_stage_f = ((rss_r - rss_u) / m) / (rss_u / df2);
        r.first_stage_f_p = f_sf(r.first_stage_f, m, df2);
        r.weak_instrument = r.first_stage_f < 10.0;
    }

    // Control-function regression: structural design plus the first-stage residual.
    std::vector<std::string> aug_names = struct_names;
    aug_names.push_back("first_stage_residual");
    const RegressionFit aug = ols(y, hcat(W, r.first_stage_fit.residuals), intercept, aug_names);
    const double ssr_r = r.ols_fit.rss;
    const double ssr_u = aug.rss;
    const double df_aug = static_cast<double>(aug.df_resid());

    // Durbin: contrast of IV and OLS slopes scaled by the OLS variance (n denominator).
    {
        const Eigen::Index j = r.ols_fit.coef.size() - 1;
        const double diff = r.tsls_fit.coef[j] - r.ols_fit.coef[j];
        const Eigen::MatrixXd Dw = with_intercept(W, intercept);
        const Eigen::VectorXd xhat = x_endog - r.first_stage_fit.residuals;
        const Eigen::MatrixXd Dh = with_intercept(hcat(X_exog, xhat), intercept);
        const Eigen::MatrixXd v_iv = (Dh.transpose() * Dh).inverse();
        const Eigen::MatrixXd v_ols = (Dw.transpose() * Dw).inverse();
        const double s2 = ssr_r / n;
        const double stat = diff * diff / (s2 * (v_iv(j, j) - v_ols(j, j)));
        r.tests.push_back({"durbin", stat, Distribution::chi2, 1.0, 0.0, chi2_sf(stat, 1.0)});
    }
    {
        const double stat = (ssr_r - ssr_u) / (ssr_u / df_aug);
        r.tests.push_back({"wu_hausman", stat, Distribution::f, 1.0, df_aug, f_sf(stat, 1.0, df_aug)});
    }
    {
        const double t = aug.t[aug.t.size() - 1];
        const double stat = t * t;
        r.tests.push_back({"wooldridge_regression", stat, Distribution::chi2, 1.0, 0.0, chi2_sf(stat, 1.0)});
    }
    {
        // n R^2 of the OLS residual on the augmented design.
        const RegressionFit aux = ols(r.ols_fit.residuals, hcat(W, r.first_stage_fit.residuals), intercept, aug_names);
        const double tss = intercept ? (r.ols_fit.residuals.array() - r.ols_fit.residuals.mean()).square().sum()
                                     : r.ols_fit.residuals.squaredNorm();
        const double stat = n * (1.0 - aux.rss / tss);
        r.tests.push_back({"wooldridge_score", stat, Distribution::chi2, 1.0, 0.0, chi2_sf(stat, 1.0)});
    }
    return r;
}

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

nlohmann::ordered_json to_json(const RegressionFit& fit) {
    nlohmann::ordered_json j;
    j["n"] = fit.n;
    j["p"] = fit.p_regressors;
    j["intercept"] = fit.intercept;
    j["r2"] = fit.r2;
    j["adj_r2"] = fit.adj_r2;
    j["sigma2"] = fit.sigma2;
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        arr.push_back({{"name", fit.names[k]}, {"coef", fit.coef[e]}, {"se", fit.se[e]}, {"t", fit.t[e]}, {"p", fit.p[e]}});
    }
    j["coefficients"] = arr;
    return j;
}

nlohmann::ordered_json to_json(const TestResult& t) {
    nlohmann::ordered_json j;
    j["name"] = t.name;
    j["statistic"] = t.statistic;
    if (t.dist == Distribution::chi2) {
        j["distribution"] = "chi2";
        j["df"] = t.df1;
    } else {
        j["distribution"] = "F";
        j["df1"] = t.df1;
        j["df2"] = t.df2;
    }
    j["p_value"] = t.p_value;
    return j;
}

nlohmann::ordered_json to_json(const IvReport& r) {
    nlohmann::ordered_json j;
    j["endogenous"] = r.endogenous_name;
    j["instruments"] = r.instrument_names;
    j["ols"] = to_json(r.ols_fit);
    j["first_stage"] = to_json(r.first_stage_fit);
    j["first_stage"]["excluded_instrument_F"] = r.first_stage_f;
    j["first_stage"]["excluded_instrument_F_p"] = r.first_stage_f_p;
    j["tsls"] = to_json(r.tsls_fit);
    auto tests = nlohmann::ordered_json::array();
    for (const auto& t : r.tests) tests.push_back(to_json(t));
    j["tests"] = tests;
    j["weak_instrument_flag"] = r.weak_instrument;
    j["notes"] = "homoskedastic forms; wooldridge_regression is t^2 of the first-stage residual in the augmented "
                 "regression; wooldridge_score is n*R^2 of the OLS residual on the augmented design";
    return j;
}

std::string to_text(const RegressionFit& fit, const std::string& title) {
    std::ostringstream o;
    o << title << "  (n=" << fit.n << ", R2=" << fmt6(fit.r2) << ", adj R2=" << fmt6(fit.adj_r2) << ")\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-24s %14s %14s %14s %14s\n", "term", "coef", "se", "t", "p");
    o << buf;
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        std::snprintf(buf, sizeof buf, "  %-24s %14s %14s %14s %14s\n", fit.names[k].c_str(), fmt6(fit.coef[e]).c_str(),
                      fmt6(fit.se[e]).c_str(), fmt6(fit.t[e]).c_str(), fmt6(fit.p[e]).c_str());
        o << buf;
    }
    return o.str();
}

std::string to_text(const IvReport& r) {
    std::ostringstream o;
    std::string inst;
    for (const auto& z : r.instrument_names) inst += (inst.empty() ? "" : ",") + z;
    o << "Instrumented: " << r.endogenous_name << "  Instruments: " << inst << "\n";
    o << to_text(r.ols_fit, "OLS") << to_text(r.first_stage_fit, "First stage") << to_text(r.tsls_fit, "2SLS");
    o << "  excluded-instrument F = " << fmt6(r.first_stage_f) << " (p=" << fmt6(r.first_stage_f_p) << ")"
      << (r.weak_instrument ? "  WEAK INSTRUMENT (F < 10)" : "") << "\n";
    o << "Tests of endogeneity\n";
    char buf[256];
    for (const auto& t : r.tests) {
        std::string dist = t.dist == Distribution::chi2 ? "chi2(" + fmt6(t.df1) + ")"
                                                        : "F(" + fmt6(t.df1) + "," + fmt6(t.df2) + ")";
        std::snprintf(buf, sizeof buf, "  %-24s %-14s %14s  p=%s\n", t.name.c_str(), dist.c_str(),
                      fmt6(t.statistic).c_str(), fmt6(t.p_value).c_str());
        o << buf;
    }
    return o.str();
}

}  // namespace mbiv
