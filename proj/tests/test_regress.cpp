#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mbiv/error.hpp"
#include "mbiv/regress.hpp"
#include "mbiv/sem.hpp"
#include "mbiv/stats.hpp"

using namespace mbiv;

namespace {

Dataset iv_data(double rho, std::size_t n, std::uint64_t seed) {
    return sample(make_scenario("iv_basic", {{"rho", rho}}).sem, n, seed);
}

IvReport iv_fit(const Dataset& ds) {
    return endogeneity_tests(ds.values("y"), Eigen::MatrixXd(static_cast<Eigen::Index>(ds.rows()), 0), ds.values("x"),
                             ds.matrix({"z"}), true, {}, "x", {"z"});
}

}  // namespace

TEST_CASE("ols exact and orthogonal fits") {
    Eigen::VectorXd x(6);
    x << 1, 2, 3, 4, 5, 7;
    const RegressionFit f = ols(2.0 * x, x);
    CHECK(f.coef[1] == doctest::Approx(2.0));
    CHECK(std::abs(f.coef[0]) < 1e-12);
    CHECK(f.r2 == doctest::Approx(1.0));

    Eigen::VectorXd a(8), b(8);
    a << 1, -1, 1, -1, 1, -1, 1, -1;
    b << 1, 1, -1, -1, 1, 1, -1, -1;
    const RegressionFit g = ols(b, a);
    CHECK(std::abs(g.coef[1]) < 1e-12);
    CHECK(std::abs(g.r2) < 1e-12);
    CHECK(g.adj_r2 <= g.r2);
    CHECK(g.names.front() == "(intercept)");
}

TEST_CASE("ols errors") {
    Eigen::MatrixXd X(10, 3);
    for (int i = 0; i < 10; ++i) {
        X(i, 0) = i;
        X(i, 1) = i * i % 7;
        X(i, 2) = 2.0 * X(i, 0) - X(i, 1);
    }
    Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(10, 0, 1);
    try {
        (void)ols(y, X, true, {"a", "b", "c"});
        FAIL("expected rank deficiency");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("'c'") != std::string::npos);
    }
    CHECK_THROWS_AS((void)ols(y.head(3), X.topRows(3)), NumericError);
}

TEST_CASE("ols residual orthogonality and t statistics") {
    const Dataset ds = sample(random_sem(5, 0.6, 3), 500, 9);
    const Eigen::MatrixXd X = ds.matrix({"v1", "v2", "v3", "v4"});
    const RegressionFit f = ols(ds.values("v5"), X);
    CHECK((X.transpose() * f.residuals).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(f.residuals.sum()) < 1e-8);
    for (Eigen::Index k = 0; k < f.coef.size(); ++k) CHECK(f.t[k] == doctest::Approx(f.coef[k] / f.se[k]));
    CHECK(f.r2 >= 0.0);
    CHECK(f.r2 <= 1.0);
}

TEST_CASE("2SLS reduces to OLS with the regressor as its own instrument") {
    const Dataset ds = iv_data(0.6, 2000, 4);
    const RegressionFit a = ols(ds.values("y"), ds.matrix({"z", "x"}));
    const RegressionFit b = two_sls(ds.values("y"), ds.matrix({"z"}), ds.values("x"), ds.matrix({"x"}));
    CHECK((a.coef - b.coef).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("2SLS corrects the endogeneity bias") {
    const Dataset ds = iv_data(0.6, 100000, 21);
    const IvReport r = iv_fit(ds);
    CHECK(std::abs(r.tsls_fit.coef_of("x") - 0.5) < 3.0 * r.tsls_fit.se_of("x"));
    CHECK(std::abs(r.ols_fit.coef_of("x") - 0.5 - 0.3) < 0.02);
    CHECK_FALSE(r.weak_instrument);
    const TestResult& d = r.test("durbin");
    const TestResult& w = r.test("wu_hausman");
    // Both are monotone in the same residual-sum-of-squares drop: WH = df * D / (n - D).
    const double n = static_cast<double>(ds.rows());
    CHECK(w.statistic == doctest::Approx(w.df2 * d.statistic / (n - d.statistic)).epsilon(1e-6));
    CHECK(d.p_value == doctest::Approx(chi2_sf(d.statistic, 1.0)).epsilon(1e-10));
    CHECK(w.p_value == doctest::Approx(f_sf(w.statistic, w.df1, w.df2)).epsilon(1e-10));
}

TEST_CASE("weak and invalid instruments") {
    const Dataset ds = iv_data(0.6, 2000, 5);
    const Dataset noise = sample(random_sem(1, 0.0, 77), 2000, 99);
    const IvReport r = endogeneity_tests(ds.values("y"), Eigen::MatrixXd(2000, 0), ds.values("x"),
                                         noise.matrix({"v1"}), true, {}, "x", {"w"});
    CHECK(r.first_stage_f < 10.0);
    CHECK(r.weak_instrument);
    CHECK_THROWS_AS((void)two_sls(ds.values("y"), ds.matrix({"z"}), ds.values("x"), ds.matrix({"z"})), NumericError);
}

TEST_CASE("test battery concordance and p-value range") {
    int concordant = 0;
    const int reps = 60;
    for (int s = 0; s < reps; ++s) {
        const IvReport r = iv_fit(iv_data(0.6, 5000, 1000 + static_cast<std::uint64_t>(s)));
        int rejections = 0;
        for (const auto& t : r.tests) {
            CHECK(t.p_value >= 0.0);
            CHECK(t.p_value <= 1.0);
            rejections += t.p_value < 0.05;
        }
        concordant += rejections == 0 || rejections == 4;
    }
    CHECK(concordant >= static_cast<int>(0.95 * reps));
}

TEST_CASE("2SLS error shrinks with n") {
    std::vector<double> med;
    for (std::size_t n : {1000, 10000, 100000}) {
        std::vector<double> err;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const Dataset ds = iv_data(0.6, n, 500 + s);
            const RegressionFit f = two_sls(ds.values("y"), Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0),
                                            ds.values("x"), ds.matrix({"z"}));
            err.push_back(std::abs(f.coef[1] - 0.5));
        }
        std::nth_element(err.begin(), err.begin() + 10, err.end());
        med.push_back(err[10]);
    }
    CHECK(med[0] > med[1]);
    CHECK(med[1] > med[2]);
}

TEST_CASE("report serialization") {
    const IvReport r = iv_fit(iv_data(0.6, 1000, 8));
    const auto j = to_json(r);
    for (const char* k : {"ols", "first_stage", "tsls", "tests", "weak_instrument_flag"}) CHECK(j.contains(k));
    CHECK(j["tests"].size() == 4);
    CHECK(j["tests"][0]["name"] == "durbin");
    CHECK(to_text(r).find("wooldridge_score") != std::string::npos);
    CHECK(fmt6(3.14159265) == "3.14159");
}

TEST_CASE("distribution tails") {
    CHECK(chi2_sf(0.0, 3.0) == 1.0);
    CHECK(chi2_sf(3.84, 1.0) == doctest::Approx(0.050043521248705103).epsilon(1e-12));
    CHECK(f_sf(4.2, 1.0, 100.0) == doctest::Approx(0.04304215876185415).epsilon(1e-12));
    CHECK(t_two_sided_p(0.0, 10.0) == doctest::Approx(1.0));
}
