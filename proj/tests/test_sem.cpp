#include <doctest.h>

#include <cmath>

#include "mbiv/error.hpp"
#include "mbiv/regress.hpp"
#include "mbiv/select.hpp"
#include "mbiv/sem.hpp"

using namespace mbiv;

namespace {

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("population covariance by hand") {
    LinearSem one(parse_graph("node a\n"));
    one.set_scale("a", 2.5);
    CHECK(population_covariance(one)(0, 0) == doctest::Approx(6.25));

    const LinearSem ch = parse_sem("vertex a\nvertex b\na -> b w=0.7\n");
    const Eigen::MatrixXd c = population_covariance(ch);
    CHECK(c(1, 1) == doctest::Approx(1.49));
    CHECK(c(0, 1) == doctest::Approx(0.7));
    CHECK(c(1, 0) == doctest::Approx(0.7));

    for (const auto& params : {ScenarioParams{{"w1", 0.3}, {"w2", 0.3}},
                               ScenarioParams{{"w1", 0.75}, {"w2", 0.75}, {"rho", -0.25}}}) {
        const auto sc = make_scenario("irc", params);
        const Eigen::MatrixXd s = population_covariance(sc.sem, {"x3", "y"});
        CHECK(std::abs(s(0, 0) - 1.0) < 1e-12);
        CHECK(std::abs(s(1, 1) - 1.0) < 1e-12);
    }
}

TEST_CASE("population covariance is positive definite") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Eigen::MatrixXd c = population_covariance(random_sem(8, 0.4, s));
        CHECK(max_abs_diff(c, c.transpose()) < 1e-12);
        CHECK(Eigen::LLT<Eigen::MatrixXd>(c).info() == Eigen::Success);
    }
    for (const auto& name : scenario_names()) {
        const Eigen::MatrixXd c = population_covariance(make_scenario(name).sem);
        CHECK(Eigen::LLT<Eigen::MatrixXd>(c).info() == Eigen::Success);
    }
}

TEST_CASE("scenario parameters") {
    CHECK_THROWS_AS((void)make_scenario("irc", {{"w1", 0.8}, {"w2", 0.8}}), DataError);
    const auto hi = make_scenario("irc", {{"w1", 0.75}, {"w2", 0.75}, {"rho", -0.25}});
    CHECK(irc_value(population_covariance(hi.sem, {"x1", "x2", "x3"}), {0, 1}) == doctest::Approx(1.5));
    CHECK_THROWS_AS((void)make_scenario("nope"), UsageError);
    CHECK_THROWS_AS((void)make_scenario("mb_reduced", {{"bogus", 1.0}}), UsageError);
    const auto iv = make_scenario("iv_basic", {{"b1", 0.9}});
    CHECK(iv.params.at("b1") == 0.9);
    CHECK(iv.params.at("rho") == 0.6);
    CHECK(make_scenario("mb_reduced", {{"distractors", 2}}).sem.dag.has_vertex("d2"));
    for (const auto& name : scenario_names()) CHECK_NOTHROW(make_scenario(name).sem.validate());
}

TEST_CASE("sampling") {
    const auto sc = make_scenario("iv_basic");
    const Dataset a = sample(sc.sem, 500, 9);
    const Dataset b = sample(sc.sem, 500, 9);
    CHECK(a.matrix() == b.matrix());
    CHECK(sample_serial(sc.sem, 500, 9).matrix() == a.matrix());
    CHECK(sample(sc.sem, 500, 10).matrix() != a.matrix());
    CHECK(a.names() == std::vector<std::string>{"z", "x", "y"});

    LinearSem flat = parse_sem("vertex a scale=2\nvertex b scale=0.5\nvertex c\n");
    const Dataset f = sample(flat, 10000, 1);
    const CorrelationTable ct = corr_matrix(f);
    CHECK(std::abs(ct.at("a", "b")) < 0.03);
    CHECK(std::abs(ct.at("a", "c")) < 0.03);
    CHECK(std::abs(sample_sd(f.values("a")) - 2.0) < 0.05);

    const Dataset big = sample(sc.sem, 1000000, 4);
    CHECK(max_abs_diff(covariance(big.matrix()), population_covariance(sc.sem)) < 0.01);

    // Latent vertices are drawn but not emitted.
    Scenario s2 = make_scenario("rent_price_sem");
    CHECK(sample(s2.sem, 10, 1).cols() == 7);
}

TEST_CASE("sample covariance concentrates") {
    const LinearSem sem = random_sem(5, 0.5, 33);
    const Eigen::MatrixXd pop = population_covariance(sem);
    const double n = 4000.0;
    // Bound taken relative to the population operator norm so large-variance chains are not penalised.
    const double scale = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pop).eigenvalues().maxCoeff();
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Eigen::MatrixXd d = covariance(sample(sem, 4000, s).matrix()) - pop;
        const double op = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d).eigenvalues().cwiseAbs().maxCoeff();
        CHECK(op < scale * 3.0 * 5.0 / std::sqrt(n));
    }
}

TEST_CASE("reduced-form coefficients of the blanket regression") {
    const auto sc = make_scenario("mb_reduced");
    const Dataset ds = sample(sc.sem, 100000, 11);
    const RegressionFit f = ols(ds.values("y"), ds.matrix({"x1", "x2", "x3", "x4"}));
    const Eigen::Vector4d g = mb_reduced_gamma(sc.params);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(f.coef[j + 1] - g[j]) < 0.02);
    const Eigen::VectorXd pop = ovb_oracle(sc.sem, "y", {"x1", "x2", "x3", "x4"});
    CHECK(max_abs_diff(pop, g) < 1e-12);
}

TEST_CASE("omitted-variable oracle") {
    const auto iv = make_scenario("iv_basic");
    // var(x) = a1^2 + sv^2 = 2, cov(x, u) = rho.
    CHECK(ovb_oracle(iv.sem, "y", {"x"})[0] == doctest::Approx(0.5 + 0.6 / 2.0));
    const auto clean = make_scenario("collider_control");
    CHECK(ovb_oracle(clean.sem, "y", {"x"})[0] == doctest::Approx(0.5));
    const auto mb = make_scenario("mb_reduced");
    const Eigen::VectorXd full = ovb_oracle(mb.sem, "y", {"x1", "x2"});
    CHECK(full[0] == doctest::Approx(0.8));
    CHECK(full[1] == doctest::Approx(0.6));
    CHECK(ovb_oracle(mb.sem, "y", {"x1"})[0] == doctest::Approx(0.8));

    const Dataset big = sample(iv.sem, 1000000, 3);
    CHECK(std::abs(ols(big.values("y"), big.matrix({"x"})).coef[1] - 0.8) < 0.005);
}

TEST_CASE("scenario graphs imply vanishing partial correlations") {
    for (const auto& name : scenario_names()) {
        const auto sc = make_scenario(name, name == "irc" ? ScenarioParams{{"rho", 0.0}} : ScenarioParams{});
        if (!sc.sem.noise_corr.isIdentity()) continue;
        const Dag& g = sc.sem.dag;
        const Eigen::MatrixXd cov = population_covariance(sc.sem);
        const std::size_t k = g.size();
        for (Vid a = 0; a < k; ++a)
            for (Vid b = a + 1; b < k; ++b) {
                std::vector<Vid> pool;
                for (Vid v = 0; v < k; ++v)
                    if (v != a && v != b) pool.push_back(v);
                for (unsigned m = 0; m < (1U << pool.size()); ++m) {
                    std::vector<Vid> z;
                    for (std::size_t q = 0; q < pool.size(); ++q)
                        if (m >> q & 1U) z.push_back(pool[q]);
                    if (d_separated(g, a, b, z)) CHECK(std::abs(partial_corr(cov, a, b, z)) < 1e-10);
                }
            }
    }
}

TEST_CASE("regressing a cause on its effect attenuates the inverse slope") {
    const auto sc = make_scenario("reversal");
    const double b1 = sc.params.at("b1");
    const double sy = sc.params.at("sy");
    const double se = sc.params.at("se");
    const double reliability = b1 * b1 * sy * sy / (b1 * b1 * sy * sy + se * se);
    const double slope = ovb_oracle(sc.sem, "y", {"x1"})[0];
    CHECK(slope == doctest::Approx(reliability / b1));
    CHECK(std::abs(slope - 1.0 / b1) > 0.5);
}

TEST_CASE("SEM text round trip") {
    std::map<std::string, long long> stamps;
    const LinearSem sem =
        parse_sem("# demo\nvertex a intercept=1 scale=2 ts=1990\nnode b\nvertex u latent\na -> b w=0.8\nu -> b w=1\na ~ b r=0.3\n",
                  &stamps);
    CHECK(stamps.at("a") == 1990);
    CHECK(sem.weight("a", "b") == 0.8);
    CHECK(sem.observed_names() == std::vector<std::string>{"a", "b"});
    CHECK(sem.noise_covariance()(0, 1) == doctest::Approx(0.3 * 2.0));
    const LinearSem back = parse_sem(format_sem(sem));
    CHECK(back.dag == parse_sem(format_sem(back)).dag);
    CHECK(back.weight_matrix() == sem.weight_matrix());
    CHECK(back.intercepts == sem.intercepts);
    CHECK(back.scales == sem.scales);
    CHECK(back.noise_corr == sem.noise_corr);
    CHECK(format_sem(back) == format_sem(sem));

    CHECK_THROWS_AS((void)parse_sem("vertex a\na -> b\n"), DataError);
    CHECK_THROWS_AS((void)parse_sem("vertex a scale=-1\n"), DataError);
    CHECK_THROWS_AS((void)parse_sem("vertex a\nvertex b\na ~ b r=1.5\n"), DataError);
    CHECK_THROWS_AS((void)load_sem("/nonexistent.sem"), DataError);
}
