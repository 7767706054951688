#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "mbiv/dataset.hpp"
#include "mbiv/error.hpp"
#include "mbiv/sem.hpp"

using namespace mbiv;

TEST_CASE("csv ingestion") {
    const Dataset ds = parse_csv("a,b\n1,2\n3,4\n5,6\n");
    CHECK(ds.rows() == 3);
    CHECK(ds.names() == std::vector<std::string>{"a", "b"});
    CHECK(ds.values("b")[2] == 6.0);

    try {
        (void)parse_csv("a,b\n1,2\n3,NA\n");
        FAIL("expected an error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("column b") != std::string::npos);
    }

    const Dataset h = parse_csv("1,2,3\n4,5,6\n", false);
    CHECK(h.names() == std::vector<std::string>{"v1", "v2", "v3"});
    CHECK(h.rows() == 2);

    CHECK_THROWS_AS((void)parse_csv("a,b\n1,2\n3\n"), DataError);
    CHECK_THROWS_AS((void)parse_csv("a,a\n1,2\n"), DataError);
    CHECK_THROWS_AS((void)load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("csv round trip is bit-identical") {
    const Dataset ds = parse_csv("x,y\n0.1,-3.25e-7\n123456789012345,2.718281828459045\n1e300,-0\n");
    const auto path = std::filesystem::temp_directory_path() / "mbiv_roundtrip.csv";
    write_csv(ds, path.string());
    const Dataset back = load_csv(path.string());
    CHECK(back.matrix() == ds.matrix());
    std::filesystem::remove(path);
}

TEST_CASE("log transform") {
    Dataset ds({{"a", Eigen::Vector3d(1.0, std::numbers::e, std::exp(2.0)), {Transform::raw}},
                {"b", Eigen::Vector3d(0.0, 1.0, 2.0), {Transform::raw}}});
    const Dataset l = log_transform(ds, {"a"});
    CHECK(l.values("a")[0] == doctest::Approx(0.0));
    CHECK(l.values("a")[1] == doctest::Approx(1.0));
    CHECK(l.values("a")[2] == doctest::Approx(2.0));
    CHECK(l.column("a").history.back() == Transform::logged);
    CHECK(l.values("b") == ds.values("b"));
    CHECK_THROWS_AS((void)log_transform(ds, {"b"}), DataError);
    CHECK_THROWS_AS((void)log_transform(ds, {"zzz"}), DataError);
    CHECK(log_transform(ds, {}).matrix() == ds.matrix());
}

TEST_CASE("standardize") {
    Dataset ds({{"a", Eigen::Vector3d(1, 2, 3), {Transform::raw}}, {"c", Eigen::Vector3d(5, 5, 5), {Transform::raw}}});
    const Dataset s = standardize(ds, {"a"});
    CHECK(std::abs(mean(s.values("a"))) < 1e-12);
    CHECK(std::abs(sample_sd(s.values("a")) - 1.0) < 1e-12);
    const Dataset s2 = standardize(s, {"a"});
    CHECK((s2.values("a") - s.values("a")).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS((void)standardize(ds, {"c"}), NumericError);
}

TEST_CASE("skewness") {
    CHECK(skewness(Eigen::Vector3d(-1, 0, 1)) == doctest::Approx(0.0));
    CHECK(skewness(Eigen::Vector4d(0, 0, 0, 10)) > 0.0);
    const auto sem = random_sem(1, 0.0, 3);
    const Dataset ds = sample(sem, 10000, 5);
    const Eigen::VectorXd ln = ds.values("v1").array().exp();
    CHECK(skewness(ln) > 1.0);
    CHECK_THROWS((void)skewness(Eigen::Vector3d(2, 2, 2)));
}

TEST_CASE("correlation matrix") {
    Eigen::VectorXd x(5);
    x << 1, 3, 2, 5, 4;
    Dataset ds({{"x", x, {Transform::raw}}, {"nx", -x, {Transform::raw}}});
    const auto t = corr_matrix(ds);
    CHECK(t.at("x", "x") == 1.0);
    CHECK(t.at("x", "nx") == doctest::Approx(-1.0));

    ScenarioParams p{{"a1", 0.8}, {"rho", 0.0}};
    const auto s = make_scenario("iv_basic", p);
    const Dataset big = sample(s.sem, 100000, 11);
    const auto ct = corr_matrix(big);
    CHECK(std::abs(ct.at("z", "x") - 0.8 / std::sqrt(1.64)) < 0.02);
    const auto cs = corr_matrix_serial(big);
    CHECK(ct.matrix == cs.matrix);
    for (Eigen::Index i = 0; i < ct.matrix.rows(); ++i) CHECK(ct.matrix(i, i) == 1.0);
    CHECK((ct.matrix - ct.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(ct.to_csv().rfind(",z,x,y\n", 0) == 0);
}

TEST_CASE("partial correlation") {
    Eigen::Matrix3d chain;  // z -> x -> y, unit weights and noises
    chain << 1, 1, 1, 1, 2, 2, 1, 2, 3;
    CHECK(partial_corr(chain, 0, 2, {}) == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(std::abs(partial_corr(chain, 0, 2, {1})) < 1e-10);
    Eigen::Matrix3d coll;  // z -> m <- y
    coll << 1, 1, 0, 1, 3, 1, 0, 1, 1;
    CHECK(std::abs(partial_corr(coll, 0, 2, {})) < 1e-12);
    CHECK(std::abs(partial_corr(coll, 0, 2, {1})) > 0.1);
    CHECK_THROWS_AS((void)partial_corr(chain, 0, 0, {}), DataError);
    CHECK_THROWS_AS((void)partial_corr(chain, 0, 2, {0}), DataError);

    const auto sem = random_sem(6, 0.5, 17);
    const Eigen::MatrixXd S = population_covariance(sem);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) {
            std::vector<std::size_t> z;
            for (std::size_t k = 0; k < 6; ++k)
                if (k != i && k != j && (k % 2 == 0)) z.push_back(k);
            CHECK(std::abs(partial_corr(S, i, j, z) - partial_corr_residual(S, i, j, z)) < 1e-10);
        }
}
