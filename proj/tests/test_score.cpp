#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mbiv/error.hpp"
#include "mbiv/score.hpp"
#include "mbiv/sem.hpp"

using namespace mbiv;

namespace {

Dataset chain_data(double w_zx, double w_xy, std::size_t n, std::uint64_t seed) {
    LinearSem sem = parse_sem("vertex z\nvertex x intercept=1\nvertex y scale=0.5\nz -> x w=" + format_double(w_zx) +
                              "\nx -> y w=" + format_double(w_xy) + "\n");
    return sample(sem, n, seed);
}

// p -> m -> c with an optional direct p -> c edge.
Dataset mediation_data(double direct, std::size_t n, std::uint64_t seed) {
    std::string text = "vertex p\nvertex m\nvertex c\np -> m w=0.8\nm -> c w=0.6\n";
    if (direct != 0.0) text += "p -> c w=" + format_double(direct) + "\n";
    return sample(parse_sem(text), n, seed);
}

}  // namespace

TEST_CASE("maximum-likelihood fit") {
    const Dataset ds = chain_data(0.8, -1.2, 100000, 3);
    const LinearSem none = fit_mle(parse_graph("node z\n"), ds);
    const Eigen::VectorXd& z = ds.values("z");
    const double n = static_cast<double>(z.size());
    CHECK(none.intercepts[0] == doctest::Approx(z.mean()).epsilon(1e-12));
    CHECK(none.scales[0] == doctest::Approx(std::sqrt((z.array() - z.mean()).square().sum() / n)).epsilon(1e-12));

    const LinearSem fit = fit_mle(parse_graph("z -> x\nx -> y\n"), ds);
    CHECK(std::abs(fit.weight("z", "x") - 0.8) < 0.02);
    CHECK(std::abs(fit.weight("x", "y") + 1.2) < 0.02);
    CHECK(std::abs(fit.intercepts[fit.dag.index("x")] - 1.0) < 0.02);
    CHECK(std::abs(fit.scales[fit.dag.index("y")] - 0.5) < 0.02);

    Dataset dup = ds;
    dup.add_column({"zz", 2.0 * ds.values("z"), {Transform::raw}});
    try {
        (void)fit_mle(parse_graph("z -> y\nzz -> y\n"), dup);
        FAIL("expected a rank error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }
    CHECK_THROWS_AS((void)fit_mle(parse_graph("q -> y\n"), ds), DataError);
}

TEST_CASE("graph score arithmetic") {
    const Dataset ds = chain_data(0.8, 0.5, 2000, 8);
    const Dag g = parse_graph("z -> x\nx -> y\n");
    const GraphScore s = score_graph(g, ds);
    const double n = 2000.0;
    double aic = 0.0, bic = 0.0, bge = 0.0, ll = 0.0;
    std::size_t k = 0;
    for (const auto& v : s.per_vertex) {
        aic += v.aic;
        bic += v.bic;
        bge += v.bge;
        ll += v.loglik;
        k += v.k;
        CHECK(v.aic == doctest::Approx(-2.0 * v.loglik + 2.0 * static_cast<double>(v.k)));
        CHECK(v.bic == doctest::Approx(-2.0 * v.loglik + static_cast<double>(v.k) * std::log(n)));
    }
    CHECK(std::abs(s.aic - aic) < 1e-8);
    CHECK(std::abs(s.bic - bic) < 1e-8);
    CHECK(std::abs(s.bge - bge) < 1e-8);
    CHECK(k == 2 + 3 + 3);
    CHECK(s.k == k);
    CHECK(s.n == 2000);
    CHECK(s.value(Criterion::bic) == s.bic);

    // Factorized and joint likelihoods agree at the fitted parameters.
    CHECK(std::abs(joint_loglik(fit_mle(g, ds), ds) - s.loglik) < 1e-6 * std::abs(s.loglik));

    const GraphScore ser = score_graph_serial(g, ds);
    CHECK(ser.aic == s.aic);
    CHECK(ser.bic == s.bic);
    CHECK(ser.bge == s.bge);
}

TEST_CASE("empty graph on standardized columns has a closed form") {
    const Dataset ds = standardize(chain_data(0.8, 0.5, 500, 1), {"z", "x", "y"});
    const GraphScore s = score_graph(parse_graph("node z\nnode x\nnode y\n"), ds);
    const double n = 500.0;
    const double var = (n - 1.0) / n;
    const double expect = -n / 2.0 * (std::log(2.0 * std::numbers::pi * var) + 1.0);
    for (const auto& v : s.per_vertex) CHECK(v.loglik == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("BIC prefers true edges and rejects spurious ones") {
    const Dag empty = parse_graph("node a\nnode b\n");
    const Dag edge = parse_graph("a -> b\n");
    int true_wins = 0, spurious_loses = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Dataset linked = sample(parse_sem("vertex a\nvertex b\na -> b w=1\n"), 5000, s);
        true_wins += score_graph(edge, linked).bic < score_graph(empty, linked).bic;
        const Dataset apart = sample(parse_sem("vertex a\nvertex b\n"), 5000, 1000 + s);
        spurious_loses += score_graph(edge, apart).bic > score_graph(empty, apart).bic;
    }
    CHECK(true_wins >= 99);
    CHECK(spurious_loses >= 95);
}

TEST_CASE("score terms decompose by family") {
    const LinearSem sem = random_sem(6, 0.5, 5);
    const Dataset ds = sample(sem, 800, 2);
    const GraphScore base = score_graph(sem.dag, ds);
    Dag other = sem.dag;
    // Change only the parents of the last vertex in topological order.
    const Vid sink = sem.dag.topological_order().back();
    for (auto p : sem.dag.parents(sink)) other.remove_edge(p, sink);
    const GraphScore changed = score_graph(other, ds);
    for (Vid v = 0; v < sem.dag.size(); ++v) {
        if (v == sink) continue;
        CHECK(changed.per_vertex[v].aic == base.per_vertex[v].aic);
        CHECK(changed.per_vertex[v].bge == base.per_vertex[v].bge);
    }
}

TEST_CASE("BGe is equal across Markov-equivalent graphs") {
    const Dataset ds = chain_data(0.8, 0.5, 300, 4);
    const double fwd = score_graph(parse_graph("z -> x\nx -> y\n"), ds).bge;
    const double rev = score_graph(parse_graph("node z\ny -> x\nx -> z\n"), ds).bge;
    const double fork = score_graph(parse_graph("node z\nx -> z\nx -> y\n"), ds).bge;
    const double collider = score_graph(parse_graph("z -> x\ny -> x\n"), ds).bge;
    CHECK(std::abs(fwd - rev) < 1e-8 * std::abs(fwd));
    CHECK(std::abs(fwd - fork) < 1e-8 * std::abs(fwd));
    CHECK(std::abs(fwd - collider) > 1.0);

    Eigen::MatrixXd data = standardize(ds, ds.names()).matrix();
    CHECK(std::isfinite(bge_log_marginal(data, {0, 1})));
    CHECK(bge_log_marginal(data, {}) == 0.0);
}

TEST_CASE("backdoor comparison") {
    int specific = 0, sensitive = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        specific += compare_backdoor(mediation_data(0.0, 10000, s), "p", "m", "c").bic == Winner::no_backdoor;
        sensitive += compare_backdoor(mediation_data(0.5, 10000, 500 + s), "p", "m", "c").bic == Winner::backdoor;
    }
    CHECK(specific >= 95);
    CHECK(sensitive >= 95);

    const BackdoorDecision d = compare_backdoor(mediation_data(0.5, 3000, 1), "p", "m", "c");
    CHECK(d.winner(Criterion::aic) == d.aic);
    CHECK(d.unanimous == (d.aic == d.bic && d.bic == d.bge));
    CHECK(d.with_backdoor.k == d.without_backdoor.k + 1);
    const auto j = to_json(d);
    CHECK(j["scores"].size() == 3);
    CHECK(j["scores"][1]["criterion"] == "bic");
    CHECK(to_text(d).find("bic") != std::string::npos);
    CHECK(parse_criterion("bge") == Criterion::bge);
    CHECK_THROWS_AS((void)parse_criterion("hqic"), UsageError);

    // Extra controls enter both models as parents of the child.
    Dataset withq = mediation_data(0.0, 2000, 3);
    withq.add_column({"q", sample(parse_sem("vertex q\n"), 2000, 77).values("q"), {Transform::raw}});
    const BackdoorDecision dq = compare_backdoor(withq, "p", "m", "c", {"q"});
    CHECK(dq.without_backdoor.k == 2 + 3 + 4 + 2);
}

TEST_CASE("score warnings") {
    const Dataset tiny = chain_data(0.8, 0.5, 3, 1);
    const GraphScore s = score_graph(parse_graph("z -> x\nx -> y\n"), tiny);
    CHECK_FALSE(s.warnings.empty());
    const auto j = to_json(s);
    CHECK(j.contains("per_vertex"));
    CHECK(j.contains("warnings"));
}
