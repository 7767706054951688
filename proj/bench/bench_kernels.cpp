// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <algorithm>

#include "mbiv/dataset.hpp"
#include "mbiv/graph.hpp"
#include "mbiv/score.hpp"
#include "mbiv/select.hpp"
#include "mbiv/sem.hpp"

namespace {

using namespace mbiv;

const Dataset& wide() {
    static const Dataset ds = sample(random_sem(40, 0.1, 3), 2000, 1);
    return ds;
}

const Scenario& blanket() {
    static const Scenario sc = make_scenario("mb_reduced", {{"distractors", 6}});
    return sc;
}

void BM_corr(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(corr_matrix(wide()));
}
void BM_corr_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(corr_matrix_serial(wide()));
}

void BM_sample(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(sample(blanket().sem, 20000, 5));
}
void BM_sample_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(sample_serial(blanket().sem, 20000, 5));
}

template <bool Serial>
void BM_solar(benchmark::State& st) {
    const Dataset ds = sample(blanket().sem, 2000, 2);
    std::vector<std::string> xs = ds.names();
    xs.erase(std::find(xs.begin(), xs.end(), "y"));
    const Eigen::MatrixXd X = ds.matrix(xs);
    for (auto _ : st) {
        if constexpr (Serial)
            benchmark::DoNotOptimize(solar_scores_serial(ds.values("y"), X, 10, 0.9, 1));
        else
            benchmark::DoNotOptimize(solar_scores(ds.values("y"), X, 10, 0.9, 1));
    }
}

template <bool Serial>
void BM_cv(benchmark::State& st) {
    const Dataset ds = sample(blanket().sem, 1000, 2);
    std::vector<std::string> xs = ds.names();
    xs.erase(std::find(xs.begin(), xs.end(), "y"));
    const Eigen::MatrixXd X = ds.matrix(xs);
    CvOptions opt;
    opt.grid_size = 50;
    for (auto _ : st) {
        if constexpr (Serial)
            benchmark::DoNotOptimize(cv_select_serial(ds.values("y"), X, xs, opt));
        else
            benchmark::DoNotOptimize(cv_select(ds.values("y"), X, xs, opt));
    }
}

template <bool Serial>
void BM_isis(benchmark::State& st) {
    const Dataset& ds = wide();
    std::vector<std::string> xs = ds.names();
    const std::string y = xs.back();
    xs.pop_back();
    const Eigen::MatrixXd X = ds.matrix(xs);
    IsisOptions opt;
    opt.B = 20;
    for (auto _ : st) {
        if constexpr (Serial)
            benchmark::DoNotOptimize(isis_bootstrap_serial(ds.values(y), X, xs, opt));
        else
            benchmark::DoNotOptimize(isis_bootstrap(ds.values(y), X, xs, opt));
    }
}

template <bool Serial>
void BM_score(benchmark::State& st) {
    const Dag g = random_sem(40, 0.1, 3).dag;
    for (auto _ : st) {
        if constexpr (Serial)
            benchmark::DoNotOptimize(score_graph_serial(g, wide()));
        else
            benchmark::DoNotOptimize(score_graph(g, wide()));
    }
}

template <bool Serial>
void BM_subset_scan(benchmark::State& st) {
    const Dag g = random_sem(16, 0.25, 8).dag;
    std::vector<Vid> pool;
    for (Vid v = 2; v < g.size(); ++v) pool.push_back(v);
    for (auto _ : st) {
        if constexpr (Serial)
            benchmark::DoNotOptimize(first_subset_violation_serial(g, 0, 1, {}, pool, true));
        else
            benchmark::DoNotOptimize(first_subset_violation(g, 0, 1, {}, pool, true));
    }
}

}  // namespace

BENCHMARK(BM_corr);
BENCHMARK(BM_corr_serial);
BENCHMARK(BM_sample);
BENCHMARK(BM_sample_serial);
BENCHMARK(BM_solar<false>);
BENCHMARK(BM_solar<true>);
BENCHMARK(BM_cv<false>);
BENCHMARK(BM_cv<true>);
BENCHMARK(BM_isis<false>);
BENCHMARK(BM_isis<true>);
BENCHMARK(BM_score<false>);
BENCHMARK(BM_score<true>);
BENCHMARK(BM_subset_scan<false>);
BENCHMARK(BM_subset_scan<true>);

BENCHMARK_MAIN();
