#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mbiv/error.hpp"
#include "mbiv/rng.hpp"
#include "mbiv/select.hpp"

namespace mbiv {

bool SelectionResult::selects(const std::string& name) const {
    return std::find(selected.begin(), selected.end(), name) != selected.end();
}

double SelectionResult::score_of(const std::string& name) const {
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (candidates[k] == name) return scores[k];
    throw UsageError("no candidate named '" + name + "'");
}

nlohmann::ordered_json to_json(const SelectionResult& s) {
    nlohmann::ordered_json j;
    j["algorithm"] = s.algorithm;
    j["hyperparameters"] = s.hyperparameters;
    auto sc = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < s.candidates.size(); ++k) sc[s.candidates[k]] = s.scores[k];
    j["scores"] = sc;
    j["selected"] = s.selected;
    if (!s.notes.empty()) j["notes"] = s.notes;
    return j;
}

namespace {

// Column-wise centering and n-1 scaling with the statistics kept for reuse on held-out rows.
struct Scaler {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd sd;

    static Scaler fit(const Eigen::MatrixXd& X) {
        Scaler s;
        s.mean = X.colwise().mean();
        s.sd.resize(X.cols());
        const double denom = static_cast<double>(std::max<Eigen::Index>(X.rows() - 1, 1));
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            s.sd[j] = std::sqrt((X.col(j).array() - s.mean[j]).square().sum() / denom);
            if (!(s.sd[j] > 0.0)) throw NumericError("zero-variance column at index " + std::to_string(j));
        }
        return s;
    }
    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - mean).array().rowwise() / sd.array();
    }
};

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
    return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> d(0, i - 1);
        std::swap(idx[i - 1], idx[d(rng)]);
    }
    return idx;
}

void check_names(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != X.cols()) throw UsageError("candidate name count does not match columns");
}

// ---------------------------------------------------------------- cross-validation

struct GridPoint {
    double lambda;
    double alpha;
};

std::vector<GridPoint> build_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& Xs, const CvOptions& opt) {
    std::vector<double> alphas = opt.algorithm == CvAlgorithm::lasso ? std::vector<double>{1.0} : opt.alphas;
    if (alphas.empty()) throw UsageError("elastic net needs a nonempty mixing grid");
    std::vector<GridPoint> grid;
    for (double a : alphas) {
        if (!opt.lambdas.empty()) {
            auto ls = opt.lambdas;
            std::sort(ls.begin(), ls.end(), std::greater<>());
            for (double l : ls) grid.push_back({l, a});
            continue;
        }
        const double lmax = lambda_max(y, Xs, a);
        const std::size_t m = std::max<std::size_t>(opt.grid_size, 2);
        for (std::size_t k = 0; k < m; ++k) {
            const double frac = static_cast<double>(k) / static_cast<double>(m - 1);
            grid.push_back({lmax * std::pow(opt.grid_ratio, frac), a});
        }
    }
    return grid;
}

std::vector<double> fold_mse(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::size_t>& fold_of,
                             std::size_t f, const std::vector<GridPoint>& grid) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? te : tr).push_back(i);
    const Eigen::MatrixXd Xtr_raw = take_rows(X, tr);
    const Scaler sc = Scaler::fit(Xtr_raw);
    const Eigen::MatrixXd Xtr = sc.apply(Xtr_raw);
    const Eigen::MatrixXd Xte = sc.apply(take_rows(X, te));
    const Eigen::VectorXd ytr = take_rows(y, tr);
    const Eigen::VectorXd yte = take_rows(y, te);
    const double ybar = ytr.mean();
    std::vector<double> out(grid.size());
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(X.cols());
    double last_alpha = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (grid[g].alpha != last_alpha) warm.setZero();
        last_alpha = grid[g].alpha;
        warm = elastic_net_cd(ytr, Xtr, grid[g].lambda, grid[g].alpha, {}, &warm);
        const Eigen::VectorXd pred = (Xte * warm).array() + ybar;
        out[g] = (yte - pred).squaredNorm() / static_cast<double>(yte.size());
    }
    return out;
}

SelectionResult cv_finish(const Eigen::VectorXd& y, const Eigen::MatrixXd& Xs, const std::vector<std::string>& names,
                          const CvOptions& opt, const std::vector<GridPoint>& grid,
                          const std::vector<std::vector<double>>& mse, std::size_t min_train) {
    std::vector<double> avg(grid.size(), 0.0);
    for (const auto& row : mse)
        for (std::size_t g = 0; g < grid.size(); ++g) avg[g] += row[g] / static_cast<double>(mse.size());
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (avg[g] < avg[best]) best = g;
    const Eigen::VectorXd b = elastic_net_cd(y, Xs, grid[best].lambda, grid[best].alpha);

    SelectionResult r;
    r.algorithm = opt.algorithm == CvAlgorithm::lasso ? "cv_lasso" : "cv_elastic_net";
    r.candidates = names;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        r.scores.push_back(std::abs(b[j]));
        if (b[j] != 0.0) r.selected.push_back(names[static_cast<std::size_t>(j)]);
    }
    r.hyperparameters["lambda"] = grid[best].lambda;
    r.hyperparameters["alpha"] = grid[best].alpha;
    r.hyperparameters["folds"] = opt.folds;
    r.hyperparameters["grid_points"] = grid.size();
    r.hyperparameters["cv_mse"] = avg[best];
    r.hyperparameters["seed"] = opt.seed;
    if (min_train < static_cast<std::size_t>(Xs.cols()) + 1)
        r.notes.push_back("training fold smaller than p+1; penalized fit only");
    return r;
}

struct CvSetup {
    Eigen::MatrixXd Xs;
    std::vector<GridPoint> grid;
    std::vector<std::size_t> fold_of;
    std::size_t min_train;
};

CvSetup cv_setup(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                 const CvOptions& opt) {
    check_names(X, names);
    const auto n = static_cast<std::size_t>(X.rows());
    if (opt.folds < 2) throw UsageError("cross-validation needs at least 2 folds");
    if (opt.folds > n) throw UsageError("more folds than observations");
    CvSetup s;
    s.Xs = Scaler::fit(X).apply(X);
    s.grid = build_grid(y, s.Xs, opt);
    auto rng = substream(opt.seed, 0);
    const auto perm = shuffled_indices(n, rng);
    s.fold_of.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) s.fold_of[perm[i]] = i % opt.folds;
    s.min_train = n - (n + opt.folds - 1) / opt.folds;
    return s;
}

}  // namespace

SelectionResult cv_select_serial(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                                 const CvOptions& opt) {
    const CvSetup s = cv_setup(y, X, names, opt);
    std::vector<std::vector<double>> mse(opt.folds);
    for (std::size_t f = 0; f < opt.folds; ++f) mse[f] = fold_mse(y, X, s.fold_of, f, s.grid);
    return cv_finish(y, s.Xs, names, opt, s.grid, mse, s.min_train);
}

SelectionResult cv_select(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                          const CvOptions& opt) {
    const CvSetup s = cv_setup(y, X, names, opt);
    std::vector<std::vector<double>> mse(opt.folds);
    std::string err;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t f = 0; f < opt.folds; ++f) {
        try {
            mse[f] = fold_mse(y, X, s.fold_of, f, s.grid);
        } catch (const std::exception& e) {
#pragma omp critical
            err = e.what();
        }
    }
    if (!err.empty()) throw NumericError(err);
    return cv_finish(y, s.Xs, names, opt, s.grid, mse, s.min_train);
}

// ---------------------------------------------------------------- ISIS

std::size_t isis_keep_size(std::size_t n, std::optional<double> keep_fraction) {
    if (n < 4) throw DataError("too few observations for a screening round (n=" + std::to_string(n) + ")");
    if (keep_fraction) {
        if (!(*keep_fraction > 0.0 && *keep_fraction <= 1.0)) throw UsageError("keep fraction must lie in (0, 1]");
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(*keep_fraction * static_cast<double>(n))));
    }
    return static_cast<std::size_t>(std::ceil(static_cast<double>(n) / std::log(static_cast<double>(n))));
}

std::vector<std::size_t> isis_once(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t keep) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (n < 4) throw DataError("too few observations for a screening round (n=" + std::to_string(n) + ")");
    keep = std::min({keep, p, n - 2});

    Eigen::MatrixXd Xu = X.rowwise() - X.colwise().mean();
    std::vector<char> usable(p, 1);
    for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double nrm = Xu.col(jj).norm();
        if (nrm > 1e-12 * std::sqrt(static_cast<double>(n))) {
            Xu.col(jj) /= nrm;
        } else {
            usable[j] = 0;
            Xu.col(jj).setZero();
        }
    }

    std::vector<std::size_t> S;
    Eigen::VectorXd r = y.array() - y.mean();
    for (std::size_t round = 0; round < 64; ++round) {
        if (!S.empty()) {
            Eigen::MatrixXd XS(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(S.size()));
            for (std::size_t k = 0; k < S.size(); ++k) XS.col(static_cast<Eigen::Index>(k)) = Xu.col(static_cast<Eigen::Index>(S[k]));
            r = ols(y, XS, true).residuals;
        }
        const Eigen::VectorXd score = (Xu.transpose() * r).cwiseAbs();
        std::vector<std::size_t> pool;
        std::vector<char> in_s(p, 0);
        for (auto j : S) in_s[j] = 1;
        for (std::size_t j = 0; j < p; ++j)
            if (usable[j] && !in_s[j]) pool.push_back(j);
        const std::size_t take = keep > S.size() ? std::min(keep - S.size(), pool.size()) : 0;
        std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                          [&](std::size_t a, std::size_t b) {
                              const double sa = score[static_cast<Eigen::Index>(a)];
                              const double sb = score[static_cast<Eigen::Index>(b)];
                              return sa != sb ? sa > sb : a < b;
                          });
        std::vector<std::size_t> cand = S;
        cand.insert(cand.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(cand.begin(), cand.end());
        if (cand.empty()) break;

        Eigen::MatrixXd XC(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cand.size()));
        for (std::size_t k = 0; k < cand.size(); ++k) XC.col(static_cast<Eigen::Index>(k)) = Xu.col(static_cast<Eigen::Index>(cand[k]));
        const LarsPath path = lars_path(y, XC, std::min(cand.size(), n - 2));
        std::vector<std::size_t> next;
        for (auto k : path.prefix(path.best_step())) next.push_back(cand[k]);
        std::sort(next.begin(), next.end());
        if (next == S) break;
        S = std::move(next);
        if (S.empty() || S.size() >= keep) break;
    }
    return S;
}

namespace {

std::vector<std::size_t> isis_replicate(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t keep,
                                        std::uint64_t seed, std::size_t b) {
    const auto n = static_cast<std::size_t>(X.rows());
    auto rng = substream(seed, b);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& i : rows) i = pick(rng);
    return isis_once(take_rows(y, rows), take_rows(X, rows), keep);
}

SelectionResult isis_finish(const Eigen::MatrixXd& X, const std::vector<std::string>& names, const IsisOptions& opt,
                            std::size_t keep, const std::vector<std::vector<std::size_t>>& picks) {
    const auto p = static_cast<std::size_t>(X.cols());
    std::vector<std::size_t> count(p, 0);
    for (const auto& s : picks)
        for (auto j : s) ++count[j];
    SelectionResult r;
    r.algorithm = "isis_bootstrap";
    r.candidates = names;
    for (std::size_t j = 0; j < p; ++j) {
        r.scores.push_back(static_cast<double>(count[j]) / static_cast<double>(opt.B));
        if (static_cast<double>(count[j]) >= opt.threshold * static_cast<double>(opt.B) - 1e-9) r.selected.push_back(names[j]);
    }
    r.hyperparameters["B"] = opt.B;
    r.hyperparameters["keep_per_round"] = keep;
    r.hyperparameters["threshold"] = opt.threshold;
    r.hyperparameters["seed"] = opt.seed;
    if (opt.moderate_corr_cutoff) {
        const double cut = *opt.moderate_corr_cutoff;
        const Eigen::MatrixXd Z = Scaler::fit(X).apply(X) / std::sqrt(static_cast<double>(X.rows() - 1));
        std::vector<std::string> extra;
        for (std::size_t j = 0; j < p; ++j) {
            if (r.selects(names[j])) continue;
            for (const auto& s : r.selected) {
                const auto k = static_cast<Eigen::Index>(std::find(names.begin(), names.end(), s) - names.begin());
                if (std::abs(Z.col(static_cast<Eigen::Index>(j)).dot(Z.col(k))) >= cut) {
                    extra.push_back(names[j]);
                    break;
                }
            }
        }
        r.hyperparameters["moderate_corr_cutoff"] = cut;
        r.hyperparameters["added_by_correlation"] = extra;
        if (!extra.empty()) {
            r.algorithm += "+corr";
            for (auto& e : extra) r.selected.push_back(e);
            std::vector<std::string> ordered;
            for (const auto& nm : names)
                if (r.selects(nm)) ordered.push_back(nm);
            r.selected = ordered;
        }
    }
    return r;
}

void check_isis(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                const IsisOptions& opt) {
    check_names(X, names);
    if (y.size() != X.rows()) throw UsageError("response length mismatch");
    if (opt.B < 1) throw UsageError("bootstrap count must be at least 1");
    if (!(opt.threshold > 0.0 && opt.threshold <= 1.0)) throw UsageError("inclusion threshold must lie in (0, 1]");
}

}  // namespace

SelectionResult isis_bootstrap_serial(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                      const std::vector<std::string>& names, const IsisOptions& opt) {
    check_isis(y, X, names, opt);
    const std::size_t keep = isis_keep_size(static_cast<std::size_t>(X.rows()), opt.keep_fraction);
    std::vector<std::vector<std::size_t>> picks(opt.B);
    for (std::size_t b = 0; b < opt.B; ++b) picks[b] = isis_replicate(y, X, keep, opt.seed, b);
    return isis_finish(X, names, opt, keep, picks);
}

SelectionResult isis_bootstrap(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                               const IsisOptions& opt) {
    check_isis(y, X, names, opt);
    const std::size_t keep = isis_keep_size(static_cast<std::size_t>(X.rows()), opt.keep_fraction);
    std::vector<std::vector<std::size_t>> picks(opt.B);
    std::string err;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t b = 0; b < opt.B; ++b) {
        try {
            picks[b] = isis_replicate(y, X, keep, opt.seed, b);
        } catch (const std::exception& e) {
#pragma omp critical
            err = e.what();
        }
    }
    if (!err.empty()) throw NumericError(err);
    return isis_finish(X, names, opt, keep, picks);
}

// ---------------------------------------------------------------- solar

namespace {

std::vector<std::size_t> solar_subsample_prefix(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t m,
                                                std::uint64_t seed, std::size_t k) {
    auto rng = substream(seed, k);
    auto idx = shuffled_indices(static_cast<std::size_t>(X.rows()), rng);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    const LarsPath path = lars_path(take_rows(y, idx), take_rows(X, idx), std::min<std::size_t>(m - 1, static_cast<std::size_t>(X.cols())));
    return path.prefix(path.best_step());
}

std::size_t solar_subsample_size(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("subsample fraction must lie in (0, 1)");
    const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (m < 10) throw DataError("solar subsample has " + std::to_string(m) + " observations; at least 10 required");
    return m;
}

Eigen::VectorXd tally(const std::vector<std::vector<std::size_t>>& prefixes, std::size_t p) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (const auto& pre : prefixes)
        for (auto j : pre) s[static_cast<Eigen::Index>(j)] += 1.0;
    return s / static_cast<double>(prefixes.size());
}

}  // namespace

Eigen::VectorXd solar_scores_serial(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t K, double fraction,
                                    std::uint64_t seed) {
    if (K < 2) throw UsageError("solar needs at least 2 subsamples");
    const std::size_t m = solar_subsample_size(static_cast<std::size_t>(X.rows()), fraction);
    std::vector<std::vector<std::size_t>> prefixes(K);
    for (std::size_t k = 0; k < K; ++k) prefixes[k] = solar_subsample_prefix(y, X, m, seed, k);
    return tally(prefixes, static_cast<std::size_t>(X.cols()));
}

Eigen::VectorXd solar_scores(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t K, double fraction,
                             std::uint64_t seed) {
    if (K < 2) throw UsageError("solar needs at least 2 subsamples");
    const std::size_t m = solar_subsample_size(static_cast<std::size_t>(X.rows()), fraction);
    std::vector<std::vector<std::size_t>> prefixes(K);
    std::string err;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t k = 0; k < K; ++k) {
        try {
            prefixes[k] = solar_subsample_prefix(y, X, m, seed, k);
        } catch (const std::exception& e) {
#pragma omp critical
            err = e.what();
        }
    }
    if (!err.empty()) throw NumericError(err);
    return tally(prefixes, static_cast<std::size_t>(X.cols()));
}

namespace {

bool passes(double score, double c, std::size_t K) {
    return score * static_cast<double>(K) >= c * static_cast<double>(K) - 1e-9;
}

double validation_mse(const Eigen::VectorXd& ytr, const Eigen::MatrixXd& Xtr, const Eigen::VectorXd& yva,
                      const Eigen::MatrixXd& Xva, const std::vector<std::size_t>& cols) {
    if (cols.empty()) return (yva.array() - ytr.mean()).square().mean();
    Eigen::MatrixXd A(Xtr.rows(), static_cast<Eigen::Index>(cols.size()));
    Eigen::MatrixXd V(Xva.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        A.col(static_cast<Eigen::Index>(k)) = Xtr.col(static_cast<Eigen::Index>(cols[k]));
        V.col(static_cast<Eigen::Index>(k)) = Xva.col(static_cast<Eigen::Index>(cols[k]));
    }
    const RegressionFit f = ols(ytr, A, true);
    const Eigen::VectorXd pred = (V * f.coef.tail(f.coef.size() - 1)).array() + f.coef[0];
    return (yva - pred).squaredNorm() / static_cast<double>(yva.size());
}

constexpr std::uint64_t kSolarFullTag = 0x736f6c6172ULL;
constexpr std::uint64_t kSolarTrainTag = 0x747261696eULL;
constexpr std::uint64_t kSolarSplitTag = 0x73706c6974ULL;

}  // namespace

SelectionResult solar(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const std::vector<std::string>& names,
                      const SolarOptions& opt) {
    check_names(X, names);
    if (y.size() != X.rows()) throw UsageError("response length mismatch");
    if (opt.c && !(*opt.c > 0.0 && *opt.c <= 1.0)) throw UsageError("solar threshold must lie in (0, 1]");
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());

    SelectionResult r;
    r.algorithm = "solar";
    r.candidates = names;
    double c = 0.0;
    if (opt.c) {
        c = *opt.c;
        r.hyperparameters["c_source"] = "fixed";
    } else {
        auto rng = substream(mix_key(opt.seed, kSolarSplitTag), 0);
        const auto perm = shuffled_indices(n, rng);
        const auto nv = static_cast<std::size_t>(std::floor(opt.validation_fraction * static_cast<double>(n)));
        if (nv < 1 || n - nv < 10) throw DataError("too few observations for the solar validation split");
        std::vector<std::size_t> va(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nv));
        std::vector<std::size_t> tr(perm.begin() + static_cast<std::ptrdiff_t>(nv), perm.end());
        std::sort(va.begin(), va.end());
        std::sort(tr.begin(), tr.end());
        const Eigen::MatrixXd Xtr = take_rows(X, tr), Xva = take_rows(X, va);
        const Eigen::VectorXd ytr = take_rows(y, tr), yva = take_rows(y, va);
        const Eigen::VectorXd sc = solar_scores(ytr, Xtr, opt.K, opt.fraction, mix_key(opt.seed, kSolarTrainTag));
        double best = INFINITY;
        auto grid_json = nlohmann::ordered_json::array();
        for (double cand : opt.c_grid) {
            std::vector<std::size_t> cols;
            for (std::size_t j = 0; j < p; ++j)
                if (passes(sc[static_cast<Eigen::Index>(j)], cand, opt.K)) cols.push_back(j);
            double mse = INFINITY;
            try {
                mse = validation_mse(ytr, Xtr, yva, Xva, cols);
            } catch (const NumericError&) {
            }
            grid_json.push_back({{"c", cand}, {"validation_mse", mse}});
            if (mse < best) {
                best = mse;
                c = cand;
            }
        }
        if (!std::isfinite(best)) throw NumericError("solar: no threshold produced a usable validation fit");
        r.hyperparameters["c_source"] = "validation";
        r.hyperparameters["validation_fraction"] = opt.validation_fraction;
        r.hyperparameters["validation_grid"] = grid_json;
    }
    const Eigen::VectorXd sc = solar_scores(y, X, opt.K, opt.fraction, mix_key(opt.seed, kSolarFullTag));
    for (std::size_t j = 0; j < p; ++j) {
        r.scores.push_back(sc[static_cast<Eigen::Index>(j)]);
        if (passes(sc[static_cast<Eigen::Index>(j)], c, opt.K)) r.selected.push_back(names[j]);
    }
    r.hyperparameters["K"] = opt.K;
    r.hyperparameters["subsample_fraction"] = opt.fraction;
    r.hyperparameters["c"] = c;
    r.hyperparameters["seed"] = opt.seed;
    return r;
}

// ---------------------------------------------------------------- diagnostics

double irc_value(const Eigen::MatrixXd& sigma, const std::vector<std::size_t>& support) {
    const auto p = static_cast<std::size_t>(sigma.rows());
    if (support.empty()) throw UsageError("irc_value needs a nonempty support");
    std::vector<char> in(p, 0);
    for (auto s : support) {
        if (s >= p) throw UsageError("support index out of range");
        in[s] = 1;
    }
    const auto k = static_cast<Eigen::Index>(support.size());
    if (static_cast<std::size_t>(k) >= p) throw UsageError("irc_value needs a nonempty complement");
    Eigen::MatrixXd sss(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b)
            sss(a, b) = sigma(static_cast<Eigen::Index>(support[static_cast<std::size_t>(a)]), static_cast<Eigen::Index>(support[static_cast<std::size_t>(b)]));
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sss);
    if (!lu.isInvertible()) throw NumericError("irc_value: singular support covariance");
    double worst = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        if (in[j]) continue;
        Eigen::VectorXd cross(k);
        for (Eigen::Index a = 0; a < k; ++a)
            cross[a] = sigma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(support[static_cast<std::size_t>(a)]));
        worst = std::max(worst, lu.solve(cross).lpNorm<1>());
    }
    return worst;
}

double irc_value(const Dataset& ds, const std::vector<std::string>& support) {
    const CorrelationTable ct = corr_matrix(ds);
    std::vector<std::size_t> idx;
    for (const auto& s : support) idx.push_back(ds.index(s));
    return irc_value(ct.matrix, idx);
}

GroupReport grouping_diagnostic(const Dataset& ds, const std::string& anchor, double cutoff) {
    if (!(cutoff > 0.0 && cutoff < 1.0)) throw UsageError("grouping cutoff must lie in (0, 1)");
    GroupReport g;
    g.anchor = anchor;
    const Eigen::VectorXd a = standardized(ds.values(anchor));
    const double denom = static_cast<double>(ds.rows() - 1);
    std::vector<Eigen::VectorXd> cols;
    for (const auto& c : ds.columns()) {
        if (c.name == anchor) continue;
        Eigen::VectorXd z;
        try {
            z = standardized(c.values);
        } catch (const NumericError&) {
            continue;
        }
        const double r = std::clamp(a.dot(z) / denom, -1.0, 1.0);
        if (std::abs(r) > cutoff) {
            g.members.push_back(c.name);
            g.member_corr.push_back(r);
            cols.push_back(z);
        }
    }
    if (g.members.empty()) return g;
    Eigen::MatrixXd M(static_cast<Eigen::Index>(ds.rows()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) M.col(static_cast<Eigen::Index>(k)) = cols[k];
    g.fit = ols(a, M, true, g.members);
    g.abs_coef_sum = g.fit->coef.tail(g.fit->coef.size() - 1).lpNorm<1>();
    // Exact duplicates give a unit coefficient only up to rounding.
    g.flag = g.abs_coef_sum >= 1.0 - 1e-9;
    return g;
}

SelectionResult rectify(const SelectionResult& sel, const std::vector<GroupReport>& groups) {
    SelectionResult out = sel;
    std::set<std::string> chosen(sel.selected.begin(), sel.selected.end());
    for (const auto& g : groups) {
        if (!g.flag) continue;
        std::vector<std::string> whole = g.members;
        whole.push_back(g.anchor);
        const bool touches = std::any_of(whole.begin(), whole.end(), [&](const std::string& v) { return chosen.count(v) > 0; });
        if (touches) chosen.insert(whole.begin(), whole.end());
    }
    out.selected.clear();
    for (const auto& c : sel.candidates)
        if (chosen.count(c)) out.selected.push_back(c);
    for (const auto& c : chosen)
        if (std::find(sel.candidates.begin(), sel.candidates.end(), c) == sel.candidates.end()) out.selected.push_back(c);
    out.algorithm = sel.algorithm + "_rectified";
    return out;
}

nlohmann::ordered_json to_json(const GroupReport& g) {
    nlohmann::ordered_json j;
    j["anchor"] = g.anchor;
    auto mem = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < g.members.size(); ++k) mem.push_back({{"name", g.members[k]}, {"corr", g.member_corr[k]}});
    j["members"] = mem;
    if (g.fit) j["group_regression"] = to_json(*g.fit);
    j["abs_coef_sum"] = g.abs_coef_sum;
    j["irc_violation_flag"] = g.flag;
    return j;
}

}  // namespace mbiv
