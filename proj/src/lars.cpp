#include <cmath>
#include <limits>

#include "mbiv/error.hpp"
#include "mbiv/select.hpp"

namespace mbiv {

std::size_t LarsPath::best_step() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < bic.size(); ++k)
        if (bic[k] < bic[best]) best = k;
    return best;
}

std::vector<std::size_t> LarsPath::prefix(std::size_t k) const {
    return {entry_order.begin(), entry_order.begin() + static_cast<std::ptrdiff_t>(std::min(k, entry_order.size()))};
}

namespace {

constexpr double kTieTol = 1e-12;

double bic_of(double rss, std::size_t n, std::size_t k) {
    const double nn = static_cast<double>(n);
    const double r = std::max(rss, std::numeric_limits<double>::min());
    return nn * std::log(r / nn) + static_cast<double>(k) * std::log(nn);
}

}  // namespace

LarsPath lars_path(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::size_t max_steps) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (static_cast<std::size_t>(y.size()) != n) throw UsageError("lars_path: response length mismatch");
    if (n < 2) throw NumericError("lars_path: need at least two observations");
    max_steps = std::min({max_steps, p, n - 1});

    Eigen::MatrixXd Xn = X.rowwise() - X.colwise().mean();
    Eigen::VectorXd norms(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        norms[jj] = Xn.col(jj).norm();
        if (!(norms[jj] > 1e-12 * std::sqrt(static_cast<double>(n))))
            throw NumericError("lars_path: zero-variance column at index " + std::to_string(j));
        Xn.col(jj) /= norms[jj];
    }
    const Eigen::VectorXd yc = y.array() - y.mean();

    LarsPath path;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    path.coefs.push_back(beta);
    path.bic.push_back(bic_of(yc.squaredNorm(), n, 0));
    if (max_steps == 0) return path;

    std::vector<std::size_t> active;
    std::vector<char> is_active(p, 0);

    Eigen::VectorXd c = Xn.transpose() * yc;
    {
        std::size_t first = 0;
        double cmax = -1.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double a = std::abs(c[static_cast<Eigen::Index>(j)]);
            if (a > cmax + kTieTol * std::max(1.0, cmax)) {
                cmax = a;
                first = j;
            }
        }
        active.push_back(first);
        is_active[first] = 1;
    }

    while (true) {
        c = Xn.transpose() * (yc - mu);
        double C = 0.0;
        for (auto j : active) C = std::max(C, std::abs(c[static_cast<Eigen::Index>(j)]));
        path.max_corr.push_back(C);
        path.entry_order.push_back(active.back());

        const auto k = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd XA(static_cast<Eigen::Index>(n), k);
        Eigen::VectorXd s(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            const auto j = static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)]);
            s[a] = c[j] >= 0.0 ? 1.0 : -1.0;
            XA.col(a) = Xn.col(j) * s[a];
        }
        const Eigen::MatrixXd G = XA.transpose() * XA;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13)
            throw NumericError("lars_path: active set is collinear (column " + std::to_string(active.back()) + ")");
        const Eigen::VectorXd gi1 = ldlt.solve(Eigen::VectorXd::Ones(k));
        const double AA = 1.0 / std::sqrt(gi1.sum());
        const Eigen::VectorXd w = AA * gi1;
        const Eigen::VectorXd u = XA * w;
        const Eigen::VectorXd a = Xn.transpose() * u;

        const bool last = active.size() >= max_steps;
        double gamma = C / AA;
        std::optional<std::size_t> next;
        if (!last) {
            for (std::size_t j = 0; j < p; ++j) {
                if (is_active[j]) continue;
                const auto jj = static_cast<Eigen::Index>(j);
                for (double g : {(C - c[jj]) / (AA - a[jj]), (C + c[jj]) / (AA + a[jj])}) {
                    if (!std::isfinite(g) || g <= 1e-14) continue;
                    if (g < gamma - kTieTol * std::max(1.0, gamma)) {
                        gamma = g;
                        next = j;
                    }
                }
            }
        }
        mu += gamma * u;
        for (Eigen::Index q = 0; q < k; ++q)
            beta[static_cast<Eigen::Index>(active[static_cast<std::size_t>(q)])] += gamma * w[q] * s[q];
        path.coefs.push_back(beta);
        // Score the active prefix by its least-squares refit, not the shrunken LARS fit.
        const Eigen::VectorXd refit = XA * ldlt.solve(XA.transpose() * yc);
        path.bic.push_back(bic_of((yc - refit).squaredNorm(), n, active.size()));
        if (last || !next) break;
        active.push_back(*next);
        is_active[*next] = 1;
    }

    for (auto& b : path.coefs) b = b.cwiseQuotient(norms);
    return path;
}

}  // namespace mbiv
