#include <cmath>

#include "mbiv/error.hpp"
#include "mbiv/select.hpp"

namespace mbiv {

namespace {

double soft(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

}  // namespace

double lambda_max(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double alpha) {
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double n = static_cast<double>(X.rows());
    return (Xc.transpose() * yc).cwiseAbs().maxCoeff() / (n * std::max(alpha, 1e-3));
}

Eigen::VectorXd elastic_net_cd(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double lambda, double alpha,
                               const CdOptions& opt, const Eigen::VectorXd* warm) {
    if (!(lambda >= 0.0)) throw UsageError("penalty must be non-negative");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("mixing parameter must lie in (0, 1]");
    if (y.size() != X.rows()) throw UsageError("coordinate descent: response length mismatch");
    const double n = static_cast<double>(X.rows());
    const Eigen::Index p = X.cols();
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    // Gram form: each coordinate update costs O(p) instead of O(n).
    const Eigen::MatrixXd G = (Xc.transpose() * Xc) / n;
    const Eigen::VectorXd xy = (Xc.transpose() * yc) / n;
    for (Eigen::Index j = 0; j < p; ++j)
        if (!(G(j, j) > 0.0)) throw NumericError("coordinate descent: zero-variance column at index " + std::to_string(j));

    Eigen::VectorXd b = warm ? *warm : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd Gb = G * b;
    const double l1 = lambda * alpha;
    const double l2 = lambda * (1.0 - alpha);
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double old = b[j];
            const double z = xy[j] - Gb[j] + G(j, j) * old;
            const double nb = soft(z, l1) / (G(j, j) + l2);
            const double d = nb - old;
            if (d != 0.0) {
                b[j] = nb;
                Gb += G.col(j) * d;
                max_change = std::max(max_change, std::abs(d));
            }
        }
        if (max_change < opt.tol) return b;
    }
    const double gap = lasso_kkt_residual(y, X, b, lambda);
    throw NumericError("coordinate descent did not converge after " + std::to_string(opt.max_sweeps) +
                       " sweeps; KKT residual " + format_double(gap));
}

Eigen::VectorXd lasso_cd(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double lambda, const CdOptions& opt) {
    return elastic_net_cd(y, X, lambda, 1.0, opt);
}

double lasso_kkt_residual(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::VectorXd& b, double lambda) {
    const double n = static_cast<double>(X.rows());
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::VectorXd r = (y.array() - y.mean()).matrix() - Xc * b;
    const Eigen::VectorXd g = (Xc.transpose() * r) / n;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        if (b[j] != 0.0)
            worst = std::max(worst, std::abs(g[j] - lambda * (b[j] > 0.0 ? 1.0 : -1.0)));
        else
            worst = std::max(worst, std::max(0.0, std::abs(g[j]) - lambda));
    }
    return worst;
}

}  // namespace mbiv
