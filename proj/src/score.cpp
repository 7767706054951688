#include "mbiv/score.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <exception>
#include <numbers>

#include "mbiv/error.hpp"
#include "mbiv/regress.hpp"

namespace mbiv {

const char* to_string(Criterion c) noexcept {
    switch (c) {
        case Criterion::aic: return "aic";
        case Criterion::bic: return "bic";
        case Criterion::bge: return "bge";
    }
    return "?";
}

Criterion parse_criterion(const std::string& s) {
    if (s == "aic") return Criterion::aic;
    if (s == "bic") return Criterion::bic;
    if (s == "bge") return Criterion::bge;
    throw UsageError("unknown criterion '" + s + "' (expected aic, bic or bge)");
}

const char* to_string(Winner w) noexcept {
    switch (w) {
        case Winner::backdoor: return "backdoor";
        case Winner::no_backdoor: return "no_backdoor";
        case Winner::tie: return "tie";
    }
    return "?";
}

double GraphScore::value(Criterion c) const {
    switch (c) {
        case Criterion::aic: return aic;
        case Criterion::bic: return bic;
        case Criterion::bge: return bge;
    }
    return 0.0;
}

Winner BackdoorDecision::winner(Criterion c) const {
    switch (c) {
        case Criterion::aic: return aic;
        case Criterion::bic: return bic;
        case Criterion::bge: return bge;
    }
    return Winner::tie;
}

namespace {

void check_graph(const Dag& g, const Dataset& ds) {
    if (!g.undirected_edges().empty()) throw DataError("scoring needs a fully directed graph");
    if (g.size() == 0) throw DataError("cannot score an empty graph");
    for (Vid v = 0; v < g.size(); ++v) {
        if (g.latent(v)) throw DataError("cannot score latent vertex '" + g.name(v) + "'");
        if (!ds.has(g.name(v))) throw DataError("graph vertex '" + g.name(v) + "' is not a data column");
    }
    if (ds.rows() < 2) throw DataError("scoring needs at least two rows");
}

struct FamilyFit {
    Eigen::VectorXd coef;  // parents only
    double intercept = 0.0;
    double rss = 0.0;
};

FamilyFit fit_family(const Dag& g, const Dataset& ds, Vid v) {
    const Eigen::VectorXd& y = ds.values(g.name(v));
    const auto pa = g.parents(v);
    FamilyFit f;
    if (pa.empty()) {
        f.intercept = y.mean();
        f.rss = (y.array() - f.intercept).square().sum();
        f.coef.resize(0);
        return f;
    }
    std::vector<std::string> names;
    for (auto q : pa) names.push_back(g.name(q));
    const RegressionFit fit = ols(y, ds.matrix(names), true, names);
    f.intercept = fit.coef[0];
    f.coef = fit.coef.tail(fit.coef.size() - 1);
    f.rss = fit.rss;
    return f;
}

Eigen::MatrixXd standardized_block(const Dag& g, const Dataset& ds) {
    const auto n = static_cast<Eigen::Index>(ds.rows());
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(g.size()));
    for (Vid v = 0; v < g.size(); ++v) {
        const Eigen::VectorXd& col = ds.values(g.name(v));
        if (!(sample_sd(col) > 0.0)) throw NumericError("column '" + g.name(v) + "' has zero variance");
        out.col(static_cast<Eigen::Index>(v)) = standardized(col);
    }
    return out;
}

struct BgeContext {
    double n = 0.0;
    double p = 0.0;
    double alpha_w = 0.0;
    double nu = 1.0;
    Eigen::MatrixXd R;  // T + scatter (prior mean = sample mean, so no mean-shift term)
};

BgeContext bge_context(const Eigen::MatrixXd& data) {
    BgeContext c;
    c.n = static_cast<double>(data.rows());
    c.p = static_cast<double>(data.cols());
    c.alpha_w = c.p + 2.0;
    const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    c.R = Eigen::MatrixXd::Identity(data.cols(), data.cols()) + centered.transpose() * centered;
    return c;
}

double log_multigamma(double a, Eigen::Index dim) {
    const double d = static_cast<double>(dim);
    double s = d * (d - 1.0) / 4.0 * std::log(std::numbers::pi);
    for (Eigen::Index j = 1; j <= dim; ++j) s += boost::math::lgamma(a + (1.0 - static_cast<double>(j)) / 2.0);
    return s;
}

double bge_subset(const BgeContext& c, const std::vector<Eigen::Index>& subset) {
    const auto l = static_cast<Eigen::Index>(subset.size());
    if (l == 0) return 0.0;
    const double ld = static_cast<double>(l);
    Eigen::MatrixXd Rs(l, l);
    for (Eigen::Index a = 0; a < l; ++a)
        for (Eigen::Index b = 0; b < l; ++b) Rs(a, b) = c.R(subset[a], subset[b]);
    Eigen::LLT<Eigen::MatrixXd> llt(Rs);
    if (llt.info() != Eigen::Success) throw NumericError("BGe posterior scale matrix is not positive definite");
    const double logdet_r = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double a0 = (c.alpha_w - c.p + ld) / 2.0;
    const double an = (c.n + c.alpha_w - c.p + ld) / 2.0;
    // log det of the identity prior scale block is zero.
    return -ld * c.n / 2.0 * std::log(std::numbers::pi) + ld / 2.0 * std::log(c.nu / (c.nu + c.n)) +
           log_multigamma(an, l) - log_multigamma(a0, l) - an * logdet_r;
}

VertexScore score_vertex(const Dag& g, const Dataset& ds, const BgeContext& bge, Vid v) {
    VertexScore s;
    s.vertex = g.name(v);
    const auto pa = g.parents(v);
    for (auto q : pa) s.parents.push_back(g.name(q));
    const FamilyFit f = fit_family(g, ds, v);
    const double n = static_cast<double>(ds.rows());
    const double s2 = f.rss / n;
    if (!(s2 > 0.0)) throw NumericError("vertex '" + s.vertex + "' is an exact function of its parents");
    s.loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * s2) + 1.0);
    s.k = pa.size() + 2;
    const double k = static_cast<double>(s.k);
    s.aic = -2.0 * s.loglik + 2.0 * k;
    s.bic = -2.0 * s.loglik + k * std::log(n);
    std::vector<Eigen::Index> fam;
    for (auto q : pa) fam.push_back(static_cast<Eigen::Index>(q));
    const double without = bge_subset(bge, fam);
    fam.push_back(static_cast<Eigen::Index>(v));
    s.bge = -(bge_subset(bge, fam) - without);
    return s;
}

GraphScore assemble(const Dag& g, const Dataset& ds, std::vector<VertexScore> per) {
    GraphScore out;
    out.n = ds.rows();
    for (const auto& s : per) {
        out.aic += s.aic;
        out.bic += s.bic;
        out.bge += s.bge;
        out.loglik += s.loglik;
        out.k += s.k;
    }
    out.per_vertex = std::move(per);
    if (out.n <= out.k)
        out.warnings.push_back("n=" + std::to_string(out.n) + " does not exceed the parameter count k=" +
                               std::to_string(out.k) + "; BIC is unreliable");
    for (Vid v = 0; v < g.size(); ++v) {
        const double sk = skewness(ds.values(g.name(v)));
        if (std::abs(sk) > 2.0)
            out.warnings.push_back("column '" + g.name(v) + "' has skewness " + fmt6(sk) +
                                   "; a log transform may suit the Gaussian likelihood better");
    }
    return out;
}

GraphScore score_impl(const Dag& g, const Dataset& ds, bool parallel) {
    check_graph(g, ds);
    const BgeContext bge = bge_context(standardized_block(g, ds));
    const auto p = static_cast<std::int64_t>(g.size());
    std::vector<VertexScore> per(g.size());
    std::vector<std::exception_ptr> errs(g.size());
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t v = 0; v < p; ++v) {
            try {
                per[static_cast<std::size_t>(v)] = score_vertex(g, ds, bge, static_cast<Vid>(v));
            } catch (...) {
                errs[static_cast<std::size_t>(v)] = std::current_exception();
            }
        }
        for (const auto& e : errs)
            if (e) std::rethrow_exception(e);
    } else {
        for (std::int64_t v = 0; v < p; ++v)
            per[static_cast<std::size_t>(v)] = score_vertex(g, ds, bge, static_cast<Vid>(v));
    }
    return assemble(g, ds, std::move(per));
}

}  // namespace

LinearSem fit_mle(const Dag& g, const Dataset& ds) {
    check_graph(g, ds);
    LinearSem sem(g);
    const double n = static_cast<double>(ds.rows());
    for (Vid v = 0; v < g.size(); ++v) {
        const FamilyFit f = fit_family(g, ds, v);
        const auto pa = g.parents(v);
        for (std::size_t j = 0; j < pa.size(); ++j)
            sem.weights[{pa[j], v}] = f.coef[static_cast<Eigen::Index>(j)];
        sem.intercepts[static_cast<Eigen::Index>(v)] = f.intercept;
        const double sd = std::sqrt(f.rss / n);
        if (!(sd > 0.0)) throw NumericError("vertex '" + g.name(v) + "' is an exact function of its parents");
        sem.scales[static_cast<Eigen::Index>(v)] = sd;
    }
    return sem;
}

GraphScore score_graph(const Dag& g, const Dataset& ds) { return score_impl(g, ds, true); }
GraphScore score_graph_serial(const Dag& g, const Dataset& ds) { return score_impl(g, ds, false); }

double joint_loglik(const LinearSem& sem, const Dataset& ds) {
    const Dag& g = sem.dag;
    check_graph(g, ds);
    const auto p = static_cast<Eigen::Index>(g.size());
    const Eigen::MatrixXd IWt = Eigen::MatrixXd::Identity(p, p) - sem.weight_matrix().transpose();
    const Eigen::VectorXd mu = IWt.partialPivLu().solve(sem.intercepts);
    const Eigen::MatrixXd S = population_covariance(sem);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw NumericError("implied covariance is not positive definite");
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    std::vector<std::string> names(g.names());
    Eigen::MatrixXd D = ds.matrix(names).rowwise() - mu.transpose();
    const Eigen::MatrixXd W = llt.matrixL().solve(D.transpose());
    const double n = static_cast<double>(ds.rows());
    return -0.5 * n * (static_cast<double>(p) * std::log(2.0 * std::numbers::pi) + logdet) - 0.5 * W.squaredNorm();
}

double bge_log_marginal(const Eigen::MatrixXd& standardized_data, const std::vector<Eigen::Index>& subset) {
    return bge_subset(bge_context(standardized_data), subset);
}

BackdoorDecision compare_backdoor(const Dataset& ds, const std::string& parent, const std::string& mediator,
                                  const std::string& child, const std::vector<std::string>& controls) {
    std::vector<std::string> all{parent, mediator, child};
    all.insert(all.end(), controls.begin(), controls.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (!ds.has(all[i])) throw DataError("column '" + all[i] + "' not found");
        for (std::size_t j = 0; j < i; ++j)
            if (all[i] == all[j]) throw UsageError("'" + all[i] + "' appears twice in the backdoor triple/controls");
    }
    Dag no_be(all);
    no_be.add_edge(parent, mediator);
    no_be.add_edge(mediator, child);
    for (const auto& c : controls) no_be.add_edge(c, child);
    Dag be = no_be;
    be.add_edge(parent, child);

    BackdoorDecision d;
    d.parent = parent;
    d.mediator = mediator;
    d.child = child;
    d.controls = controls;
    d.with_backdoor = score_graph(be, ds);
    d.without_backdoor = score_graph(no_be, ds);
    auto pick = [](double with, double without) {
        const double tol = 1e-9 * std::max({1.0, std::abs(with), std::abs(without)});
        if (std::abs(with - without) <= tol) return Winner::tie;
        return with < without ? Winner::backdoor : Winner::no_backdoor;
    };
    d.aic = pick(d.with_backdoor.aic, d.without_backdoor.aic);
    d.bic = pick(d.with_backdoor.bic, d.without_backdoor.bic);
    d.bge = pick(d.with_backdoor.bge, d.without_backdoor.bge);
    d.unanimous = d.aic == d.bic && d.bic == d.bge && d.aic != Winner::tie;
    if (!d.unanimous) d.warnings.push_back("criteria disagree on " + parent + " -> " + child);
    d.warnings.insert(d.warnings.end(), d.without_backdoor.warnings.begin(), d.without_backdoor.warnings.end());
    return d;
}

nlohmann::ordered_json to_json(const GraphScore& s) {
    nlohmann::ordered_json j;
    j["n"] = s.n;
    j["k"] = s.k;
    j["loglik"] = s.loglik;
    j["aic"] = s.aic;
    j["bic"] = s.bic;
    j["bge"] = s.bge;
    auto per = nlohmann::ordered_json::array();
    for (const auto& v : s.per_vertex) {
        nlohmann::ordered_json e;
        e["vertex"] = v.vertex;
        e["parents"] = v.parents;
        e["loglik"] = v.loglik;
        e["k"] = v.k;
        e["aic"] = v.aic;
        e["bic"] = v.bic;
        e["bge"] = v.bge;
        per.push_back(std::move(e));
    }
    j["per_vertex"] = std::move(per);
    j["warnings"] = s.warnings;
    return j;
}

nlohmann::ordered_json to_json(const BackdoorDecision& d) {
    nlohmann::ordered_json j;
    j["parent"] = d.parent;
    j["mediator"] = d.mediator;
    j["child"] = d.child;
    j["controls"] = d.controls;
    j["convention"] = "lower is better; bge is the negated log marginal likelihood";
    auto rows = nlohmann::ordered_json::array();
    for (Criterion c : {Criterion::aic, Criterion::bic, Criterion::bge}) {
        nlohmann::ordered_json r;
        r["criterion"] = to_string(c);
        r["backdoor"] = d.with_backdoor.value(c);
        r["no_backdoor"] = d.without_backdoor.value(c);
        r["winner"] = to_string(d.winner(c));
        rows.push_back(std::move(r));
    }
    j["scores"] = std::move(rows);
    j["unanimous"] = d.unanimous;
    j["warnings"] = d.warnings;
    j["models"]["backdoor"] = to_json(d.with_backdoor);
    j["models"]["no_backdoor"] = to_json(d.without_backdoor);
    return j;
}

std::string to_text(const BackdoorDecision& d) {
    std::string out = "Backdoor check: " + d.parent + " -> " + d.mediator + " -> " + d.child;
    if (!d.controls.empty()) {
        out += " (controls:";
        for (const auto& c : d.controls) out += " " + c;
        out += ")";
    }
    out += "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "  %-9s %16s %16s  %s\n", "criterion", "backdoor", "no backdoor", "lower");
    out += buf;
    for (Criterion c : {Criterion::aic, Criterion::bic, Criterion::bge}) {
        std::snprintf(buf, sizeof buf, "  %-9s %16s %16s  %s\n", to_string(c), fmt6(d.with_backdoor.value(c)).c_str(),
                      fmt6(d.without_backdoor.value(c)).c_str(), to_string(d.winner(c)));
        out += buf;
    }
    out += std::string("  unanimous: ") + (d.unanimous ? "yes" : "no") + "\n";
    for (const auto& w : d.warnings) out += "  warning: " + w + "\n";
    return out;
}

}  // namespace mbiv
