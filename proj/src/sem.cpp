#include "mbiv/sem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>

#include "mbiv/error.hpp"
#include "mbiv/rng.hpp"

namespace mbiv {

LinearSem::LinearSem(Dag g) : dag(std::move(g)) {
    const auto p = static_cast<Eigen::Index>(dag.size());
    intercepts = Eigen::VectorXd::Zero(p);
    scales = Eigen::VectorXd::Ones(p);
    noise_corr = Eigen::MatrixXd::Identity(p, p);
    for (const auto& e : dag.edges()) weights[e] = 0.0;
    if (!dag.undirected_edges().empty()) throw DataError("a linear SEM needs a fully directed graph");
}

void LinearSem::set_weight(const std::string& from, const std::string& to, double w) {
    const auto e = std::make_pair(dag.index(from), dag.index(to));
    if (!dag.has_edge(e.first, e.second)) throw DataError("no edge " + from + " -> " + to);
    if (!std::isfinite(w)) throw DataError("non-finite weight on " + from + " -> " + to);
    weights[e] = w;
}

void LinearSem::set_intercept(const std::string& v, double c) { intercepts[static_cast<Eigen::Index>(dag.index(v))] = c; }

void LinearSem::set_scale(const std::string& v, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DataError("noise scale of '" + v + "' must be positive");
    scales[static_cast<Eigen::Index>(dag.index(v))] = s;
}

void LinearSem::set_noise_corr(const std::string& a, const std::string& b, double r) {
    const auto i = static_cast<Eigen::Index>(dag.index(a));
    const auto j = static_cast<Eigen::Index>(dag.index(b));
    if (i == j) throw DataError("noise correlation needs two distinct vertices");
    if (!(r > -1.0 && r < 1.0)) throw DataError("noise correlation must lie in (-1, 1)");
    noise_corr(i, j) = noise_corr(j, i) = r;
}

double LinearSem::weight(const std::string& from, const std::string& to) const {
    auto it = weights.find({dag.index(from), dag.index(to)});
    if (it == weights.end()) throw DataError("no edge " + from + " -> " + to);
    return it->second;
}

Eigen::MatrixXd LinearSem::weight_matrix() const {
    const auto p = static_cast<Eigen::Index>(dag.size());
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, p);
    for (const auto& [e, w] : weights) W(static_cast<Eigen::Index>(e.first), static_cast<Eigen::Index>(e.second)) = w;
    return W;
}

Eigen::MatrixXd LinearSem::noise_covariance() const {
    return scales.asDiagonal() * noise_corr * scales.asDiagonal();
}

std::vector<std::string> LinearSem::observed_names() const {
    std::vector<std::string> out;
    for (Vid v = 0; v < dag.size(); ++v)
        if (!dag.latent(v)) out.push_back(dag.name(v));
    return out;
}

void LinearSem::validate() const {
    if (!dag.undirected_edges().empty()) throw DataError("a linear SEM needs a fully directed graph");
    if ((scales.array() <= 0.0).any()) throw DataError("noise scales must be positive");
    if (!noise_corr.isApprox(noise_corr.transpose(), 0.0)) throw DataError("noise correlation matrix is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(noise_corr);
    if (llt.info() != Eigen::Success) throw DataError("noise correlation matrix is not positive definite");
}

namespace {

Dataset draw(const LinearSem& sem, std::size_t n, std::uint64_t seed, bool parallel) {
    sem.validate();
    const auto p = static_cast<Eigen::Index>(sem.dag.size());
    const auto order = sem.dag.topological_order();
    const bool correlated = !sem.noise_corr.isIdentity(0.0);
    const Eigen::MatrixXd L = correlated ? Eigen::MatrixXd(sem.noise_corr.llt().matrixL()) : Eigen::MatrixXd();
    std::vector<std::vector<std::pair<Eigen::Index, double>>> parents(static_cast<std::size_t>(p));
    for (const auto& [e, w] : sem.weights) parents[e.second].push_back({static_cast<Eigen::Index>(e.first), w});

    Eigen::MatrixXd data(static_cast<Eigen::Index>(n), p);
    auto fill_row = [&](std::int64_t i) {
        Eigen::VectorXd z(p);
        for (Eigen::Index v = 0; v < p; ++v)
            z[v] = counter_normal(seed, static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(i));
        if (correlated) z = L * z;
        for (auto v : order) {
            const auto vv = static_cast<Eigen::Index>(v);
            double val = sem.intercepts[vv] + sem.scales[vv] * z[vv];
            for (const auto& [q, w] : parents[v]) val += w * data(i, q);
            data(i, vv) = val;
        }
    };
    const auto rows = static_cast<std::int64_t>(n);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < rows; ++i) fill_row(i);
    } else {
        for (std::int64_t i = 0; i < rows; ++i) fill_row(i);
    }
    std::vector<Column> cols;
    for (Vid v = 0; v < sem.dag.size(); ++v)
        if (!sem.dag.latent(v)) cols.push_back({sem.dag.name(v), data.col(static_cast<Eigen::Index>(v)), {Transform::raw}});
    return Dataset(std::move(cols));
}

}  // namespace

Dataset sample(const LinearSem& sem, std::size_t n, std::uint64_t seed) { return draw(sem, n, seed, true); }
Dataset sample_serial(const LinearSem& sem, std::size_t n, std::uint64_t seed) { return draw(sem, n, seed, false); }

Eigen::MatrixXd population_covariance(const LinearSem& sem) {
    sem.validate();
    const auto p = static_cast<Eigen::Index>(sem.dag.size());
    const Eigen::MatrixXd IW = Eigen::MatrixXd::Identity(p, p) - sem.weight_matrix();
    // Unit upper/lower-triangular up to permutation, hence always invertible.
    const Eigen::MatrixXd inv = IW.partialPivLu().inverse();
    Eigen::MatrixXd S = inv.transpose() * sem.noise_covariance() * inv;
    return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd population_covariance(const LinearSem& sem, const std::vector<std::string>& names) {
    const Eigen::MatrixXd S = population_covariance(sem);
    const auto k = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd out(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b)
            out(a, b) = S(static_cast<Eigen::Index>(sem.dag.index(names[static_cast<std::size_t>(a)])),
                          static_cast<Eigen::Index>(sem.dag.index(names[static_cast<std::size_t>(b)])));
    return out;
}

Eigen::VectorXd ovb_oracle(const LinearSem& sem, const std::string& y, const std::vector<std::string>& regressors) {
    std::vector<std::string> all = regressors;
    all.push_back(y);
    const Eigen::MatrixXd S = population_covariance(sem, all);
    const auto k = static_cast<Eigen::Index>(regressors.size());
    if (k == 0) return Eigen::VectorXd();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S.topLeftCorner(k, k));
    if (!lu.isInvertible()) throw NumericError("ovb_oracle: singular regressor covariance");
    return lu.solve(S.topRightCorner(k, 1));
}

// ---------------------------------------------------------------- scenarios

namespace {

double param(const ScenarioParams& given, ScenarioParams& used, const std::string& key, double fallback) {
    auto it = given.find(key);
    const double v = it == given.end() ? fallback : it->second;
    used[key] = v;
    return v;
}

void reject_unknown(const ScenarioParams& given, const ScenarioParams& used, const std::string& scen) {
    for (const auto& [k, _] : given)
        if (!used.count(k)) throw UsageError("unknown parameter '" + k + "' for scenario " + scen);
}

Dag dag_of(const std::vector<std::string>& vertices, const std::vector<std::pair<std::string, std::string>>& edges,
           const std::vector<std::string>& latent = {}) {
    Dag g;
    for (const auto& v : vertices) g.add_vertex(v, std::find(latent.begin(), latent.end(), v) != latent.end());
    for (const auto& [a, b] : edges) g.add_edge(a, b);
    return g;
}

Scenario iv_family(const std::string& name, const ScenarioParams& given, bool invalid, double rho_default) {
    Scenario s;
    s.name = name;
    auto& P = s.params;
    const double a0 = param(given, P, "a0", 0.0), a1 = param(given, P, "a1", 1.0);
    const double b0 = param(given, P, "b0", 0.0), b1 = param(given, P, "b1", 0.5);
    const double rho = param(given, P, "rho", rho_default);
    const double sz = param(given, P, "sz", 1.0), sv = param(given, P, "sv", 1.0), su = param(given, P, "su", 1.0);
    const double g = invalid ? param(given, P, "g", 0.5) : 0.0;
    reject_unknown(given, P, name);
    std::vector<std::pair<std::string, std::string>> edges{{"z", "x"}, {"x", "y"}};
    // z -> u with u unobserved enters the data as a direct z -> y contribution.
    if (invalid) edges.push_back({"z", "y"});
    s.sem = LinearSem(dag_of({"z", "x", "y"}, edges));
    s.sem.set_weight("z", "x", a1);
    s.sem.set_weight("x", "y", b1);
    if (invalid) s.sem.set_weight("z", "y", g);
    s.sem.set_intercept("x", a0);
    s.sem.set_intercept("y", b0);
    s.sem.set_scale("z", sz);
    s.sem.set_scale("x", sv);
    s.sem.set_scale("y", su);
    if (rho != 0.0) s.sem.set_noise_corr("x", "y", rho);
    std::vector<std::pair<std::string, std::string>> fig{{"z", "x"}, {"v", "x"}, {"x", "y"}, {"u", "y"}};
    if (invalid) fig.push_back({"z", "u"});
    s.structure = dag_of({"z", "v", "x", "u", "y"}, fig, {"u", "v"});
    s.response = "x";
    s.endogenous = "x";
    s.outcome = "y";
    s.stamps = {{"z", 1}, {"x", 2}, {"y", 3}};
    return s;
}

}  // namespace

std::vector<std::string> scenario_names() {
    return {"iv_basic", "iv_invalid", "reversal", "collider_control", "irc", "mb_reduced", "rent_price_sem"};
}

Eigen::Vector4d mb_reduced_gamma(const ScenarioParams& p) {
    const double a1 = p.at("a1"), a2 = p.at("a2"), b1 = p.at("b1"), b2 = p.at("b2");
    const double su = p.at("su"), sv = p.at("sv");
    // E[u | x4 - b1 a'x - b2 x3] with x4 - b1 a'x - b2 x3 = b1 u + v.
    const double k = b1 * su * su / (b1 * b1 * su * su + sv * sv);
    return {a1 * (1.0 - k * b1), a2 * (1.0 - k * b1), -k * b2, k};
}

Scenario make_scenario(const std::string& name, const ScenarioParams& given) {
    if (name == "iv_basic") return iv_family(name, given, false, 0.6);
    if (name == "iv_invalid") return iv_family(name, given, true, 0.6);
    if (name == "collider_control") return iv_family(name, given, false, 0.0);

    Scenario s;
    s.name = name;
    auto& P = s.params;
    if (name == "reversal") {
        const double b0 = param(given, P, "b0", 0.0), b1 = param(given, P, "b1", 0.8);
        const double sy = param(given, P, "sy", 1.0), se = param(given, P, "se", 1.0);
        reject_unknown(given, P, name);
        s.sem = LinearSem(dag_of({"y", "x1"}, {{"y", "x1"}}));
        s.sem.set_weight("y", "x1", b1);
        s.sem.set_intercept("x1", b0);
        s.sem.set_scale("y", sy);
        s.sem.set_scale("x1", se);
        s.structure = s.sem.dag;
        s.response = "y";
        s.stamps = {{"y", 1}, {"x1", 2}};
        return s;
    }
    if (name == "irc") {
        const double w1 = param(given, P, "w1", 0.3), w2 = param(given, P, "w2", 0.3);
        const double b1 = param(given, P, "b1", 0.5), b2 = param(given, P, "b2", 0.5);
        const double rho = param(given, P, "rho", 0.0);
        reject_unknown(given, P, name);
        if (!(rho > -1.0 && rho < 1.0)) throw DataError("irc: parent correlation must lie in (-1, 1)");
        const double r3 = 1.0 - (w1 * w1 + w2 * w2 + 2.0 * rho * w1 * w2);
        const double ry = 1.0 - (b1 * b1 + b2 * b2 + 2.0 * rho * b1 * b2);
        if (!(r3 > 0.0))
            throw DataError("irc: weights (" + format_double(w1) + ", " + format_double(w2) +
                            ") leave no room for unit-variance noise in x3");
        if (!(ry > 0.0)) throw DataError("irc: response weights leave no room for unit-variance noise in y");
        s.sem = LinearSem(dag_of({"x1", "x2", "x3", "y"}, {{"x1", "x3"}, {"x2", "x3"}, {"x1", "y"}, {"x2", "y"}}));
        s.sem.set_weight("x1", "x3", w1);
        s.sem.set_weight("x2", "x3", w2);
        s.sem.set_weight("x1", "y", b1);
        s.sem.set_weight("x2", "y", b2);
        s.sem.set_scale("x3", std::sqrt(r3));
        s.sem.set_scale("y", std::sqrt(ry));
        if (rho != 0.0) s.sem.set_noise_corr("x1", "x2", rho);
        s.structure = s.sem.dag;
        s.response = "y";
        s.stamps = {{"x1", 1}, {"x2", 1}, {"x3", 2}, {"y", 2}};
        return s;
    }
    if (name == "mb_reduced") {
        const double a0 = param(given, P, "a0", 0.0), a1 = param(given, P, "a1", 0.8), a2 = param(given, P, "a2", 0.6);
        const double b0 = param(given, P, "b0", 0.0), b1 = param(given, P, "b1", 0.7), b2 = param(given, P, "b2", 0.5);
        const double su = param(given, P, "su", 1.0), sv = param(given, P, "sv", 1.0);
        const double nd = param(given, P, "distractors", 0.0);
        reject_unknown(given, P, name);
        if (nd < 0.0 || nd != std::floor(nd)) throw UsageError("distractors must be a non-negative integer");
        std::vector<std::string> vs{"x1", "x2", "x3", "y", "x4"};
        for (int k = 1; k <= static_cast<int>(nd); ++k) vs.push_back("d" + std::to_string(k));
        s.sem = LinearSem(dag_of(vs, {{"x1", "y"}, {"x2", "y"}, {"y", "x4"}, {"x3", "x4"}}));
        s.sem.set_weight("x1", "y", a1);
        s.sem.set_weight("x2", "y", a2);
        s.sem.set_weight("y", "x4", b1);
        s.sem.set_weight("x3", "x4", b2);
        s.sem.set_intercept("y", a0);
        s.sem.set_intercept("x4", b0);
        s.sem.set_scale("y", su);
        s.sem.set_scale("x4", sv);
        s.structure = s.sem.dag;
        s.response = "y";
        s.stamps = {{"x1", 1}, {"x2", 1}, {"x3", 1}, {"y", 2}, {"x4", 3}};
        for (int k = 1; k <= static_cast<int>(nd); ++k) s.stamps["d" + std::to_string(k)] = 1;
        return s;
    }
    if (name == "rent_price_sem") {
        const double d_baths = param(given, P, "d_baths", 0.5), d_bedrooms = param(given, P, "d_bedrooms", 0.4);
        const double d_beach = param(given, P, "d_beach", 0.3), d_gaol = param(given, P, "d_gaol", -0.3);
        const double g_household = param(given, P, "g_household", 0.4), g_beach = param(given, P, "g_beach", 0.2);
        const double g_gaol = param(given, P, "g_gaol", -0.2), g_price = param(given, P, "g_price", 0.5);
        const double rho = param(given, P, "rho", 0.5);
        reject_unknown(given, P, name);
        const std::vector<std::string> exo{"baths", "bedrooms", "beach", "gaol", "household"};
        std::vector<std::string> vs = exo;
        vs.push_back("price");
        vs.push_back("rent");
        const std::vector<std::pair<std::string, std::string>> edges{
            {"baths", "price"}, {"bedrooms", "price"}, {"beach", "price"}, {"gaol", "price"},
            {"household", "rent"}, {"beach", "rent"}, {"gaol", "rent"}, {"price", "rent"}};
        s.sem = LinearSem(dag_of(vs, edges));
        s.sem.set_weight("baths", "price", d_baths);
        s.sem.set_weight("bedrooms", "price", d_bedrooms);
        s.sem.set_weight("beach", "price", d_beach);
        s.sem.set_weight("gaol", "price", d_gaol);
        s.sem.set_weight("household", "rent", g_household);
        s.sem.set_weight("beach", "rent", g_beach);
        s.sem.set_weight("gaol", "rent", g_gaol);
        s.sem.set_weight("price", "rent", g_price);
        if (rho != 0.0) s.sem.set_noise_corr("price", "rent", rho);
        auto fig = edges;
        fig.push_back({"u_price", "price"});
        fig.push_back({"u_rent", "rent"});
        std::vector<std::string> fv = vs;
        fv.push_back("u_price");
        fv.push_back("u_rent");
        s.structure = dag_of(fv, fig, {"u_price", "u_rent"});
        s.response = "price";
        s.endogenous = "price";
        s.outcome = "rent";
        for (const auto& e : exo) s.stamps[e] = 1;
        s.stamps["price"] = 2;
        s.stamps["rent"] = 3;
        return s;
    }
    throw UsageError("unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------- config text

namespace {

bool kv(const std::string& tok, const std::string& key, double& out) {
    if (tok.rfind(key + "=", 0) != 0) return false;
    const std::string v = tok.substr(key.size() + 1);
    try {
        std::size_t used = 0;
        out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw DataError("bad number in '" + tok + "'");
    }
    return true;
}

}  // namespace

LinearSem parse_sem(const std::string& text, std::map<std::string, long long>* stamps) {
    struct VertexSpec {
        double intercept = 0.0, scale = 1.0;
        bool latent = false;
        std::optional<long long> ts;
    };
    std::vector<std::string> order;
    std::map<std::string, VertexSpec> specs;
    std::vector<std::tuple<std::string, std::string, double>> edges;
    std::vector<std::tuple<std::string, std::string, double>> corrs;
    auto touch = [&](const std::string& v) {
        if (!specs.count(v)) {
            specs[v] = {};
            order.push_back(v);
        }
    };
    std::istringstream in(text);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        std::vector<std::string> tk;
        for (std::string t; ls >> t;) tk.push_back(t);
        if (tk.empty()) continue;
        const std::string where = " (line " + std::to_string(no) + ")";
        if (tk[0] == "vertex" || tk[0] == "node") {
            if (tk.size() < 2) throw DataError("vertex line without a name" + where);
            touch(tk[1]);
            auto& sp = specs[tk[1]];
            for (std::size_t k = 2; k < tk.size(); ++k) {
                double v = 0.0;
                if (tk[k] == "latent")
                    sp.latent = true;
                else if (kv(tk[k], "intercept", v))
                    sp.intercept = v;
                else if (kv(tk[k], "scale", v))
                    sp.scale = v;
                else if (kv(tk[k], "ts", v))
                    sp.ts = static_cast<long long>(v);
                else
                    throw DataError("unknown vertex attribute '" + tk[k] + "'" + where);
            }
        } else if (tk.size() >= 3 && tk[1] == "->") {
            double w = 0.0;
            if (tk.size() != 4 || !kv(tk[3], "w", w)) throw DataError("edge line needs 'a -> b w=<weight>'" + where);
            touch(tk[0]);
            touch(tk[2]);
            edges.emplace_back(tk[0], tk[2], w);
        } else if (tk.size() >= 3 && tk[1] == "~") {
            double r = 0.0;
            if (tk.size() != 4 || !kv(tk[3], "r", r)) throw DataError("noise line needs 'a ~ b r=<corr>'" + where);
            touch(tk[0]);
            touch(tk[2]);
            corrs.emplace_back(tk[0], tk[2], r);
        } else {
            throw DataError("unrecognised SEM line" + where);
        }
    }
    Dag g;
    for (const auto& v : order) g.add_vertex(v, specs[v].latent);
    for (const auto& [a, b, w] : edges) g.add_edge(a, b);
    LinearSem sem(g);
    for (const auto& [a, b, w] : edges) sem.set_weight(a, b, w);
    for (const auto& v : order) {
        sem.set_intercept(v, specs[v].intercept);
        sem.set_scale(v, specs[v].scale);
        if (specs[v].ts) {
            sem.dag.set_stamp(sem.dag.index(v), specs[v].ts);
            if (stamps) (*stamps)[v] = *specs[v].ts;
        }
    }
    for (const auto& [a, b, r] : corrs) sem.set_noise_corr(a, b, r);
    sem.validate();
    return sem;
}

LinearSem load_sem(const std::string& path, std::map<std::string, long long>* stamps) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open SEM config '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_sem(ss.str(), stamps);
}

std::string format_sem(const LinearSem& sem) {
    std::string out;
    for (Vid v = 0; v < sem.dag.size(); ++v) {
        const auto vv = static_cast<Eigen::Index>(v);
        out += "vertex " + sem.dag.name(v) + " intercept=" + format_double(sem.intercepts[vv]) +
               " scale=" + format_double(sem.scales[vv]);
        if (sem.dag.stamp(v)) out += " ts=" + std::to_string(*sem.dag.stamp(v));
        if (sem.dag.latent(v)) out += " latent";
        out += '\n';
    }
    for (const auto& [e, w] : sem.weights)
        out += sem.dag.name(e.first) + " -> " + sem.dag.name(e.second) + " w=" + format_double(w) + "\n";
    const auto p = sem.noise_corr.rows();
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j)
            if (sem.noise_corr(i, j) != 0.0)
                out += sem.dag.name(static_cast<Vid>(i)) + " ~ " + sem.dag.name(static_cast<Vid>(j)) +
                       " r=" + format_double(sem.noise_corr(i, j)) + "\n";
    return out;
}

LinearSem random_sem(std::size_t vertices, double edge_prob, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(mix_key(seed, 0x72616e64ULL));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> mag(lo, hi);
    std::vector<std::size_t> perm(vertices);
    for (std::size_t i = 0; i < vertices; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    Dag g;
    for (std::size_t i = 0; i < vertices; ++i) g.add_vertex("v" + std::to_string(i + 1));
    std::vector<std::tuple<Vid, Vid, double>> ws;
    for (std::size_t i = 0; i < vertices; ++i)
        for (std::size_t j = i + 1; j < vertices; ++j)
            if (u01(rng) < edge_prob) {
                const double w = mag(rng) * (u01(rng) < 0.5 ? -1.0 : 1.0);
                g.add_edge(perm[i], perm[j]);
                ws.emplace_back(perm[i], perm[j], w);
            }
    LinearSem sem(g);
    for (const auto& [a, b, w] : ws) sem.weights[{a, b}] = w;
    return sem;
}

}  // namespace mbiv
