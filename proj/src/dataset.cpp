#include "mbiv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mbiv/error.hpp"

namespace mbiv {

const char* to_string(Transform t) noexcept {
    switch (t) {
        case Transform::raw: return "raw";
        case Transform::logged: return "logged";
        case Transform::standardized: return "standardized";
    }
    return "raw";
}

Dataset::Dataset(std::vector<Column> cols) : columns_(std::move(cols)) {
    std::set<std::string> seen;
    for (std::size_t k = 0; k < columns_.size(); ++k) {
        const auto& c = columns_[k];
        if (c.name.empty()) throw DataError("empty column name at position " + std::to_string(k + 1));
        if (!seen.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
        if (k == 0) n_ = static_cast<std::size_t>(c.values.size());
        if (static_cast<std::size_t>(c.values.size()) != n_)
            throw DataError("column '" + c.name + "' has length " + std::to_string(c.values.size()) +
                            ", expected " + std::to_string(n_));
        if (!c.values.allFinite()) throw DataError("column '" + c.name + "' contains non-finite values");
    }
}

Dataset::Dataset(const std::vector<std::string>& names, const Eigen::MatrixXd& data) {
    if (static_cast<Eigen::Index>(names.size()) != data.cols())
        throw DataError("name count does not match column count");
    std::vector<Column> cols;
    cols.reserve(names.size());
    for (std::size_t k = 0; k < names.size(); ++k) cols.push_back({names[k], data.col(static_cast<Eigen::Index>(k)), {}});
    for (auto& c : cols) c.history = {Transform::raw};
    *this = Dataset(std::move(cols));
}

std::vector<std::string> Dataset::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

bool Dataset::has(const std::string& name) const noexcept {
    return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

std::size_t Dataset::index(const std::string& name) const {
    for (std::size_t k = 0; k < columns_.size(); ++k)
        if (columns_[k].name == name) return k;
    throw DataError("unknown column '" + name + "'");
}

Eigen::MatrixXd Dataset::matrix(const std::vector<std::string>& names) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = values(names[k]);
    return m;
}

Eigen::MatrixXd Dataset::matrix() const { return matrix(names()); }

Dataset Dataset::select(const std::vector<std::string>& names) const {
    std::vector<Column> cols;
    for (const auto& nm : names) cols.push_back(column(nm));
    return Dataset(std::move(cols));
}

Dataset Dataset::take_rows(std::span<const std::size_t> rows) const {
    std::vector<Column> cols = columns_;
    for (std::size_t k = 0; k < cols.size(); ++k) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = columns_[k].values[static_cast<Eigen::Index>(rows[i])];
        cols[k].values = std::move(v);
    }
    return Dataset(std::move(cols));
}

void Dataset::add_column(Column c) {
    auto cols = columns_;
    cols.push_back(std::move(c));
    *this = Dataset(std::move(cols));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, t.data() + t.size(), out);
    return res.ec == std::errc() && res.ptr == t.data() + t.size() && std::isfinite(out);
}

}  // namespace

Dataset parse_csv(const std::string& text, bool header) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> names;
    std::vector<std::vector<double>> data;
    std::size_t width = 0;
    std::size_t line_no = 0;
    std::size_t body_row = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (first) {
            width = cells.size();
            first = false;
            if (header) {
                std::set<std::string> seen;
                for (auto& c : cells) {
                    c = trim(c);
                    if (c.empty()) throw DataError("empty header name on line " + std::to_string(line_no));
                    if (!seen.insert(c).second) throw DataError("duplicate header name '" + c + "'");
                }
                names = cells;
                data.assign(width, {});
                continue;
            }
            for (std::size_t k = 0; k < width; ++k) names.push_back("v" + std::to_string(k + 1));
            data.assign(width, {});
        }
        if (cells.size() != width)
            throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " cells, found " + std::to_string(cells.size()));
        ++body_row;
        for (std::size_t k = 0; k < width; ++k) {
            double v = 0.0;
            if (!parse_number(cells[k], v))
                throw DataError("non-numeric cell '" + trim(cells[k]) + "' at row " + std::to_string(body_row) +
                                ", column " + names[k] + " (line " + std::to_string(line_no) + ")");
            data[k].push_back(v);
        }
    }
    if (names.empty()) throw DataError("empty CSV input");
    if (data.empty() || data[0].empty()) throw DataError("CSV has no data rows");
    std::vector<Column> cols;
    for (std::size_t k = 0; k < width; ++k)
        cols.push_back({names[k], Eigen::Map<Eigen::VectorXd>(data[k].data(), static_cast<Eigen::Index>(data[k].size())), {Transform::raw}});
    return Dataset(std::move(cols));
}

Dataset load_csv(const std::string& path, bool header) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str(), header);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string to_csv(const Dataset& ds) {
    std::string out;
    const auto& cols = ds.columns();
    for (std::size_t k = 0; k < cols.size(); ++k) {
        if (k) out += ',';
        out += cols[k].name;
    }
    out += '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (k) out += ',';
            out += format_double(cols[k].values[static_cast<Eigen::Index>(i)]);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write file '" + path + "'");
    f << to_csv(ds);
}

Dataset log_transform(const Dataset& ds, const std::vector<std::string>& cols) {
    std::vector<Column> out = ds.columns();
    for (const auto& name : cols) {
        auto& c = out[ds.index(name)];
        for (Eigen::Index i = 0; i < c.values.size(); ++i) {
            if (!(c.values[i] > 0.0))
                throw DataError("log of non-positive value " + format_double(c.values[i]) + " in column " + name +
                                " at row " + std::to_string(i + 1));
        }
        c.values = c.values.array().log().matrix();
        c.history.push_back(Transform::logged);
    }
    return Dataset(std::move(out));
}

double mean(const Eigen::VectorXd& v) { return v.mean(); }

double sample_sd(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

Eigen::VectorXd standardized(const Eigen::VectorXd& v) {
    const double m = v.mean();
    Eigen::VectorXd c = v.array() - m;
    // Re-center once to absorb rounding left by the first pass.
    c.array() -= c.mean();
    const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(v.size() - 1));
    if (!(sd > 0.0) || sd < 1e-14 * (1.0 + std::abs(m))) throw NumericError("constant column");
    return c / sd;
}

Dataset standardize(const Dataset& ds, const std::vector<std::string>& cols) {
    std::vector<Column> out = ds.columns();
    for (const auto& name : cols) {
        auto& c = out[ds.index(name)];
        if (c.values.size() < 2) throw NumericError("column " + name + " too short to standardize");
        try {
            c.values = standardized(c.values);
        } catch (const NumericError&) {
            throw NumericError("cannot standardize constant column " + name);
        }
        c.history.push_back(Transform::standardized);
    }
    return Dataset(std::move(out));
}

double skewness(const Eigen::VectorXd& v) {
    if (v.size() < 3) throw NumericError("skewness needs at least 3 values");
    const double m = v.mean();
    const Eigen::ArrayXd d = v.array() - m;
    const double m2 = d.square().mean();
    const double m3 = d.cube().mean();
    if (!(m2 > 0.0)) throw NumericError("skewness of a zero-variance vector");
    return m3 / std::pow(m2, 1.5);
}

double CorrelationTable::at(const std::string& a, const std::string& b) const {
    auto pos = [&](const std::string& s) {
        auto it = std::find(names.begin(), names.end(), s);
        if (it == names.end()) throw DataError("unknown column '" + s + "'");
        return static_cast<Eigen::Index>(it - names.begin());
    };
    return matrix(pos(a), pos(b));
}

std::string CorrelationTable::to_csv() const {
    std::string out = "";
    for (const auto& n : names) out += "," + n;
    out += '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += names[i];
        for (std::size_t j = 0; j < names.size(); ++j)
            out += "," + format_double(matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out += '\n';
    }
    return out;
}

namespace {

Eigen::MatrixXd centered_unit_columns(const Dataset& ds) {
    const auto& cols = ds.columns();
    Eigen::MatrixXd z(static_cast<Eigen::Index>(ds.rows()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        Eigen::VectorXd c = cols[k].values.array() - cols[k].values.mean();
        const double nrm = c.norm();
        if (!(nrm > 0.0)) throw NumericError("constant column " + cols[k].name + " in correlation matrix");
        z.col(static_cast<Eigen::Index>(k)) = c / nrm;
    }
    return z;
}

double clamp_corr(double r) { return std::clamp(r, -1.0, 1.0); }

}  // namespace

CorrelationTable corr_matrix_serial(const Dataset& ds) {
    const Eigen::MatrixXd z = centered_unit_columns(ds);
    const Eigen::Index p = z.cols();
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) r(i, j) = r(j, i) = clamp_corr(z.col(i).dot(z.col(j)));
    return {ds.names(), r};
}

CorrelationTable corr_matrix(const Dataset& ds) {
    const Eigen::MatrixXd z = centered_unit_columns(ds);
    const Eigen::Index p = z.cols();
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
    // Each (i,j) is one independent dot product, so results match the serial loop bit for bit.
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) r(i, j) = r(j, i) = clamp_corr(z.col(i).dot(z.col(j)));
    return {ds.names(), r};
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& data) {
    const Eigen::MatrixXd c = data.rowwise() - data.colwise().mean();
    return (c.transpose() * c) / static_cast<double>(data.rows() - 1);
}

namespace {

void check_indices(const Eigen::MatrixXd& cov, std::size_t i, std::size_t j, const std::vector<std::size_t>& given) {
    const auto p = static_cast<std::size_t>(cov.rows());
    if (i >= p || j >= p) throw DataError("partial correlation index out of range");
    if (i == j) throw DataError("partial correlation needs distinct indices");
    for (auto g : given) {
        if (g >= p) throw DataError("conditioning index out of range");
        if (g == i || g == j) throw DataError("conditioning set overlaps the pair");
    }
}

}  // namespace

double partial_corr(const Eigen::MatrixXd& cov, std::size_t i, std::size_t j, const std::vector<std::size_t>& given) {
    check_indices(cov, i, j, given);
    std::vector<std::size_t> idx{i, j};
    idx.insert(idx.end(), given.begin(), given.end());
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            sub(a, b) = cov(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]), static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (!lu.isInvertible()) throw NumericError("singular covariance submatrix in partial correlation");
    const Eigen::MatrixXd prec = lu.inverse();
    const double denom = std::sqrt(prec(0, 0) * prec(1, 1));
    if (!(denom > 0.0)) throw NumericError("degenerate precision in partial correlation");
    return clamp_corr(-prec(0, 1) / denom);
}

double partial_corr_residual(const Eigen::MatrixXd& cov, std::size_t i, std::size_t j,
                             const std::vector<std::size_t>& given) {
    check_indices(cov, i, j, given);
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    if (given.empty()) return clamp_corr(cov(ii, jj) / std::sqrt(cov(ii, ii) * cov(jj, jj)));
    const auto m = static_cast<Eigen::Index>(given.size());
    Eigen::MatrixXd szz(m, m);
    Eigen::MatrixXd szp(m, 2);
    for (Eigen::Index a = 0; a < m; ++a) {
        const auto ga = static_cast<Eigen::Index>(given[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b) szz(a, b) = cov(ga, static_cast<Eigen::Index>(given[static_cast<std::size_t>(b)]));
        szp(a, 0) = cov(ga, ii);
        szp(a, 1) = cov(ga, jj);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(szz);
    if (qr.rank() < m) throw NumericError("singular conditioning block in partial correlation");
    const Eigen::MatrixXd coef = qr.solve(szp);
    // Residual covariance of (i, j) after projecting onto the conditioning block.
    Eigen::Matrix2d pair;
    pair << cov(ii, ii), cov(ii, jj), cov(jj, ii), cov(jj, jj);
    const Eigen::Matrix2d resid = pair - szp.transpose() * coef;
    return clamp_corr(resid(0, 1) / std::sqrt(resid(0, 0) * resid(1, 1)));
}

}  // namespace mbiv
