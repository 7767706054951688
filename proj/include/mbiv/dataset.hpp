#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace mbiv {

enum class Transform { raw, logged, standardized };

[[nodiscard]] const char* to_string(Transform t) noexcept;

struct Column {
    std::string name;
    Eigen::VectorXd values;
    std::vector<Transform> history{Transform::raw};
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Column> cols);
    Dataset(const std::vector<std::string>& names, const Eigen::MatrixXd& data);

    [[nodiscard]] std::size_t rows() const noexcept { return n_; }
    [[nodiscard]] std::size_t cols() const noexcept { return columns_.size(); }
    [[nodiscard]] const std::vector<Column>& columns() const noexcept { return columns_; }
    [[nodiscard]] std::vector<std::string> names() const;

    [[nodiscard]] bool has(const std::string& name) const noexcept;
    [[nodiscard]] std::size_t index(const std::string& name) const;
    [[nodiscard]] const Column& column(const std::string& name) const { return columns_[index(name)]; }
    [[nodiscard]] const Eigen::VectorXd& values(const std::string& name) const { return column(name).values; }

    // Columns gathered into an n x k matrix in the given order.
    [[nodiscard]] Eigen::MatrixXd matrix(const std::vector<std::string>& names) const;
    [[nodiscard]] Eigen::MatrixXd matrix() const;

    [[nodiscard]] Dataset select(const std::vector<std::string>& names) const;
    [[nodiscard]] Dataset take_rows(std::span<const std::size_t> rows) const;
    void add_column(Column c);

private:
    std::vector<Column> columns_;
    std::size_t n_ = 0;
};

[[nodiscard]] Dataset load_csv(const std::string& path, bool header = true);
[[nodiscard]] Dataset parse_csv(const std::string& text, bool header = true);
void write_csv(const Dataset& ds, const std::string& path);
[[nodiscard]] std::string to_csv(const Dataset& ds);
// Shortest decimal representation that parses back to the same double.
[[nodiscard]] std::string format_double(double v);

[[nodiscard]] Dataset log_transform(const Dataset& ds, const std::vector<std::string>& cols);
[[nodiscard]] Dataset standardize(const Dataset& ds, const std::vector<std::string>& cols);

[[nodiscard]] double mean(const Eigen::VectorXd& v);
[[nodiscard]] double sample_sd(const Eigen::VectorXd& v);
[[nodiscard]] double skewness(const Eigen::VectorXd& v);
[[nodiscard]] Eigen::VectorXd standardized(const Eigen::VectorXd& v);

struct CorrelationTable {
    std::vector<std::string> names;
    Eigen::MatrixXd matrix;

    [[nodiscard]] double at(const std::string& a, const std::string& b) const;
    [[nodiscard]] std::string to_csv() const;
};

[[nodiscard]] CorrelationTable corr_matrix(const Dataset& ds);
[[nodiscard]] CorrelationTable corr_matrix_serial(const Dataset& ds);
[[nodiscard]] Eigen::MatrixXd covariance(const Eigen::MatrixXd& data);

[[nodiscard]] double partial_corr(const Eigen::MatrixXd& cov, std::size_t i, std::size_t j,
                                  const std::vector<std::size_t>& given);
// Correlation of residuals of i and j after regressing each on `given`, in covariance form.
[[nodiscard]] double partial_corr_residual(const Eigen::MatrixXd& cov, std::size_t i, std::size_t j,
                                           const std::vector<std::size_t>& given);

}  // namespace mbiv
