#pragma once

#include <stdexcept>
#include <string>

namespace mbiv {

// Categories map one-to-one onto CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, numeric = 3, bound = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};
struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct BoundError : Error {
    explicit BoundError(const std::string& w) : Error(ErrorKind::bound, w) {}
};

}  // namespace mbiv
