#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace countyir {

// Every failure in the library carries a kind so callers (and the CLI exit
// code mapping) can distinguish bad input from runtime trouble.
enum class ErrorKind {
    schema,         // required column missing, malformed header
    parse,          // cell failed to parse (row/column in message)
    duplicate_key,  // repeated fips
    taxonomy,       // flag contradiction, bad category, duplicate feature
    alignment,      // feature name sets disagree between table and model/taxonomy
    domain,         // argument outside its mathematical domain
    shape,          // vector/matrix dimension mismatch
    insufficient_data,
    singular_matrix,
    convergence,
    parameter,      // invalid k, empty grid, threshold out of range
    name,           // unknown feature name requested
    reference,      // adjacency edge names an unknown id
    geometry,       // degenerate coordinates (zero distance between ids)
    degenerate,     // constant field, zero permutation spread
    format,         // file content violates a documented format
    io,             // filesystem failure
    render,         // nothing to draw, type mismatch for breaks
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // Input-side failures map to CLI exit code 2, the rest to 1.
    bool is_input_error() const noexcept {
        switch (kind_) {
        case ErrorKind::schema:
        case ErrorKind::parse:
        case ErrorKind::duplicate_key:
        case ErrorKind::taxonomy:
        case ErrorKind::alignment:
        case ErrorKind::parameter:
        case ErrorKind::name:
        case ErrorKind::reference:
        case ErrorKind::format:
            return true;
        default:
            return false;
        }
    }

private:
    ErrorKind kind_;
};

// Non-convergence keeps the last iterate around so a caller can inspect how
// far the solver got.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& message, std::vector<double> last_iterate, int sweeps)
        : Error(ErrorKind::convergence, message),
          last_iterate_(std::move(last_iterate)),
          sweeps_(sweeps) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    int sweeps() const noexcept { return sweeps_; }

private:
    std::vector<double> last_iterate_;
    int sweeps_;
};

}  // namespace countyir
