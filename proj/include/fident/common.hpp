#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fident {

// Central comparison tolerances. Behavioral checks (distribution equality,
// formula-vs-oracle agreement) use 1e-9; structural checks (CPT column sums,
// entrywise table equality) use 1e-12.
inline constexpr double kBehavioralTol = 1e-9;
inline constexpr double kStructuralTol = 1e-12;

// Largest number of cells allowed in any intermediate factor (2^22).
inline constexpr std::size_t kDefaultCellCap = std::size_t(1) << 22;

struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    int line;
    int column;
    ParseError(const std::string& msg, int line_, int column_)
        : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                             std::to_string(column_) + ": " + msg),
          line(line_),
          column(column_) {}
};

struct QueryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateSpaceOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PositivityViolation : std::runtime_error {
    std::vector<std::string> denominator_scope;
    PositivityViolation(const std::string& msg, std::vector<std::string> scope)
        : std::runtime_error(msg), denominator_scope(std::move(scope)) {}
};

}  // namespace fident
