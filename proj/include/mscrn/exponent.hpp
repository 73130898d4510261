#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mscrn {

/// Scaling exponents (alpha, beta, gamma, eta) are exact rationals so that
/// every time-scale comparison is decided without rounding.
using Exponent = boost::rational<std::int64_t>;

// Boost 1.74's mixed rational/integer comparisons recurse forever under
// C++20 rewritten operators; these overloads turn such uses into compile errors.
bool operator==(const Exponent&, int) = delete;
bool operator==(int, const Exponent&) = delete;
bool operator<(const Exponent&, int) = delete;
bool operator<(int, const Exponent&) = delete;
bool operator>(const Exponent&, int) = delete;
bool operator>(int, const Exponent&) = delete;
bool operator<=(const Exponent&, int) = delete;
bool operator>=(const Exponent&, int) = delete;

/// Parses `p`, `p/q` or a decimal such as `1.25` / `-0.5` exactly.
/// Returns nullopt on malformed input.
std::optional<Exponent> parse_exponent(std::string_view text);

/// `3`, `-1/2`, ... (denominator omitted when 1).
std::string format_exponent(const Exponent& e);

inline double to_double(const Exponent& e) {
  return static_cast<double>(e.numerator()) / static_cast<double>(e.denominator());
}

}  // namespace mscrn
