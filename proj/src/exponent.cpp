#include "mscrn/exponent.hpp"

#include <charconv>
#include <limits>

namespace mscrn {

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::optional<Exponent> parse_exponent(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto num = parse_int(text.substr(0, slash));
    auto den = parse_int(text.substr(slash + 1));
    if (!num || !den || *den <= 0) return std::nullopt;
    return Exponent(*num, *den);
  }
  auto dot = text.find('.');
  if (dot == std::string_view::npos) {
    auto v = parse_int(text);
    if (!v) return std::nullopt;
    return Exponent(*v);
  }
  bool negative = text.front() == '-';
  std::string_view body = negative ? text.substr(1) : text;
  dot = body.find('.');
  std::string digits(body.substr(0, dot));
  std::string_view frac = body.substr(dot + 1);
  if (frac.empty() || frac.size() > 15) return std::nullopt;
  for (char c : frac)
    if (c < '0' || c > '9') return std::nullopt;
  digits += frac;
  if (digits.empty()) return std::nullopt;
  auto whole = parse_int(digits);
  if (!whole) return std::nullopt;
  std::int64_t scale = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
  return Exponent(negative ? -*whole : *whole, scale);
}

std::string format_exponent(const Exponent& e) {
  if (e.denominator() == 1) return std::to_string(e.numerator());
  return std::to_string(e.numerator()) + "/" + std::to_string(e.denominator());
}

}  // namespace mscrn
