#include "taxmorph/decimal.hpp"

#include <charconv>
#include <stdexcept>

namespace taxmorph::detail {

std::int64_t divide_rounded(__int128 numerator, __int128 denominator, Rounding mode) {
  const bool negative = numerator < 0;
  const __int128 magnitude = negative ? -numerator : numerator;
  __int128 quotient = magnitude / denominator;
  if (mode == Rounding::HalfAwayFromZero) {
    const __int128 remainder = magnitude % denominator;
    if (remainder * 2 >= denominator) ++quotient;
  }
  return static_cast<std::int64_t>(negative ? -quotient : quotient);
}

bool parse_scaled(std::string_view text, int digits, std::int64_t& out) {
  if (text.empty()) return false;
  std::size_t i = 0;
  bool negative = false;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    i = 1;
  }
  // Exponent forms appear in shortest round-trip text (1e+06).
  const auto exp_pos = text.find_first_of("eE");
  std::string_view mantissa = text.substr(i, exp_pos == std::string_view::npos ? std::string_view::npos
                                                                              : exp_pos - i);
  int exponent = 0;
  if (exp_pos != std::string_view::npos) {
    auto exp_text = text.substr(exp_pos + 1);
    if (!exp_text.empty() && exp_text[0] == '+') exp_text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(exp_text.data(), exp_text.data() + exp_text.size(), exponent);
    if (ec != std::errc{} || ptr != exp_text.data() + exp_text.size()) return false;
  }
  std::string whole_digits;
  std::string frac_digits;
  bool seen_point = false;
  for (char c : mantissa) {
    if (c == '.') {
      if (seen_point) return false;
      seen_point = true;
    } else if (c >= '0' && c <= '9') {
      (seen_point ? frac_digits : whole_digits).push_back(c);
    } else {
      return false;
    }
  }
  if (whole_digits.empty() && frac_digits.empty()) return false;
  // Shift the decimal point by the exponent.
  std::string all = whole_digits + frac_digits;
  int point = static_cast<int>(whole_digits.size()) + exponent;
  if (point < 0) {
    all.insert(0, static_cast<std::size_t>(-point), '0');
    point = 0;
  }
  while (static_cast<int>(all.size()) < point) all.push_back('0');
  std::string int_part = all.substr(0, static_cast<std::size_t>(point));
  std::string frac_part = all.substr(static_cast<std::size_t>(point));
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  if (static_cast<int>(frac_part.size()) > digits) return false;
  frac_part.append(static_cast<std::size_t>(digits) - frac_part.size(), '0');
  const std::string scaled = int_part + frac_part;
  __int128 value = 0;
  for (char c : scaled) {
    value = value * 10 + (c - '0');
    if (value > static_cast<__int128>(INT64_MAX)) return false;
  }
  out = static_cast<std::int64_t>(negative ? -value : value);
  return true;
}

std::string format_scaled(std::int64_t units, int digits, bool fixed) {
  const bool negative = units < 0;
  // Widen before negating so INT64_MIN survives.
  unsigned long long magnitude =
      negative ? 0ULL - static_cast<unsigned long long>(units) : static_cast<unsigned long long>(units);
  unsigned long long scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  std::string whole = std::to_string(magnitude / scale);
  std::string frac = std::to_string(magnitude % scale);
  frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
  if (!fixed) {
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
  }
  std::string out = negative && (magnitude != 0) ? "-" : "";
  out += whole;
  if (!frac.empty()) out += "." + frac;
  return out;
}

std::string shortest_text(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw std::invalid_argument("unformattable number");
  return std::string(buffer, ptr);
}

}  // namespace taxmorph::detail
