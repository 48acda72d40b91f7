// Fixed-point decimal quantities used for every statutory amount.
//
// Money carries cents, Fraction carries millionths, Years carries
// hundredths of a year. Products of Money and Fraction are kept exact in
// an Exact accumulator (1e-8 units) and rounded once, at the boundary of a
// public operation.
#pragma once

#include <compare>
#include <stdexcept>
#include <cstdint>
#include <string>
#include <string_view>

namespace taxmorph {

enum class Rounding { HalfAwayFromZero, TowardZero };

namespace detail {

constexpr std::int64_t pow10(int digits) {
  std::int64_t p = 1;
  for (int i = 0; i < digits; ++i) p *= 10;
  return p;
}

/// Divides with the requested rounding; denominator must be positive.
std::int64_t divide_rounded(__int128 numerator, __int128 denominator, Rounding mode);

/// Parses a plain decimal literal ("12", "-0.075", "12400.5") into an
/// integer count of 10^-digits units. Returns false on syntax errors or when
/// the literal carries more fractional digits than `digits`.
bool parse_scaled(std::string_view text, int digits, std::int64_t& out);

/// Formats a scaled integer. `fixed` keeps all `digits` places, otherwise
/// trailing zeros (and a bare point) are dropped.
std::string format_scaled(std::int64_t units, int digits, bool fixed);

/// Shortest decimal text that round-trips the double.
std::string shortest_text(double value);

}  // namespace detail

template <int Digits, class Tag>
class Decimal {
 public:
  static constexpr int kDigits = Digits;
  static constexpr std::int64_t kScale = detail::pow10(Digits);

  constexpr Decimal() = default;

  static constexpr Decimal from_units(std::int64_t units) {
    Decimal d;
    d.units_ = units;
    return d;
  }
  static constexpr Decimal whole(std::int64_t value) { return from_units(value * kScale); }

  /// Exact parse of a decimal literal; throws std::invalid_argument.
  static Decimal parse(std::string_view text) {
    std::int64_t units = 0;
    if (!detail::parse_scaled(text, Digits, units)) {
      throw std::invalid_argument("not a decimal with at most " + std::to_string(Digits) +
                                  " fractional digits: '" + std::string(text) + "'");
    }
    return from_units(units);
  }

  /// Converts a double through its shortest round-trip text so that a JSON
  /// literal such as 0.075 maps to exactly 75000 millionths.
  static Decimal from_double(double value) { return parse(detail::shortest_text(value)); }

  /// Like from_double, but rounds excess fractional digits instead of failing.
  static Decimal from_double_rounded(double value, Rounding mode = Rounding::HalfAwayFromZero) {
    std::int64_t units = 0;
    const std::string text = detail::shortest_text(value);
    if (detail::parse_scaled(text, Digits, units)) return from_units(units);
    long double scaled = static_cast<long double>(value) * kScale * 1000;
    return from_units(detail::divide_rounded(static_cast<__int128>(scaled), 1000, mode));
  }

  constexpr std::int64_t units() const { return units_; }
  double to_double() const { return static_cast<double>(units_) / static_cast<double>(kScale); }

  /// Minimal text: 9950, 0.12, 12400.5.
  std::string str() const { return detail::format_scaled(units_, Digits, false); }
  /// Fixed text with all fractional places: 2168.00.
  std::string fixed() const { return detail::format_scaled(units_, Digits, true); }

  constexpr Decimal operator+(Decimal o) const { return from_units(units_ + o.units_); }
  constexpr Decimal operator-(Decimal o) const { return from_units(units_ - o.units_); }
  constexpr Decimal operator-() const { return from_units(-units_); }
  constexpr Decimal& operator+=(Decimal o) {
    units_ += o.units_;
    return *this;
  }
  constexpr Decimal& operator-=(Decimal o) {
    units_ -= o.units_;
    return *this;
  }
  constexpr Decimal operator*(std::int64_t k) const { return from_units(units_ * k); }

  constexpr auto operator<=>(const Decimal&) const = default;

 private:
  std::int64_t units_ = 0;
};

struct MoneyTag {};
struct FractionTag {};
struct YearsTag {};

using Money = Decimal<2, MoneyTag>;
using Fraction = Decimal<6, FractionTag>;
using Years = Decimal<2, YearsTag>;

inline Money dollars(std::int64_t whole) { return Money::whole(whole); }
inline Money cents(std::int64_t c) { return Money::from_units(c); }

/// Exact sum of Money x Fraction products, in 1e-8 currency units.
class Exact {
 public:
  static constexpr std::int64_t kPerCent = Fraction::kScale;

  constexpr Exact() = default;
  constexpr explicit Exact(Money m) : units_(static_cast<__int128>(m.units()) * kPerCent) {}

  static constexpr Exact product(Money m, Fraction f) {
    Exact e;
    e.units_ = static_cast<__int128>(m.units()) * f.units();
    return e;
  }

  Money round(Rounding mode = Rounding::HalfAwayFromZero) const {
    return Money::from_units(detail::divide_rounded(units_, kPerCent, mode));
  }

  constexpr Exact operator+(Exact o) const {
    Exact e;
    e.units_ = units_ + o.units_;
    return e;
  }
  constexpr Exact operator-(Exact o) const {
    Exact e;
    e.units_ = units_ - o.units_;
    return e;
  }
  constexpr Exact& operator+=(Exact o) {
    units_ += o.units_;
    return *this;
  }
  constexpr bool operator==(const Exact& o) const { return units_ == o.units_; }
  constexpr bool operator<(const Exact& o) const { return units_ < o.units_; }
  constexpr bool operator<=(const Exact& o) const { return units_ <= o.units_; }
  constexpr bool operator>(const Exact& o) const { return units_ > o.units_; }
  constexpr bool is_negative() const { return units_ < 0; }

 private:
  __int128 units_ = 0;
};

inline Exact operator*(Money m, Fraction f) { return Exact::product(m, f); }

inline Money min(Money a, Money b) { return a < b ? a : b; }
inline Money max(Money a, Money b) { return a < b ? b : a; }

}  // namespace taxmorph
