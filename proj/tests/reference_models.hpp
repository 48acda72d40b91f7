// Independent models used to check the reference engine. They share no code
// with src/: bracket tax is accumulated one dollar at a time.
#pragma once

#include <cstdint>
#include <vector>

#include "taxmorph/ruleset.hpp"

namespace taxmorph::testing {

/// Prefix sums of the marginal rate over whole dollars 1..max_dollars.
class DollarLedger {
 public:
  DollarLedger(const TaxRuleSet& rules, FilingStatus status, std::int64_t max_dollars)
      : rows_(rules.tax_brackets[status]), prefix_(static_cast<std::size_t>(max_dollars) + 1, 0) {
    for (std::int64_t k = 1; k <= max_dollars; ++k) {
      prefix_[static_cast<std::size_t>(k)] = prefix_[static_cast<std::size_t>(k - 1)] + rate_of_dollar(k);
    }
  }

  /// Rate (millionths) applied to the k-th dollar, i.e. the span (k-1, k].
  std::int64_t rate_of_dollar(std::int64_t k) const {
    for (const auto& row : rows_) {
      if (k * 100 <= row.threshold_amount.units()) return row.rate_decimal.units();
    }
    return rows_.back().rate_decimal.units();
  }

  /// Tax in cents, rounded half away from zero.
  std::int64_t tax_cents(std::int64_t taxable_cents) const {
    const std::int64_t whole = taxable_cents / 100;
    const std::int64_t part = taxable_cents % 100;
    // 1e-8 currency units.
    const __int128 exact = static_cast<__int128>(prefix_[static_cast<std::size_t>(whole)]) * 100 +
                           static_cast<__int128>(part) * rate_of_dollar(whole + 1);
    return static_cast<std::int64_t>((exact + 500000) / 1000000);
  }

 private:
  std::vector<BracketRow> rows_;
  std::vector<std::int64_t> prefix_;  // millionths of a currency unit
};

}  // namespace taxmorph::testing
