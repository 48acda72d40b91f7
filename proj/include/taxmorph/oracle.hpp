// Ground-truth tax engine. Every function is pure, parameterized by the rule
// set, and rounds its result to cents (half away from zero unless a mutant
// asks otherwise).
#pragma once

#include <array>
#include <string>

#include "taxmorph/decimal.hpp"
#include "taxmorph/profile.hpp"
#include "taxmorph/ruleset.hpp"

namespace taxmorph {

/// Benchmark scenario number, 1..6.
class ScenarioId {
 public:
  explicit ScenarioId(int value);
  int value() const { return value_; }
  auto operator<=>(const ScenarioId&) const = default;

 private:
  int value_;
};

inline const std::array<ScenarioId, 6>& all_scenarios() {
  static const std::array<ScenarioId, 6> ids = {ScenarioId(1), ScenarioId(2), ScenarioId(3),
                                                ScenarioId(4), ScenarioId(5), ScenarioId(6)};
  return ids;
}

std::string scenario_title(ScenarioId id);

inline constexpr int kElderlyAge = 65;

Money compute_bracket_tax(Money taxable_income, FilingStatus sts, const TaxRuleSet& rules,
                          Rounding mode = Rounding::HalfAwayFromZero);
Money compute_standard_deduction(const TaxpayerProfile& profile, const TaxRuleSet& rules);
Money compute_eitc(const TaxpayerProfile& profile, const TaxRuleSet& rules,
                   Rounding mode = Rounding::HalfAwayFromZero);
Money compute_ctc_odc(const TaxpayerProfile& profile, const TaxRuleSet& rules);
Money compute_aotc(const TaxpayerProfile& profile, const TaxRuleSet& rules,
                   Rounding mode = Rounding::HalfAwayFromZero);
Money compute_itemized_deductions(const TaxpayerProfile& profile, const TaxRuleSet& rules,
                                  Rounding mode = Rounding::HalfAwayFromZero);
Money compute_taxable_income(const TaxpayerProfile& profile, const TaxRuleSet& rules,
                             Rounding mode = Rounding::HalfAwayFromZero);
Money simplified_method_exclusion(const TaxpayerProfile& profile, const TaxRuleSet& rules,
                                  Rounding mode = Rounding::HalfAwayFromZero);
Money compute_1099r_taxable(const TaxpayerProfile& profile, const TaxRuleSet& rules,
                            Rounding mode = Rounding::HalfAwayFromZero);
Money compute_early_withdrawal_penalty(const TaxpayerProfile& profile, const TaxRuleSet& rules,
                                       Rounding mode = Rounding::HalfAwayFromZero);
Money compute_total_liability(const TaxpayerProfile& profile, ScenarioId scenario, const TaxRuleSet& rules,
                              Rounding mode = Rounding::HalfAwayFromZero);

/// Income entering the brackets before the zero floor: income (plus the
/// 1099-R taxable amount in scenario 6) minus the chosen deduction. Tuple
/// generators use it to map bracket thresholds onto other labels.
Money unfloored_taxable_income(const TaxpayerProfile& profile, ScenarioId scenario, const TaxRuleSet& rules);

}  // namespace taxmorph
