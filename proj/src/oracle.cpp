#include "taxmorph/oracle.hpp"

#include <algorithm>

#include "taxmorph/errors.hpp"

namespace taxmorph {

ScenarioId::ScenarioId(int value) : value_(value) {
  if (value < 1 || value > 6) throw InputError("scenario must be in 1..6, got " + std::to_string(value));
}

std::string scenario_title(ScenarioId id) {
  switch (id.value()) {
    case 1: return "brackets and standard deductions";
    case 2: return "earned income tax credit";
    case 3: return "child tax credit and other dependent credit";
    case 4: return "american opportunity tax credit";
    case 5: return "itemized deductions";
    default: return "1099-R distributions and penalties";
  }
}

namespace {

Money floor_zero(Money m) { return m < Money{} ? Money{} : m; }

Exact bracket_tax_exact(Money taxable_income, FilingStatus sts, const TaxRuleSet& rules) {
  const auto& rows = rules.tax_brackets[sts];
  if (rows.empty()) throw UnknownStatus("no brackets for filing status " + std::string(to_string(sts)));
  Exact tax;
  Money lower;
  for (const auto& row : rows) {
    if (taxable_income <= lower) return tax;
    tax += (min(taxable_income, row.threshold_amount) - lower) * row.rate_decimal;
    lower = row.threshold_amount;
  }
  if (taxable_income > lower) tax += (taxable_income - lower) * rows.back().rate_decimal;
  return tax;
}

Money deduction_for(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  return p.use_itemized ? compute_itemized_deductions(p, rules, mode) : compute_standard_deduction(p, rules);
}

}  // namespace

Money compute_bracket_tax(Money taxable_income, FilingStatus sts, const TaxRuleSet& rules, Rounding mode) {
  if (taxable_income < Money{}) throw PreconditionViolated("taxable income must be >= 0");
  return bracket_tax_exact(taxable_income, sts, rules).round(mode);
}

Money compute_standard_deduction(const TaxpayerProfile& p, const TaxRuleSet& rules) {
  const auto& d = rules.standard_deductions[p.sts];
  Money total = d.base_amount;
  if (p.age >= kElderlyAge) total += d.additional_elderly;
  if (p.blind) total += d.additional_blind;
  if (is_joint(p.sts)) {
    if (p.spouse_age >= kElderlyAge) total += d.additional_elderly;
    if (p.spouse_blind) total += d.additional_blind;
  }
  return total;
}

Money compute_eitc(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  const auto& schedule = rules.eitc();
  const auto index = std::min<std::size_t>(static_cast<std::size_t>(std::max(p.num_qualifying_children, 0)),
                                           schedule.size() - 1);
  const auto& tier = schedule[index];
  const Money phase_out_start = tier.phase_out_start[p.sts];
  if (p.income < tier.plateau_start) return (p.income * tier.phase_in_rate).round(mode);
  if (p.income <= phase_out_start) return tier.max_credit;
  const Exact reduced = Exact(tier.max_credit) - (p.income - phase_out_start) * tier.phase_out_rate;
  return reduced.is_negative() ? Money{} : reduced.round(mode);
}

Money compute_ctc_odc(const TaxpayerProfile& p, const TaxRuleSet& rules) {
  const auto& c = rules.ctc();
  const Money full = c.credit_per_child * p.num_qualifying_children + c.odc_amount * p.num_other_dependents;
  const Money excess = p.income - c.phase_out_threshold[p.sts];
  if (excess <= Money{}) return full;
  // Each step or part of a step above the threshold costs one reduction.
  const std::int64_t steps = (excess.units() + c.step_size.units() - 1) / c.step_size.units();
  return floor_zero(full - c.reduction_per_step * steps);
}

Money compute_aotc(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  const auto& a = rules.aotc();
  if (p.year_in_school > 4 || p.enrollment_status == Enrollment::LessThanHalfTime) return Money{};
  const Money net = floor_zero(p.qualified_expenses - p.scholarships);
  const Exact tiered = min(net, a.tier1_limit) * a.tier1_rate + floor_zero(min(net, a.tier2_limit) - a.tier1_limit) *
                                                                     a.tier2_rate;
  const Exact cap(a.credit_cap);
  return (cap < tiered ? cap : tiered).round(mode);
}

Money compute_itemized_deductions(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  const auto& r = rules.itemized();
  Exact medical = Exact(p.medical_expenses) - p.income * r.medical_agi_floor_rate;
  if (medical.is_negative()) medical = Exact{};
  const Money other = min(p.salt_paid, r.salt_cap) + p.mortgage_interest + p.charitable_contributions + p.casualty_loss;
  return (medical + Exact(other)).round(mode);
}

Money compute_taxable_income(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  return floor_zero(p.income - deduction_for(p, rules, mode));
}

Money simplified_method_exclusion(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  const Money remaining = floor_zero(p.cost_basis - p.prior_basis_recovered);
  if (remaining == Money{} || p.annuity_payments_this_year <= 0) return Money{};
  const auto& table = rules.retirement().simplified_method_table;
  const auto row = std::find_if(table.begin(), table.end(),
                                [&](const SimplifiedMethodRow& r) { return r.age_upper_bound >= p.annuity_start_age; });
  if (row == table.end()) {
    throw AgeOutOfTable("annuity start age " + std::to_string(p.annuity_start_age) +
                        " is beyond the simplified method table");
  }
  const Money year = Money::from_units(detail::divide_rounded(
      static_cast<__int128>(p.cost_basis.units()) * p.annuity_payments_this_year, row->anticipated_payments, mode));
  return min(year, remaining);
}

Money compute_1099r_taxable(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  if (p.annuity_payments_this_year > 0) {
    return floor_zero(p.gross_distribution - simplified_method_exclusion(p, rules, mode));
  }
  const Money remaining = floor_zero(p.cost_basis - p.prior_basis_recovered);
  return p.gross_distribution - min(p.gross_distribution, remaining);
}

Money compute_early_withdrawal_penalty(const TaxpayerProfile& p, const TaxRuleSet& rules, Rounding mode) {
  const auto& r = rules.retirement();
  if (!(Years::whole(p.age) < r.penalty_age_threshold)) return Money{};
  if (std::binary_search(r.exception_codes.begin(), r.exception_codes.end(), p.distribution_code.raw)) return Money{};
  if (p.distribution_code.normalized != CodeClass::EarlyNoException) return Money{};
  return (compute_1099r_taxable(p, rules, mode) * r.penalty_rate).round(mode);
}

Money unfloored_taxable_income(const TaxpayerProfile& p, ScenarioId scenario, const TaxRuleSet& rules) {
  Money gross = p.income;
  if (scenario.value() == 6) gross += compute_1099r_taxable(p, rules);
  return gross - deduction_for(p, rules, Rounding::HalfAwayFromZero);
}

Money compute_total_liability(const TaxpayerProfile& p, ScenarioId scenario, const TaxRuleSet& rules, Rounding mode) {
  switch (scenario.value()) {
    case 1:
    case 5:
      return compute_bracket_tax(compute_taxable_income(p, rules, mode), p.sts, rules, mode);
    case 2:
      return compute_total_liability(p, ScenarioId(1), rules, mode) - compute_eitc(p, rules, mode);
    case 3:
      return floor_zero(compute_total_liability(p, ScenarioId(1), rules, mode) - compute_ctc_odc(p, rules));
    case 4:
      return floor_zero(compute_total_liability(p, ScenarioId(1), rules, mode) - compute_aotc(p, rules, mode));
    default: {
      const Money distribution = compute_1099r_taxable(p, rules, mode);
      const Money taxable = floor_zero(p.income + distribution - deduction_for(p, rules, mode));
      return compute_bracket_tax(taxable, p.sts, rules, mode) + compute_early_withdrawal_penalty(p, rules, mode);
    }
  }
}

}  // namespace taxmorph
