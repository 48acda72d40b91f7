#include <gtest/gtest.h>

#include "reference_models.hpp"
#include "support.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/kernels.hpp"
#include "taxmorph/sampling.hpp"

using namespace taxmorph;
using taxmorph::testing::bracket_example;
using taxmorph::testing::DollarLedger;
using taxmorph::testing::ty2021;
using taxmorph::testing::ty2021_no_deduction;

namespace {

TaxpayerProfile person(double income, FilingStatus status = FilingStatus::Single) {
  TaxpayerProfile p;
  p.income = Money::from_double(income);
  p.sts = status;
  p.age = 40;
  return p;
}

Money usd(double v) { return Money::from_double(v); }

}  // namespace

TEST(BracketTax, WorkedExample) {
  // 11,600 x 10% + 8,400 x 12%
  EXPECT_EQ(compute_bracket_tax(dollars(20000), FilingStatus::Single, bracket_example()), usd(2168.00));
  EXPECT_EQ(compute_total_liability(person(20000), ScenarioId(1), bracket_example()).fixed(), "2168.00");
}

TEST(BracketTax, UpperBoundIsInclusive) {
  const auto& r = ty2021();
  // Last dollar of the 10% row, first dollar of the 12% row.
  EXPECT_EQ(compute_bracket_tax(dollars(9950), FilingStatus::Single, r), usd(995));
  EXPECT_EQ(compute_bracket_tax(dollars(9951), FilingStatus::Single, r), usd(995.12));
  EXPECT_EQ(compute_bracket_tax(Money{}, FilingStatus::Single, r), Money{});
  EXPECT_THROW(compute_bracket_tax(usd(-1), FilingStatus::Single, r), PreconditionViolated);
}

TEST(BracketTax, AgreesWithDollarLedger) {
  const auto& r = ty2021_no_deduction();
  Rng rng(mix_seed(7, "ledger"));
  for (const auto status : kAllStatuses) {
    const DollarLedger ledger(r, status, 700000);
    for (int i = 0; i < 1000; ++i) {
      const Money income = uniform_money(rng, Money{}, dollars(699999));
      ASSERT_EQ(compute_bracket_tax(income, status, r).units(), ledger.tax_cents(income.units()))
          << to_string(status) << " " << income.str();
    }
  }
}

TEST(StandardDeduction, AddOns) {
  auto p = person(0);
  p.age = 65;
  p.blind = true;
  EXPECT_EQ(compute_standard_deduction(p, ty2021()), dollars(12400 + 1650 + 1650));
  p.age = 64;
  EXPECT_EQ(compute_standard_deduction(p, ty2021()), dollars(12400 + 1650));
  auto joint = person(0, FilingStatus::MarriedFilingJointly);
  joint.age = 70;
  joint.spouse_age = 66;
  EXPECT_EQ(compute_standard_deduction(joint, ty2021()), dollars(24800 + 2 * 1300));
}

TEST(Eitc, PhaseInPlateauPhaseOut) {
  auto p = person(10000);
  p.num_qualifying_children = 1;
  EXPECT_EQ(compute_eitc(p, ty2021()), usd(3400));  // 34% of 10,000
  p.income = dollars(15000);
  EXPECT_EQ(compute_eitc(p, ty2021()), usd(3618));
  p.income = dollars(25000);
  EXPECT_EQ(compute_eitc(p, ty2021()), usd(2742.30));  // 3,618 - 15.98% x 5,480
  p.num_qualifying_children = 0;
  p.income = dollars(12000);
  EXPECT_EQ(compute_eitc(p, ty2021()), usd(1442.33));  // 1,502 - 15.3% x 390
  p.num_qualifying_children = 5;  // the three-child tier covers more
  p.income = dollars(60000);
  EXPECT_EQ(compute_eitc(p, ty2021()), Money{});
  // Refundable: liability goes negative.
  auto s2 = person(25000);
  s2.num_qualifying_children = 1;
  EXPECT_EQ(compute_total_liability(s2, ScenarioId(2), ty2021()), usd(1313) - usd(2742.30));
}

TEST(Ctc, StepwisePhaseOut) {
  auto p = person(210000);
  p.num_qualifying_children = 1;
  EXPECT_EQ(compute_ctc_odc(p, ty2021()), usd(1500));  // ten 1,000 steps x 50
  p.income = usd(200000.01);
  EXPECT_EQ(compute_ctc_odc(p, ty2021()), usd(1950));  // a partial step counts
  p.income = dollars(200000);
  EXPECT_EQ(compute_ctc_odc(p, ty2021()), usd(2000));
  p.income = dollars(1000000);
  EXPECT_EQ(compute_ctc_odc(p, ty2021()), Money{});

  auto family = person(150000);
  family.num_qualifying_children = 2;
  family.num_other_dependents = 1;
  // Tax on 137,600: 995 + 3,669 + 10,087 + 12,294; credit 2 x 2,000 + 500.
  EXPECT_EQ(compute_total_liability(family, ScenarioId(3), ty2021()), usd(27045 - 4500));
  auto low = person(20000);
  low.num_qualifying_children = 3;
  EXPECT_EQ(compute_total_liability(low, ScenarioId(3), ty2021()), Money{});  // nonrefundable
}

TEST(Aotc, Tiers) {
  auto p = person(80000);
  p.qualified_expenses = dollars(3000);
  EXPECT_EQ(compute_aotc(p, ty2021()), usd(2250));  // 2,000 + 25% x 1,000
  p.qualified_expenses = dollars(5000);
  EXPECT_EQ(compute_aotc(p, ty2021()), usd(2500));
  p.qualified_expenses = dollars(3000);
  p.scholarships = dollars(1000);
  EXPECT_EQ(compute_aotc(p, ty2021()), usd(2000));
  p.scholarships = Money{};
  p.year_in_school = 5;
  EXPECT_EQ(compute_aotc(p, ty2021()), Money{});
  p.year_in_school = 2;
  p.enrollment_status = Enrollment::LessThanHalfTime;
  EXPECT_EQ(compute_aotc(p, ty2021()), Money{});
}

TEST(Itemized, FloorAndCap) {
  auto p = person(100000);
  p.use_itemized = true;
  p.medical_expenses = dollars(10000);
  p.salt_paid = dollars(15000);
  p.mortgage_interest = dollars(8000);
  p.charitable_contributions = dollars(2000);
  // (10,000 - 7.5% x 100,000) + 10,000 + 8,000 + 2,000
  EXPECT_EQ(compute_itemized_deductions(p, ty2021()), usd(22500));
  EXPECT_EQ(compute_taxable_income(p, ty2021()), usd(77500));
  p.use_itemized = false;
  EXPECT_EQ(compute_taxable_income(p, ty2021()), usd(87600));
}

TEST(Retirement, PenaltyAndExclusion) {
  const auto& r = ty2021();
  auto p = person(30000);
  p.age = 45;
  p.gross_distribution = dollars(20000);
  p.distribution_code = normalize_distribution_code("1", r);
  EXPECT_EQ(compute_early_withdrawal_penalty(p, r), usd(2000));
  // Tax on 37,600 is 4,313; plus the 10% penalty.
  EXPECT_EQ(compute_total_liability(p, ScenarioId(6), r), usd(6313));
  p.age = 59;
  EXPECT_EQ(compute_early_withdrawal_penalty(p, r), usd(2000));
  p.age = 60;
  EXPECT_EQ(compute_early_withdrawal_penalty(p, r), Money{});
  p.age = 45;
  p.distribution_code = normalize_distribution_code("2", r);
  EXPECT_EQ(compute_early_withdrawal_penalty(p, r), Money{});
  EXPECT_THROW(normalize_distribution_code("Z", r), UnknownDistributionCode);

  auto annuity = person(0);
  annuity.gross_distribution = dollars(12000);
  annuity.cost_basis = dollars(31200);
  annuity.annuity_start_age = 60;
  annuity.annuity_payments_this_year = 12;
  EXPECT_EQ(simplified_method_exclusion(annuity, r), usd(1207.74));  // 31,200 x 12 / 310
  EXPECT_EQ(compute_1099r_taxable(annuity, r), usd(10792.26));
  annuity.prior_basis_recovered = dollars(31000);
  EXPECT_EQ(simplified_method_exclusion(annuity, r), usd(200));
  annuity.annuity_start_age = 130;
  annuity.prior_basis_recovered = Money{};
  EXPECT_THROW(simplified_method_exclusion(annuity, r), AgeOutOfTable);

  auto lump = person(0);
  lump.gross_distribution = dollars(20000);
  lump.cost_basis = dollars(5000);
  EXPECT_EQ(compute_1099r_taxable(lump, r), usd(15000));
}

TEST(Profile, ParsesAndRejectsWithPaths) {
  const auto p = parse_profile(R"({"income": 20000, "sts": "single", "distribution_code": 1})", ty2021());
  EXPECT_EQ(p.income, dollars(20000));
  EXPECT_EQ(p.distribution_code.raw, "1");
  EXPECT_EQ(p.distribution_code.normalized, CodeClass::EarlyNoException);
  EXPECT_EQ(parse_profile(serialize_profile(p), ty2021()), p);

  auto path_of = [](const std::string& doc) {
    try {
      parse_profile(doc, ty2021());
    } catch (const SchemaViolation& e) {
      return e.path();
    }
    return std::string("<accepted>");
  };
  EXPECT_EQ(path_of(R"({"income": 1, "sts": "single", "wages": 3})"), "wages");
  EXPECT_EQ(path_of(R"({"sts": "single"})"), "income");
  EXPECT_EQ(path_of(R"({"income": 1.005, "sts": "single"})"), "income");
  EXPECT_EQ(path_of(R"({"income": 1, "sts": "widowed"})"), "sts");
  EXPECT_EQ(path_of(R"({"income": 1, "sts": "single", "distribution_code": "Q"})"), "distribution_code");
  EXPECT_THROW(parse_profile("{", ty2021()), MalformedDocument);
}

TEST(Kernels, ParallelMatchesSerial) {
  for (const auto scenario : all_scenarios()) {
    Rng rng(mix_seed(3, "kernels"));
    std::vector<TaxpayerProfile> profiles;
    for (int i = 0; i < 3000; ++i) profiles.push_back(random_profile(scenario, ty2021(), rng));
    profiles.push_back(person(1));
    profiles.back().annuity_payments_this_year = 1;
    profiles.back().annuity_start_age = 130;
    profiles.back().cost_basis = dollars(10);
    OracleFunction f(ty2021(), scenario);
    const auto serial = evaluate_batch_serial(f, profiles);
    const auto parallel = evaluate_batch_parallel(f, profiles);
    EXPECT_EQ(serial, parallel) << "scenario " << scenario.value();
    if (scenario.value() == 6) {
      EXPECT_FALSE(serial.back().value.has_value());
    }
  }
}
