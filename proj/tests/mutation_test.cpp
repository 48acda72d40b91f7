#include <gtest/gtest.h>

#include "support.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/mutation.hpp"
#include "taxmorph/sampling.hpp"

using namespace taxmorph;
using taxmorph::testing::bracket_example;
using taxmorph::testing::fixture_path;
using taxmorph::testing::ty2021;

namespace {

TaxpayerProfile person(std::int64_t income) {
  TaxpayerProfile p;
  p.income = dollars(income);
  p.sts = FilingStatus::Single;
  p.age = 40;
  return p;
}

MatrixConfig small_config() {
  MatrixConfig c;
  c.n_random = 80;
  c.pair_count = 80;
  c.tuples_per_category = 16;
  c.relations = load_relations_file(fixture_path("relations.json"));
  return c;
}

}  // namespace

TEST(Operators, TextRoundTrip) {
  for (const auto& spec : standard_mutants()) {
    EXPECT_EQ(operator_text(parse_operator(operator_text(spec.op))), operator_text(spec.op));
  }
  EXPECT_EQ(standard_mutants().size(), 8u);
  const MutantSpec shifted{parse_operator("threshold_shift:bracket[1]:1000"), ScenarioId(1)};
  EXPECT_EQ(shifted.id(), "s1/threshold_shift:bracket[1]:1000");
  EXPECT_TRUE(null_mutant().is_null());
  for (const char* bad : {"", "flat_rate", "flat_rate:x", "tier_collapse:1", "teleport", "cap_removal:"}) {
    EXPECT_THROW(parse_operator(bad), InputError) << bad;
  }
}

TEST(Operators, Applicability) {
  const auto& r = ty2021();
  EXPECT_THROW(check_applicable({TierCollapse{}, ScenarioId(1)}, r), InapplicableOperator);
  EXPECT_THROW(check_applicable({PenaltyAlwaysWaived{}, ScenarioId(5)}, r), InapplicableOperator);
  EXPECT_THROW(check_applicable({ThresholdShift{"bracket[6]", dollars(1)}, ScenarioId(1)}, r),
               InapplicableOperator);  // the sentinel row
  EXPECT_THROW(check_applicable({ThresholdShift{"bracket[0]", dollars(40000)}, ScenarioId(1)}, r),
               InapplicableOperator);  // would pass the next threshold
  EXPECT_THROW(check_applicable({CapRemoval{"salt_cap"}, ScenarioId(4)}, r), InapplicableOperator);
  for (const auto& spec : standard_mutants()) EXPECT_NO_THROW(check_applicable(spec, r)) << spec.id();
}

TEST(Operators, Effects) {
  // Flat 12% of 20,000 against the 2,168 progressive result.
  MutantFunction flat({FlatRate{Fraction::parse("0.12")}, ScenarioId(1)}, bracket_example());
  EXPECT_EQ(flat.evaluate(person(20000)), dollars(2400));

  auto student = person(80000);
  student.qualified_expenses = dollars(3000);
  auto collapsed = mutate_rules({TierCollapse{}, ScenarioId(4)}, ty2021());
  EXPECT_EQ(compute_aotc(student, collapsed), dollars(2500));  // 3,000 before the cap
  collapsed.aotc_rules->credit_cap = dollars(100000);
  EXPECT_EQ(compute_aotc(student, collapsed), dollars(3000));

  auto early = person(30000);
  early.gross_distribution = dollars(20000);
  early.distribution_code = normalize_distribution_code("1", ty2021());
  MutantFunction waived({PenaltyAlwaysWaived{}, ScenarioId(6)}, ty2021());
  EXPECT_EQ(waived.evaluate(early), dollars(4313));

  // 995 + 12% of 0.05 = 995.006: truncation drops the part cent the oracle rounds up.
  auto odd = person(12400 + 9950);
  odd.income += cents(5);
  MutantFunction truncating({RoundingTruncate{}, ScenarioId(1)}, ty2021());
  EXPECT_EQ(truncating.evaluate(odd), cents(99500));
  EXPECT_EQ(compute_total_liability(odd, ScenarioId(1), ty2021()), cents(99501));
}

TEST(Operators, NullMutantMatchesOracle) {
  MutantFunction null(null_mutant(), ty2021());
  OracleFunction oracle(ty2021(), ScenarioId(1));
  Rng rng(mix_seed(5, "null"));
  for (int i = 0; i < 2000; ++i) {
    const auto p = random_profile(ScenarioId(1), ty2021(), rng);
    ASSERT_EQ(null.evaluate(p), oracle.evaluate(p));
  }
}

TEST(Operators, MaterializedMutantMatchesInProcess) {
  for (const auto& spec : standard_mutants()) {
    CandidateFunction remote(materialize_mutant(spec, ty2021(), TAXMORPH_EXE));
    MutantFunction local(spec, ty2021());
    EXPECT_EQ(remote.scenario(), spec.scenario);
    Rng rng(mix_seed(6, spec.id()));
    for (int i = 0; i < 50; ++i) {
      const auto p = random_profile(spec.scenario, ty2021(), rng);
      ASSERT_EQ(remote.evaluate(p), local.evaluate(p)) << spec.id();
    }
  }
}

TEST(Matrix, KillsEveryStandardMutant) {
  auto mutants = standard_mutants();
  mutants.push_back(null_mutant());
  const auto m = detection_matrix(mutants, ty2021(), small_config());
  ASSERT_EQ(m.rows.size(), 9u);
  for (const auto& row : m.rows) {
    EXPECT_TRUE(row.error.empty()) << row.error;
    const bool corpus = row.cells[0].killed, mt = row.cells[1].killed, hmt = row.cells[2].killed;
    if (mt) EXPECT_TRUE(hmt) << row.spec.id();
    for (const auto& cell : row.cells) EXPECT_EQ(cell.killed, !cell.evidence.empty());
    if (row.spec.is_null()) {
      EXPECT_FALSE(corpus || mt || hmt);
    } else {
      EXPECT_TRUE(corpus || mt || hmt) << row.spec.id();
    }
  }
  EXPECT_TRUE(m.rows[0].cells[2].killed);  // flat rate: threshold jumps vanish
  EXPECT_EQ(matrix_json(m), matrix_json(detection_matrix(mutants, ty2021(), small_config())));
}

TEST(Matrix, SubprocessAgreesWithInProcess) {
  const std::vector<MutantSpec> mutants = {standard_mutants()[0], standard_mutants()[6], null_mutant()};
  auto config = small_config();
  const auto local = matrix_json(detection_matrix(mutants, ty2021(), config));
  config.executable = TAXMORPH_EXE;
  EXPECT_EQ(matrix_json(detection_matrix(mutants, ty2021(), config)), local);
}
