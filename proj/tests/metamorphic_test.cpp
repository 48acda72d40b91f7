#include <gtest/gtest.h>

#include <cmath>

#include "json.hpp"
#include "support.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/json_writer.hpp"
#include "taxmorph/metamorphic.hpp"
#include "taxmorph/sampling.hpp"

using namespace taxmorph;
using taxmorph::testing::fixture_path;
using taxmorph::testing::ty2021;
using taxmorph::testing::ty2021_no_deduction;
using nlohmann::json;

namespace {

TaxpayerProfile single(Money income) {
  TaxpayerProfile p;
  p.income = income;
  p.age = 40;
  return p;
}

// Applies 12% to taxable income regardless of bracket.
std::unique_ptr<TaxFunction> flat_twelve(const TaxRuleSet& rules) {
  return make_function(ScenarioId(1), "flat 12%", [&rules](const TaxpayerProfile& p) {
    return (compute_taxable_income(p, rules) * Fraction::parse("0.12")).round();
  });
}

TestTuple income_tuple(HmtCategory c, double b, double x1, double x2) {
  TestTuple t;
  t.base_profile = single(Money{});
  t.target_label = "income";
  t.values = {Money::from_double(b), Money::from_double(x1), Money::from_double(x2)};
  t.category = c;
  return t;
}

std::array<EvalOutcome, 3> outcomes(double a, double b, double c) {
  return {EvalOutcome{Money::from_double(a), {}}, EvalOutcome{Money::from_double(b), {}},
          EvalOutcome{Money::from_double(c), {}}};
}

const std::vector<PairwiseRelation>& fixture_relations() {
  static const auto rels = load_relations_file(fixture_path("relations.json"));
  return rels;
}

const PairwiseRelation& relation(const std::string& name) {
  for (const auto& r : fixture_relations()) {
    if (r.name == name) return r;
  }
  throw std::runtime_error("no relation " + name);
}

}  // namespace

TEST(Rates, WorkedThresholdJump) {
  OracleFunction f(ty2021_no_deduction(), ScenarioId(1));
  const auto t = income_tuple(HmtCategory::ThresholdJump, 35000, 40525, 48000);
  const auto m = rates(f, t);
  // 12% on 5,525; then (663 + 22% x 7,475) / 13,000.
  EXPECT_NEAR(m.rates.r1, 663.0 / 5525.0, 1e-9);
  EXPECT_NEAR(m.rates.r2, (663.0 + 1644.5) / 13000.0, 1e-9);
  EXPECT_NEAR(m.rates.r2, 0.1775, 1e-6);
  EXPECT_EQ(check_hmt(t, f, {}).verification_result, Verdict::Pass);
  EXPECT_EQ(check_hmt(t, *flat_twelve(ty2021_no_deduction()), {}).verification_result, Verdict::Fail);
}

TEST(Judge, CategorySemantics) {
  const ToleranceConfig tol;
  auto pi = income_tuple(HmtCategory::ProportionalIncrease, 1000, 2000, 3000);
  EXPECT_EQ(judge_hmt(pi, outcomes(100, 200, 300), tol).verification_result, Verdict::Pass);
  // r1 = 0.1, r2 = 0.1049: inside rate_eps.
  EXPECT_EQ(judge_hmt(pi, outcomes(100, 200, 309.8), tol).verification_result, Verdict::Pass);
  // r1 = 0.1, r2 = 0.106: outside.
  EXPECT_EQ(judge_hmt(pi, outcomes(100, 200, 312), tol).verification_result, Verdict::Fail);

  auto tj = income_tuple(HmtCategory::ThresholdJump, 1000, 2000, 3000);
  EXPECT_EQ(judge_hmt(tj, outcomes(100, 200, 320), tol).verification_result, Verdict::Pass);  // r2 0.11
  EXPECT_EQ(judge_hmt(tj, outcomes(100, 200, 308), tol).verification_result, Verdict::Fail);  // r2 0.104
  // A falling rate is not a jump.
  EXPECT_EQ(judge_hmt(tj, outcomes(100, 200, 250), tol).verification_result, Verdict::Fail);

  auto sat = income_tuple(HmtCategory::Saturation, 1000, 2000, 3000);
  EXPECT_EQ(judge_hmt(sat, outcomes(500, 500, 500), tol).verification_result, Verdict::Pass);
  EXPECT_EQ(judge_hmt(sat, outcomes(500, 500, 500.01), tol).verification_result, Verdict::Pass);
  EXPECT_EQ(judge_hmt(sat, outcomes(500, 500, 500.02), tol).verification_result, Verdict::Fail);

  std::array<EvalOutcome, 3> broken = outcomes(1, 2, 3);
  broken[2] = EvalOutcome{std::nullopt, "candidate timed out"};
  const auto d = judge_hmt(tj, broken, tol);
  EXPECT_EQ(d.verification_result, Verdict::Fail);
  EXPECT_NE(d.verification_reason.find("timed out"), std::string::npos);
  EXPECT_FALSE(d.modified_tax_tuple[2].has_value());
}

TEST(Report, FieldNamesAndOrder) {
  auto t = income_tuple(HmtCategory::ThresholdJump, 35000, 40525, 48000);
  t.rationale = "taxable income reaches 40525";
  const auto d = check_hmt(t, *flat_twelve(ty2021_no_deduction()), {});
  const std::string report = discrepancy_report({d});
  const auto doc = json::parse(report);
  const auto& rec = doc.at("discrepancies").at(0);
  // nlohmann sorts keys, so read the order from the text instead.
  const std::vector<std::string> expected = {"input",
                                             "test_category",
                                             "filing_status",
                                             "base_value",
                                             "new_value_1",
                                             "new_value_2",
                                             "verification_result",
                                             "verification_reason",
                                             "initial_tax",
                                             "modified_tax_tuple",
                                             "Rate_change_base (R1)",
                                             "Rate_change_follow-up (R2)"};
  std::size_t from = 0;
  for (const auto& key : expected) {
    const auto pos = report.find("\"" + key + "\"", from);
    ASSERT_NE(pos, std::string::npos) << key;
    from = pos;
  }
  EXPECT_EQ(rec.size(), expected.size());
  EXPECT_EQ(rec.at("verification_result"), "FAIL");
  EXPECT_EQ(rec.at("filing_status"), "single");
  EXPECT_EQ(rec.at("base_value"), 35000);
  EXPECT_NE(report.find("\"initial_tax\": 4200.00"), std::string::npos);
  EXPECT_NE(report.find("\"Rate_change_base (R1)\": 0.120000"), std::string::npos);
  EXPECT_NE(rec.at("verification_reason").get<std::string>().find("(taxable income reaches 40525)"),
            std::string::npos);
  EXPECT_EQ(discrepancy_report({}), "{\n  \"discrepancies\": []\n}\n");
}

TEST(Pairwise, ChecksPremiseAndEquivalence) {
  const auto& mono = relation("income_monotonicity");
  OracleFunction f(ty2021(), ScenarioId(1));
  const auto low = single(dollars(30000));
  const auto high = single(dollars(50000));
  EXPECT_EQ(check_pairwise(mono, high, low, f).verdict, Verdict::Pass);
  EXPECT_THROW(check_pairwise(mono, low, high, f), PreconditionViolated);
  auto older = high;
  older.age = 70;
  EXPECT_THROW(check_pairwise(mono, older, low, f), NotEquivalent);

  auto inverted = make_function(ScenarioId(1), "inverted",
                                [](const TaxpayerProfile& p) { return dollars(100000) - p.income; });
  const auto check = check_pairwise(mono, high, low, *inverted);
  ASSERT_EQ(check.verdict, Verdict::Fail);
  ASSERT_TRUE(check.discrepancy.has_value());
  EXPECT_EQ(check.discrepancy->test_category, "income_monotonicity");
  EXPECT_EQ(check.discrepancy->base_value, "30000");
  EXPECT_EQ(check.discrepancy->new_value_1, "50000");
}

TEST(Pairwise, BlindDeduction) {
  const auto& blind = relation("blind_deduction");
  auto sighted = single(dollars(40000));
  auto with_blind = sighted;
  with_blind.blind = true;
  for (const auto scenario : all_scenarios()) {
    OracleFunction f(ty2021(), scenario);
    EXPECT_EQ(check_pairwise(blind, with_blind, sighted, f).verdict, Verdict::Pass) << scenario.value();
  }
  // Treating blindness as a surcharge violates the relation.
  auto surcharge = make_function(ScenarioId(1), "surcharge", [](const TaxpayerProfile& p) {
    return compute_total_liability(p, ScenarioId(1), ty2021()) + (p.blind ? dollars(500) : Money{});
  });
  EXPECT_EQ(check_pairwise(blind, with_blind, sighted, *surcharge).verdict, Verdict::Fail);
}

TEST(Pairwise, GeneratedPairsSatisfyThePremise) {
  for (const auto& rel : fixture_relations()) {
    for (const int s : rel.scenarios) {
      const auto pairs = generate_pairs(rel, ScenarioId(s), ty2021(), 300, 11);
      ASSERT_EQ(pairs.size(), 300u);
      OracleFunction f(ty2021(), ScenarioId(s));
      for (const auto& [x, xp] : pairs) {
        EXPECT_NO_THROW(check_pairwise(rel, x, xp, f)) << rel.name;
      }
    }
  }
}

TEST(Pairwise, FlatRateSatisfiesMonotonicity) {
  auto flat = flat_twelve(ty2021());
  const auto records = run_suite(*flat, {}, {relation("income_monotonicity")}, 1000, ty2021(), 5, {});
  EXPECT_TRUE(records.empty());
}

TEST(RelationsDocument, StrictParsing) {
  auto path_of = [](const std::string& doc) {
    try {
      parse_relations(doc);
    } catch (const SchemaViolation& e) {
      return e.path();
    }
    return std::string("<accepted>");
  };
  EXPECT_EQ(path_of(R"({"relations":[{"name":"r","scenarios":[1],"labels":["income"],
      "premise":[{"label":"income","compare":"ge"}],"expectation":"output_more"}]})"),
            "relations[0].expectation");
  EXPECT_EQ(path_of(R"({"relations":[{"name":"r","scenarios":[9],"labels":["income"],
      "premise":[{"label":"income","compare":"ge"}],"expectation":"output_geq"}]})"),
            "relations[0].scenarios[0]");
  EXPECT_EQ(path_of(R"({"relations":[{"name":"r","scenarios":[1],"labels":["salary"],
      "premise":[{"label":"income","compare":"ge"}],"expectation":"output_geq"}]})"),
            "relations[0].labels[0]");
}

TEST(Phi8, WithinBracketQuotientsAreEqual) {
  const auto& rules = ty2021_no_deduction();
  OracleFunction f(rules, ScenarioId(1));
  auto flat = flat_twelve(rules);
  Rng rng(mix_seed(2, "phi8"));
  const auto& rows = rules.tax_brackets[FilingStatus::Single];
  for (std::size_t row = 0; row < rows.size(); ++row) {
    const auto iv = bracket_interval(rules, FilingStatus::Single, row);
    const std::int64_t lo = iv.lower.units() / 100 + 1;
    const std::int64_t hi = std::min<std::int64_t>(iv.upper.units() / 100, lo + 500000);
    for (int i = 0; i < 20; ++i) {
      const std::int64_t x = uniform_int(rng, lo, hi - 2);
      const std::int64_t y1 = uniform_int(rng, x + 1, hi - 1);
      const std::int64_t y2 = uniform_int(rng, y1 + 1, hi);
      const Phi8Quad q{single(dollars(x)), single(dollars(x)), single(dollars(y1)), single(dollars(y2))};
      const auto r = check_within_bracket(q, f, iv, 1e-9);
      EXPECT_EQ(r.verdict, Verdict::Pass) << r.reason;
      EXPECT_NEAR(r.q1, r.q2, 1e-9);
      EXPECT_EQ(check_phi8(q, f, iv, 0.12).verdict, Verdict::Pass);
      const bool twelve = iv.rate == Fraction::parse("0.12");
      EXPECT_EQ(check_within_bracket(q, *flat, iv, 0.005).verdict, twelve ? Verdict::Pass : Verdict::Fail);
    }
  }
}

TEST(Phi8, Preconditions) {
  const auto& rules = ty2021_no_deduction();
  OracleFunction f(rules, ScenarioId(1));
  const auto iv = bracket_interval(rules, FilingStatus::Single, 1);
  const Phi8Quad unequal{single(dollars(12000)), single(dollars(13000)), single(dollars(20000)),
                         single(dollars(30000))};
  EXPECT_THROW(check_phi8(unequal, f, iv, 0.12), PreconditionViolated);
  const Phi8Quad outside{single(dollars(12000)), single(dollars(12000)), single(dollars(20000)),
                         single(dollars(50000))};
  EXPECT_THROW(check_phi8(outside, f, iv, 0.12), PreconditionViolated);
  auto married = single(dollars(20000));
  married.sts = FilingStatus::MarriedFilingJointly;
  const Phi8Quad mixed{single(dollars(12000)), single(dollars(12000)), married, single(dollars(30000))};
  EXPECT_THROW(check_phi8(mixed, f, iv, 0.12), PreconditionViolated);
  EXPECT_THROW(bracket_interval(rules, FilingStatus::Single, 7), PreconditionViolated);
}

TEST(Tuples, ThresholdJumpStraddlesBracketKnee) {
  const auto tuples = generate_tuples(ty2021_no_deduction(), "income", HmtCategory::ThresholdJump, ScenarioId(1),
                                      64, 1);
  ASSERT_FALSE(tuples.empty());
  bool straddles = false;
  for (const auto& t : tuples) {
    EXPECT_LT(t.values[0], t.values[1]);
    EXPECT_LT(t.values[1], t.values[2]);
    if (t.base_profile.sts == FilingStatus::Single && t.values[1] == dollars(40525)) straddles = true;
  }
  EXPECT_TRUE(straddles);
}

TEST(Tuples, EveryPlannedTupleIsSoundOnTheOracle) {
  const ToleranceConfig tol;
  for (const auto scenario : all_scenarios()) {
    OracleFunction f(ty2021(), scenario);
    const auto tuples = default_tuples(ty2021(), scenario, 3, tol, 16);
    EXPECT_FALSE(tuples.empty());
    for (const auto& t : tuples) {
      const auto d = check_hmt(t, f, tol);
      EXPECT_EQ(d.verification_result, Verdict::Pass) << d.verification_reason;
    }
  }
}

TEST(Tuples, DeterministicAndValidated) {
  const auto a = generate_tuples(ty2021(), "salt_paid", HmtCategory::Saturation, ScenarioId(5), 16, 9);
  const auto b = generate_tuples(ty2021(), "salt_paid", HmtCategory::Saturation, ScenarioId(5), 16, 9);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values, b[i].values);
  for (const auto& t : a) EXPECT_GE(t.values[0], dollars(10000));  // beyond the cap
  EXPECT_THROW(generate_tuples(ty2021(), "income", HmtCategory::ThresholdJump, ScenarioId(1), 3, 1),
               PreconditionViolated);
  EXPECT_THROW(generate_tuples(ty2021(), "blind", HmtCategory::ThresholdJump, ScenarioId(1), 8, 1), NoThresholds);
}

TEST(Suggestions, ParsesAndRejects) {
  TupleContext ctx{ScenarioId(1), "income", single(Money{})};
  const auto parsed = parse_suggested_tuples(R"({"suggested_tuples": [
      {"input_tuple": [35000, 40525, 48000], "reason": "crosses 40525"},
      {"input_tuple": [40525, 35000, 48000], "reason": "unordered"},
      {"input_tuple": [50000, 60000, 70000], "reason": "no threshold"},
      {"input_tuple": [1, 2], "reason": "short"}]})",
                                             ty2021_no_deduction(), HmtCategory::ThresholdJump, ctx);
  ASSERT_EQ(parsed.accepted.size(), 1u);
  EXPECT_EQ(parsed.accepted[0].values[1], dollars(40525));
  EXPECT_EQ(parsed.accepted[0].rationale, "crosses 40525");
  ASSERT_EQ(parsed.rejected.size(), 3u);
  EXPECT_EQ(parsed.rejected[0].index, 1u);
  EXPECT_EQ(parsed.rejected[2].index, 3u);
  EXPECT_THROW(parse_suggested_tuples("not json", ty2021(), HmtCategory::ThresholdJump, ctx), MalformedDocument);
}

TEST(Prompt, ExampleResponseIsAccepted) {
  const auto prompt = render_suggestion_prompt(HmtCategory::ProportionalIncrease, ty2021(), "qualified_expenses");
  for (const char* section : {"Goal", "Key Requirements", "Example Response Format", "2000", "4000"}) {
    EXPECT_NE(prompt.find(section), std::string::npos) << section;
  }
  const auto start = prompt.rfind('{', prompt.find("\"suggested_tuples\""));
  ASSERT_NE(start, std::string::npos);
  std::string text = prompt.substr(start);
  text = text.substr(0, text.rfind('}') + 1);
  TupleContext ctx{ScenarioId(4), "qualified_expenses", base_profile(ScenarioId(4), FilingStatus::Single, ty2021())};
  const auto parsed = parse_suggested_tuples(text, ty2021(), HmtCategory::ProportionalIncrease, ctx);
  EXPECT_FALSE(parsed.accepted.empty());
  EXPECT_TRUE(parsed.rejected.empty());
  EXPECT_EQ(prompt, render_suggestion_prompt(HmtCategory::ProportionalIncrease, ty2021(), "qualified_expenses"));
}

TEST(Suite, OracleIsCleanAndOutputIsStable) {
  const ToleranceConfig tol;
  for (const auto scenario : all_scenarios()) {
    OracleFunction f(ty2021(), scenario);
    const auto tuples = default_tuples(ty2021(), scenario, 4, tol);
    EXPECT_TRUE(run_suite(f, tuples, fixture_relations(), 200, ty2021(), 4, tol).empty());
  }
  auto flat = flat_twelve(ty2021());
  const auto tuples = default_tuples(ty2021(), ScenarioId(1), 4, tol);
  const auto serial = run_suite(*flat, tuples, fixture_relations(), 200, ty2021(), 4, tol, Execution::Serial);
  const auto parallel = run_suite(*flat, tuples, fixture_relations(), 200, ty2021(), 4, tol, Execution::Parallel);
  EXPECT_FALSE(serial.empty());
  EXPECT_EQ(discrepancy_report(serial), discrepancy_report(parallel));
}

TEST(Tolerances, MustBePositive) {
  ToleranceConfig tol;
  EXPECT_NO_THROW(tol.validate());
  tol.rate_eps = 0;
  EXPECT_THROW(tol.validate(), InputError);
  tol = {};
  tol.min_gap = Money{};
  EXPECT_THROW(tol.validate(), InputError);
}
