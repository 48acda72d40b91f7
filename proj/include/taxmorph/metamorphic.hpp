// Pairwise and higher-order metamorphic relations over a TaxFunction, tuple
// generation around rule thresholds, and the discrepancy report.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taxmorph/kernels.hpp"
#include "taxmorph/tax_function.hpp"

namespace taxmorph {

class JsonWriter;

struct ToleranceConfig {
  double rate_eps = 0.005;
  Money money_eps = cents(1);
  double jump_margin = 0.005;
  Money min_gap = dollars(1000);
  double phi8_bound = 0.12;

  /// Throws InputError unless every field is positive.
  void validate() const;
};

enum class Verdict { Pass, Fail };
std::string_view to_string(Verdict v);

enum class HmtCategory { ProportionalIncrease, ThresholdJump, Saturation };
std::string_view to_string(HmtCategory c);
/// Accepts "ThresholdJump" as well as "threshold_jump" / "threshold-jump".
std::optional<HmtCategory> parse_category(std::string_view text);

/// One relation-violation record; field names follow the report format.
struct Discrepancy {
  std::string input;
  std::string test_category;
  FilingStatus filing_status = FilingStatus::Single;
  // JSON literal text of the three label values (e.g. 1000, 40525.5, true).
  std::string base_value;
  std::string new_value_1;
  std::string new_value_2;
  Verdict verification_result = Verdict::Pass;
  std::string verification_reason;
  std::optional<Money> initial_tax;
  std::array<std::optional<Money>, 3> modified_tax_tuple;
  double rate_change_base = 0;
  double rate_change_followup = 0;

  // Numeric views of the values, used only for ordering.
  std::array<Money, 3> order_key;
};

void sort_discrepancies(std::vector<Discrepancy>& records);
void write_discrepancy(JsonWriter& w, const Discrepancy& d);
/// {"discrepancies":[...]} with a trailing newline.
std::string discrepancy_report(const std::vector<Discrepancy>& records);

// ---------------------------------------------------------------------------
// Pairwise relations

struct EquivalenceSpec {
  std::vector<std::string> labels;
};

enum class Compare { Gt, Ge, Lt, Le, Eq, TrueFalse };

/// Orders x against x' on one label.
struct PremiseClause {
  std::string label;
  Compare compare = Compare::Ge;
};

/// Required order of F(x) against F(x').
enum class Expectation { OutputLeq, OutputGeq, OutputLt, OutputGt, OutputEq };

struct PairwiseRelation {
  std::string name;
  std::vector<int> scenarios;
  EquivalenceSpec equiv;
  std::vector<PremiseClause> premise;
  Expectation expectation = Expectation::OutputGeq;

  bool applies_to(ScenarioId s) const;
};

std::vector<PairwiseRelation> parse_relations(std::string_view document);
std::vector<PairwiseRelation> load_relations_file(const std::string& path);

struct PairCheck {
  Verdict verdict = Verdict::Pass;
  Money fx;
  Money fx_prime;
  std::optional<Discrepancy> discrepancy;  // set on FAIL
};

/// Throws NotEquivalent if the profiles differ outside rel.equiv.labels and
/// PreconditionViolated if the premise does not hold.
PairCheck check_pairwise(const PairwiseRelation& rel, const TaxpayerProfile& x, const TaxpayerProfile& x_prime,
                         TaxFunction& f, const ToleranceConfig& tol = {});

// ---------------------------------------------------------------------------
// Higher-order relations

struct TestTuple {
  TaxpayerProfile base_profile;
  std::string target_label;
  std::array<Money, 3> values;  // x_b, x_1, x_2
  HmtCategory category = HmtCategory::ProportionalIncrease;
  std::string rationale;

  /// The base profile with the target label set to values[i].
  TaxpayerProfile at(std::size_t i) const;
};

struct RatePair {
  double r1 = 0;
  double r2 = 0;
};

struct RateMeasurement {
  RatePair rates;
  std::array<Money, 3> outputs;
};

double difference_quotient(Money f_a, Money f_b, Money a, Money b);
RateMeasurement rates(TaxFunction& f, const TestTuple& tuple);

/// Full record for one tuple; verification_result tells PASS from FAIL.
Discrepancy check_hmt(const TestTuple& tuple, TaxFunction& f, const ToleranceConfig& tol);
/// Same verdict from precomputed evaluations of (x_b, x_1, x_2).
Discrepancy judge_hmt(const TestTuple& tuple, const std::array<EvalOutcome, 3>& outcomes, const ToleranceConfig& tol);

// ---------------------------------------------------------------------------
// Rate-consistency relation over four profiles

/// Taxable-income interval (lower, upper] of one bracket row.
struct BracketInterval {
  Money lower;
  Money upper;
  Fraction rate;
};
BracketInterval bracket_interval(const TaxRuleSet& rules, FilingStatus status, std::size_t row);

struct Phi8Quad {
  TaxpayerProfile x1, x2, y1, y2;
};

struct Phi8Result {
  Verdict verdict = Verdict::Pass;
  double q1 = 0;  // (F(x1) - F(y1)) / (x1.income - y1.income)
  double q2 = 0;
  std::string reason;
};

/// PASS iff |q1 - q2| < rate_bound.
Phi8Result check_phi8(const Phi8Quad& quad, TaxFunction& f, const BracketInterval& interval, double rate_bound);
/// PASS iff both quotients are within rate_eps of the bracket's rate.
Phi8Result check_within_bracket(const Phi8Quad& quad, TaxFunction& f, const BracketInterval& interval,
                                double rate_eps);

// ---------------------------------------------------------------------------
// Thresholds and tuple generation

/// A point in a label's domain where the liability changes slope.
struct Knee {
  Money at;
  std::string what;
};

/// Knees of the liability as a function of `label`, all other fields taken
/// from `base`. Includes the label's own rule thresholds and bracket
/// thresholds mapped through the deduction.
std::vector<Knee> label_knees(const TaxRuleSet& rules, ScenarioId scenario, std::string_view label,
                              const TaxpayerProfile& base);
Money label_domain_max(std::string_view label, const std::vector<Knee>& knees);

/// Scenario whose computation a label is most naturally tested in.
ScenarioId default_scenario_for(std::string_view label);

/// Throws NoThresholds when the label has no usable boundary for the
/// category, PreconditionViolated when count < 4.
std::vector<TestTuple> generate_tuples(const TaxRuleSet& rules, std::string_view label, HmtCategory category,
                                       ScenarioId scenario, std::size_t count, std::uint64_t seed,
                                       const ToleranceConfig& tol = {});

/// Placement and soundness check shared by the generator and the suggestion
/// parser. Returns the rejection reason, or nullopt when the tuple is valid.
std::optional<std::string> validate_tuple(const TestTuple& tuple, const TaxRuleSet& rules, ScenarioId scenario,
                                          const ToleranceConfig& tol);

struct TupleContext {
  ScenarioId scenario{1};
  std::string label = "income";
  TaxpayerProfile base;
};

struct RejectedSuggestion {
  std::size_t index = 0;
  std::string reason;
};

struct SuggestionParse {
  std::vector<TestTuple> accepted;
  std::vector<RejectedSuggestion> rejected;
};

/// Reads {"suggested_tuples":[{"input_tuple":[a,b,c],"reason":"..."}]}. An
/// optional "filing_status" per suggestion overrides the context's status.
SuggestionParse parse_suggested_tuples(std::string_view document, const TaxRuleSet& rules, HmtCategory category,
                                       const TupleContext& context, const ToleranceConfig& tol = {});

std::string render_suggestion_prompt(HmtCategory category, const TaxRuleSet& rules, std::string_view label,
                                     std::optional<ScenarioId> scenario = std::nullopt,
                                     const ToleranceConfig& tol = {});

struct HmtPlanEntry {
  std::string label;
  std::vector<HmtCategory> categories;
};

/// Labels and categories exercised per scenario.
const std::vector<HmtPlanEntry>& hmt_plan(ScenarioId scenario);

/// Every tuple of the scenario's plan; entries with no usable boundary are
/// skipped.
std::vector<TestTuple> default_tuples(const TaxRuleSet& rules, ScenarioId scenario, std::uint64_t seed,
                                      const ToleranceConfig& tol, std::size_t per_category = 32);

// ---------------------------------------------------------------------------
// Campaign

/// Pairwise relations on pair_count seeded pairs each, then every tuple.
/// Returns FAIL records only, sorted.
std::vector<Discrepancy> run_suite(TaxFunction& f, const std::vector<TestTuple>& tuples,
                                   const std::vector<PairwiseRelation>& relations, std::size_t pair_count,
                                   const TaxRuleSet& rules, std::uint64_t seed, const ToleranceConfig& tol,
                                   Execution mode = Execution::Parallel);

/// The seeded (x, x') pairs run_suite draws for a relation.
std::vector<std::pair<TaxpayerProfile, TaxpayerProfile>> generate_pairs(const PairwiseRelation& rel,
                                                                        ScenarioId scenario, const TaxRuleSet& rules,
                                                                        std::size_t count, std::uint64_t seed);

}  // namespace taxmorph
