// Statutory parameter document: parsing, validation and canonical output.
#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taxmorph/decimal.hpp"

namespace taxmorph {

enum class FilingStatus { Single, MarriedFilingJointly, MarriedFilingSeparately, HeadOfHousehold };

inline constexpr std::array<FilingStatus, 4> kAllStatuses = {
    FilingStatus::Single, FilingStatus::MarriedFilingJointly, FilingStatus::MarriedFilingSeparately,
    FilingStatus::HeadOfHousehold};

std::string_view to_string(FilingStatus status);
std::optional<FilingStatus> parse_filing_status(std::string_view text);

inline bool is_joint(FilingStatus status) { return status == FilingStatus::MarriedFilingJointly; }

/// One value per filing status, indexed by the enum.
template <class T>
struct PerStatus {
  std::array<T, 4> values{};

  T& operator[](FilingStatus s) { return values[static_cast<std::size_t>(s)]; }
  const T& operator[](FilingStatus s) const { return values[static_cast<std::size_t>(s)]; }
  bool operator==(const PerStatus&) const = default;
};

struct BracketRow {
  Money threshold_amount;  // inclusive upper bound
  Fraction rate_decimal;
  bool operator==(const BracketRow&) const = default;
};

struct StandardDeduction {
  Money base_amount;
  Money additional_elderly;
  Money additional_blind;
  bool operator==(const StandardDeduction&) const = default;
};

struct EitcTier {
  Fraction phase_in_rate;
  Money max_credit;
  Money plateau_start;
  PerStatus<Money> phase_out_start;
  Fraction phase_out_rate;
  bool operator==(const EitcTier&) const = default;
};

struct CtcRules {
  Money credit_per_child;
  Money odc_amount;
  PerStatus<Money> phase_out_threshold;
  Money reduction_per_step;
  Money step_size;
  bool operator==(const CtcRules&) const = default;
};

struct AotcRules {
  Money tier1_limit;
  Fraction tier1_rate;
  Money tier2_limit;
  Fraction tier2_rate;
  Money credit_cap;
  bool operator==(const AotcRules&) const = default;
};

struct ItemizedRules {
  Fraction medical_agi_floor_rate;
  Money salt_cap;
  bool operator==(const ItemizedRules&) const = default;
};

enum class CodeClass { EarlyNoException, EarlyWithException, Normal, Other };

std::string_view to_string(CodeClass c);
std::optional<CodeClass> parse_code_class(std::string_view text);

struct SimplifiedMethodRow {
  int age_upper_bound = 0;
  int anticipated_payments = 0;
  bool operator==(const SimplifiedMethodRow&) const = default;
};

struct RetirementRules {
  Fraction penalty_rate;
  Years penalty_age_threshold;
  std::vector<std::string> exception_codes;  // sorted, unique
  std::vector<SimplifiedMethodRow> simplified_method_table;
  std::map<std::string, CodeClass> distribution_codes;
  bool operator==(const RetirementRules&) const = default;
};

/// The full parameter set. Sections other than brackets and standard
/// deductions are optional in the document; accessors throw
/// MissingRuleSection when a computation needs an absent one.
struct TaxRuleSet {
  int tax_year = 0;
  PerStatus<std::vector<BracketRow>> tax_brackets;
  PerStatus<StandardDeduction> standard_deductions;
  std::optional<std::vector<EitcTier>> eitc_schedule;  // index = child count, last entry covers "or more"
  std::optional<CtcRules> ctc_rules;
  std::optional<AotcRules> aotc_rules;
  std::optional<ItemizedRules> itemized_rules;
  std::optional<RetirementRules> retirement_rules;

  const std::vector<EitcTier>& eitc() const;
  const CtcRules& ctc() const;
  const AotcRules& aotc() const;
  const ItemizedRules& itemized() const;
  const RetirementRules& retirement() const;

  bool operator==(const TaxRuleSet&) const = default;
};

/// Parses and validates a rule document. Unknown fields are rejected.
/// Non-fatal findings (an AOTC cap that disagrees with its tiers) are
/// appended to `warnings` when given.
TaxRuleSet parse_ruleset(std::string_view document, std::vector<std::string>* warnings = nullptr);

/// Canonical text: fixed key order, minimal number text, two-space indent.
/// Throws SchemaViolation if `rules` breaks an invariant, so an invalid set
/// is never emitted.
std::string serialize_ruleset(const TaxRuleSet& rules);

/// Runs every invariant check on an in-memory rule set.
void validate_ruleset(const TaxRuleSet& rules, std::vector<std::string>* warnings = nullptr);

TaxRuleSet load_ruleset_file(const std::string& path);

/// Bracket thresholds where the marginal rate actually changes.
std::vector<Money> bracket_knees(const TaxRuleSet& rules, FilingStatus status);

// ---------------------------------------------------------------------------
// Function-description documents

struct Constraint {
  enum class Kind { Comparison, Membership };
  Kind kind = Kind::Comparison;
  std::string text;  // verbatim
  std::string subject;
  std::string op;  // >=, <=, >, <, ==, != or "in"
  std::string operand;
  std::vector<std::string> members;
  bool operator==(const Constraint&) const = default;
};

struct FunctionInput {
  std::string type;
  std::vector<Constraint> constraints;
  bool operator==(const FunctionInput&) const = default;
};

struct FunctionOutput {
  std::string type;
  int rounding = 2;
  bool operator==(const FunctionOutput&) const = default;
};

struct CalculationStep {
  std::string step;
  std::string formula;
  bool operator==(const CalculationStep&) const = default;
};

struct FunctionSpec {
  std::string function_name;
  std::map<std::string, FunctionInput> inputs;
  std::map<std::string, FunctionOutput> outputs;
  std::vector<CalculationStep> calculations;
  bool operator==(const FunctionSpec&) const = default;
};

FunctionSpec validate_function_spec(std::string_view document);

}  // namespace taxmorph
