// Taxpayer profile: the input vector every tax function reads, plus a
// by-name field registry used by relations and tuple generators.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "taxmorph/decimal.hpp"
#include "taxmorph/ruleset.hpp"

namespace taxmorph {

class JsonWriter;

enum class Enrollment { AtLeastHalfTime, LessThanHalfTime };

std::string_view to_string(Enrollment e);
std::optional<Enrollment> parse_enrollment(std::string_view text);

/// A raw 1099-R code and its class from the rule set's normalization table.
struct DistributionCode {
  std::string raw = "7";
  CodeClass normalized = CodeClass::Normal;
  bool operator==(const DistributionCode&) const = default;
};

/// Maps a raw code ("1" or 1 both arrive as "1") through the rule set.
/// Throws UnknownDistributionCode for unmapped codes.
DistributionCode normalize_distribution_code(std::string_view raw, const TaxRuleSet& rules);

struct TaxpayerProfile {
  Money income;
  FilingStatus sts = FilingStatus::Single;
  int age = 0;
  int spouse_age = 0;
  bool blind = false;
  bool spouse_blind = false;

  int num_qualifying_children = 0;
  int num_other_dependents = 0;

  Money qualified_expenses;
  Money scholarships;
  Enrollment enrollment_status = Enrollment::AtLeastHalfTime;
  int year_in_school = 1;

  Money medical_expenses;
  Money salt_paid;
  Money mortgage_interest;
  Money charitable_contributions;
  Money casualty_loss;
  bool use_itemized = false;

  Money gross_distribution;
  DistributionCode distribution_code;
  Money cost_basis;
  int annuity_start_age = 0;
  int annuity_payments_this_year = 0;
  Money prior_basis_recovered;

  bool operator==(const TaxpayerProfile&) const = default;
};

// ---------------------------------------------------------------------------
// Field registry

enum class FieldKind { Money, Count, Boolean, Status, Enrollment, Code };

/// A single field value. Counts and whole years use Count.
using FieldValue = std::variant<Money, std::int64_t, bool, std::string>;

struct FieldInfo {
  std::string_view name;
  FieldKind kind;
};

const std::vector<FieldInfo>& profile_fields();
const FieldInfo* find_field(std::string_view name);

FieldValue get_field(const TaxpayerProfile& p, std::string_view name);
/// Throws std::invalid_argument on a kind mismatch. Code values are stored
/// raw; callers that need a normalized class go through the rule set.
void set_field(TaxpayerProfile& p, std::string_view name, const FieldValue& value, const TaxRuleSet* rules = nullptr);

/// Numeric view of money/count fields, used for difference quotients.
std::optional<Money> numeric_field(const TaxpayerProfile& p, std::string_view name);
void set_numeric_field(TaxpayerProfile& p, std::string_view name, Money value);

std::string format_field(const FieldValue& v);

/// Names of fields on which the two profiles differ.
std::vector<std::string> differing_fields(const TaxpayerProfile& a, const TaxpayerProfile& b);

// ---------------------------------------------------------------------------
// Document format: flat object, omitted fields default to 0 / false.

TaxpayerProfile parse_profile(std::string_view document, const TaxRuleSet& rules);
TaxpayerProfile profile_from_json(const nlohmann::json& node, const TaxRuleSet& rules, const std::string& path = "");
void write_profile(JsonWriter& w, const TaxpayerProfile& p);
std::string serialize_profile(const TaxpayerProfile& p);

}  // namespace taxmorph
