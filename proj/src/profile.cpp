#include "taxmorph/profile.hpp"

#include <algorithm>

#include "taxmorph/errors.hpp"
#include "taxmorph/json_writer.hpp"

namespace taxmorph {

using nlohmann::json;

namespace {

struct FieldAccess {
  FieldInfo info;
  FieldValue (*get)(const TaxpayerProfile&);
  void (*set)(TaxpayerProfile&, const FieldValue&, const TaxRuleSet*);
};

template <class T>
const T& as(const FieldValue& v, std::string_view name) {
  if (const auto* p = std::get_if<T>(&v)) return *p;
  throw std::invalid_argument("wrong value kind for field '" + std::string(name) + "'");
}

#define TAXMORPH_MONEY_FIELD(field)                                                                          \
  FieldAccess {                                                                                              \
    {#field, FieldKind::Money}, [](const TaxpayerProfile& p) -> FieldValue { return p.field; },              \
        [](TaxpayerProfile& p, const FieldValue& v, const TaxRuleSet*) { p.field = as<Money>(v, #field); } \
  }
#define TAXMORPH_COUNT_FIELD(field)                                                                         \
  FieldAccess {                                                                                             \
    {#field, FieldKind::Count},                                                                             \
        [](const TaxpayerProfile& p) -> FieldValue { return static_cast<std::int64_t>(p.field); },          \
        [](TaxpayerProfile& p, const FieldValue& v, const TaxRuleSet*) {                                    \
          p.field = static_cast<int>(as<std::int64_t>(v, #field));                                         \
        }                                                                                                   \
  }
#define TAXMORPH_BOOL_FIELD(field)                                                                        \
  FieldAccess {                                                                                           \
    {#field, FieldKind::Boolean}, [](const TaxpayerProfile& p) -> FieldValue { return p.field; },         \
        [](TaxpayerProfile& p, const FieldValue& v, const TaxRuleSet*) { p.field = as<bool>(v, #field); } \
  }

const std::vector<FieldAccess>& registry() {
  static const std::vector<FieldAccess> fields = {
      TAXMORPH_MONEY_FIELD(income),
      FieldAccess{{"sts", FieldKind::Status},
                  [](const TaxpayerProfile& p) -> FieldValue { return std::string(to_string(p.sts)); },
                  [](TaxpayerProfile& p, const FieldValue& v, const TaxRuleSet*) {
                    auto s = parse_filing_status(as<std::string>(v, "sts"));
                    if (!s) throw std::invalid_argument("unknown filing status '" + as<std::string>(v, "sts") + "'");
                    p.sts = *s;
                  }},
      TAXMORPH_COUNT_FIELD(age),
      TAXMORPH_COUNT_FIELD(spouse_age),
      TAXMORPH_BOOL_FIELD(blind),
      TAXMORPH_BOOL_FIELD(spouse_blind),
      TAXMORPH_COUNT_FIELD(num_qualifying_children),
      TAXMORPH_COUNT_FIELD(num_other_dependents),
      TAXMORPH_MONEY_FIELD(qualified_expenses),
      TAXMORPH_MONEY_FIELD(scholarships),
      FieldAccess{{"enrollment_status", FieldKind::Enrollment},
                  [](const TaxpayerProfile& p) -> FieldValue { return std::string(to_string(p.enrollment_status)); },
                  [](TaxpayerProfile& p, const FieldValue& v, const TaxRuleSet*) {
                    auto e = parse_enrollment(as<std::string>(v, "enrollment_status"));
                    if (!e) throw std::invalid_argument("unknown enrollment status");
                    p.enrollment_status = *e;
                  }},
      TAXMORPH_COUNT_FIELD(year_in_school),
      TAXMORPH_MONEY_FIELD(medical_expenses),
      TAXMORPH_MONEY_FIELD(salt_paid),
      TAXMORPH_MONEY_FIELD(mortgage_interest),
      TAXMORPH_MONEY_FIELD(charitable_contributions),
      TAXMORPH_MONEY_FIELD(casualty_loss),
      TAXMORPH_BOOL_FIELD(use_itemized),
      TAXMORPH_MONEY_FIELD(gross_distribution),
      FieldAccess{{"distribution_code", FieldKind::Code},
                  [](const TaxpayerProfile& p) -> FieldValue { return p.distribution_code.raw; },
                  [](TaxpayerProfile& p, const FieldValue& v, const TaxRuleSet* rules) {
                    const auto& raw = as<std::string>(v, "distribution_code");
                    if (rules) {
                      p.distribution_code = normalize_distribution_code(raw, *rules);
                    } else {
                      p.distribution_code.raw = raw;
                    }
                  }},
      TAXMORPH_MONEY_FIELD(cost_basis),
      TAXMORPH_COUNT_FIELD(annuity_start_age),
      TAXMORPH_COUNT_FIELD(annuity_payments_this_year),
      TAXMORPH_MONEY_FIELD(prior_basis_recovered),
  };
  return fields;
}

#undef TAXMORPH_MONEY_FIELD
#undef TAXMORPH_COUNT_FIELD
#undef TAXMORPH_BOOL_FIELD

const FieldAccess& access(std::string_view name) {
  for (const auto& f : registry()) {
    if (f.info.name == name) return f;
  }
  throw std::invalid_argument("unknown profile field '" + std::string(name) + "'");
}

std::string field_path(const std::string& base, std::string_view name) {
  return base.empty() ? std::string(name) : base + "." + std::string(name);
}

FieldValue read_field(const json& node, const FieldInfo& info, const std::string& path) {
  switch (info.kind) {
    case FieldKind::Money: {
      if (!node.is_number()) throw SchemaViolation(path, "expected a number (money)");
      Money m;
      try {
        m = node.is_number_integer() ? Money::whole(node.get<std::int64_t>()) : Money::from_double(node.get<double>());
      } catch (const std::invalid_argument&) {
        throw SchemaViolation(path, "money must have at most 2 fractional digits");
      }
      if (m < Money{}) throw SchemaViolation(path, "money must be >= 0");
      return m;
    }
    case FieldKind::Count: {
      if (!node.is_number_integer()) throw SchemaViolation(path, "expected an integer");
      const auto v = node.get<std::int64_t>();
      if (v < 0) throw SchemaViolation(path, "must be >= 0");
      if (v > 100000) throw SchemaViolation(path, "value out of range");
      return v;
    }
    case FieldKind::Boolean:
      if (!node.is_boolean()) throw SchemaViolation(path, "expected true or false");
      return node.get<bool>();
    case FieldKind::Status:
      if (!node.is_string() || !parse_filing_status(node.get<std::string>())) {
        throw SchemaViolation(path, "expected one of single, married_filing_jointly, married_filing_separately, "
                                    "head_of_household");
      }
      return node.get<std::string>();
    case FieldKind::Enrollment:
      if (!node.is_string() || !parse_enrollment(node.get<std::string>())) {
        throw SchemaViolation(path, "expected at_least_half_time or less_than_half_time");
      }
      return node.get<std::string>();
    case FieldKind::Code:
      if (node.is_string()) return node.get<std::string>();
      if (node.is_number_integer()) return std::to_string(node.get<std::int64_t>());
      throw SchemaViolation(path, "expected a distribution code (string or integer)");
  }
  throw SchemaViolation(path, "unsupported field");
}

}  // namespace

std::string_view to_string(Enrollment e) {
  return e == Enrollment::AtLeastHalfTime ? "at_least_half_time" : "less_than_half_time";
}

std::optional<Enrollment> parse_enrollment(std::string_view text) {
  if (text == "at_least_half_time") return Enrollment::AtLeastHalfTime;
  if (text == "less_than_half_time") return Enrollment::LessThanHalfTime;
  return std::nullopt;
}

DistributionCode normalize_distribution_code(std::string_view raw, const TaxRuleSet& rules) {
  const auto& table = rules.retirement().distribution_codes;
  const auto it = table.find(std::string(raw));
  if (it == table.end()) throw UnknownDistributionCode("distribution code '" + std::string(raw) + "' is not mapped");
  return {std::string(raw), it->second};
}

const std::vector<FieldInfo>& profile_fields() {
  static const std::vector<FieldInfo> infos = [] {
    std::vector<FieldInfo> out;
    for (const auto& f : registry()) out.push_back(f.info);
    return out;
  }();
  return infos;
}

const FieldInfo* find_field(std::string_view name) {
  for (const auto& f : registry()) {
    if (f.info.name == name) return &f.info;
  }
  return nullptr;
}

FieldValue get_field(const TaxpayerProfile& p, std::string_view name) { return access(name).get(p); }

void set_field(TaxpayerProfile& p, std::string_view name, const FieldValue& value, const TaxRuleSet* rules) {
  access(name).set(p, value, rules);
}

std::optional<Money> numeric_field(const TaxpayerProfile& p, std::string_view name) {
  const auto v = get_field(p, name);
  if (const auto* m = std::get_if<Money>(&v)) return *m;
  if (const auto* c = std::get_if<std::int64_t>(&v)) return Money::whole(*c);
  return std::nullopt;
}

void set_numeric_field(TaxpayerProfile& p, std::string_view name, Money value) {
  const auto& f = access(name);
  if (f.info.kind == FieldKind::Money) {
    f.set(p, value, nullptr);
  } else if (f.info.kind == FieldKind::Count) {
    f.set(p, static_cast<std::int64_t>(value.units() / Money::kScale), nullptr);
  } else {
    throw std::invalid_argument("field '" + std::string(name) + "' is not numeric");
  }
}

std::string format_field(const FieldValue& v) {
  if (const auto* m = std::get_if<Money>(&v)) return m->str();
  if (const auto* c = std::get_if<std::int64_t>(&v)) return std::to_string(*c);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return std::get<std::string>(v);
}

std::vector<std::string> differing_fields(const TaxpayerProfile& a, const TaxpayerProfile& b) {
  std::vector<std::string> out;
  for (const auto& f : registry()) {
    if (f.get(a) != f.get(b)) out.emplace_back(f.info.name);
  }
  return out;
}

TaxpayerProfile profile_from_json(const json& node, const TaxRuleSet& rules, const std::string& path) {
  if (!node.is_object()) throw SchemaViolation(path.empty() ? "(profile)" : path, "expected an object");
  for (const auto& [key, _] : node.items()) {
    if (!find_field(key)) throw SchemaViolation(field_path(path, key), "unknown profile field");
  }
  for (const char* required : {"income", "sts"}) {
    if (!node.contains(required)) throw SchemaViolation(field_path(path, required), "required field is missing");
  }
  TaxpayerProfile p;
  for (const auto& f : registry()) {
    const std::string key(f.info.name);
    if (!node.contains(key)) continue;
    const auto fpath = field_path(path, key);
    const auto value = read_field(node.at(key), f.info, fpath);
    try {
      f.set(p, value, &rules);
    } catch (const UnknownDistributionCode& e) {
      throw SchemaViolation(fpath, e.what());
    } catch (const MissingRuleSection& e) {
      throw SchemaViolation(fpath, e.what());
    }
  }
  // The default code must still be known to the rule set when one is used.
  if (!node.contains("distribution_code") && rules.retirement_rules &&
      !rules.retirement_rules->distribution_codes.empty()) {
    const auto& table = rules.retirement_rules->distribution_codes;
    if (auto it = table.find(p.distribution_code.raw); it != table.end()) p.distribution_code.normalized = it->second;
  }
  return p;
}

TaxpayerProfile parse_profile(std::string_view document, const TaxRuleSet& rules) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("profile is not valid JSON: ") + e.what());
  }
  return profile_from_json(root, rules, "");
}

void write_profile(JsonWriter& w, const TaxpayerProfile& p) {
  w.begin_object();
  for (const auto& f : registry()) {
    w.key(f.info.name);
    const auto v = f.get(p);
    if (const auto* m = std::get_if<Money>(&v)) {
      w.raw_number(m->str());
    } else if (const auto* c = std::get_if<std::int64_t>(&v)) {
      w.value(*c);
    } else if (const auto* b = std::get_if<bool>(&v)) {
      w.value(*b);
    } else {
      w.value(std::get<std::string>(v));
    }
  }
  w.end_object();
}

std::string serialize_profile(const TaxpayerProfile& p) {
  JsonWriter w;
  write_profile(w, p);
  return w.take();
}

}  // namespace taxmorph
