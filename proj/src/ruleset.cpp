#include "taxmorph/ruleset.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/json_writer.hpp"

namespace taxmorph {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kStatusNames = {
    "single", "married_filing_jointly", "married_filing_separately", "head_of_household"};

std::string join_path(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

// ---------------------------------------------------------------------------
// Typed readers with field paths

void require_object(const json& node, const std::string& path) {
  if (!node.is_object()) throw SchemaViolation(path.empty() ? "(document)" : path, "expected an object");
}

void require_array(const json& node, const std::string& path) {
  if (!node.is_array()) throw SchemaViolation(path, "expected an array");
}

void check_keys(const json& node, const std::string& path, std::initializer_list<std::string_view> required,
                std::initializer_list<std::string_view> optional = {}) {
  require_object(node, path);
  for (auto key : required) {
    if (!node.contains(std::string(key))) throw SchemaViolation(join_path(path, key), "required field is missing");
  }
  for (const auto& [key, _] : node.items()) {
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw SchemaViolation(join_path(path, key), "unknown field");
  }
}

template <class D>
D read_decimal(const json& node, const std::string& path, const char* what) {
  if (!node.is_number()) throw SchemaViolation(path, std::string("expected a number (") + what + ")");
  if (node.is_number_integer()) {
    return D::whole(node.is_number_unsigned() ? static_cast<std::int64_t>(node.get<std::uint64_t>())
                                              : node.get<std::int64_t>());
  }
  try {
    return D::from_double(node.get<double>());
  } catch (const std::invalid_argument&) {
    throw SchemaViolation(path, std::string(what) + " must have at most " + std::to_string(D::kDigits) +
                                    " fractional digits");
  }
}

Money read_money(const json& node, const std::string& path) { return read_decimal<Money>(node, path, "money"); }
Fraction read_fraction(const json& node, const std::string& path) {
  return read_decimal<Fraction>(node, path, "fraction");
}
Years read_years(const json& node, const std::string& path) { return read_decimal<Years>(node, path, "years"); }

int read_int(const json& node, const std::string& path) {
  if (!node.is_number_integer()) throw SchemaViolation(path, "expected an integer");
  return node.get<int>();
}

std::string read_code(const json& node, const std::string& path) {
  if (node.is_string()) return node.get<std::string>();
  if (node.is_number_integer()) return std::to_string(node.get<std::int64_t>());
  throw SchemaViolation(path, "expected a code (string or integer)");
}

template <class T, class Fn>
PerStatus<T> read_per_status(const json& node, const std::string& path, Fn&& read_one) {
  require_object(node, path);
  PerStatus<T> out;
  for (const auto& [key, _] : node.items()) {
    if (!parse_filing_status(key)) throw SchemaViolation(join_path(path, key), "unknown filing status");
  }
  for (FilingStatus s : kAllStatuses) {
    const std::string key(to_string(s));
    if (!node.contains(key)) throw SchemaViolation(join_path(path, key), "every filing status must be present");
    out[s] = read_one(node.at(key), join_path(path, key));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Section readers

std::vector<BracketRow> read_brackets(const json& node, const std::string& path) {
  require_array(node, path);
  std::vector<BracketRow> rows;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const auto row_path = index_path(path, i);
    check_keys(node[i], row_path, {"threshold_amount", "rate_decimal"});
    rows.push_back({read_money(node[i].at("threshold_amount"), join_path(row_path, "threshold_amount")),
                    read_fraction(node[i].at("rate_decimal"), join_path(row_path, "rate_decimal"))});
  }
  return rows;
}

StandardDeduction read_standard(const json& node, const std::string& path) {
  check_keys(node, path, {"base_amount", "additional_elderly", "additional_blind"});
  return {read_money(node.at("base_amount"), join_path(path, "base_amount")),
          read_money(node.at("additional_elderly"), join_path(path, "additional_elderly")),
          read_money(node.at("additional_blind"), join_path(path, "additional_blind"))};
}

std::vector<EitcTier> read_eitc(const json& node, const std::string& path) {
  require_object(node, path);
  std::map<int, EitcTier> by_count;
  for (const auto& [key, tier] : node.items()) {
    const auto tier_path = join_path(path, key);
    if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
        key.size() > 2) {
      throw SchemaViolation(tier_path, "child-count keys must be small non-negative integers");
    }
    check_keys(tier, tier_path, {"phase_in_rate", "max_credit", "plateau_start", "phase_out_start", "phase_out_rate"});
    EitcTier t;
    t.phase_in_rate = read_fraction(tier.at("phase_in_rate"), join_path(tier_path, "phase_in_rate"));
    t.max_credit = read_money(tier.at("max_credit"), join_path(tier_path, "max_credit"));
    t.plateau_start = read_money(tier.at("plateau_start"), join_path(tier_path, "plateau_start"));
    t.phase_out_start = read_per_status<Money>(tier.at("phase_out_start"), join_path(tier_path, "phase_out_start"),
                                               read_money);
    t.phase_out_rate = read_fraction(tier.at("phase_out_rate"), join_path(tier_path, "phase_out_rate"));
    by_count[std::stoi(key)] = t;
  }
  std::vector<EitcTier> tiers;
  for (const auto& [count, tier] : by_count) {
    if (count != static_cast<int>(tiers.size())) {
      throw SchemaViolation(join_path(path, std::to_string(tiers.size())), "child counts must be contiguous from 0");
    }
    tiers.push_back(tier);
  }
  return tiers;
}

CtcRules read_ctc(const json& node, const std::string& path) {
  check_keys(node, path, {"credit_per_child", "odc_amount", "phase_out_threshold", "reduction_per_step", "step_size"});
  return {read_money(node.at("credit_per_child"), join_path(path, "credit_per_child")),
          read_money(node.at("odc_amount"), join_path(path, "odc_amount")),
          read_per_status<Money>(node.at("phase_out_threshold"), join_path(path, "phase_out_threshold"), read_money),
          read_money(node.at("reduction_per_step"), join_path(path, "reduction_per_step")),
          read_money(node.at("step_size"), join_path(path, "step_size"))};
}

AotcRules read_aotc(const json& node, const std::string& path) {
  check_keys(node, path, {"tier1_limit", "tier1_rate", "tier2_limit", "tier2_rate", "credit_cap"});
  return {read_money(node.at("tier1_limit"), join_path(path, "tier1_limit")),
          read_fraction(node.at("tier1_rate"), join_path(path, "tier1_rate")),
          read_money(node.at("tier2_limit"), join_path(path, "tier2_limit")),
          read_fraction(node.at("tier2_rate"), join_path(path, "tier2_rate")),
          read_money(node.at("credit_cap"), join_path(path, "credit_cap"))};
}

ItemizedRules read_itemized(const json& node, const std::string& path) {
  check_keys(node, path, {"medical_agi_floor_rate", "salt_cap"});
  return {read_fraction(node.at("medical_agi_floor_rate"), join_path(path, "medical_agi_floor_rate")),
          read_money(node.at("salt_cap"), join_path(path, "salt_cap"))};
}

RetirementRules read_retirement(const json& node, const std::string& path) {
  check_keys(node, path, {"penalty_rate", "penalty_age_threshold", "exception_codes", "simplified_method_table"},
             {"distribution_codes"});
  RetirementRules r;
  r.penalty_rate = read_fraction(node.at("penalty_rate"), join_path(path, "penalty_rate"));
  r.penalty_age_threshold = read_years(node.at("penalty_age_threshold"), join_path(path, "penalty_age_threshold"));

  const auto codes_path = join_path(path, "exception_codes");
  require_array(node.at("exception_codes"), codes_path);
  std::set<std::string> codes;
  for (std::size_t i = 0; i < node.at("exception_codes").size(); ++i) {
    codes.insert(read_code(node.at("exception_codes")[i], index_path(codes_path, i)));
  }
  r.exception_codes.assign(codes.begin(), codes.end());

  const auto table_path = join_path(path, "simplified_method_table");
  require_array(node.at("simplified_method_table"), table_path);
  for (std::size_t i = 0; i < node.at("simplified_method_table").size(); ++i) {
    const auto row_path = index_path(table_path, i);
    const auto& row = node.at("simplified_method_table")[i];
    check_keys(row, row_path, {"age_upper_bound", "anticipated_payments"});
    r.simplified_method_table.push_back({read_int(row.at("age_upper_bound"), join_path(row_path, "age_upper_bound")),
                                         read_int(row.at("anticipated_payments"),
                                                  join_path(row_path, "anticipated_payments"))});
  }

  if (node.contains("distribution_codes")) {
    const auto dc_path = join_path(path, "distribution_codes");
    require_object(node.at("distribution_codes"), dc_path);
    for (const auto& [raw, cls] : node.at("distribution_codes").items()) {
      if (!cls.is_string()) throw SchemaViolation(join_path(dc_path, raw), "expected a code class name");
      auto parsed = parse_code_class(cls.get<std::string>());
      if (!parsed) throw SchemaViolation(join_path(dc_path, raw), "unknown code class '" + cls.get<std::string>() + "'");
      r.distribution_codes[raw] = *parsed;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Invariants

void require_nonnegative(Money m, const std::string& path) {
  if (m < Money{}) throw SchemaViolation(path, "money must be >= 0");
}

void require_unit_interval(Fraction f, const std::string& path) {
  if (f < Fraction{} || f > Fraction::whole(1)) throw SchemaViolation(path, "fraction must lie in [0, 1]");
}

template <class T, class Fn>
void for_each_status(const PerStatus<T>& values, const std::string& path, Fn&& fn) {
  for (FilingStatus s : kAllStatuses) fn(values[s], join_path(path, to_string(s)));
}

// ---------------------------------------------------------------------------
// Output

void write_per_status_money(JsonWriter& w, const PerStatus<Money>& values) {
  w.begin_object();
  for (FilingStatus s : kAllStatuses) w.key(to_string(s)).raw_number(values[s].str());
  w.end_object();
}

}  // namespace

std::string_view to_string(FilingStatus status) { return kStatusNames[static_cast<std::size_t>(status)]; }

std::optional<FilingStatus> parse_filing_status(std::string_view text) {
  for (FilingStatus s : kAllStatuses) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(CodeClass c) {
  switch (c) {
    case CodeClass::EarlyNoException: return "early_no_exception";
    case CodeClass::EarlyWithException: return "early_with_exception";
    case CodeClass::Normal: return "normal";
    case CodeClass::Other: return "other";
  }
  return "other";
}

std::optional<CodeClass> parse_code_class(std::string_view text) {
  for (CodeClass c : {CodeClass::EarlyNoException, CodeClass::EarlyWithException, CodeClass::Normal, CodeClass::Other}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

const std::vector<EitcTier>& TaxRuleSet::eitc() const {
  if (!eitc_schedule) throw MissingRuleSection("eitc_schedule");
  return *eitc_schedule;
}
const CtcRules& TaxRuleSet::ctc() const {
  if (!ctc_rules) throw MissingRuleSection("ctc_rules");
  return *ctc_rules;
}
const AotcRules& TaxRuleSet::aotc() const {
  if (!aotc_rules) throw MissingRuleSection("aotc_rules");
  return *aotc_rules;
}
const ItemizedRules& TaxRuleSet::itemized() const {
  if (!itemized_rules) throw MissingRuleSection("itemized_rules");
  return *itemized_rules;
}
const RetirementRules& TaxRuleSet::retirement() const {
  if (!retirement_rules) throw MissingRuleSection("retirement_rules");
  return *retirement_rules;
}

void validate_ruleset(const TaxRuleSet& rules, std::vector<std::string>* warnings) {
  if (rules.tax_year < 0) throw SchemaViolation("tax_year", "must be a non-negative year");

  for_each_status(rules.tax_brackets, "tax_brackets", [](const std::vector<BracketRow>& rows, const std::string& path) {
    if (rows.empty()) throw SchemaViolation(path, "at least one bracket is required");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto row_path = index_path(path, i);
      if (rows[i].threshold_amount <= Money{}) {
        throw SchemaViolation(join_path(row_path, "threshold_amount"), "threshold must be > 0");
      }
      require_unit_interval(rows[i].rate_decimal, join_path(row_path, "rate_decimal"));
      if (i > 0 && rows[i].threshold_amount <= rows[i - 1].threshold_amount) {
        throw SchemaViolation(path, "threshold_amount values must be strictly increasing (row " + std::to_string(i) +
                                        ": " + rows[i].threshold_amount.str() + " after " +
                                        rows[i - 1].threshold_amount.str() + ")");
      }
    }
  });

  for_each_status(rules.standard_deductions, "standard_deductions",
                  [](const StandardDeduction& d, const std::string& path) {
                    require_nonnegative(d.base_amount, join_path(path, "base_amount"));
                    require_nonnegative(d.additional_elderly, join_path(path, "additional_elderly"));
                    require_nonnegative(d.additional_blind, join_path(path, "additional_blind"));
                  });

  if (rules.eitc_schedule) {
    if (rules.eitc_schedule->empty()) throw SchemaViolation("eitc_schedule", "at least the 0-child tier is required");
    for (std::size_t i = 0; i < rules.eitc_schedule->size(); ++i) {
      const auto& t = (*rules.eitc_schedule)[i];
      const auto path = join_path("eitc_schedule", std::to_string(i));
      require_unit_interval(t.phase_in_rate, join_path(path, "phase_in_rate"));
      require_unit_interval(t.phase_out_rate, join_path(path, "phase_out_rate"));
      require_nonnegative(t.max_credit, join_path(path, "max_credit"));
      require_nonnegative(t.plateau_start, join_path(path, "plateau_start"));
      for_each_status(t.phase_out_start, join_path(path, "phase_out_start"), [&](Money m, const std::string& p) {
        require_nonnegative(m, p);
        if (m < t.plateau_start) throw SchemaViolation(p, "phase-out cannot start before the plateau");
      });
    }
  }

  if (rules.ctc_rules) {
    const auto& c = *rules.ctc_rules;
    require_nonnegative(c.credit_per_child, "ctc_rules.credit_per_child");
    require_nonnegative(c.odc_amount, "ctc_rules.odc_amount");
    for_each_status(c.phase_out_threshold, "ctc_rules.phase_out_threshold", require_nonnegative);
    require_nonnegative(c.reduction_per_step, "ctc_rules.reduction_per_step");
    if (c.step_size <= Money{}) throw SchemaViolation("ctc_rules.step_size", "step size must be > 0");
  }

  if (rules.aotc_rules) {
    const auto& a = *rules.aotc_rules;
    require_nonnegative(a.tier1_limit, "aotc_rules.tier1_limit");
    require_unit_interval(a.tier1_rate, "aotc_rules.tier1_rate");
    require_nonnegative(a.tier2_limit, "aotc_rules.tier2_limit");
    require_unit_interval(a.tier2_rate, "aotc_rules.tier2_rate");
    require_nonnegative(a.credit_cap, "aotc_rules.credit_cap");
    if (!(a.tier1_limit < a.tier2_limit)) {
      throw SchemaViolation("aotc_rules.tier2_limit", "tier2_limit must exceed tier1_limit");
    }
    const Money tiers = (a.tier1_limit * a.tier1_rate + (a.tier2_limit - a.tier1_limit) * a.tier2_rate).round();
    if (tiers != a.credit_cap && warnings) {
      warnings->push_back("aotc_rules.credit_cap: " + a.credit_cap.str() + " differs from the tier maximum " +
                          tiers.str());
    }
  }

  if (rules.itemized_rules) {
    require_unit_interval(rules.itemized_rules->medical_agi_floor_rate, "itemized_rules.medical_agi_floor_rate");
    require_nonnegative(rules.itemized_rules->salt_cap, "itemized_rules.salt_cap");
  }

  if (rules.retirement_rules) {
    const auto& r = *rules.retirement_rules;
    require_unit_interval(r.penalty_rate, "retirement_rules.penalty_rate");
    if (r.penalty_age_threshold < Years{}) {
      throw SchemaViolation("retirement_rules.penalty_age_threshold", "age must be >= 0");
    }
    const std::string table = "retirement_rules.simplified_method_table";
    for (std::size_t i = 0; i < r.simplified_method_table.size(); ++i) {
      const auto& row = r.simplified_method_table[i];
      if (row.age_upper_bound < 0) {
        throw SchemaViolation(join_path(index_path(table, i), "age_upper_bound"), "age must be >= 0");
      }
      if (row.anticipated_payments <= 0) {
        throw SchemaViolation(join_path(index_path(table, i), "anticipated_payments"), "must be > 0");
      }
      if (i > 0 && row.age_upper_bound <= r.simplified_method_table[i - 1].age_upper_bound) {
        throw SchemaViolation(table, "age_upper_bound values must be strictly increasing");
      }
    }
    for (const auto& [raw, _] : r.distribution_codes) {
      if (raw.empty()) throw SchemaViolation("retirement_rules.distribution_codes", "empty code");
    }
  }
}

TaxRuleSet parse_ruleset(std::string_view document, std::vector<std::string>* warnings) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("rule document is not valid JSON: ") + e.what());
  }
  check_keys(root, "", {"tax_brackets", "standard_deductions"},
             {"tax_year", "eitc_schedule", "ctc_rules", "aotc_rules", "itemized_rules", "retirement_rules"});

  TaxRuleSet rules;
  if (root.contains("tax_year")) rules.tax_year = read_int(root.at("tax_year"), "tax_year");
  rules.tax_brackets = read_per_status<std::vector<BracketRow>>(root.at("tax_brackets"), "tax_brackets", read_brackets);
  rules.standard_deductions =
      read_per_status<StandardDeduction>(root.at("standard_deductions"), "standard_deductions", read_standard);
  if (root.contains("eitc_schedule")) rules.eitc_schedule = read_eitc(root.at("eitc_schedule"), "eitc_schedule");
  if (root.contains("ctc_rules")) rules.ctc_rules = read_ctc(root.at("ctc_rules"), "ctc_rules");
  if (root.contains("aotc_rules")) rules.aotc_rules = read_aotc(root.at("aotc_rules"), "aotc_rules");
  if (root.contains("itemized_rules")) rules.itemized_rules = read_itemized(root.at("itemized_rules"), "itemized_rules");
  if (root.contains("retirement_rules")) {
    rules.retirement_rules = read_retirement(root.at("retirement_rules"), "retirement_rules");
  }
  validate_ruleset(rules, warnings);
  return rules;
}

std::string serialize_ruleset(const TaxRuleSet& rules) {
  validate_ruleset(rules);
  JsonWriter w(2);
  w.begin_object();
  if (rules.tax_year != 0) w.key("tax_year").value(rules.tax_year);

  w.key("tax_brackets").begin_object();
  for (FilingStatus s : kAllStatuses) {
    w.key(to_string(s)).begin_array();
    for (const auto& row : rules.tax_brackets[s]) {
      w.begin_object()
          .key("threshold_amount").raw_number(row.threshold_amount.str())
          .key("rate_decimal").raw_number(row.rate_decimal.str())
          .end_object();
    }
    w.end_array();
  }
  w.end_object();

  w.key("standard_deductions").begin_object();
  for (FilingStatus s : kAllStatuses) {
    const auto& d = rules.standard_deductions[s];
    w.key(to_string(s)).begin_object()
        .key("base_amount").raw_number(d.base_amount.str())
        .key("additional_elderly").raw_number(d.additional_elderly.str())
        .key("additional_blind").raw_number(d.additional_blind.str())
        .end_object();
  }
  w.end_object();

  if (rules.eitc_schedule) {
    w.key("eitc_schedule").begin_object();
    for (std::size_t i = 0; i < rules.eitc_schedule->size(); ++i) {
      const auto& t = (*rules.eitc_schedule)[i];
      w.key(std::to_string(i)).begin_object()
          .key("phase_in_rate").raw_number(t.phase_in_rate.str())
          .key("max_credit").raw_number(t.max_credit.str())
          .key("plateau_start").raw_number(t.plateau_start.str())
          .key("phase_out_start");
      write_per_status_money(w, t.phase_out_start);
      w.key("phase_out_rate").raw_number(t.phase_out_rate.str()).end_object();
    }
    w.end_object();
  }

  if (rules.ctc_rules) {
    const auto& c = *rules.ctc_rules;
    w.key("ctc_rules").begin_object()
        .key("credit_per_child").raw_number(c.credit_per_child.str())
        .key("odc_amount").raw_number(c.odc_amount.str())
        .key("phase_out_threshold");
    write_per_status_money(w, c.phase_out_threshold);
    w.key("reduction_per_step").raw_number(c.reduction_per_step.str())
        .key("step_size").raw_number(c.step_size.str())
        .end_object();
  }

  if (rules.aotc_rules) {
    const auto& a = *rules.aotc_rules;
    w.key("aotc_rules").begin_object()
        .key("tier1_limit").raw_number(a.tier1_limit.str())
        .key("tier1_rate").raw_number(a.tier1_rate.str())
        .key("tier2_limit").raw_number(a.tier2_limit.str())
        .key("tier2_rate").raw_number(a.tier2_rate.str())
        .key("credit_cap").raw_number(a.credit_cap.str())
        .end_object();
  }

  if (rules.itemized_rules) {
    w.key("itemized_rules").begin_object()
        .key("medical_agi_floor_rate").raw_number(rules.itemized_rules->medical_agi_floor_rate.str())
        .key("salt_cap").raw_number(rules.itemized_rules->salt_cap.str())
        .end_object();
  }

  if (rules.retirement_rules) {
    const auto& r = *rules.retirement_rules;
    w.key("retirement_rules").begin_object()
        .key("penalty_rate").raw_number(r.penalty_rate.str())
        .key("penalty_age_threshold").raw_number(r.penalty_age_threshold.str())
        .key("exception_codes").begin_array();
    for (const auto& code : r.exception_codes) w.value(code);
    w.end_array().key("simplified_method_table").begin_array();
    for (const auto& row : r.simplified_method_table) {
      w.begin_object()
          .key("age_upper_bound").value(row.age_upper_bound)
          .key("anticipated_payments").value(row.anticipated_payments)
          .end_object();
    }
    w.end_array();
    if (!r.distribution_codes.empty()) {
      w.key("distribution_codes").begin_object();
      for (const auto& [raw, cls] : r.distribution_codes) w.key(raw).value(to_string(cls));
      w.end_object();
    }
    w.end_object();
  }
  w.end_object();
  return w.take() + "\n";
}

TaxRuleSet load_ruleset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read rule document '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_ruleset(buffer.str());
}

std::vector<Money> bracket_knees(const TaxRuleSet& rules, FilingStatus status) {
  const auto& rows = rules.tax_brackets[status];
  std::vector<Money> knees;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].rate_decimal != rows[i + 1].rate_decimal) knees.push_back(rows[i].threshold_amount);
  }
  return knees;
}

// ---------------------------------------------------------------------------
// Function-description documents

namespace {

const std::regex kIdent(R"([A-Za-z_][A-Za-z0-9_]*)");
const std::regex kComparison(R"(^\s*([A-Za-z_][A-Za-z0-9_]*|-?[0-9]+(?:\.[0-9]+)?|'[^']*'|"[^"]*")\s*(>=|<=|==|!=|>|<)\s*([A-Za-z_][A-Za-z0-9_]*|-?[0-9]+(?:\.[0-9]+)?|'[^']*'|"[^"]*")\s*$)");
const std::regex kMembership(R"(^\s*(?:([A-Za-z_][A-Za-z0-9_]*)\s+)?in\s*\[(.*)\]\s*$)");
const std::regex kListItem(R"(\s*('[^']*'|"[^"]*"|-?[0-9]+(?:\.[0-9]+)?)\s*(,|$))");

bool is_identifier(const std::string& token) { return std::regex_match(token, kIdent); }

Constraint parse_constraint(const std::string& text, const std::string& owner,
                            const std::set<std::string>& declared, const std::string& path) {
  Constraint c;
  c.text = text;
  std::smatch m;
  if (std::regex_match(text, m, kComparison)) {
    c.kind = Constraint::Kind::Comparison;
    c.subject = m[1];
    c.op = m[2];
    c.operand = m[3];
    const bool lhs_input = is_identifier(c.subject);
    const bool rhs_input = is_identifier(c.operand);
    if (!lhs_input && !rhs_input) throw SchemaViolation(path, "comparison must reference a declared input");
    for (const auto& side : {c.subject, c.operand}) {
      if (is_identifier(side) && !declared.count(side)) {
        throw SchemaViolation(path, "constraint references undeclared input '" + side + "'");
      }
    }
    return c;
  }
  if (std::regex_match(text, m, kMembership)) {
    c.kind = Constraint::Kind::Membership;
    c.subject = m[1].matched ? std::string(m[1]) : owner;
    c.op = "in";
    if (!declared.count(c.subject)) {
      throw SchemaViolation(path, "constraint references undeclared input '" + c.subject + "'");
    }
    std::string list = m[2];
    auto begin = std::sregex_iterator(list.begin(), list.end(), kListItem);
    std::size_t consumed = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      if (static_cast<std::size_t>(it->position()) != consumed) break;
      std::string item = (*it)[1];
      if (item.size() >= 2 && (item.front() == '\'' || item.front() == '"')) item = item.substr(1, item.size() - 2);
      c.members.push_back(item);
      consumed += static_cast<std::size_t>(it->length());
    }
    const bool blank_list = list.find_first_not_of(" \t") == std::string::npos;
    if (consumed != list.size() && !blank_list) throw SchemaViolation(path, "unparseable membership list");
    if (c.members.empty()) throw SchemaViolation(path, "membership list is empty");
    return c;
  }
  throw SchemaViolation(path, "constraint is not a comparison over declared inputs: '" + text + "'");
}

std::string read_nonempty_string(const json& node, const std::string& path) {
  if (!node.is_string() || node.get<std::string>().empty()) throw SchemaViolation(path, "expected a non-empty string");
  return node.get<std::string>();
}

}  // namespace

FunctionSpec validate_function_spec(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("function description is not valid JSON: ") + e.what());
  }
  check_keys(root, "", {"function_name", "inputs", "outputs", "calculations"}, {"purpose", "description", "edge_cases"});

  FunctionSpec spec;
  spec.function_name = read_nonempty_string(root.at("function_name"), "function_name");

  const auto& inputs = root.at("inputs");
  require_object(inputs, "inputs");
  std::set<std::string> declared;
  for (const auto& [name, _] : inputs.items()) declared.insert(name);
  for (const auto& [name, input] : inputs.items()) {
    const auto path = join_path("inputs", name);
    check_keys(input, path, {"type"}, {"constraints", "description"});
    FunctionInput in;
    in.type = read_nonempty_string(input.at("type"), join_path(path, "type"));
    if (input.contains("constraints")) {
      const auto cpath = join_path(path, "constraints");
      require_array(input.at("constraints"), cpath);
      for (std::size_t i = 0; i < input.at("constraints").size(); ++i) {
        const auto item_path = index_path(cpath, i);
        const auto text = read_nonempty_string(input.at("constraints")[i], item_path);
        in.constraints.push_back(parse_constraint(text, name, declared, item_path));
      }
    }
    spec.inputs[name] = std::move(in);
  }

  const auto& outputs = root.at("outputs");
  require_object(outputs, "outputs");
  if (outputs.empty()) throw SchemaViolation("outputs", "at least one output is required");
  for (const auto& [name, output] : outputs.items()) {
    const auto path = join_path("outputs", name);
    check_keys(output, path, {"type", "rounding"}, {"description"});
    FunctionOutput out;
    out.type = read_nonempty_string(output.at("type"), join_path(path, "type"));
    out.rounding = read_int(output.at("rounding"), join_path(path, "rounding"));
    if (out.rounding != 0 && out.rounding != 2) {
      throw SchemaViolation(join_path(path, "rounding"), "rounding must be 0 or 2 decimal places");
    }
    spec.outputs[name] = out;
  }

  const auto& calcs = root.at("calculations");
  require_array(calcs, "calculations");
  for (std::size_t i = 0; i < calcs.size(); ++i) {
    const auto path = index_path("calculations", i);
    check_keys(calcs[i], path, {"step", "formula"}, {"description", "rule_keys"});
    CalculationStep step;
    step.step = read_nonempty_string(calcs[i].at("step"), join_path(path, "step"));
    if (!is_identifier(step.step)) throw SchemaViolation(join_path(path, "step"), "step must be an identifier");
    step.formula = read_nonempty_string(calcs[i].at("formula"), join_path(path, "formula"));
    spec.calculations.push_back(std::move(step));
  }
  return spec;
}

}  // namespace taxmorph
