#include "taxmorph/metamorphic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/json_writer.hpp"
#include "taxmorph/sampling.hpp"

namespace taxmorph {

using nlohmann::json;

namespace {

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string literal(const FieldValue& v) {
  if (const auto* m = std::get_if<Money>(&v)) return m->str();
  if (const auto* c = std::get_if<std::int64_t>(&v)) return std::to_string(*c);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return json(std::get<std::string>(v)).dump();
}

Money ordering_value(const FieldValue& v) {
  if (const auto* m = std::get_if<Money>(&v)) return *m;
  if (const auto* c = std::get_if<std::int64_t>(&v)) return Money::whole(*c);
  if (const auto* b = std::get_if<bool>(&v)) return Money::whole(*b ? 1 : 0);
  return Money{};
}

bool is_numeric_label(std::string_view label) {
  const auto* info = find_field(label);
  return info && (info->kind == FieldKind::Money || info->kind == FieldKind::Count);
}

Money whole_dollars(Money m) { return Money::whole(m.units() / Money::kScale); }

Money ceil_div_money(Money numerator, Fraction rate) {
  // numerator / rate, rounded up to the cent
  const __int128 num = static_cast<__int128>(numerator.units()) * Fraction::kScale;
  const __int128 den = rate.units();
  return Money::from_units(static_cast<std::int64_t>((num + den - 1) / den));
}

}  // namespace

// ---------------------------------------------------------------------------
// Basic enums and tolerances

void ToleranceConfig::validate() const {
  if (!(rate_eps > 0)) throw InputError("rate_eps must be positive");
  if (!(money_eps > Money{})) throw InputError("money_eps must be positive");
  if (!(jump_margin > 0)) throw InputError("jump_margin must be positive");
  if (!(min_gap > Money{})) throw InputError("min_gap must be positive");
  if (!(phi8_bound > 0)) throw InputError("phi8_bound must be positive");
}

std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "PASS" : "FAIL"; }

std::string_view to_string(HmtCategory c) {
  switch (c) {
    case HmtCategory::ProportionalIncrease: return "ProportionalIncrease";
    case HmtCategory::ThresholdJump: return "ThresholdJump";
    case HmtCategory::Saturation: return "Saturation";
  }
  return "ProportionalIncrease";
}

std::optional<HmtCategory> parse_category(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == '_' || c == '-') continue;
    key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "proportionalincrease") return HmtCategory::ProportionalIncrease;
  if (key == "thresholdjump") return HmtCategory::ThresholdJump;
  if (key == "saturation") return HmtCategory::Saturation;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Report

void sort_discrepancies(std::vector<Discrepancy>& records) {
  std::stable_sort(records.begin(), records.end(), [](const Discrepancy& a, const Discrepancy& b) {
    return std::tie(a.input, a.test_category, a.order_key[0], a.filing_status, a.order_key[1], a.order_key[2],
                    a.verification_reason) < std::tie(b.input, b.test_category, b.order_key[0], b.filing_status,
                                                      b.order_key[1], b.order_key[2], b.verification_reason);
  });
}

void write_discrepancy(JsonWriter& w, const Discrepancy& d) {
  auto money_or_null = [&](const std::optional<Money>& m) {
    if (m) {
      w.money(*m);
    } else {
      w.null();
    }
  };
  w.begin_object();
  w.key("input").value(d.input);
  w.key("test_category").value(d.test_category);
  w.key("filing_status").value(to_string(d.filing_status));
  w.key("base_value").raw_json(d.base_value);
  w.key("new_value_1").raw_json(d.new_value_1);
  w.key("new_value_2").raw_json(d.new_value_2);
  w.key("verification_result").value(to_string(d.verification_result));
  w.key("verification_reason").value(d.verification_reason);
  w.key("initial_tax");
  money_or_null(d.initial_tax);
  w.key("modified_tax_tuple").begin_array();
  for (const auto& m : d.modified_tax_tuple) money_or_null(m);
  w.end_array();
  w.key("Rate_change_base (R1)").rate(d.rate_change_base);
  w.key("Rate_change_follow-up (R2)").rate(d.rate_change_followup);
  w.end_object();
}

std::string discrepancy_report(const std::vector<Discrepancy>& records) {
  JsonWriter w(2);
  w.begin_object().key("discrepancies").begin_array();
  for (const auto& d : records) write_discrepancy(w, d);
  w.end_array().end_object();
  return w.take() + "\n";
}

// ---------------------------------------------------------------------------
// Pairwise relations

bool PairwiseRelation::applies_to(ScenarioId s) const {
  return std::find(scenarios.begin(), scenarios.end(), s.value()) != scenarios.end();
}

namespace {

std::optional<Compare> parse_compare(std::string_view t) {
  if (t == "gt") return Compare::Gt;
  if (t == "ge") return Compare::Ge;
  if (t == "lt") return Compare::Lt;
  if (t == "le") return Compare::Le;
  if (t == "eq") return Compare::Eq;
  if (t == "true_false") return Compare::TrueFalse;
  return std::nullopt;
}

std::optional<Expectation> parse_expectation(std::string_view t) {
  if (t == "output_leq") return Expectation::OutputLeq;
  if (t == "output_geq") return Expectation::OutputGeq;
  if (t == "output_lt") return Expectation::OutputLt;
  if (t == "output_gt") return Expectation::OutputGt;
  if (t == "output_eq") return Expectation::OutputEq;
  return std::nullopt;
}

std::string_view expectation_text(Expectation e) {
  switch (e) {
    case Expectation::OutputLeq: return "F(x) <= F(x')";
    case Expectation::OutputGeq: return "F(x) >= F(x')";
    case Expectation::OutputLt: return "F(x) < F(x')";
    case Expectation::OutputGt: return "F(x) > F(x')";
    case Expectation::OutputEq: return "F(x) == F(x')";
  }
  return "";
}

void check_keys(const json& node, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!node.is_object()) throw SchemaViolation(path, "expected an object");
  for (const auto& [key, _] : node.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw SchemaViolation(path + "." + key, "unknown field");
    }
  }
  for (const char* a : allowed) {
    if (!node.contains(a)) throw SchemaViolation(path + "." + a, "required field is missing");
  }
}

const json& string_at(const json& node, const char* key, const std::string& path) {
  const auto& v = node.at(key);
  if (!v.is_string() || v.get<std::string>().empty()) throw SchemaViolation(path + "." + key, "expected a non-empty string");
  return v;
}

bool premise_holds(const PremiseClause& c, const TaxpayerProfile& x, const TaxpayerProfile& xp) {
  if (c.compare == Compare::TrueFalse) {
    const auto a = get_field(x, c.label);
    const auto b = get_field(xp, c.label);
    return std::get_if<bool>(&a) && std::get<bool>(a) && std::get_if<bool>(&b) && !std::get<bool>(b);
  }
  if (c.compare == Compare::Eq) return get_field(x, c.label) == get_field(xp, c.label);
  const auto a = numeric_field(x, c.label);
  const auto b = numeric_field(xp, c.label);
  if (!a || !b) return false;
  switch (c.compare) {
    case Compare::Gt: return *a > *b;
    case Compare::Ge: return *a >= *b;
    case Compare::Lt: return *a < *b;
    case Compare::Le: return *a <= *b;
    default: return false;
  }
}

bool expectation_holds(Expectation e, Money fx, Money fxp, Money eps) {
  switch (e) {
    case Expectation::OutputLeq: return fx <= fxp + eps;
    case Expectation::OutputGeq: return fx + eps >= fxp;
    case Expectation::OutputLt: return fx < fxp;
    case Expectation::OutputGt: return fx > fxp;
    case Expectation::OutputEq: return fx - fxp <= eps && fxp - fx <= eps;
  }
  return false;
}

Discrepancy judge_pair(const PairwiseRelation& rel, const TaxpayerProfile& x, const TaxpayerProfile& xp,
                       const EvalOutcome& fx, const EvalOutcome& fxp, const ToleranceConfig& tol) {
  Discrepancy d;
  d.input = join(rel.equiv.labels, ",");
  d.test_category = rel.name;
  d.filing_status = x.sts;
  const auto& label = rel.equiv.labels.front();
  const auto before = get_field(xp, label);
  const auto after = get_field(x, label);
  d.base_value = literal(before);
  d.new_value_1 = literal(after);
  d.new_value_2 = d.new_value_1;
  d.order_key = {ordering_value(before), ordering_value(after), ordering_value(after)};
  d.initial_tax = fxp.value;
  d.modified_tax_tuple = {fxp.value, fx.value, fx.value};
  if (!fx.value || !fxp.value) {
    d.verification_result = Verdict::Fail;
    d.verification_reason = "evaluation failed: " + (!fx.value ? fx.error : fxp.error);
    return d;
  }
  const auto a = numeric_field(x, label);
  const auto b = numeric_field(xp, label);
  if (a && b && *a != *b) {
    d.rate_change_base = difference_quotient(*fxp.value, *fx.value, *b, *a);
    d.rate_change_followup = d.rate_change_base;
  }
  if (expectation_holds(rel.expectation, *fx.value, *fxp.value, tol.money_eps)) {
    d.verification_result = Verdict::Pass;
    d.verification_reason = "expected " + std::string(expectation_text(rel.expectation)) + " holds";
  } else {
    d.verification_result = Verdict::Fail;
    d.verification_reason = "expected " + std::string(expectation_text(rel.expectation)) + " for " + rel.name +
                            ", got F(x) = " + fx.value->fixed() + " and F(x') = " + fxp.value->fixed();
  }
  return d;
}

}  // namespace

std::vector<PairwiseRelation> parse_relations(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("relations document is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("relations") || !root.at("relations").is_array()) {
    throw SchemaViolation("relations", "expected an array of relations");
  }
  for (const auto& [key, _] : root.items()) {
    if (key != "relations") throw SchemaViolation(key, "unknown field");
  }
  std::vector<PairwiseRelation> out;
  std::set<std::string> names;
  const auto& list = root.at("relations");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "relations[" + std::to_string(i) + "]";
    const auto& node = list[i];
    check_keys(node, path, {"name", "scenarios", "labels", "premise", "expectation"});
    PairwiseRelation rel;
    rel.name = string_at(node, "name", path).get<std::string>();
    if (!names.insert(rel.name).second) throw SchemaViolation(path + ".name", "duplicate relation name");

    const auto& scenarios = node.at("scenarios");
    if (!scenarios.is_array() || scenarios.empty()) throw SchemaViolation(path + ".scenarios", "expected a non-empty array");
    for (std::size_t j = 0; j < scenarios.size(); ++j) {
      const auto& s = scenarios[j];
      if (!s.is_number_integer() || s.get<int>() < 1 || s.get<int>() > 6) {
        throw SchemaViolation(path + ".scenarios[" + std::to_string(j) + "]", "scenario must be an integer in 1..6");
      }
      rel.scenarios.push_back(s.get<int>());
    }

    const auto& labels = node.at("labels");
    if (!labels.is_array() || labels.empty()) throw SchemaViolation(path + ".labels", "expected a non-empty array");
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const std::string lpath = path + ".labels[" + std::to_string(j) + "]";
      if (!labels[j].is_string() || !find_field(labels[j].get<std::string>())) {
        throw SchemaViolation(lpath, "not a profile field");
      }
      rel.equiv.labels.push_back(labels[j].get<std::string>());
    }

    const auto& premise = node.at("premise");
    if (!premise.is_array()) throw SchemaViolation(path + ".premise", "expected an array");
    for (std::size_t j = 0; j < premise.size(); ++j) {
      const std::string ppath = path + ".premise[" + std::to_string(j) + "]";
      check_keys(premise[j], ppath, {"label", "compare"});
      PremiseClause c;
      c.label = string_at(premise[j], "label", ppath).get<std::string>();
      if (std::find(rel.equiv.labels.begin(), rel.equiv.labels.end(), c.label) == rel.equiv.labels.end()) {
        throw SchemaViolation(ppath + ".label", "premise label must be one of the relation's labels");
      }
      const auto cmp = parse_compare(string_at(premise[j], "compare", ppath).get<std::string>());
      if (!cmp) throw SchemaViolation(ppath + ".compare", "expected one of gt, ge, lt, le, eq, true_false");
      const auto kind = find_field(c.label)->kind;
      if (*cmp == Compare::TrueFalse && kind != FieldKind::Boolean) {
        throw SchemaViolation(ppath + ".compare", "true_false needs a boolean label");
      }
      if (*cmp != Compare::TrueFalse && *cmp != Compare::Eq && kind != FieldKind::Money && kind != FieldKind::Count) {
        throw SchemaViolation(ppath + ".compare", "ordering comparisons need a numeric label");
      }
      c.compare = *cmp;
      rel.premise.push_back(c);
    }
    for (const auto& label : rel.equiv.labels) {
      if (std::none_of(rel.premise.begin(), rel.premise.end(), [&](const PremiseClause& c) { return c.label == label; })) {
        throw SchemaViolation(path + ".premise", "label '" + label + "' has no premise clause");
      }
    }

    const auto exp = parse_expectation(string_at(node, "expectation", path).get<std::string>());
    if (!exp) {
      throw SchemaViolation(path + ".expectation",
                            "expected one of output_leq, output_geq, output_lt, output_gt, output_eq");
    }
    rel.expectation = *exp;
    out.push_back(std::move(rel));
  }
  return out;
}

std::vector<PairwiseRelation> load_relations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read relations file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_relations(ss.str());
}

PairCheck check_pairwise(const PairwiseRelation& rel, const TaxpayerProfile& x, const TaxpayerProfile& x_prime,
                         TaxFunction& f, const ToleranceConfig& tol) {
  for (const auto& field : differing_fields(x, x_prime)) {
    if (std::find(rel.equiv.labels.begin(), rel.equiv.labels.end(), field) == rel.equiv.labels.end()) {
      throw NotEquivalent("profiles differ on '" + field + "', outside the labels of relation " + rel.name);
    }
  }
  for (const auto& clause : rel.premise) {
    if (!premise_holds(clause, x, x_prime)) {
      throw PreconditionViolated("premise on '" + clause.label + "' does not hold for relation " + rel.name);
    }
  }
  auto eval = [&](const TaxpayerProfile& p) -> EvalOutcome {
    try {
      return {f.evaluate(p), {}};
    } catch (const std::exception& e) {
      return {std::nullopt, e.what()};
    }
  };
  const auto fx = eval(x);
  const auto fxp = eval(x_prime);
  PairCheck out;
  auto d = judge_pair(rel, x, x_prime, fx, fxp, tol);
  out.verdict = d.verification_result;
  if (fx.value) out.fx = *fx.value;
  if (fxp.value) out.fx_prime = *fxp.value;
  if (out.verdict == Verdict::Fail) out.discrepancy = std::move(d);
  return out;
}

std::vector<std::pair<TaxpayerProfile, TaxpayerProfile>> generate_pairs(const PairwiseRelation& rel,
                                                                        ScenarioId scenario, const TaxRuleSet& rules,
                                                                        std::size_t count, std::uint64_t seed) {
  Rng rng(mix_seed(seed, "pairs/" + rel.name + "/" + std::to_string(scenario.value())));
  std::vector<std::pair<TaxpayerProfile, TaxpayerProfile>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    TaxpayerProfile xp = random_profile(scenario, rules, rng);
    TaxpayerProfile x = xp;
    for (const auto& c : rel.premise) {
      if (c.compare == Compare::TrueFalse) {
        set_field(x, c.label, true);
        set_field(xp, c.label, false);
        continue;
      }
      if (c.compare == Compare::Eq) continue;
      const bool money = find_field(c.label)->kind == FieldKind::Money;
      const Money delta = money ? uniform_money(rng, cents(1), dollars(50000)) : Money::whole(uniform_int(rng, 1, 3));
      const Money v = *numeric_field(xp, c.label);
      switch (c.compare) {
        case Compare::Ge:
          if (!chance(rng, 10)) set_numeric_field(x, c.label, v + delta);
          break;
        case Compare::Gt:
          set_numeric_field(x, c.label, v + delta);
          break;
        case Compare::Le:
          if (!chance(rng, 10)) set_numeric_field(xp, c.label, v + delta);
          break;
        case Compare::Lt:
          set_numeric_field(xp, c.label, v + delta);
          break;
        default:
          break;
      }
    }
    out.emplace_back(std::move(x), std::move(xp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Higher-order relations

TaxpayerProfile TestTuple::at(std::size_t i) const {
  TaxpayerProfile p = base_profile;
  set_numeric_field(p, target_label, values.at(i));
  return p;
}

double difference_quotient(Money f_a, Money f_b, Money a, Money b) {
  const auto dx = b.units() - a.units();
  if (dx == 0) throw PreconditionViolated("difference quotient over an empty interval");
  return static_cast<double>(f_b.units() - f_a.units()) / static_cast<double>(dx);
}

RateMeasurement rates(TaxFunction& f, const TestTuple& tuple) {
  RateMeasurement m;
  for (std::size_t i = 0; i < 3; ++i) m.outputs[i] = f.evaluate(tuple.at(i));
  m.rates.r1 = difference_quotient(m.outputs[0], m.outputs[1], tuple.values[0], tuple.values[1]);
  m.rates.r2 = difference_quotient(m.outputs[0], m.outputs[2], tuple.values[0], tuple.values[2]);
  return m;
}

Discrepancy judge_hmt(const TestTuple& tuple, const std::array<EvalOutcome, 3>& outcomes, const ToleranceConfig& tol) {
  Discrepancy d;
  d.input = tuple.target_label;
  d.test_category = std::string(to_string(tuple.category));
  d.filing_status = tuple.base_profile.sts;
  d.base_value = tuple.values[0].str();
  d.new_value_1 = tuple.values[1].str();
  d.new_value_2 = tuple.values[2].str();
  d.order_key = tuple.values;
  d.initial_tax = outcomes[0].value;
  for (std::size_t i = 0; i < 3; ++i) d.modified_tax_tuple[i] = outcomes[i].value;
  static const char* kPoint[] = {"x_b", "x_1", "x_2"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!outcomes[i].value) {
      d.verification_result = Verdict::Fail;
      d.verification_reason = std::string("evaluation failed at ") + kPoint[i] + ": " + outcomes[i].error;
      return d;
    }
  }
  const Money fb = *outcomes[0].value, f1 = *outcomes[1].value, f2 = *outcomes[2].value;
  const double r1 = difference_quotient(fb, f1, tuple.values[0], tuple.values[1]);
  const double r2 = difference_quotient(fb, f2, tuple.values[0], tuple.values[2]);
  d.rate_change_base = r1;
  d.rate_change_followup = r2;
  bool pass = false;
  std::string why;
  switch (tuple.category) {
    case HmtCategory::ProportionalIncrease:
      pass = std::fabs(r1 - r2) <= tol.rate_eps;
      why = pass ? "R1 and R2 agree within rate_eps"
                 : fmt("rate of change is not proportional inside one rule region: R1 %.6f and R2 %.6f differ by "
                       "more than %g",
                       r1, r2, tol.rate_eps);
      break;
    case HmtCategory::ThresholdJump:
      pass = r2 > r1 + tol.jump_margin;
      why = pass ? "R2 exceeds R1 across the threshold"
                 : fmt("no jump in the rate of change across the threshold: R2 %.6f is not above R1 %.6f by more "
                       "than %g",
                       r2, r1, tol.jump_margin);
      break;
    case HmtCategory::Saturation: {
      const Money delta = f2 > f1 ? f2 - f1 : f1 - f2;
      pass = delta <= tol.money_eps && std::fabs(r2) <= tol.rate_eps;
      why = pass ? "output invariant in the saturation region"
                 : "output is not invariant in the saturation region: F(x_2) - F(x_1) = " + (f2 - f1).fixed() +
                       fmt(", R2 %.6f", r2);
      break;
    }
  }
  d.verification_result = pass ? Verdict::Pass : Verdict::Fail;
  d.verification_reason = why;
  if (!pass && !tuple.rationale.empty()) d.verification_reason += " (" + tuple.rationale + ")";
  return d;
}

Discrepancy check_hmt(const TestTuple& tuple, TaxFunction& f, const ToleranceConfig& tol) {
  std::array<EvalOutcome, 3> outcomes;
  for (std::size_t i = 0; i < 3; ++i) outcomes[i] = {f.evaluate(tuple.at(i)), {}};
  return judge_hmt(tuple, outcomes, tol);
}

// ---------------------------------------------------------------------------
// Rate consistency over four profiles

BracketInterval bracket_interval(const TaxRuleSet& rules, FilingStatus status, std::size_t row) {
  const auto& rows = rules.tax_brackets[status];
  if (row >= rows.size()) throw PreconditionViolated("bracket row " + std::to_string(row) + " does not exist");
  return {row == 0 ? Money{} : rows[row - 1].threshold_amount, rows[row].threshold_amount, rows[row].rate_decimal};
}

namespace {

void require_income_only(const TaxpayerProfile& a, const TaxpayerProfile& b, const char* clause) {
  for (const auto& field : differing_fields(a, b)) {
    if (field != "income") throw PreconditionViolated(std::string(clause) + ": profiles also differ on '" + field + "'");
  }
}

void require_inside(const TaxpayerProfile& p, const BracketInterval& iv, const char* name) {
  if (p.income < iv.lower || p.income > iv.upper) {
    throw PreconditionViolated(std::string(name) + " income " + p.income.str() + " is outside the bracket interval [" +
                               iv.lower.str() + ", " + iv.upper.str() + "]");
  }
}

std::pair<double, double> phi8_quotients(const Phi8Quad& q, TaxFunction& f, const BracketInterval& iv) {
  require_income_only(q.x1, q.y1, "x1 and y1");
  require_income_only(q.x2, q.y2, "x2 and y2");
  if (q.x1.income != q.x2.income) throw PreconditionViolated("x1.income must equal x2.income");
  if (!(q.x2.income < q.y1.income)) throw PreconditionViolated("x2.income must be below y1.income");
  if (!(q.y1.income < q.y2.income)) throw PreconditionViolated("y1.income must be below y2.income");
  require_inside(q.y1, iv, "y1");
  require_inside(q.y2, iv, "y2");
  const double q1 = difference_quotient(f.evaluate(q.y1), f.evaluate(q.x1), q.y1.income, q.x1.income);
  const double q2 = difference_quotient(f.evaluate(q.y2), f.evaluate(q.x2), q.y2.income, q.x2.income);
  return {q1, q2};
}

}  // namespace

Phi8Result check_phi8(const Phi8Quad& quad, TaxFunction& f, const BracketInterval& interval, double rate_bound) {
  const auto [q1, q2] = phi8_quotients(quad, f, interval);
  Phi8Result r{Verdict::Pass, q1, q2, {}};
  if (!(std::fabs(q1 - q2) < rate_bound)) {
    r.verdict = Verdict::Fail;
    r.reason = fmt("difference quotients %.6f and %.6f differ by %.6f, not below %g", q1, q2, std::fabs(q1 - q2),
                   rate_bound);
  }
  return r;
}

Phi8Result check_within_bracket(const Phi8Quad& quad, TaxFunction& f, const BracketInterval& interval,
                                double rate_eps) {
  require_inside(quad.x1, interval, "x1");
  require_inside(quad.x2, interval, "x2");
  const auto [q1, q2] = phi8_quotients(quad, f, interval);
  const double expected = static_cast<double>(interval.rate.units()) / static_cast<double>(Fraction::kScale);
  Phi8Result r{Verdict::Pass, q1, q2, {}};
  if (std::fabs(q1 - expected) > rate_eps || std::fabs(q2 - expected) > rate_eps) {
    r.verdict = Verdict::Fail;
    r.reason = fmt("difference quotients %.6f and %.6f do not match the bracket rate %.6f within %g", q1, q2, expected,
                   rate_eps);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Knees

ScenarioId default_scenario_for(std::string_view label) {
  if (label == "qualified_expenses" || label == "scholarships" || label == "year_in_school") return ScenarioId(4);
  if (label == "medical_expenses" || label == "salt_paid" || label == "mortgage_interest" ||
      label == "charitable_contributions" || label == "casualty_loss") {
    return ScenarioId(5);
  }
  if (label == "gross_distribution" || label == "cost_basis" || label == "prior_basis_recovered" ||
      label == "annuity_payments_this_year") {
    return ScenarioId(6);
  }
  if (label == "num_qualifying_children" || label == "num_other_dependents") return ScenarioId(3);
  return ScenarioId(1);
}

namespace {

Money default_domain_max(std::string_view label) {
  if (label == "income") return dollars(250000);
  if (label == "qualified_expenses" || label == "scholarships") return dollars(6000);
  if (label == "medical_expenses") return dollars(60000);
  if (label == "salt_paid") return dollars(25000);
  if (label == "gross_distribution") return dollars(120000);
  if (find_field(label) && find_field(label)->kind == FieldKind::Count) return dollars(10);
  return dollars(50000);
}

bool aotc_eligible(const TaxpayerProfile& p) {
  return p.year_in_school <= 4 && p.enrollment_status == Enrollment::AtLeastHalfTime;
}

std::vector<Knee> own_knees(const TaxRuleSet& rules, ScenarioId scenario, std::string_view label,
                            const TaxpayerProfile& base) {
  std::vector<Knee> out;
  const int s = scenario.value();
  if (label == "income") {
    if (s == 2) {
      const auto& schedule = rules.eitc();
      const auto& tier =
          schedule[std::min<std::size_t>(static_cast<std::size_t>(std::max(base.num_qualifying_children, 0)),
                                         schedule.size() - 1)];
      const Money po = tier.phase_out_start[base.sts];
      out.push_back({tier.plateau_start, "EITC plateau start"});
      out.push_back({po, "EITC phase-out start"});
      if (tier.phase_out_rate > Fraction{}) {
        out.push_back({po + ceil_div_money(tier.max_credit, tier.phase_out_rate), "EITC fully phased out"});
      }
    }
    if (s == 3) {
      const auto& c = rules.ctc();
      const Money thr = c.phase_out_threshold[base.sts];
      out.push_back({thr, "CTC phase-out threshold"});
      const Money full = c.credit_per_child * base.num_qualifying_children + c.odc_amount * base.num_other_dependents;
      if (full > Money{} && c.reduction_per_step > Money{}) {
        const std::int64_t steps = (full.units() + c.reduction_per_step.units() - 1) / c.reduction_per_step.units();
        out.push_back({thr + c.step_size * steps, "CTC fully phased out"});
      }
    }
    if (base.use_itemized && base.medical_expenses > Money{}) {
      const auto rate = rules.itemized().medical_agi_floor_rate;
      if (rate > Fraction{}) {
        out.push_back({ceil_div_money(base.medical_expenses, rate), "medical expenses fall below the AGI floor"});
      }
    }
  } else if (label == "qualified_expenses" || label == "scholarships") {
    if (s == 4 && aotc_eligible(base)) {
      const auto& a = rules.aotc();
      // Net expense points, translated to the label's own axis.
      std::vector<Knee> net;
      net.push_back({a.tier1_limit, "AOTC tier 1 limit"});
      net.push_back({a.tier2_limit, "AOTC tier 2 limit"});
      const Exact tier1_full = a.tier1_limit * a.tier1_rate;
      const Exact tiers_full = tier1_full + (a.tier2_limit - a.tier1_limit) * a.tier2_rate;
      const Exact cap(a.credit_cap);
      if (cap < tier1_full && a.tier1_rate > Fraction{}) {
        net.push_back({ceil_div_money(a.credit_cap, a.tier1_rate), "AOTC credit cap"});
      } else if (cap < tiers_full && a.tier2_rate > Fraction{}) {
        const Money over = a.credit_cap - tier1_full.round();
        net.push_back({a.tier1_limit + ceil_div_money(over, a.tier2_rate), "AOTC credit cap"});
      }
      for (const auto& k : net) {
        if (label == "qualified_expenses") {
          out.push_back({k.at + base.scholarships, k.what});
        } else if (base.qualified_expenses > k.at) {
          out.push_back({base.qualified_expenses - k.at, k.what});
        }
      }
      if (label == "scholarships" && base.qualified_expenses > Money{}) {
        out.push_back({base.qualified_expenses, "scholarships cover all expenses"});
      }
    }
  } else if (label == "medical_expenses") {
    if (base.use_itemized) {
      const Money floor = (base.income * rules.itemized().medical_agi_floor_rate).round();
      out.push_back({floor, "medical AGI floor"});
    }
  } else if (label == "salt_paid") {
    if (base.use_itemized) out.push_back({rules.itemized().salt_cap, "SALT cap"});
  } else if (label == "gross_distribution") {
    if (s == 6) {
      if (base.annuity_payments_this_year > 0) {
        out.push_back({simplified_method_exclusion(base, rules), "Simplified Method exclusion"});
      } else {
        const Money remaining = base.cost_basis - base.prior_basis_recovered;
        if (remaining > Money{}) out.push_back({remaining, "remaining cost basis"});
      }
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Knee& k) { return k.at <= Money{}; }), out.end());
  return out;
}

TaxpayerProfile with_value(const TaxpayerProfile& base, std::string_view label, Money v) {
  TaxpayerProfile p = base;
  set_numeric_field(p, label, v);
  return p;
}

void merge_knees(std::vector<Knee>& knees) {
  std::stable_sort(knees.begin(), knees.end(), [](const Knee& a, const Knee& b) { return a.at < b.at; });
  std::vector<Knee> merged;
  for (auto& k : knees) {
    if (!merged.empty() && merged.back().at == k.at) {
      if (merged.back().what != k.what) merged.back().what += "; " + k.what;
    } else {
      merged.push_back(std::move(k));
    }
  }
  knees = std::move(merged);
}

}  // namespace

std::vector<Knee> label_knees(const TaxRuleSet& rules, ScenarioId scenario, std::string_view label,
                              const TaxpayerProfile& base) {
  if (!is_numeric_label(label)) return {};
  auto knees = own_knees(rules, scenario, label, base);

  // Bracket thresholds, reached where taxable income crosses them. Taxable
  // income is affine in the label between the label's own knees.
  std::vector<Money> targets = {Money{}};
  for (const Money t : bracket_knees(rules, base.sts)) targets.push_back(t);
  Money far = default_domain_max(label);
  for (const auto& k : knees) far = max(far, k.at * 2);
  for (const Money t : targets) far = max(far, (t + rules.standard_deductions[base.sts].base_amount) * 2);
  if (find_field(label)->kind == FieldKind::Count) far = min(far, dollars(20));

  std::vector<Money> points = {Money{}};
  for (const auto& k : knees) points.push_back(k.at);
  points.push_back(far);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  std::vector<Knee> mapped;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Money a = points[i], b = points[i + 1];
    const Money ua = unfloored_taxable_income(with_value(base, label, a), scenario, rules);
    const Money ub = unfloored_taxable_income(with_value(base, label, b), scenario, rules);
    if (ua == ub) continue;
    for (const Money t : targets) {
      const Money lo = min(ua, ub), hi = max(ua, ub);
      if (!(lo < t && t < hi)) continue;
      const __int128 num = static_cast<__int128>(t.units() - ua.units()) * (b.units() - a.units());
      const __int128 den = ub.units() - ua.units();
      __int128 step = num / den;
      if ((num % den != 0) && ((num < 0) != (den < 0))) --step;  // floor
      const Money v = Money::from_units(a.units() + static_cast<std::int64_t>(step));
      if (!(a < v && v < b)) continue;
      if (find_field(label)->kind == FieldKind::Count && v.units() % Money::kScale != 0) continue;
      mapped.push_back({v, t == Money{} ? std::string("taxable income becomes positive")
                                        : "taxable income reaches bracket threshold " + t.str()});
    }
  }
  knees.insert(knees.end(), mapped.begin(), mapped.end());
  merge_knees(knees);
  return knees;
}

Money label_domain_max(std::string_view label, const std::vector<Knee>& knees) {
  Money m = default_domain_max(label);
  if (!knees.empty()) {
    const Money scaled = whole_dollars(Money::from_units(knees.back().at.units() + knees.back().at.units() / 4));
    m = max(m, max(scaled, knees.back().at + dollars(2000)));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tuple validation and generation

namespace {

std::optional<std::string> placement_problem(const TestTuple& t, const std::vector<Knee>& knees,
                                             const ToleranceConfig& tol) {
  const auto& [xb, x1, x2] = t.values;
  auto interior = [&](Money lo, Money hi) -> const Knee* {
    for (const auto& k : knees) {
      if (lo < k.at && k.at < hi) return &k;
    }
    return nullptr;
  };
  switch (t.category) {
    case HmtCategory::ThresholdJump: {
      if (const auto* k = interior(xb, x1)) {
        return "baseline interval (x_b, x_1) already crosses " + k->what + " at " + k->at.str();
      }
      const bool crossing =
          std::any_of(knees.begin(), knees.end(), [&](const Knee& k) { return x1 <= k.at && k.at < x2; });
      if (!crossing) return std::string("no crossing: no threshold lies in [x_1, x_2)");
      if (x2 - x1 < tol.min_gap) {
        return "jump too small: x_2 - x_1 = " + (x2 - x1).str() + " is below min_gap " + tol.min_gap.str();
      }
      return std::nullopt;
    }
    case HmtCategory::ProportionalIncrease:
      if (const auto* k = interior(xb, x2)) {
        return "crosses " + k->what + " at " + k->at.str() + "; proportional tuples must stay inside one region";
      }
      return std::nullopt;
    case HmtCategory::Saturation:
      if (const auto* k = interior(xb, x2)) {
        return "crosses " + k->what + " at " + k->at.str() + "; saturation tuples must stay inside one region";
      }
      if (std::none_of(knees.begin(), knees.end(), [&](const Knee& k) { return k.at <= xb; })) {
        return std::string("not at or beyond a cap or plateau");
      }
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::string> soundness_problem(const TestTuple& t, const TaxRuleSet& rules, ScenarioId scenario,
                                             const ToleranceConfig& tol) {
  std::array<EvalOutcome, 3> outcomes;
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      outcomes[i] = {compute_total_liability(t.at(i), scenario, rules), {}};
    } catch (const std::exception& e) {
      return std::string("reference cannot evaluate the tuple: ") + e.what();
    }
  }
  const auto d = judge_hmt(t, outcomes, tol);
  if (d.verification_result == Verdict::Fail) return "unsound on reference: " + d.verification_reason;
  return std::nullopt;
}

}  // namespace

std::optional<std::string> validate_tuple(const TestTuple& t, const TaxRuleSet& rules, ScenarioId scenario,
                                          const ToleranceConfig& tol) {
  if (!is_numeric_label(t.target_label)) return "label '" + t.target_label + "' is not numeric";
  const auto& [xb, x1, x2] = t.values;
  if (xb < Money{}) return std::string("values must be non-negative");
  if (!(xb < x1 && x1 < x2)) return std::string("ordering: x_b < x_1 < x_2 is required");
  if (find_field(t.target_label)->kind == FieldKind::Count) {
    for (const Money v : t.values) {
      if (v.units() % Money::kScale != 0) return "label '" + t.target_label + "' takes whole numbers";
    }
  }
  std::vector<Knee> knees;
  try {
    knees = label_knees(rules, scenario, t.target_label, t.base_profile);
  } catch (const std::exception& e) {
    return std::string("reference cannot evaluate the base profile: ") + e.what();
  }
  if (auto problem = placement_problem(t, knees, tol)) return problem;
  return soundness_problem(t, rules, scenario, tol);
}

namespace {

struct Region {
  Money lo;
  Money hi;
  std::string after;  // what starts the region, empty for the domain start
};

std::vector<Region> regions_of(const std::vector<Knee>& knees, Money domain_max) {
  std::vector<Region> out;
  Money lo;
  std::string after;
  for (const auto& k : knees) {
    if (k.at > lo) out.push_back({lo, k.at, after});
    lo = k.at;
    after = k.what;
  }
  if (domain_max > lo) out.push_back({lo, domain_max, after});
  return out;
}

Money fraction_of(Money lo, Money hi, double f) {
  const auto span = static_cast<double>(hi.units() - lo.units());
  return lo + Money::from_units(static_cast<std::int64_t>(std::floor(span * f)));
}

double uniform_between(Rng& rng, double a, double b) { return a + (b - a) * uniform_unit(rng); }

/// Income points inside a CTC reduction staircase are moved to step
/// midpoints so that the credit is linear across the three points.
Money snap_to_steps(Money v, const TaxRuleSet& rules, ScenarioId scenario, std::string_view label,
                    const TaxpayerProfile& base) {
  if (scenario.value() != 3 || label != "income" || !rules.ctc_rules) return v;
  const auto& c = rules.ctc();
  const Money thr = c.phase_out_threshold[base.sts];
  if (v <= thr) return v;
  const std::int64_t step = (v - thr).units() / c.step_size.units();
  return thr + c.step_size * step + Money::from_units(c.step_size.units() / 2);
}

bool region_is_flat(const Region& r, const TaxRuleSet& rules, ScenarioId scenario, std::string_view label,
                    const TaxpayerProfile& base, const ToleranceConfig& tol) {
  std::optional<Money> first;
  for (double f : {0.01, 0.25, 0.5, 0.75, 0.99}) {
    Money v;
    try {
      v = compute_total_liability(with_value(base, label, fraction_of(r.lo, r.hi, f)), scenario, rules);
    } catch (const std::exception&) {
      return false;
    }
    if (!first) {
      first = v;
    } else if ((v > *first ? v - *first : *first - v) > tol.money_eps) {
      return false;
    }
  }
  return true;
}

std::vector<TestTuple> candidates_for(const TaxRuleSet& rules, std::string_view label, HmtCategory category,
                                      ScenarioId scenario, const TaxpayerProfile& base, const std::vector<Knee>& knees,
                                      const ToleranceConfig& tol, Rng& rng) {
  std::vector<TestTuple> out;
  const Money dmax = label_domain_max(label, knees);
  const bool whole = find_field(label)->kind == FieldKind::Count;
  auto make = [&](Money xb, Money x1, Money x2, std::string why) {
    TestTuple t;
    t.base_profile = base;
    t.target_label = std::string(label);
    t.values = {xb, x1, x2};
    t.category = category;
    t.rationale = std::move(why);
    out.push_back(std::move(t));
  };
  const std::string who = std::string(to_string(base.sts));

  if (category == HmtCategory::ThresholdJump) {
    for (std::size_t i = 0; i < knees.size(); ++i) {
      const Money k = knees[i].at;
      const Money prev = i == 0 ? Money{} : knees[i - 1].at;
      const Money next = i + 1 < knees.size() ? knees[i + 1].at : dmax;
      const Money left = k - prev;
      const Money right = next - k;
      if (right < tol.min_gap || left < dollars(2)) continue;
      Money d1 = whole_dollars(min(fraction_of(Money{}, left, uniform_between(rng, 0.3, 0.9)),
                                   dollars(uniform_int(rng, 2000, 8000))));
      if (d1 < dollars(1)) d1 = dollars(1);
      Money d2 = whole_dollars(min(fraction_of(Money{}, right, uniform_between(rng, 0.3, 0.9)),
                                   dollars(uniform_int(rng, 3000, 15000))));
      d2 = min(max(d2, tol.min_gap), right);
      const Money x1 = whole ? whole_dollars(k) : k;
      make(x1 - d1, x1, x1 + d2, knees[i].what + " at " + k.str() + " for " + who);
    }
    return out;
  }

  for (const auto& r : regions_of(knees, dmax)) {
    if (r.hi - r.lo < dollars(30)) continue;
    if (category == HmtCategory::Saturation) {
      if (r.lo == Money{} || !region_is_flat(r, rules, scenario, label, base, tol)) continue;
    }
    Money xb = fraction_of(r.lo, r.hi, uniform_between(rng, 0.02, 0.2));
    Money x1 = fraction_of(r.lo, r.hi, uniform_between(rng, 0.35, 0.65));
    Money x2 = fraction_of(r.lo, r.hi, uniform_between(rng, 0.75, 0.98));
    if (r.hi - r.lo >= dollars(300)) {
      xb = whole_dollars(xb);
      x1 = whole_dollars(x1);
      x2 = whole_dollars(x2);
    }
    xb = snap_to_steps(xb, rules, scenario, label, base);
    x1 = snap_to_steps(x1, rules, scenario, label, base);
    x2 = snap_to_steps(x2, rules, scenario, label, base);
    const std::string where =
        r.after.empty() ? "below the first threshold" : "beyond " + r.after + " at " + r.lo.str();
    make(xb, x1, x2, (category == HmtCategory::Saturation ? "saturation region " : "linear region ") + where +
                         " for " + who);
  }
  return out;
}

}  // namespace

std::vector<TestTuple> generate_tuples(const TaxRuleSet& rules, std::string_view label, HmtCategory category,
                                       ScenarioId scenario, std::size_t count, std::uint64_t seed,
                                       const ToleranceConfig& tol) {
  if (count < 4) throw PreconditionViolated("at least four tuples must be requested");
  if (!is_numeric_label(label)) {
    throw NoThresholds("label '" + std::string(label) + "' is not numeric and has no rate regions");
  }
  constexpr int kRounds = 16;
  std::vector<TestTuple> accepted;
  std::set<std::tuple<int, Money, Money, Money>> seen;
  bool any_candidate = false;
  for (int round = 0; round < kRounds && accepted.size() < count; ++round) {
    Rng rng(mix_seed(seed, std::string(label) + "/" + std::string(to_string(category)) + "/" +
                               std::to_string(scenario.value()) + "/" + std::to_string(round)));
    std::vector<std::vector<TestTuple>> per_status;
    for (const auto status : kAllStatuses) {
      const auto base = base_profile(scenario, status, rules);
      std::vector<Knee> knees;
      try {
        knees = label_knees(rules, scenario, label, base);
      } catch (const EvaluationError&) {
        per_status.emplace_back();
        continue;
      }
      per_status.push_back(candidates_for(rules, label, category, scenario, base, knees, tol, rng));
    }
    // Interleave statuses so that small counts still cover all of them.
    std::size_t longest = 0;
    for (const auto& v : per_status) longest = std::max(longest, v.size());
    for (std::size_t i = 0; i < longest && accepted.size() < count; ++i) {
      for (auto& v : per_status) {
        if (i >= v.size() || accepted.size() >= count) continue;
        any_candidate = true;
        auto& t = v[i];
        const auto key = std::make_tuple(static_cast<int>(t.base_profile.sts), t.values[0], t.values[1], t.values[2]);
        if (seen.count(key)) continue;
        if (validate_tuple(t, rules, scenario, tol)) continue;
        seen.insert(key);
        accepted.push_back(std::move(t));
      }
    }
    if (!any_candidate) break;
  }
  if (accepted.empty()) {
    throw NoThresholds("no usable " + std::string(to_string(category)) + " boundary for '" + std::string(label) +
                       "' in scenario " + std::to_string(scenario.value()));
  }
  return accepted;
}

SuggestionParse parse_suggested_tuples(std::string_view document, const TaxRuleSet& rules, HmtCategory category,
                                       const TupleContext& context, const ToleranceConfig& tol) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("suggestions are not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("suggested_tuples") || !root.at("suggested_tuples").is_array()) {
    throw MalformedDocument("expected an object with a \"suggested_tuples\" array");
  }
  SuggestionParse out;
  const auto& items = root.at("suggested_tuples");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    auto reject = [&](std::string reason) { out.rejected.push_back({i, std::move(reason)}); };
    if (!item.is_object() || !item.contains("input_tuple")) {
      reject("suggestion must be an object with an input_tuple");
      continue;
    }
    const auto& values = item.at("input_tuple");
    if (!values.is_array() || values.size() != 3 ||
        !std::all_of(values.begin(), values.end(), [](const json& v) { return v.is_number(); })) {
      reject("input_tuple must hold exactly three numbers");
      continue;
    }
    TestTuple t;
    t.base_profile = context.base;
    t.target_label = context.label;
    t.category = category;
    if (item.contains("reason") && item.at("reason").is_string()) t.rationale = item.at("reason").get<std::string>();
    if (item.contains("filing_status")) {
      const auto s = item.at("filing_status").is_string()
                         ? parse_filing_status(item.at("filing_status").get<std::string>())
                         : std::nullopt;
      if (!s) {
        reject("unknown filing_status");
        continue;
      }
      t.base_profile.sts = *s;
    }
    bool ok = true;
    for (std::size_t j = 0; j < 3; ++j) {
      try {
        const auto& v = values[j];
        t.values[j] = v.is_number_integer() ? Money::whole(v.get<std::int64_t>()) : Money::from_double(v.get<double>());
      } catch (const std::invalid_argument&) {
        ok = false;
      }
    }
    if (!ok) {
      reject("values must have at most two decimal places");
      continue;
    }
    if (auto problem = validate_tuple(t, rules, context.scenario, tol)) {
      reject(*problem);
      continue;
    }
    out.accepted.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompt

std::string render_suggestion_prompt(HmtCategory category, const TaxRuleSet& rules, std::string_view label,
                                     std::optional<ScenarioId> scenario, const ToleranceConfig& tol) {
  const ScenarioId sc = scenario.value_or(default_scenario_for(label));
  std::ostringstream out;
  const std::string name(label);
  switch (category) {
    case HmtCategory::ThresholdJump:
      out << "Goal: Suggest input tuples for `" << name << "` for a Threshold Jump test.\n\n"
          << "Understanding the Test: Verify that the software correctly handles discrete jumps in the rate of change "
             "when an input crosses a tax-rule boundary (e.g., a tax bracket).\n\n"
          << "Key Requirements for Tuples (x_b, x_1, x_2):\n"
          << "- Threshold Targeting: Identify a specific boundary from the rule thresholds listed below.\n"
          << "- Values Around Threshold: Place x_b and x_1 just below the threshold (x_1 may equal it), and x_2 just "
             "above, ensuring a crossing between x_1 and x_2. No other threshold may lie between x_b and x_1.\n"
          << "- Meaningful Jumps: Ensure the increment from x_1 to x_2 is at least " << tol.min_gap.str()
          << " so that it triggers a distinct change in the tax output.\n\n";
      break;
    case HmtCategory::ProportionalIncrease:
      out << "Goal: Suggest input tuples for `" << name << "` for a Proportional Increase test.\n\n"
          << "Understanding the Test: Verify that the tax output changes at the same rate for incremental input "
             "changes while the input stays inside one linear region of the rules.\n\n"
          << "Key Requirements for Tuples (x_b, x_1, x_2):\n"
          << "- Region Targeting: Pick two adjacent thresholds from the list below.\n"
          << "- Values Inside Region: Place x_b < x_1 < x_2 strictly between those two thresholds.\n"
          << "- Spread: Keep the three values well apart so that the rates of change are measurable.\n\n";
      break;
    case HmtCategory::Saturation:
      out << "Goal: Suggest input tuples for `" << name << "` for a Saturation test.\n\n"
          << "Understanding the Test: Verify that tax outputs remain invariant when the input is within a saturation "
             "range, past a cap or on a plateau.\n\n"
          << "Key Requirements for Tuples (x_b, x_1, x_2):\n"
          << "- Cap Targeting: Identify a cap or plateau from the saturation ranges listed below.\n"
          << "- Values Beyond Cap: Place x_b, x_1 and x_2 at or beyond the start of that range and before the next "
             "threshold.\n"
          << "- Spread: Keep the three values well apart.\n\n";
      break;
  }

  out << "Rule thresholds for `" << name << "` (scenario " << sc.value() << ": " << scenario_title(sc)
      << "; all other fields fixed as in the base profile):\n";
  for (const auto status : kAllStatuses) {
    const auto base = base_profile(sc, status, rules);
    out << "- " << to_string(status) << ":";
    std::vector<Knee> knees;
    try {
      knees = label_knees(rules, sc, label, base);
    } catch (const std::exception& e) {
      out << " unavailable (" << e.what() << ")\n";
      continue;
    }
    if (knees.empty()) out << " none";
    for (std::size_t i = 0; i < knees.size(); ++i) {
      out << (i ? "," : "") << " " << knees[i].at.str() << " (" << knees[i].what << ")";
    }
    out << "\n";
    if (category == HmtCategory::Saturation) {
      out << "  saturation ranges:";
      bool any = false;
      for (const auto& r : regions_of(knees, label_domain_max(label, knees))) {
        if (r.lo == Money{} || !region_is_flat(r, rules, sc, label, base, tol)) continue;
        out << (any ? "," : "") << " [" << r.lo.str() << ", " << r.hi.str() << "]";
        any = true;
      }
      out << (any ? "\n" : " none\n");
    }
  }
  const auto base = base_profile(sc, FilingStatus::Single, rules);
  out << "\nBase profile (single filer; `" << name << "` is replaced by each tuple value):\n"
      << serialize_profile(base) << "\n\n";

  out << "Task: Suggest at least four tuples testing different "
      << (category == HmtCategory::ThresholdJump  ? "threshold jumps"
          : category == HmtCategory::Saturation ? "saturation ranges"
                                                  : "linear regions")
      << ". Respond with a valid JSON containing a list of tuples.\n\n";

  out << "Example Response Format:\n";
  JsonWriter w(2);
  w.begin_object().key("suggested_tuples").begin_array();
  try {
    const auto examples = generate_tuples(rules, label, category, sc, 4, 0, tol);
    const auto it = std::find_if(examples.begin(), examples.end(),
                                 [](const TestTuple& t) { return t.base_profile.sts == FilingStatus::Single; });
    const auto& t = it != examples.end() ? *it : examples.front();
    w.begin_object().key("input_tuple").begin_array();
    for (const Money v : t.values) w.raw_number(v.str());
    w.end_array().key("reason").value("Testing " + t.rationale).end_object();
  } catch (const Error&) {
    // No usable boundary: the response format is shown without an example.
  }
  w.end_array().end_object();
  out << w.take() << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Plan and campaign

const std::vector<HmtPlanEntry>& hmt_plan(ScenarioId scenario) {
  using C = HmtCategory;
  static const std::vector<std::vector<HmtPlanEntry>> plans = {
      {{"income", {C::ThresholdJump, C::ProportionalIncrease}}},
      {{"income", {C::ThresholdJump, C::ProportionalIncrease, C::Saturation}}},
      {{"income", {C::ThresholdJump, C::ProportionalIncrease}}},
      {{"qualified_expenses", {C::ThresholdJump, C::ProportionalIncrease, C::Saturation}}},
      {{"income", {C::ThresholdJump, C::ProportionalIncrease}},
       {"medical_expenses", {C::ThresholdJump, C::ProportionalIncrease}},
       {"salt_paid", {C::ThresholdJump, C::ProportionalIncrease, C::Saturation}}},
      {{"gross_distribution", {C::ThresholdJump, C::ProportionalIncrease}},
       {"income", {C::ThresholdJump, C::ProportionalIncrease}}},
  };
  return plans[static_cast<std::size_t>(scenario.value() - 1)];
}

std::vector<TestTuple> default_tuples(const TaxRuleSet& rules, ScenarioId scenario, std::uint64_t seed,
                                      const ToleranceConfig& tol, std::size_t per_category) {
  std::vector<TestTuple> out;
  for (const auto& entry : hmt_plan(scenario)) {
    for (const auto category : entry.categories) {
      try {
        auto tuples = generate_tuples(rules, entry.label, category, scenario, per_category, seed, tol);
        out.insert(out.end(), std::make_move_iterator(tuples.begin()), std::make_move_iterator(tuples.end()));
      } catch (const NoThresholds&) {
      } catch (const MissingRuleSection&) {
      }
    }
  }
  return out;
}

std::vector<Discrepancy> run_suite(TaxFunction& f, const std::vector<TestTuple>& tuples,
                                   const std::vector<PairwiseRelation>& relations, std::size_t pair_count,
                                   const TaxRuleSet& rules, std::uint64_t seed, const ToleranceConfig& tol,
                                   Execution mode) {
  std::vector<Discrepancy> failures;
  for (const auto& rel : relations) {
    if (!rel.applies_to(f.scenario())) continue;
    const auto pairs = generate_pairs(rel, f.scenario(), rules, pair_count, seed);
    std::vector<TaxpayerProfile> profiles;
    profiles.reserve(pairs.size() * 2);
    for (const auto& [x, xp] : pairs) {
      profiles.push_back(x);
      profiles.push_back(xp);
    }
    const auto outcomes = evaluate_batch(f, profiles, mode);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      auto d = judge_pair(rel, pairs[i].first, pairs[i].second, outcomes[2 * i], outcomes[2 * i + 1], tol);
      if (d.verification_result == Verdict::Fail) failures.push_back(std::move(d));
    }
  }
  if (!tuples.empty()) {
    std::vector<TaxpayerProfile> profiles;
    profiles.reserve(tuples.size() * 3);
    for (const auto& t : tuples) {
      for (std::size_t i = 0; i < 3; ++i) profiles.push_back(t.at(i));
    }
    const auto outcomes = evaluate_batch(f, profiles, mode);
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      auto d = judge_hmt(tuples[i], {outcomes[3 * i], outcomes[3 * i + 1], outcomes[3 * i + 2]}, tol);
      if (d.verification_result == Verdict::Fail) failures.push_back(std::move(d));
    }
  }
  sort_discrepancies(failures);
  return failures;
}

}  // namespace taxmorph
