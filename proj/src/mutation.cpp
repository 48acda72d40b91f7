#include "taxmorph/mutation.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/json_writer.hpp"

namespace taxmorph {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const char* const kKnees[] = {"salt_cap", "ctc_threshold", "aotc_tier1_limit", "aotc_tier2_limit",
                              "eitc_plateau_start"};

std::optional<std::size_t> bracket_index(std::string_view knee) {
  if (knee.size() < 10 || knee.substr(0, 8) != "bracket[" || knee.back() != ']') return std::nullopt;
  const auto digits = knee.substr(8, knee.size() - 9);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(std::stoul(std::string(digits)));
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

template <class T>
T parse_number(std::string_view text, std::string_view what) {
  try {
    return T::parse(text);
  } catch (const std::invalid_argument&) {
    throw InputError("mutant " + std::string(what) + ": '" + std::string(text) + "' is not a decimal");
  }
}

Money huge() { return dollars(1'000'000'000'000LL); }

}  // namespace

std::string operator_text(const MutationOperator& op) {
  return std::visit(Overloaded{
                        [](const FlatRate& o) { return "flat_rate:" + o.rate.str(); },
                        [](const ThresholdShift& o) { return "threshold_shift:" + o.knee + ":" + o.delta.str(); },
                        [](const CapRemoval& o) { return "cap_removal:" + o.which; },
                        [](const FloorRateChange& o) { return "floor_rate_change:" + o.rate.str(); },
                        [](const TierCollapse&) { return std::string("tier_collapse"); },
                        [](const PhaseOutSkip&) { return std::string("phase_out_skip"); },
                        [](const PenaltyAlwaysWaived&) { return std::string("penalty_always_waived"); },
                        [](const RoundingTruncate&) { return std::string("rounding_truncate"); },
                    },
                    op);
}

MutationOperator parse_operator(std::string_view text) {
  const auto parts = split(text, ':');
  const auto name = parts.front();
  auto arity = [&](std::size_t n) {
    if (parts.size() != n + 1) {
      throw InputError("mutant operator '" + std::string(name) + "' takes " + std::to_string(n) + " argument(s)");
    }
  };
  if (name == "flat_rate") {
    arity(1);
    return FlatRate{parse_number<Fraction>(parts[1], "rate")};
  }
  if (name == "threshold_shift") {
    arity(2);
    const std::string knee(parts[1]);
    if (!bracket_index(knee) && std::find(std::begin(kKnees), std::end(kKnees), knee) == std::end(kKnees)) {
      throw InputError("unknown knee '" + knee + "'");
    }
    return ThresholdShift{knee, parse_number<Money>(parts[2], "delta")};
  }
  if (name == "cap_removal") {
    arity(1);
    if (parts[1] != "salt_cap" && parts[1] != "credit_cap") {
      throw InputError("cap_removal takes salt_cap or credit_cap, not '" + std::string(parts[1]) + "'");
    }
    return CapRemoval{std::string(parts[1])};
  }
  if (name == "floor_rate_change") {
    arity(1);
    return FloorRateChange{parse_number<Fraction>(parts[1], "rate")};
  }
  if (name == "tier_collapse") {
    arity(0);
    return TierCollapse{};
  }
  if (name == "phase_out_skip") {
    arity(0);
    return PhaseOutSkip{};
  }
  if (name == "penalty_always_waived") {
    arity(0);
    return PenaltyAlwaysWaived{};
  }
  if (name == "rounding_truncate") {
    arity(0);
    return RoundingTruncate{};
  }
  throw InputError("unknown mutant operator '" + std::string(name) + "'");
}

std::string MutantSpec::id() const { return "s" + std::to_string(scenario.value()) + "/" + operator_text(op); }

bool MutantSpec::is_null() const {
  const auto* shift = std::get_if<ThresholdShift>(&op);
  return shift && shift->delta == Money{};
}

void check_applicable(const MutantSpec& spec, const TaxRuleSet& rules) {
  const int s = spec.scenario.value();
  auto need = [&](bool ok, const std::string& why) {
    if (!ok) throw InapplicableOperator(operator_text(spec.op) + " does not apply to scenario " + std::to_string(s) + ": " + why);
  };
  std::visit(Overloaded{
                 [&](const FlatRate& o) { need(o.rate.units() >= 0, "negative rate"); },
                 [&](const ThresholdShift& o) {
                   if (const auto row = bracket_index(o.knee)) {
                     for (const auto status : kAllStatuses) {
                       const auto& rows = rules.tax_brackets[status];
                       need(*row + 1 < rows.size(), "no movable bracket row " + std::to_string(*row));
                       const Money moved = rows[*row].threshold_amount + o.delta;
                       const Money lower = *row == 0 ? Money{} : rows[*row - 1].threshold_amount;
                       need(moved > lower && moved < rows[*row + 1].threshold_amount,
                            "shift would reorder the brackets");
                     }
                     return;
                   }
                   if (o.knee == "salt_cap") return need(s == 5 && rules.itemized_rules.has_value(), "itemizing only");
                   if (o.knee == "ctc_threshold") return need(s == 3 && rules.ctc_rules.has_value(), "CTC only");
                   if (o.knee == "eitc_plateau_start") return need(s == 2 && rules.eitc_schedule.has_value(), "EITC only");
                   need(s == 4 && rules.aotc_rules.has_value(), "AOTC only");
                 },
                 [&](const CapRemoval& o) {
                   if (o.which == "salt_cap") return need(s == 5 && rules.itemized_rules.has_value(), "itemizing only");
                   need(s == 4 && rules.aotc_rules.has_value(), "AOTC only");
                 },
                 [&](const FloorRateChange&) { need(s == 5 && rules.itemized_rules.has_value(), "itemizing only"); },
                 [&](const TierCollapse&) { need(s == 4 && rules.aotc_rules.has_value(), "AOTC only"); },
                 [&](const PhaseOutSkip&) {
                   need((s == 2 && rules.eitc_schedule) || (s == 3 && rules.ctc_rules), "EITC or CTC only");
                 },
                 [&](const PenaltyAlwaysWaived&) { need(s == 6 && rules.retirement_rules.has_value(), "1099-R only"); },
                 [&](const RoundingTruncate&) {},
             },
             spec.op);
}

TaxRuleSet mutate_rules(const MutantSpec& spec, const TaxRuleSet& rules) {
  check_applicable(spec, rules);
  TaxRuleSet m = rules;
  std::visit(Overloaded{
                 [&](const FlatRate& o) {
                   for (const auto status : kAllStatuses) {
                     auto& rows = m.tax_brackets[status];
                     rows = {BracketRow{rows.back().threshold_amount, o.rate}};
                   }
                 },
                 [&](const ThresholdShift& o) {
                   if (const auto row = bracket_index(o.knee)) {
                     for (const auto status : kAllStatuses) m.tax_brackets[status][*row].threshold_amount += o.delta;
                   } else if (o.knee == "salt_cap") {
                     m.itemized_rules->salt_cap += o.delta;
                   } else if (o.knee == "ctc_threshold") {
                     for (auto& t : m.ctc_rules->phase_out_threshold.values) t += o.delta;
                   } else if (o.knee == "eitc_plateau_start") {
                     for (auto& tier : *m.eitc_schedule) tier.plateau_start += o.delta;
                   } else if (o.knee == "aotc_tier1_limit") {
                     m.aotc_rules->tier1_limit += o.delta;
                   } else {
                     m.aotc_rules->tier2_limit += o.delta;
                   }
                 },
                 [&](const CapRemoval& o) {
                   if (o.which == "salt_cap") {
                     m.itemized_rules->salt_cap = huge();
                   } else {
                     m.aotc_rules->credit_cap = huge();
                   }
                 },
                 [&](const FloorRateChange& o) { m.itemized_rules->medical_agi_floor_rate = o.rate; },
                 [&](const TierCollapse&) { m.aotc_rules->tier2_rate = m.aotc_rules->tier1_rate; },
                 [&](const PhaseOutSkip&) {
                   if (spec.scenario.value() == 2) {
                     for (auto& tier : *m.eitc_schedule) tier.phase_out_rate = Fraction{};
                   } else {
                     m.ctc_rules->reduction_per_step = Money{};
                   }
                 },
                 [&](const PenaltyAlwaysWaived&) { m.retirement_rules->penalty_rate = Fraction{}; },
                 [&](const RoundingTruncate&) {},
             },
             spec.op);
  return m;
}

MutantFunction::MutantFunction(MutantSpec spec, const TaxRuleSet& rules)
    : spec_(std::move(spec)),
      rules_(mutate_rules(spec_, rules)),
      rounding_(std::holds_alternative<RoundingTruncate>(spec_.op) ? Rounding::TowardZero
                                                                   : Rounding::HalfAwayFromZero) {}

Money MutantFunction::evaluate(const TaxpayerProfile& profile) {
  return compute_total_liability(profile, spec_.scenario, rules_, rounding_);
}

CandidateProgram materialize_mutant(const MutantSpec& spec, const TaxRuleSet& rules, const std::string& executable) {
  check_applicable(spec, rules);
  CandidateProgram p;
  p.command = {executable,
               "candidate",
               "--scenario",
               std::to_string(spec.scenario.value()),
               "--rules-inline",
               nlohmann::json::parse(serialize_ruleset(rules)).dump(),
               "--mutant",
               operator_text(spec.op)};
  return p;
}

std::vector<MutantSpec> standard_mutants() {
  return {
      {FlatRate{Fraction::parse("0.12")}, ScenarioId(1)},
      {ThresholdShift{"bracket[1]", dollars(1000)}, ScenarioId(1)},
      {CapRemoval{"salt_cap"}, ScenarioId(5)},
      {FloorRateChange{Fraction::parse("0.10")}, ScenarioId(5)},
      {TierCollapse{}, ScenarioId(4)},
      {PhaseOutSkip{}, ScenarioId(3)},
      {PenaltyAlwaysWaived{}, ScenarioId(6)},
      {RoundingTruncate{}, ScenarioId(6)},
  };
}

MutantSpec null_mutant() { return {ThresholdShift{"bracket[1]", Money{}}, ScenarioId(1)}; }

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::Corpus:
      return "corpus";
    case Technique::Mt:
      return "mt";
    case Technique::Hmt:
      return "hmt";
  }
  return "?";
}

namespace {

struct ScenarioInputs {
  std::vector<TestCase> corpus;
  std::vector<TestTuple> tuples;
};

std::string describe_record(const Discrepancy& d) {
  return d.test_category + " on " + d.input + " [" + std::string(to_string(d.filing_status)) + "] (" + d.base_value +
         ", " + d.new_value_1 + ", " + d.new_value_2 + "): " + d.verification_reason;
}

MatrixCell run_cell(Technique t, const MutantSpec& spec, const TaxRuleSet& rules, const ScenarioInputs& in,
                    const MatrixConfig& config) {
  MatrixCell cell;
  std::unique_ptr<TaxFunction> f;
  try {
    if (config.executable) {
      f = std::make_unique<CandidateFunction>(materialize_mutant(spec, rules, *config.executable));
    } else {
      f = std::make_unique<MutantFunction>(spec, rules);
    }
  } catch (const Error& e) {
    cell.error = e.what();
    return cell;
  }
  if (t == Technique::Corpus) {
    const auto eval = evaluate_function(*f, in.corpus, config.tol.money_eps, Execution::Serial);
    for (std::size_t i = 0; i < in.corpus.size(); ++i) {
      const auto& r = eval.results[i];
      if (r.passed) continue;
      cell.killed = true;
      cell.evidence = in.corpus[i].note + " [" + std::string(to_string(in.corpus[i].profile.sts)) +
                      "]: expected " + in.corpus[i].expected.fixed() + ", got " +
                      (r.actual ? r.actual->fixed() : "error: " + r.error);
      break;
    }
    return cell;
  }
  static const std::vector<TestTuple> kNoTuples;
  const auto records = run_suite(*f, t == Technique::Hmt ? in.tuples : kNoTuples, config.relations,
                                 config.pair_count, rules, config.seed, config.tol, Execution::Serial);
  if (!records.empty()) {
    cell.killed = true;
    cell.evidence = describe_record(records.front());
  }
  return cell;
}

}  // namespace

DetectionMatrix detection_matrix(const std::vector<MutantSpec>& mutants, const TaxRuleSet& rules,
                                 const MatrixConfig& config) {
  std::map<int, ScenarioInputs> inputs;
  for (const auto& spec : mutants) {
    const int s = spec.scenario.value();
    if (inputs.count(s)) continue;
    ScenarioInputs& in = inputs[s];
    in.corpus = generate_corpus(rules, spec.scenario, config.n_random, config.seed);
    in.tuples = default_tuples(rules, spec.scenario, config.seed, config.tol, config.tuples_per_category);
  }

  DetectionMatrix m;
  m.rows.resize(mutants.size());
  const auto n = static_cast<std::ptrdiff_t>(mutants.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    MatrixRow& row = m.rows[static_cast<std::size_t>(i)];
    row.spec = mutants[static_cast<std::size_t>(i)];
    try {
      check_applicable(row.spec, rules);
      const ScenarioInputs& in = inputs.at(row.spec.scenario.value());
      for (std::size_t c = 0; c < kAllTechniques.size(); ++c) {
        row.cells[c] = run_cell(kAllTechniques[c], row.spec, rules, in, config);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  return m;
}

std::string matrix_json(const DetectionMatrix& m) {
  JsonWriter w(2);
  w.begin_object().key("mutants").begin_array();
  for (const auto& row : m.rows) {
    w.begin_object()
        .key("id")
        .value(row.spec.id())
        .key("operator")
        .value(operator_text(row.spec.op))
        .key("scenario")
        .value(row.spec.scenario.value())
        .key("null")
        .value(row.spec.is_null());
    if (!row.error.empty()) w.key("error").value(row.error);
    for (std::size_t c = 0; c < kAllTechniques.size(); ++c) {
      const auto& cell = row.cells[c];
      w.key(to_string(kAllTechniques[c])).begin_object().key("result").value(cell.killed ? "killed" : "survived");
      if (cell.killed) w.key("evidence").value(cell.evidence);
      if (!cell.error.empty()) w.key("error").value(cell.error);
      w.end_object();
    }
    w.end_object();
  }
  w.end_array().end_object();
  return w.take() + "\n";
}

std::string matrix_table(const DetectionMatrix& m) {
  std::size_t width = 6;
  for (const auto& row : m.rows) width = std::max(width, row.spec.id().size());
  std::ostringstream out;
  auto pad = [&](const std::string& s, std::size_t n) { return s + std::string(n > s.size() ? n - s.size() : 0, ' '); };
  out << pad("mutant", width) << "  " << pad("corpus", 9) << pad("mt", 9) << "hmt\n";
  for (const auto& row : m.rows) {
    out << pad(row.spec.id(), width) << "  ";
    if (!row.error.empty()) {
      out << "error: " << row.error << "\n";
      continue;
    }
    for (std::size_t c = 0; c < kAllTechniques.size(); ++c) {
      const auto& cell = row.cells[c];
      const std::string text = !cell.error.empty() ? "error" : cell.killed ? "killed" : "survived";
      out << (c + 1 < kAllTechniques.size() ? pad(text, 9) : text);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace taxmorph
