#include "taxmorph/harness.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "json.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/json_writer.hpp"
#include "taxmorph/sampling.hpp"

namespace taxmorph {

using nlohmann::json;

std::string_view to_string(CaseOrigin o) { return o == CaseOrigin::Boundary ? "boundary" : "random"; }

std::string_view to_string(RefineOutcome o) {
  return o == RefineOutcome::Converged ? "CONVERGED" : "MaxRoundsExceeded";
}

// ---------------------------------------------------------------------------
// Corpus

namespace {

class CorpusBuilder {
 public:
  CorpusBuilder(const TaxRuleSet& rules, ScenarioId scenario, std::vector<std::string>* dropped)
      : rules_(rules), scenario_(scenario), dropped_(dropped) {}

  void add(const TaxpayerProfile& p, std::string note, CaseOrigin origin = CaseOrigin::Boundary) {
    if (!seen_.insert(serialize_profile(p)).second) return;
    try {
      cases_.push_back({p, scenario_, compute_total_liability(p, scenario_, rules_), origin, std::move(note)});
    } catch (const std::exception& e) {
      if (dropped_) dropped_->push_back(note + ": " + e.what());
    }
  }

  /// t - 1, t, t + 1 (whole dollars) on a money or count label.
  void around(const TaxpayerProfile& base, std::string_view label, Money t, const std::string& what) {
    for (int d = -1; d <= 1; ++d) {
      const Money v = t + dollars(d);
      if (v < Money{}) continue;
      TaxpayerProfile p = base;
      set_numeric_field(p, label, v);
      add(p, std::string(label) + " " + v.str() + " near " + what);
    }
  }

  void knees_of(const TaxpayerProfile& base, std::string_view label) {
    std::vector<Knee> knees;
    try {
      knees = label_knees(rules_, scenario_, label, base);
    } catch (const std::exception& e) {
      if (dropped_) dropped_->push_back(std::string(label) + " knees: " + e.what());
      return;
    }
    for (const auto& k : knees) around(base, label, k.at, k.what);
  }

  std::vector<TestCase> take() { return std::move(cases_); }

 private:
  const TaxRuleSet& rules_;
  ScenarioId scenario_;
  std::vector<std::string>* dropped_;
  std::set<std::string> seen_;
  std::vector<TestCase> cases_;
};

void boundary_cases(CorpusBuilder& b, const TaxRuleSet& rules, ScenarioId scenario, FilingStatus status) {
  const auto base = base_profile(scenario, status, rules);
  const int s = scenario.value();
  b.add(base, "base profile");

  // Raw rule thresholds on the scenario's primary axis.
  for (const auto& row : rules.tax_brackets[status]) {
    b.around(base, "income", row.threshold_amount, "bracket threshold " + row.threshold_amount.str());
  }
  b.around(base, "income", rules.standard_deductions[status].base_amount, "standard deduction");
  for (const auto& entry : hmt_plan(scenario)) b.knees_of(base, entry.label);

  // Standard deduction add-ons.
  for (int age : {kElderlyAge - 1, kElderlyAge, kElderlyAge + 1}) {
    TaxpayerProfile p = base;
    p.use_itemized = false;
    p.age = age;
    b.add(p, "age " + std::to_string(age) + " around the elderly add-on");
    p.blind = true;
    b.add(p, "blind, age " + std::to_string(age));
    if (is_joint(status)) {
      p.spouse_age = age;
      p.spouse_blind = true;
      b.add(p, "spouse elderly and blind, age " + std::to_string(age));
    }
  }

  switch (s) {
    case 2:
      for (int children = 0; children <= 4; ++children) {
        TaxpayerProfile p = base;
        p.num_qualifying_children = children;
        const auto& schedule = rules.eitc();
        const auto& tier = schedule[std::min<std::size_t>(static_cast<std::size_t>(children), schedule.size() - 1)];
        b.around(p, "income", tier.plateau_start, "EITC plateau start");
        b.around(p, "income", tier.phase_out_start[status], "EITC phase-out start");
        b.knees_of(p, "income");
      }
      break;
    case 3:
      for (int children = 0; children <= 3; ++children) {
        for (int others = 0; others <= 2; ++others) {
          TaxpayerProfile p = base;
          p.num_qualifying_children = children;
          p.num_other_dependents = others;
          b.around(p, "income", rules.ctc().phase_out_threshold[status], "CTC phase-out threshold");
          b.knees_of(p, "income");
        }
      }
      break;
    case 4: {
      const auto& a = rules.aotc();
      for (const Money t : {a.tier1_limit, a.tier2_limit, a.credit_cap}) {
        b.around(base, "qualified_expenses", t, "AOTC limit " + t.str());
      }
      for (int year : {4, 5}) {
        TaxpayerProfile p = base;
        p.year_in_school = year;
        b.add(p, "year in school " + std::to_string(year));
      }
      TaxpayerProfile part_time = base;
      part_time.enrollment_status = Enrollment::LessThanHalfTime;
      b.add(part_time, "less than half-time enrollment");
      TaxpayerProfile funded = base;
      funded.scholarships = dollars(1000);
      b.knees_of(funded, "qualified_expenses");
      b.around(funded, "scholarships", funded.qualified_expenses, "scholarships cover all expenses");
      break;
    }
    case 5: {
      b.around(base, "salt_paid", rules.itemized().salt_cap, "SALT cap");
      TaxpayerProfile medical = base;
      medical.medical_expenses = dollars(10000);
      b.knees_of(medical, "income");
      TaxpayerProfile standard = base;
      standard.use_itemized = false;
      b.add(standard, "standard deduction chosen");
      break;
    }
    case 6: {
      const auto& r = rules.retirement();
      const std::int64_t floor_age = r.penalty_age_threshold.units() / Years::kScale;
      const std::int64_t ceil_age = (r.penalty_age_threshold.units() + Years::kScale - 1) / Years::kScale;
      std::set<std::int64_t> ages = {floor_age - 1, floor_age, ceil_age, ceil_age + 1};
      for (const auto& [code, _] : r.distribution_codes) {
        for (const auto age : ages) {
          if (age < 0) continue;
          TaxpayerProfile p = base;
          p.age = static_cast<int>(age);
          p.distribution_code = normalize_distribution_code(code, rules);
          b.add(p, "code " + code + ", age " + std::to_string(age) + " around the penalty age");
        }
      }
      for (const auto& row : r.simplified_method_table) {
        for (int d = 0; d <= 1; ++d) {
          TaxpayerProfile p = base;
          p.cost_basis = dollars(31200);
          p.annuity_payments_this_year = 12;
          p.annuity_start_age = row.age_upper_bound + d;
          b.add(p, "annuity start age " + std::to_string(p.annuity_start_age));
          b.knees_of(p, "gross_distribution");
          p.prior_basis_recovered = p.cost_basis;
          b.add(p, "annuity basis exhausted, start age " + std::to_string(p.annuity_start_age));
        }
      }
      TaxpayerProfile basis = base;
      basis.cost_basis = dollars(5000);
      b.knees_of(basis, "gross_distribution");
      break;
    }
    default:
      break;
  }
}

}  // namespace

std::vector<TestCase> generate_corpus(const TaxRuleSet& rules, ScenarioId scenario, std::size_t n_random,
                                      std::uint64_t seed, std::vector<std::string>* dropped) {
  CorpusBuilder b(rules, scenario, dropped);
  for (const auto status : kAllStatuses) {
    try {
      boundary_cases(b, rules, scenario, status);
    } catch (const MissingRuleSection& e) {
      if (dropped) dropped->push_back(std::string("boundary cases: ") + e.what());
    }
  }
  Rng rng(mix_seed(seed, "corpus/" + std::to_string(scenario.value())));
  for (std::size_t i = 0; i < n_random; ++i) {
    b.add(random_profile(scenario, rules, rng), "random #" + std::to_string(i), CaseOrigin::Random);
  }
  return b.take();
}

std::string serialize_corpus(const std::vector<TestCase>& corpus, ScenarioId scenario) {
  JsonWriter w(2);
  w.begin_object().key("scenario").value(scenario.value()).key("cases").begin_array();
  for (const auto& c : corpus) {
    w.begin_object()
        .key("origin")
        .value(to_string(c.origin))
        .key("note")
        .value(c.note)
        .key("expected")
        .money(c.expected)
        .key("profile")
        .raw_json(serialize_profile(c.profile))
        .end_object();
  }
  w.end_array().end_object();
  return w.take() + "\n";
}

std::vector<TestCase> parse_corpus(std::string_view document, const TaxRuleSet& rules) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("corpus is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("scenario") || !root.at("scenario").is_number_integer()) {
    throw SchemaViolation("scenario", "expected an integer scenario");
  }
  const ScenarioId scenario(root.at("scenario").get<int>());
  if (!root.contains("cases") || !root.at("cases").is_array()) throw SchemaViolation("cases", "expected an array");
  std::vector<TestCase> out;
  const auto& cases = root.at("cases");
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string path = "cases[" + std::to_string(i) + "]";
    const auto& node = cases[i];
    if (!node.is_object() || !node.contains("profile") || !node.contains("expected")) {
      throw SchemaViolation(path, "expected an object with profile and expected");
    }
    TestCase c;
    c.scenario = scenario;
    c.profile = profile_from_json(node.at("profile"), rules, path + ".profile");
    const auto& expected = node.at("expected");
    if (!expected.is_number()) throw SchemaViolation(path + ".expected", "expected a number");
    try {
      c.expected = expected.is_number_integer() ? Money::whole(expected.get<std::int64_t>())
                                                : Money::from_double(expected.get<double>());
    } catch (const std::invalid_argument&) {
      throw SchemaViolation(path + ".expected", "money must have at most 2 fractional digits");
    }
    if (node.contains("origin") && node.at("origin") == "random") c.origin = CaseOrigin::Random;
    if (node.contains("note") && node.at("note").is_string()) c.note = node.at("note").get<std::string>();
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

CandidateEvaluation score(const std::vector<TestCase>& corpus, const std::vector<EvalOutcome>& outcomes,
                          Money money_eps) {
  CandidateEvaluation ev;
  ev.results.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CaseResult r;
    r.actual = outcomes[i].value;
    r.error = outcomes[i].error;
    if (r.actual) {
      const Money diff = *r.actual > corpus[i].expected ? *r.actual - corpus[i].expected : corpus[i].expected - *r.actual;
      r.passed = diff <= money_eps;
    }
    ev.passed += r.passed ? 1 : 0;
    ev.results.push_back(std::move(r));
  }
  ev.pass_fraction = corpus.empty() ? 1.0 : static_cast<double>(ev.passed) / static_cast<double>(corpus.size());
  return ev;
}

std::vector<TaxpayerProfile> profiles_of(const std::vector<TestCase>& corpus) {
  std::vector<TaxpayerProfile> out;
  out.reserve(corpus.size());
  for (const auto& c : corpus) out.push_back(c.profile);
  return out;
}

}  // namespace

CandidateEvaluation evaluate_function(TaxFunction& f, const std::vector<TestCase>& corpus, Money money_eps,
                                      Execution mode) {
  const auto profiles = profiles_of(corpus);
  return score(corpus, evaluate_batch(f, profiles, mode), money_eps);
}

CandidateEvaluation evaluate_candidate(const CandidateProgram& candidate, const std::vector<TestCase>& corpus,
                                       Money money_eps) {
  CandidateFunction f(candidate);
  if (!corpus.empty() && f.scenario() != corpus.front().scenario) {
    throw CandidateUnavailable("candidate serves scenario " + std::to_string(f.scenario().value()) +
                               " but the corpus is for scenario " + std::to_string(corpus.front().scenario.value()));
  }
  return evaluate_function(f, corpus, money_eps, Execution::Serial);
}

Metrics compute_metrics(const std::vector<double>& pass_fractions) {
  if (pass_fractions.empty()) throw EmptyInput("metrics need at least one pass fraction");
  Metrics m;
  m.pass_fractions = pass_fractions;
  m.k = pass_fractions.size();
  m.pp_at_1 = *std::max_element(pass_fractions.begin(), pass_fractions.end());
  m.worst_at_k = *std::min_element(pass_fractions.begin(), pass_fractions.end());
  m.pp_at_k = std::accumulate(pass_fractions.begin(), pass_fractions.end(), 0.0) / static_cast<double>(m.k);
  // Keep the mean inside [min, max] despite accumulation rounding.
  m.pp_at_k = std::clamp(m.pp_at_k, m.worst_at_k, m.pp_at_1);
  return m;
}

std::string metrics_json(const Metrics& m) {
  JsonWriter w(2);
  w.begin_object().key("k").value(static_cast<std::int64_t>(m.k)).key("pass_fractions").begin_array();
  for (double f : m.pass_fractions) w.rate(f);
  w.end_array();
  w.key("pp_at_1").rate(m.pp_at_1).key("pp_at_k").rate(m.pp_at_k).key("worst_at_k").rate(m.worst_at_k);
  w.end_object();
  return w.take() + "\n";
}

// ---------------------------------------------------------------------------
// Refinement

GeneratorProgram GeneratorProgram::from_shell(const std::string& shell_command) {
  GeneratorProgram g;
  g.command = {"/bin/sh", "-c", shell_command};
  return g;
}

std::vector<Discrepancy> differential_records(const std::vector<TestCase>& corpus, const CandidateEvaluation& eval,
                                              std::size_t limit) {
  std::vector<Discrepancy> out;
  for (std::size_t i = 0; i < corpus.size() && out.size() < limit; ++i) {
    const auto& r = eval.results[i];
    if (r.passed) continue;
    const auto& c = corpus[i];
    const std::string label = hmt_plan(c.scenario).front().label;
    Discrepancy d;
    d.input = label;
    d.test_category = "Differential";
    d.filing_status = c.profile.sts;
    const Money v = numeric_field(c.profile, label).value_or(Money{});
    d.base_value = v.str();
    d.new_value_1 = d.base_value;
    d.new_value_2 = d.base_value;
    d.order_key = {v, v, v};
    d.verification_result = Verdict::Fail;
    d.verification_reason = "reference gives " + c.expected.fixed() + ", candidate " +
                            (r.actual ? "returned " + r.actual->fixed() : "failed: " + r.error) + " (" + c.note + ")";
    d.initial_tax = c.expected;
    d.modified_tax_tuple = {c.expected, r.actual, r.actual};
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

std::string compact_rules(const TaxRuleSet& rules) { return json::parse(serialize_ruleset(rules)).dump(); }

std::vector<std::string> parse_generator_reply(const std::string& line) {
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error&) {
    throw GeneratorUnavailable("generator reply is not JSON: " + line);
  }
  if (!reply.is_object() || !reply.contains("candidate") || !reply.at("candidate").is_object() ||
      !reply.at("candidate").contains("command") || !reply.at("candidate").at("command").is_array()) {
    throw GeneratorUnavailable("generator reply must carry candidate.command: " + line);
  }
  std::vector<std::string> command;
  for (const auto& part : reply.at("candidate").at("command")) {
    if (!part.is_string()) throw GeneratorUnavailable("candidate.command must hold strings");
    command.push_back(part.get<std::string>());
  }
  if (command.empty()) throw GeneratorUnavailable("candidate.command is empty");
  return command;
}

}  // namespace

Transcript refine_loop(const GeneratorProgram& generator, ScenarioId scenario, const TaxRuleSet& rules,
                       const RefineOptions& options) {
  std::unique_ptr<ChildProcess> gen;
  try {
    gen = std::make_unique<ChildProcess>(generator.command);
  } catch (const Error& e) {
    throw GeneratorUnavailable(e.what());
  }
  const auto corpus = generate_corpus(rules, scenario, options.n_random, options.seed);
  const auto tuples = default_tuples(rules, scenario, options.seed, options.tol, options.tuples_per_category);
  const std::string rules_text = compact_rules(rules);

  Transcript t;
  t.scenario = scenario;
  std::vector<Discrepancy> previous;
  for (std::size_t round = 1; round <= options.max_rounds; ++round) {
    JsonWriter req;
    req.begin_object().key("scenario").value(scenario.value()).key("rules").raw_json(rules_text);
    req.key("discrepancies").begin_array();
    for (const auto& d : previous) write_discrepancy(req, d);
    req.end_array().end_object();
    if (!gen->write_line(req.str())) throw GeneratorUnavailable("generator closed its input");
    const auto line = gen->read_line(generator.timeout);
    if (!line) throw GeneratorUnavailable(gen->timed_out() ? "generator timed out" : "generator exited");

    CandidateProgram program;
    program.command = parse_generator_reply(*line);
    RefineRound r;
    r.round = static_cast<int>(round);
    r.command = program.command;
    r.candidate_id = program.id();
    try {
      CandidateFunction f(program);
      if (f.scenario() != scenario) {
        throw CandidateUnavailable("candidate serves scenario " + std::to_string(f.scenario().value()));
      }
      const auto eval = evaluate_function(f, corpus, options.tol.money_eps, Execution::Serial);
      r.pass_fraction = eval.pass_fraction;
      r.discrepancies = run_suite(f, tuples, options.relations, options.pair_count, rules, options.seed, options.tol,
                                  Execution::Serial);
      auto diff = differential_records(corpus, eval, options.max_differential);
      r.discrepancies.insert(r.discrepancies.end(), diff.begin(), diff.end());
      sort_discrepancies(r.discrepancies);
    } catch (const CandidateUnavailable& e) {
      r.pass_fraction = 0;
      Discrepancy d;
      d.input = hmt_plan(scenario).front().label;
      d.test_category = "CandidateUnavailable";
      d.base_value = d.new_value_1 = d.new_value_2 = "null";
      d.verification_result = Verdict::Fail;
      d.verification_reason = e.what();
      r.discrepancies = {d};
    }
    const bool converged = r.pass_fraction == 1.0 && r.discrepancies.empty();
    previous = r.discrepancies;
    t.rounds.push_back(std::move(r));
    if (converged) {
      t.outcome = RefineOutcome::Converged;
      return t;
    }
  }
  t.outcome = RefineOutcome::MaxRoundsExceeded;
  return t;
}

std::string transcript_json(const Transcript& t) {
  JsonWriter w(2);
  w.begin_object().key("scenario").value(t.scenario.value()).key("outcome").value(to_string(t.outcome));
  w.key("rounds").begin_array();
  for (const auto& r : t.rounds) {
    w.begin_object().key("round").value(r.round).key("candidate").value(r.candidate_id);
    w.key("command").begin_array();
    for (const auto& c : r.command) w.value(c);
    w.end_array();
    w.key("pass_fraction").rate(r.pass_fraction).key("discrepancies").begin_array();
    for (const auto& d : r.discrepancies) write_discrepancy(w, d);
    w.end_array().end_object();
  }
  w.end_array().end_object();
  return w.take() + "\n";
}

}  // namespace taxmorph
