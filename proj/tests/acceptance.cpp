// Acceptance run: one PASS/FAIL line per criterion. With an argument N only
// criterion N runs. Exit status is nonzero if any criterion that ran failed.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "reference_models.hpp"
#include "support.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/harness.hpp"
#include "taxmorph/mutation.hpp"
#include "taxmorph/sampling.hpp"

using namespace taxmorph;
using taxmorph::testing::bracket_example;
using taxmorph::testing::DollarLedger;
using taxmorph::testing::fixture_path;
using taxmorph::testing::ty2021;
using taxmorph::testing::ty2021_no_deduction;

namespace {

// Tolerances and budgets fixed by the criteria.
constexpr double kR1Tolerance = 1e-9;
constexpr double kR2Tolerance = 1e-6;
constexpr double kPhi8Tolerance = 1e-9;
constexpr double kBracketSeconds = 5;
constexpr double kBlindSpotSeconds = 30;
constexpr double kMatrixSeconds = 120;
constexpr std::size_t kLedgerIncomes = 1000;
constexpr std::size_t kMonotonicityPairs = 1000;
constexpr std::size_t kPhi8Quads = 100;
constexpr std::size_t kMetricLists = 10000;

struct Outcome {
  bool pass = true;
  std::string detail;
  double budget_seconds = 0;  // 0: no runtime bound
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (!failures_.empty()) failures_ += "; ";
    failures_ += what;
  }
  Outcome done(const std::string& summary, double budget = 0) const {
    return {failures_.empty(), failures_.empty() ? summary : failures_, budget};
  }

 private:
  std::string failures_;
};

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

TaxpayerProfile single(Money income) {
  TaxpayerProfile p;
  p.income = income;
  p.age = 40;
  return p;
}

const std::vector<PairwiseRelation>& relations() {
  static const auto rels = load_relations_file(fixture_path("relations.json"));
  return rels;
}

const PairwiseRelation& relation(const std::string& name) {
  for (const auto& r : relations()) {
    if (r.name == name) return r;
  }
  throw Error("fixture relation missing: " + name);
}

std::string run_command(const std::string& command) {
  std::string out;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) throw Error("cannot run " + command);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  ::pclose(pipe);
  return out;
}

Outcome bracket_exactness() {
  Checker c;
  const Money worked = compute_bracket_tax(dollars(20000), FilingStatus::Single, bracket_example());
  c.expect(worked.fixed() == "2168.00", "worked example gave " + worked.fixed());
  std::size_t compared = 0;
  for (const TaxRuleSet* rules : {&bracket_example(), &ty2021_no_deduction()}) {
    for (const auto status : kAllStatuses) {
      const DollarLedger ledger(*rules, status, 700000);
      Rng rng(mix_seed(11, std::string("ledger/") + std::string(to_string(status))));
      for (std::size_t i = 0; i < kLedgerIncomes; ++i) {
        const Money income = uniform_money(rng, Money{}, dollars(699999));
        const auto got = compute_bracket_tax(income, status, *rules).units();
        const auto want = ledger.tax_cents(income.units());
        if (got != want) {
          c.expect(false, std::string(to_string(status)) + " " + income.fixed() + ": " + std::to_string(got) +
                              " vs " + std::to_string(want));
        }
        ++compared;
      }
    }
  }
  return c.done("20000 single -> " + worked.fixed() + "; " + std::to_string(compared) +
                    " incomes agree with the per-dollar ledger",
                kBracketSeconds);
}

Outcome worked_rates() {
  Checker c;
  OracleFunction f(ty2021_no_deduction(), ScenarioId(1));
  TestTuple t;
  t.base_profile = single(Money{});
  t.target_label = "income";
  t.values = {dollars(35000), dollars(40525), dollars(48000)};
  t.category = HmtCategory::ThresholdJump;
  const auto m = rates(f, t);
  c.expect(std::abs(m.rates.r1 - 0.12) <= kR1Tolerance, "r1 = " + num(m.rates.r1, 12));
  c.expect(std::abs(m.rates.r2 - 0.1775) <= kR2Tolerance, "r2 = " + num(m.rates.r2, 12));
  c.expect(m.rates.r2 > m.rates.r1, "r2 not above r1");
  return c.done("r1 = " + num(m.rates.r1) + ", r2 = " + num(m.rates.r2));
}

Outcome blind_spot() {
  Checker c;
  const MutantSpec flat{FlatRate{Fraction::parse("0.12")}, ScenarioId(1)};
  MutantFunction f(flat, ty2021());
  const ToleranceConfig tol;
  const auto& mono = relation("income_monotonicity");
  const auto pairs = generate_pairs(mono, ScenarioId(1), ty2021(), kMonotonicityPairs, 3);
  const auto mt = run_suite(f, {}, {mono}, kMonotonicityPairs, ty2021(), 3, tol);
  c.expect(pairs.size() >= kMonotonicityPairs, "only " + std::to_string(pairs.size()) + " pairs");
  c.expect(mt.empty(), std::to_string(mt.size()) + " monotonicity discrepancies");
  const auto tuples = generate_tuples(ty2021(), "income", HmtCategory::ThresholdJump, ScenarioId(1), 32, 3, tol);
  const auto hmt = run_suite(f, tuples, {}, 0, ty2021(), 3, tol);
  c.expect(!hmt.empty(), "no ThresholdJump FAIL");
  return c.done(std::to_string(pairs.size()) + " pairs, 0 discrepancies; ThresholdJump " +
                    std::to_string(hmt.size()) + "/" + std::to_string(tuples.size()) + " FAIL",
                kBlindSpotSeconds);
}

Outcome aotc_tiers() {
  Checker c;
  const ToleranceConfig tol;
  auto student = base_profile(ScenarioId(4), FilingStatus::Single, ty2021());
  auto credit = [&](std::int64_t expenses) {
    student.qualified_expenses = dollars(expenses);
    return compute_aotc(student, ty2021());
  };
  struct Segment {
    std::int64_t lo, hi;
    double rate;
  };
  std::string measured;
  Rng rng(mix_seed(4, "aotc"));
  for (const Segment s : {Segment{0, 2000, 1.0}, Segment{2000, 4000, 0.25}, Segment{4000, 20000, 0.0}}) {
    const double whole = difference_quotient(credit(s.hi), credit(s.lo), dollars(s.hi), dollars(s.lo));
    c.expect(std::abs(whole - s.rate) <= tol.rate_eps, "segment (" + std::to_string(s.lo) + ", " +
                                                            std::to_string(s.hi) + "] slope " + num(whole));
    for (int i = 0; i < 50; ++i) {
      const auto a = uniform_int(rng, s.lo, s.hi - 1);
      const auto b = uniform_int(rng, a + 1, s.hi);
      const double q = difference_quotient(credit(b), credit(a), dollars(b), dollars(a));
      if (std::abs(q - s.rate) > tol.rate_eps) c.expect(false, "slope " + num(q) + " on (" + std::to_string(a) + ", " + std::to_string(b) + "]");
    }
    measured += (measured.empty() ? "" : " / ") + num(whole == 0 ? 0.0 : whole, 2);
  }
  const auto tuples =
      generate_tuples(ty2021(), "qualified_expenses", HmtCategory::ProportionalIncrease, ScenarioId(4), 32, 4, tol);
  OracleFunction oracle(ty2021(), ScenarioId(4));
  MutantFunction collapsed({TierCollapse{}, ScenarioId(4)}, ty2021());
  const auto on_oracle = run_suite(oracle, tuples, {}, 0, ty2021(), 4, tol);
  const auto on_mutant = run_suite(collapsed, tuples, {}, 0, ty2021(), 4, tol);
  c.expect(on_oracle.empty(), "oracle fails " + std::to_string(on_oracle.size()) + " tuples");
  c.expect(!on_mutant.empty(), "TierCollapse passes every ProportionalIncrease tuple");
  return c.done("marginal credit " + measured + "; TierCollapse fails " + std::to_string(on_mutant.size()) + "/" +
                std::to_string(tuples.size()) + " ProportionalIncrease tuples, oracle 0");
}

Outcome oracle_soundness() {
  Checker c;
  const ToleranceConfig tol;
  std::size_t campaigns = 0;
  for (const auto scenario : all_scenarios()) {
    OracleFunction f(ty2021(), scenario);
    for (const std::uint64_t seed : {1, 2, 3}) {
      const auto tuples = default_tuples(ty2021(), scenario, seed, tol);
      const auto records = run_suite(f, tuples, relations(), 200, ty2021(), seed, tol);
      c.expect(records.empty(), "s" + std::to_string(scenario.value()) + " seed " + std::to_string(seed) + ": " +
                                    std::to_string(records.size()) + " discrepancies");
      ++campaigns;
    }
    CandidateProgram self;
    self.command = {TAXMORPH_EXE, "candidate", "--scenario", std::to_string(scenario.value()), "--rules",
                    fixture_path("ty2021.json")};
    const auto corpus = generate_corpus(ty2021(), scenario, 200, 1);
    const auto eval = evaluate_candidate(self, corpus, tol.money_eps);
    c.expect(eval.pass_fraction == 1.0, "candidate pass fraction " + num(eval.pass_fraction) + " on s" +
                                            std::to_string(scenario.value()));
  }
  return c.done(std::to_string(campaigns) + " campaigns clean; oracle-as-candidate scores 1.0 in all 6 scenarios");
}

Outcome detection() {
  Checker c;
  auto mutants = standard_mutants();
  mutants.push_back(null_mutant());
  MatrixConfig config;
  config.relations = relations();
  config.executable = TAXMORPH_EXE;
  const auto m = detection_matrix(mutants, ty2021(), config);
  std::set<std::string> by_mt, by_hmt;
  std::size_t killed = 0;
  for (const auto& row : m.rows) {
    c.expect(row.error.empty(), row.spec.id() + ": " + row.error);
    for (const auto& cell : row.cells) c.expect(cell.error.empty(), row.spec.id() + ": " + cell.error);
    const bool any = row.cells[0].killed || row.cells[1].killed || row.cells[2].killed;
    if (row.spec.is_null()) {
      c.expect(!any, "null mutant killed");
      continue;
    }
    c.expect(any, row.spec.id() + " survives");
    killed += any;
    if (row.cells[1].killed) by_mt.insert(row.spec.id());
    if (row.cells[2].killed) by_hmt.insert(row.spec.id());
  }
  const bool superset = std::includes(by_hmt.begin(), by_hmt.end(), by_mt.begin(), by_mt.end());
  c.expect(superset && by_hmt.size() > by_mt.size(), "HMT kills are not a strict superset of MT kills");
  return c.done(std::to_string(killed) + "/8 killed; MT " + std::to_string(by_mt.size()) + ", HMT " +
                    std::to_string(by_hmt.size()) + "; null mutant survives",
                kMatrixSeconds);
}

Outcome metrics() {
  Checker c;
  auto near = [](double a, double b) { return std::abs(a - b) < 1e-12; };
  struct Hand {
    std::vector<double> list;
    double best, mean, worst;
  };
  for (const auto& h : {Hand{{0.5, 1.0}, 1.0, 0.75, 0.5}, Hand{{1.0}, 1.0, 1.0, 1.0},
                        Hand{{0.0, 0.0, 0.3}, 0.3, 0.1, 0.0}, Hand{{0.2, 0.4, 0.6, 0.8}, 0.8, 0.5, 0.2}}) {
    const auto m = compute_metrics(h.list);
    c.expect(near(m.pp_at_1, h.best) && near(m.pp_at_k, h.mean) && near(m.worst_at_k, h.worst),
             "hand list of " + std::to_string(h.list.size()) + " gives " + num(m.pp_at_1) + "/" + num(m.pp_at_k) +
                 "/" + num(m.worst_at_k));
  }
  Rng rng(mix_seed(7, "metrics"));
  for (std::size_t i = 0; i < kMetricLists; ++i) {
    std::vector<double> list(static_cast<std::size_t>(uniform_int(rng, 1, 32)));
    for (auto& v : list) v = uniform_unit(rng);
    const auto m = compute_metrics(list);
    if (!(m.worst_at_k <= m.pp_at_k && m.pp_at_k <= m.pp_at_1)) c.expect(false, "ordering broken on list " + std::to_string(i));
  }
  bool empty_rejected = false;
  try {
    compute_metrics({});
  } catch (const EmptyInput&) {
    empty_rejected = true;
  }
  c.expect(empty_rejected, "empty list accepted");
  return c.done("[0.5, 1.0] -> (100%, 75%, 50%); worst <= mean <= max on " + std::to_string(kMetricLists) + " lists");
}

Outcome phi8() {
  Checker c;
  const auto& rules = ty2021_no_deduction();
  OracleFunction oracle(rules, ScenarioId(1));
  MutantFunction flat({FlatRate{Fraction::parse("0.12")}, ScenarioId(1)}, rules);
  const ToleranceConfig tol;
  double worst_gap = 0;
  std::size_t quads = 0, flat_failed_brackets = 0, off_rate_brackets = 0;
  for (const auto status : kAllStatuses) {
    const auto& rows = rules.tax_brackets[status];
    Rng rng(mix_seed(8, std::string("phi8/") + std::string(to_string(status))));
    for (std::size_t row = 0; row < rows.size(); ++row) {
      const auto iv = bracket_interval(rules, status, row);
      const std::int64_t lo = iv.lower.units() / 100 + 1;
      const std::int64_t hi = std::min<std::int64_t>(iv.upper.units() / 100, lo + 1000000);
      bool flat_failed = false;
      for (std::size_t i = 0; i < kPhi8Quads; ++i) {
        const auto x = uniform_int(rng, lo, hi - 2);
        const auto y1 = uniform_int(rng, x + 1, hi - 1);
        const auto y2 = uniform_int(rng, y1 + 1, hi);
        auto at = [&](std::int64_t v) {
          auto p = single(dollars(v));
          p.sts = status;
          return p;
        };
        const Phi8Quad q{at(x), at(x), at(y1), at(y2)};
        const auto r = check_within_bracket(q, oracle, iv, kPhi8Tolerance);
        worst_gap = std::max(worst_gap, std::abs(r.q1 - r.q2));
        c.expect(r.verdict == Verdict::Pass, r.reason);
        if (check_within_bracket(q, flat, iv, tol.rate_eps).verdict == Verdict::Fail) flat_failed = true;
        ++quads;
      }
      const bool off_rate = std::abs(iv.rate.to_double() - 0.12) > tol.rate_eps;
      off_rate_brackets += off_rate;
      flat_failed_brackets += flat_failed;
      c.expect(flat_failed == off_rate, std::string(to_string(status)) + " bracket " + std::to_string(row) +
                                            (off_rate ? ": flat rate passes" : ": flat rate fails its own rate"));
    }
  }
  c.expect(worst_gap <= kPhi8Tolerance, "quotient gap " + num(worst_gap, 12));
  return c.done(std::to_string(quads) + " quads, max |q1 - q2| = " + num(worst_gap, 12) + "; flat rate fails " +
                std::to_string(flat_failed_brackets) + "/" + std::to_string(off_rate_brackets) +
                " brackets whose rate is not 12%");
}

Outcome refinement() {
  Checker c;
  auto generator = [](const std::string& mode) {
    GeneratorProgram g;
    g.command = {TAXMORPH_SCRIPTED_GENERATOR, TAXMORPH_EXE, fixture_path("ty2021.json"), mode};
    return g;
  };
  RefineOptions options;
  options.relations = relations();
  const auto two = refine_loop(generator("two-stage"), ScenarioId(1), ty2021(), options);
  c.expect(two.outcome == RefineOutcome::Converged, "two-stage did not converge");
  c.expect(two.rounds.size() == 2, "two-stage took " + std::to_string(two.rounds.size()) + " rounds");
  const auto stubborn = refine_loop(generator("stubborn"), ScenarioId(1), ty2021(), options);
  c.expect(stubborn.outcome == RefineOutcome::MaxRoundsExceeded, "stubborn converged");
  c.expect(stubborn.rounds.size() == options.max_rounds, "stubborn ran " + std::to_string(stubborn.rounds.size()));
  for (const auto& r : stubborn.rounds) {
    c.expect(discrepancy_report(r.discrepancies) == discrepancy_report(stubborn.rounds.front().discrepancies),
             "stubborn round " + std::to_string(r.round) + " differs");
  }
  const std::size_t first = two.rounds.empty() ? 0 : two.rounds[0].discrepancies.size();
  return c.done("two-stage CONVERGED in " + std::to_string(two.rounds.size()) + " rounds (" + std::to_string(first) +
                " discrepancies in round 1); stubborn MaxRoundsExceeded after " +
                std::to_string(stubborn.rounds.size()) + " identical rounds");
}

Outcome format_fidelity() {
  Checker c;
  // Report fields.
  MutantFunction flat({FlatRate{Fraction::parse("0.12")}, ScenarioId(1)}, ty2021_no_deduction());
  TestTuple t;
  t.base_profile = single(Money{});
  t.target_label = "income";
  t.values = {dollars(35000), dollars(40525), dollars(48000)};
  t.category = HmtCategory::ThresholdJump;
  const std::string report = discrepancy_report({check_hmt(t, flat, {})});
  const std::vector<std::string> fields = {"input", "test_category", "filing_status", "base_value", "new_value_1",
                                           "new_value_2", "verification_result", "verification_reason",
                                           "initial_tax", "modified_tax_tuple", "Rate_change_base (R1)",
                                           "Rate_change_follow-up (R2)"};
  const auto record = nlohmann::json::parse(report).at("discrepancies").at(0);
  std::size_t from = 0;
  for (const auto& key : fields) {
    const auto pos = report.find("\"" + key + "\"", from);
    c.expect(pos != std::string::npos, "field " + key + " missing or out of order");
    if (pos != std::string::npos) from = pos;
  }
  c.expect(record.size() == fields.size(), "record has " + std::to_string(record.size()) + " fields");

  // Rule set round trip.
  for (const char* name : {"ty2021.json", "ty2021_no_deduction.json", "bracket_example.json"}) {
    const auto rules = load_ruleset_file(fixture_path(name));
    const auto text = serialize_ruleset(rules);
    c.expect(parse_ruleset(text) == rules && serialize_ruleset(parse_ruleset(text)) == text,
             std::string(name) + " does not round-trip");
    c.expect(nlohmann::json::parse(text) == nlohmann::json::parse(taxmorph::testing::read_fixture(name)),
             std::string(name) + " serializes to a different document");
  }

  // Campaigns, twice each.
  const std::string exe = TAXMORPH_EXE, rules = fixture_path("ty2021.json");
  const std::vector<std::string> campaigns = {
      "gen-corpus --rules " + rules + " --scenario 2 --random 100 --seed 9",
      "mt --rules " + rules + " --scenario 1 --mutant flat_rate:0.12 --pairs 300 --seed 9",
      "hmt --rules " + rules + " --scenario 1 --mutant flat_rate:0.12 --seed 9",
      "hmt --rules " + rules + " --scenario 5 --mutant cap_removal:salt_cap --seed 9",
      "mutants --rules " + rules + " --json --seed 9",
      "refine --rules " + rules + " --scenario 1 --max-rounds 3 --generator '" + TAXMORPH_SCRIPTED_GENERATOR +
          " " + exe + " " + rules + " stubborn'",
  };
  for (const auto& args : campaigns) {
    const auto a = run_command(exe + " " + args + " 2>/dev/null");
    const auto b = run_command(exe + " " + args + " 2>/dev/null");
    const auto name = args.substr(0, args.find(' '));
    c.expect(!a.empty(), name + " printed nothing");
    c.expect(a == b, name + " output differs between runs");
  }
  return c.done(std::to_string(fields.size()) + " report fields in order; 3 rule sets round-trip; " +
                std::to_string(campaigns.size()) + " campaigns byte-identical across reruns");
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::array<Criterion, 10> criteria = {{
      {"bracket exactness", bracket_exactness},
      {"worked example rates", worked_rates},
      {"pairwise MT blind spot", blind_spot},
      {"AOTC tier property", aotc_tiers},
      {"oracle soundness", oracle_soundness},
      {"detection matrix", detection},
      {"metrics arithmetic", metrics},
      {"rate-consistency identity", phi8},
      {"refinement convergence", refinement},
      {"format fidelity", format_fidelity},
  }};
  int only = 0;
  if (argc > 1) only = std::stoi(argv[1]);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (only && only != number) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what(), 0};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.budget_seconds > 0 && seconds >= o.budget_seconds) {
      o.pass = false;
      o.detail += "; took " + num(seconds, 2) + " s, budget " + num(o.budget_seconds, 0) + " s";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << number << " (" << criteria[i].name
              << "): " << o.detail << " [" << num(seconds, 2) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
