// taxmorph command-line front end.
//
// Exit codes: 0 success / no discrepancies, 1 discrepancies or failures
// found, 2 usage, I/O or schema error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "taxmorph/errors.hpp"
#include "taxmorph/harness.hpp"
#include "taxmorph/mutation.hpp"
#include "taxmorph/sampling.hpp"

#ifndef TAXMORPH_FIXTURE_DIR
#define TAXMORPH_FIXTURE_DIR ""
#endif

namespace fs = std::filesystem;
using namespace taxmorph;

namespace {

class IoError : public InputError {
 public:
  using InputError::InputError;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write '" + path + "'");
}

std::string self_executable() { return fs::read_symlink("/proc/self/exe").string(); }

struct Options {
  std::string rules_path;
  std::string relations_path;
  int scenario = 1;
  std::uint64_t seed = 1;
  std::size_t pairs = 200;
  std::size_t tuples = 32;
  int jobs = 0;
  double rate_eps = 0.005;
  double money_eps = 0.01;
  double jump_margin = 0.005;
  double min_gap = 1000;
  double phi8_bound = 0.12;

  ToleranceConfig tol() const {
    ToleranceConfig t;
    t.rate_eps = rate_eps;
    t.jump_margin = jump_margin;
    t.phi8_bound = phi8_bound;
    try {
      t.money_eps = Money::from_double(money_eps);
      t.min_gap = Money::from_double(min_gap);
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("tolerance: ") + e.what());
    }
    t.validate();
    return t;
  }

  TaxRuleSet rules() const {
    std::vector<std::string> warnings;
    auto r = parse_ruleset(read_file(rules_path), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return r;
  }

  std::vector<PairwiseRelation> relations() const {
    if (!relations_path.empty()) return load_relations_file(relations_path);
    for (const fs::path& dir : {fs::path(rules_path).parent_path(), fs::path(TAXMORPH_FIXTURE_DIR)}) {
      const auto candidate = dir / "relations.json";
      if (!dir.empty() && fs::exists(candidate)) return load_relations_file(candidate.string());
    }
    std::cerr << "warning: no relations.json found; pairwise relations skipped\n";
    return {};
  }
};

void add_rules(CLI::App* cmd, Options& o) {
  cmd->add_option("--rules", o.rules_path, "Rule-set JSON")->required()->envname("TAXMORPH_RULES");
}

void add_scenario(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "Scenario 1..6")->check(CLI::Range(1, 6));
}

void add_campaign(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Campaign seed");
  cmd->add_option("--pairs", o.pairs, "Seeded pairs per pairwise relation");
  cmd->add_option("--relations", o.relations_path, "Pairwise relation document");
  cmd->add_option("--jobs", o.jobs, "Worker threads (0 = runtime default)");
  cmd->add_option("--rate-eps", o.rate_eps);
  cmd->add_option("--money-eps", o.money_eps);
  cmd->add_option("--jump-margin", o.jump_margin);
  cmd->add_option("--min-gap", o.min_gap);
  cmd->add_option("--phi8-bound", o.phi8_bound);
}

struct Target {
  std::string command;
  bool oracle = false;
  std::string mutant;

  void add(CLI::App* cmd) {
    auto* t = cmd->add_option("--target", command, "Candidate shell command speaking taxcand/1");
    auto* o = cmd->add_flag("--oracle", oracle, "Test the reference engine itself");
    auto* m = cmd->add_option("--mutant", mutant, "Test a built-in mutant, e.g. flat_rate:0.12");
    t->excludes(o)->excludes(m);
    o->excludes(m);
  }

  std::unique_ptr<TaxFunction> make(const TaxRuleSet& rules, ScenarioId scenario) const {
    if (!command.empty()) {
      auto f = std::make_unique<CandidateFunction>(CandidateProgram::from_shell(command));
      if (f->scenario() != scenario) {
        throw CandidateUnavailable("candidate serves scenario " + std::to_string(f->scenario().value()) +
                                   ", not " + std::to_string(scenario.value()));
      }
      return f;
    }
    if (!mutant.empty()) return std::make_unique<MutantFunction>(MutantSpec{parse_operator(mutant), scenario}, rules);
    if (oracle) return std::make_unique<OracleFunction>(rules, scenario);
    throw InputError("one of --target, --oracle or --mutant is required");
  }
};

TaxpayerProfile read_profile(const std::string& arg, const TaxRuleSet& rules) {
  const auto first = arg.find_first_not_of(" \t\n");
  const std::string text = first != std::string::npos && arg[first] == '{' ? arg : read_file(arg);
  return parse_profile(text, rules);
}

int run_validate(const Options& o, const std::string& function_spec) {
  const auto rules = o.rules();
  std::cout << "rules ok";
  if (rules.tax_year) std::cout << " (tax year " << rules.tax_year << ")";
  std::cout << "\n";
  if (!function_spec.empty()) {
    const auto spec = validate_function_spec(read_file(function_spec));
    std::cout << "function description ok: " << spec.function_name << ", " << spec.inputs.size() << " inputs, "
              << spec.calculations.size() << " steps\n";
  }
  return 0;
}

int run_suite_command(const Options& o, const Target& target, bool with_tuples, const std::string& label,
                      const std::string& category, const std::string& suggestions) {
  const auto rules = o.rules();
  const auto tol = o.tol();
  const ScenarioId scenario(o.scenario);
  std::vector<TestTuple> tuples;
  if (with_tuples) {
    if (!suggestions.empty()) {
      const auto cat = parse_category(category);
      if (!cat) throw InputError("--suggestions needs --category");
      TupleContext ctx{scenario, label.empty() ? hmt_plan(scenario).front().label : label,
                       base_profile(scenario, FilingStatus::Single, rules)};
      const auto parsed = parse_suggested_tuples(read_file(suggestions), rules, *cat, ctx, tol);
      for (const auto& r : parsed.rejected) {
        std::cerr << "rejected suggestion " << r.index << ": " << r.reason << "\n";
      }
      tuples = parsed.accepted;
    } else if (!label.empty() || !category.empty()) {
      if (label.empty() || category.empty()) throw InputError("--label and --category go together");
      const auto cat = parse_category(category);
      if (!cat) throw InputError("unknown category '" + category + "'");
      tuples = generate_tuples(rules, label, *cat, scenario, o.tuples, o.seed, tol);
    } else {
      tuples = default_tuples(rules, scenario, o.seed, tol, o.tuples);
    }
  }
  auto f = target.make(rules, scenario);
  const auto records = run_suite(*f, tuples, o.relations(), o.pairs, rules, o.seed, tol);
  std::cout << discrepancy_report(records);
  return records.empty() ? 0 : 1;
}

int run_evaluate(const Options& o, const std::string& corpus_path, const std::string& target, std::size_t k) {
  const auto rules = o.rules();
  const auto corpus = parse_corpus(read_file(corpus_path), rules);
  const auto tol = o.tol();
  std::vector<double> fractions;
  for (std::size_t i = 0; i < k; ++i) {
    auto program = CandidateProgram::from_shell(target);
    program.env.push_back("TAXMORPH_SEED=" + std::to_string(o.seed + i));
    try {
      fractions.push_back(evaluate_candidate(program, corpus, tol.money_eps).pass_fraction);
    } catch (const CandidateUnavailable& e) {
      std::cerr << "generation " << i << ": " << e.what() << "\n";
      fractions.push_back(0.0);
    }
  }
  const auto m = compute_metrics(fractions);
  std::cout << metrics_json(m);
  return m.worst_at_k == 1.0 ? 0 : 1;
}

int run_mutants(const Options& o, bool scenario_given, bool in_process, bool as_json) {
  const auto rules = o.rules();
  std::vector<MutantSpec> mutants;
  for (const auto& spec : standard_mutants()) {
    if (!scenario_given || spec.scenario.value() == o.scenario) mutants.push_back(spec);
  }
  auto null_spec = null_mutant();
  if (scenario_given) null_spec.scenario = ScenarioId(o.scenario);
  mutants.push_back(null_spec);

  MatrixConfig config;
  config.seed = o.seed;
  config.pair_count = o.pairs;
  config.tuples_per_category = o.tuples;
  config.tol = o.tol();
  config.relations = o.relations();
  if (!in_process) config.executable = self_executable();
  const auto m = detection_matrix(mutants, rules, config);
  std::cout << (as_json ? matrix_json(m) : matrix_table(m));

  bool ok = true;
  for (const auto& row : m.rows) {
    if (!row.error.empty()) throw InputError(row.spec.id() + ": " + row.error);
    bool killed = false;
    for (const auto& cell : row.cells) killed = killed || cell.killed;
    if (row.spec.is_null() == killed) {
      std::cerr << row.spec.id() << (killed ? " (null mutant) was killed\n" : " survived every technique\n");
      ok = false;
    }
  }
  return ok ? 0 : 1;
}

int run_refine(const Options& o, const std::string& generator, std::size_t max_rounds) {
  RefineOptions ro;
  ro.max_rounds = max_rounds;
  ro.seed = o.seed;
  ro.pair_count = o.pairs;
  ro.tuples_per_category = o.tuples;
  ro.tol = o.tol();
  ro.relations = o.relations();
  const auto t = refine_loop(GeneratorProgram::from_shell(generator), ScenarioId(o.scenario), o.rules(), ro);
  std::cout << transcript_json(t);
  return t.outcome == RefineOutcome::Converged ? 0 : 1;
}

int run_candidate(const Options& o, const std::string& inline_rules, const std::string& mutant) {
  const TaxRuleSet rules = inline_rules.empty() ? o.rules() : parse_ruleset(inline_rules);
  const ScenarioId scenario(o.scenario);
  std::unique_ptr<TaxFunction> f;
  if (mutant.empty()) {
    f = std::make_unique<OracleFunction>(rules, scenario);
  } else {
    f = std::make_unique<MutantFunction>(MutantSpec{parse_operator(mutant), scenario}, rules);
  }
  serve_candidate(*f, rules, std::cin, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metamorphic testing of tax computations against a parameterized reference engine"};
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Check a rule set (and optionally a function description)");
  add_rules(validate, o);
  std::string function_spec;
  validate->add_option("--function-spec", function_spec, "Function-description JSON");

  auto* oracle = app.add_subcommand("oracle", "Print the reference liability for one profile");
  add_rules(oracle, o);
  add_scenario(oracle, o);
  std::string profile_arg;
  oracle->add_option("--profile", profile_arg, "Profile JSON file or inline object")->required();

  auto* gen = app.add_subcommand("gen-corpus", "Write a boundary + random test corpus");
  add_rules(gen, o);
  add_scenario(gen, o);
  std::size_t n_random = 200;
  std::string out_path;
  gen->add_option("--random", n_random, "Random cases to add");
  gen->add_option("--seed", o.seed);
  gen->add_option("--out", out_path, "Output file (default stdout)");

  Target target;
  auto* mt = app.add_subcommand("mt", "Run pairwise relations against a target");
  add_rules(mt, o);
  add_scenario(mt, o);
  add_campaign(mt, o);
  target.add(mt);

  auto* hmt = app.add_subcommand("hmt", "Run pairwise and higher-order relations against a target");
  add_rules(hmt, o);
  add_scenario(hmt, o);
  add_campaign(hmt, o);
  target.add(hmt);
  std::string label, category, suggestions;
  hmt->add_option("--tuples", o.tuples, "Tuples per label and category");
  hmt->add_option("--label", label, "Restrict tuples to one label");
  hmt->add_option("--category", category, "ProportionalIncrease, ThresholdJump or Saturation");
  hmt->add_option("--suggestions", suggestions, "Externally suggested tuples (suggested_tuples JSON)");

  auto* evaluate = app.add_subcommand("evaluate", "Score k generations of a candidate on a corpus");
  add_rules(evaluate, o);
  std::string corpus_path, eval_target;
  std::size_t k = 1;
  evaluate->add_option("--corpus", corpus_path)->required();
  evaluate->add_option("--target", eval_target, "Candidate shell command; TAXMORPH_SEED varies per run")->required();
  evaluate->add_option("--k", k)->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", o.seed);
  evaluate->add_option("--money-eps", o.money_eps);

  auto* mutants = app.add_subcommand("mutants", "Build the mutant kill matrix");
  add_rules(mutants, o);
  add_scenario(mutants, o);
  add_campaign(mutants, o);
  bool in_process = false, as_json = false;
  mutants->add_option("--tuples", o.tuples, "Tuples per label and category");
  mutants->add_flag("--in-process", in_process, "Evaluate mutants without spawning candidates");
  mutants->add_flag("--json", as_json, "Print the matrix as JSON");

  auto* refine = app.add_subcommand("refine", "Drive a generator program through refinement rounds");
  add_rules(refine, o);
  add_scenario(refine, o);
  add_campaign(refine, o);
  std::string generator;
  std::size_t max_rounds = 5;
  refine->add_option("--generator", generator, "Generator shell command speaking taxgen/1")->required();
  refine->add_option("--max-rounds", max_rounds)->check(CLI::PositiveNumber);

  auto* prompt = app.add_subcommand("render-prompt", "Render the tuple-suggestion prompt for a label");
  add_rules(prompt, o);
  std::string prompt_category, prompt_label;
  std::optional<int> prompt_scenario;
  prompt->add_option("--category", prompt_category)->required();
  prompt->add_option("--label", prompt_label)->required();
  prompt->add_option("--scenario", prompt_scenario)->check(CLI::Range(1, 6));
  add_campaign(prompt, o);

  auto* candidate = app.add_subcommand("candidate", "");
  candidate->group("");
  std::string inline_rules, mutant_op;
  candidate->add_option("--rules", o.rules_path);
  candidate->add_option("--rules-inline", inline_rules);
  candidate->add_option("--mutant", mutant_op);
  add_scenario(candidate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    set_worker_count(o.jobs);
    if (*validate) return run_validate(o, function_spec);
    if (*oracle) {
      const auto rules = o.rules();
      std::cout << compute_total_liability(read_profile(profile_arg, rules), ScenarioId(o.scenario), rules).fixed()
                << "\n";
      return 0;
    }
    if (*gen) {
      const auto rules = o.rules();
      std::vector<std::string> dropped;
      const ScenarioId scenario(o.scenario);
      const auto corpus = generate_corpus(rules, scenario, n_random, o.seed, &dropped);
      for (const auto& d : dropped) std::cerr << "dropped: " << d << "\n";
      write_output(out_path, serialize_corpus(corpus, scenario));
      return 0;
    }
    if (*mt) return run_suite_command(o, target, false, "", "", "");
    if (*hmt) return run_suite_command(o, target, true, label, category, suggestions);
    if (*evaluate) return run_evaluate(o, corpus_path, eval_target, k);
    if (*mutants) return run_mutants(o, mutants->count("--scenario") > 0, in_process, as_json);
    if (*refine) return run_refine(o, generator, max_rounds);
    if (*prompt) {
      const auto cat = parse_category(prompt_category);
      if (!cat) throw InputError("unknown category '" + prompt_category + "'");
      std::optional<ScenarioId> s;
      if (prompt_scenario) s = ScenarioId(*prompt_scenario);
      std::cout << render_suggestion_prompt(*cat, o.rules(), prompt_label, s, o.tol());
      return 0;
    }
    if (*candidate) return run_candidate(o, inline_rules, mutant_op);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CandidateUnavailable& e) {
    std::cerr << "error: candidate unavailable: " << e.what() << "\n";
    return 2;
  } catch (const GeneratorUnavailable& e) {
    std::cerr << "error: generator unavailable: " << e.what() << "\n";
    return 2;
  } catch (const NoThresholds& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionViolated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const EvaluationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
