// Oracle-derived test corpora, candidate evaluation, Partial Pass@k metrics
// and the counterexample-guided refinement loop.
#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taxmorph/candidate.hpp"
#include "taxmorph/metamorphic.hpp"

namespace taxmorph {

enum class CaseOrigin { Boundary, Random };
std::string_view to_string(CaseOrigin o);

struct TestCase {
  TaxpayerProfile profile;
  ScenarioId scenario{1};
  Money expected;
  CaseOrigin origin = CaseOrigin::Boundary;
  std::string note;
};

/// Boundary cases (every rule threshold and every label-space knee at -1,
/// 0, +1 for each filing status, plus scenario-specific knees such as ages
/// and codes) followed by n_random seeded random profiles. Cases the oracle
/// cannot evaluate are dropped; their reasons go to `dropped` when given.
std::vector<TestCase> generate_corpus(const TaxRuleSet& rules, ScenarioId scenario, std::size_t n_random,
                                      std::uint64_t seed, std::vector<std::string>* dropped = nullptr);

std::string serialize_corpus(const std::vector<TestCase>& corpus, ScenarioId scenario);
/// Throws SchemaViolation / MalformedDocument.
std::vector<TestCase> parse_corpus(std::string_view document, const TaxRuleSet& rules);

struct CaseResult {
  bool passed = false;
  std::optional<Money> actual;
  std::string error;
};

struct CandidateEvaluation {
  double pass_fraction = 0;
  std::size_t passed = 0;
  std::vector<CaseResult> results;  // parallel to the corpus
};

CandidateEvaluation evaluate_function(TaxFunction& f, const std::vector<TestCase>& corpus, Money money_eps,
                                      Execution mode = Execution::Parallel);
/// Throws CandidateUnavailable when the handshake fails or the candidate
/// serves a different scenario than the corpus.
CandidateEvaluation evaluate_candidate(const CandidateProgram& candidate, const std::vector<TestCase>& corpus,
                                       Money money_eps);

struct Metrics {
  std::vector<double> pass_fractions;
  double pp_at_1 = 0;
  double pp_at_k = 0;
  double worst_at_k = 0;
  std::size_t k = 0;
};

/// Throws EmptyInput on an empty list.
Metrics compute_metrics(const std::vector<double>& pass_fractions);
std::string metrics_json(const Metrics& m);

// ---------------------------------------------------------------------------
// Refinement
//
// taxgen/1 (generator programs, one long-lived process):
//   parent -> {"scenario":N,"rules":{...},"discrepancies":[...]}
//   child  -> {"candidate":{"command":["prog","arg",...]}}

struct GeneratorProgram {
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{30000};

  static GeneratorProgram from_shell(const std::string& shell_command);
};

struct RefineOptions {
  std::size_t max_rounds = 5;
  std::uint64_t seed = 1;
  std::size_t n_random = 200;
  std::size_t pair_count = 200;
  std::size_t tuples_per_category = 32;
  std::size_t max_differential = 20;
  ToleranceConfig tol;
  std::vector<PairwiseRelation> relations;
};

struct RefineRound {
  int round = 0;
  std::string candidate_id;
  std::vector<std::string> command;
  double pass_fraction = 0;
  std::vector<Discrepancy> discrepancies;
};

enum class RefineOutcome { Converged, MaxRoundsExceeded };
std::string_view to_string(RefineOutcome o);

struct Transcript {
  ScenarioId scenario{1};
  RefineOutcome outcome = RefineOutcome::MaxRoundsExceeded;
  std::vector<RefineRound> rounds;
};

/// Throws GeneratorUnavailable if the generator cannot be started or stops
/// answering; running out of rounds is reported through the outcome.
Transcript refine_loop(const GeneratorProgram& generator, ScenarioId scenario, const TaxRuleSet& rules,
                       const RefineOptions& options);
std::string transcript_json(const Transcript& t);

/// Corpus failures as discrepancy records (test_category "Differential").
std::vector<Discrepancy> differential_records(const std::vector<TestCase>& corpus, const CandidateEvaluation& eval,
                                              std::size_t limit);

}  // namespace taxmorph
