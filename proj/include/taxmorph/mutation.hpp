// Fault variants of the oracle and the kill matrix comparing the corpus,
// pairwise MT and HMT techniques.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "taxmorph/candidate.hpp"
#include "taxmorph/harness.hpp"

namespace taxmorph {

struct FlatRate {
  Fraction rate;
};
/// knee: "bracket[i]", "salt_cap", "ctc_threshold", "aotc_tier1_limit",
/// "aotc_tier2_limit" or "eitc_plateau_start".
struct ThresholdShift {
  std::string knee;
  Money delta;
};
/// which: "salt_cap" or "credit_cap".
struct CapRemoval {
  std::string which;
};
struct FloorRateChange {
  Fraction rate;
};
struct TierCollapse {};
struct PhaseOutSkip {};
struct PenaltyAlwaysWaived {};
struct RoundingTruncate {};

using MutationOperator = std::variant<FlatRate, ThresholdShift, CapRemoval, FloorRateChange, TierCollapse,
                                      PhaseOutSkip, PenaltyAlwaysWaived, RoundingTruncate>;

struct MutantSpec {
  MutationOperator op;
  ScenarioId scenario{1};

  /// "s1/flat_rate:0.12"
  std::string id() const;
  /// Zero-delta threshold shifts: behaviorally identical to the oracle.
  bool is_null() const;
};

/// Text form of the operator alone, e.g. "threshold_shift:bracket[1]:1000".
std::string operator_text(const MutationOperator& op);
/// Throws InputError on unknown or malformed text.
MutationOperator parse_operator(std::string_view text);
/// Throws InapplicableOperator when the operator has no effect on what the
/// scenario computes (e.g. TierCollapse outside scenario 4).
void check_applicable(const MutantSpec& spec, const TaxRuleSet& rules);

/// The rule set the mutant computes with. The result is not revalidated.
TaxRuleSet mutate_rules(const MutantSpec& spec, const TaxRuleSet& rules);

class MutantFunction final : public TaxFunction {
 public:
  MutantFunction(MutantSpec spec, const TaxRuleSet& rules);
  ScenarioId scenario() const override { return spec_.scenario; }
  Money evaluate(const TaxpayerProfile& profile) override;
  bool thread_safe() const override { return true; }
  std::string describe() const override { return "mutant:" + spec_.id(); }

 private:
  MutantSpec spec_;
  TaxRuleSet rules_;
  Rounding rounding_;
};

/// A candidate running `executable candidate ... --mutant <op>` over
/// taxcand/1 with the unmutated rules passed inline.
CandidateProgram materialize_mutant(const MutantSpec& spec, const TaxRuleSet& rules, const std::string& executable);

/// The eight-operator set, one mutant per operator, each on the scenario
/// where its rule feature lives.
std::vector<MutantSpec> standard_mutants();
MutantSpec null_mutant();

enum class Technique { Corpus, Mt, Hmt };
std::string_view to_string(Technique t);
inline constexpr std::array<Technique, 3> kAllTechniques = {Technique::Corpus, Technique::Mt, Technique::Hmt};

struct MatrixCell {
  bool killed = false;
  std::string evidence;  // first failure, set iff killed
  std::string error;     // candidate could not be run
};

struct MatrixRow {
  MutantSpec spec;
  std::array<MatrixCell, 3> cells;  // indexed like kAllTechniques
  std::string error;                // materialization error
};

struct DetectionMatrix {
  std::vector<MatrixRow> rows;
};

struct MatrixConfig {
  std::uint64_t seed = 1;
  std::size_t n_random = 200;
  std::size_t pair_count = 200;
  std::size_t tuples_per_category = 32;
  ToleranceConfig tol;
  std::vector<PairwiseRelation> relations;
  /// When set, every cell runs the mutant as a taxcand/1 subprocess of this
  /// executable; otherwise in-process.
  std::optional<std::string> executable;
};

/// Corpus kills on any failing case, MT on any pairwise FAIL, HMT on any FAIL
/// of pairs plus tuples. Rows run concurrently; order follows `mutants`.
DetectionMatrix detection_matrix(const std::vector<MutantSpec>& mutants, const TaxRuleSet& rules,
                                 const MatrixConfig& config);
std::string matrix_json(const DetectionMatrix& m);
std::string matrix_table(const DetectionMatrix& m);

}  // namespace taxmorph
