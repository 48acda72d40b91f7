// An evaluatable tax computation: the oracle, an in-process fault variant,
// or an external candidate reached over taxcand/1.
#pragma once

#include <memory>
#include <string>

#include "taxmorph/oracle.hpp"

namespace taxmorph {

class TaxFunction {
 public:
  virtual ~TaxFunction() = default;

  virtual ScenarioId scenario() const = 0;
  /// Throws EvaluationError (or a subclass) when no liability is produced.
  virtual Money evaluate(const TaxpayerProfile& profile) = 0;
  /// True when evaluate may be called from several threads at once.
  virtual bool thread_safe() const { return false; }
  virtual std::string describe() const = 0;
};

class OracleFunction final : public TaxFunction {
 public:
  OracleFunction(TaxRuleSet rules, ScenarioId scenario) : rules_(std::move(rules)), scenario_(scenario) {}

  ScenarioId scenario() const override { return scenario_; }
  Money evaluate(const TaxpayerProfile& profile) override {
    return compute_total_liability(profile, scenario_, rules_);
  }
  bool thread_safe() const override { return true; }
  std::string describe() const override { return "oracle/scenario-" + std::to_string(scenario_.value()); }

  const TaxRuleSet& rules() const { return rules_; }

 private:
  TaxRuleSet rules_;
  ScenarioId scenario_;
};

/// Adapts a plain callable; used by tests for hand-built faulty programs.
template <class Fn>
class LambdaFunction final : public TaxFunction {
 public:
  LambdaFunction(ScenarioId scenario, std::string name, Fn fn)
      : scenario_(scenario), name_(std::move(name)), fn_(std::move(fn)) {}

  ScenarioId scenario() const override { return scenario_; }
  Money evaluate(const TaxpayerProfile& profile) override { return fn_(profile); }
  bool thread_safe() const override { return true; }
  std::string describe() const override { return name_; }

 private:
  ScenarioId scenario_;
  std::string name_;
  Fn fn_;
};

template <class Fn>
std::unique_ptr<TaxFunction> make_function(ScenarioId scenario, std::string name, Fn fn) {
  return std::make_unique<LambdaFunction<Fn>>(scenario, std::move(name), std::move(fn));
}

}  // namespace taxmorph
