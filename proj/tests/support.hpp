// Shared fixture loading for the test binaries.
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "taxmorph/ruleset.hpp"

namespace taxmorph::testing {

inline std::string fixture_path(const std::string& name) { return std::string(TAXMORPH_FIXTURE_DIR) + "/" + name; }

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline const TaxRuleSet& ty2021() {
  static const TaxRuleSet rules = load_ruleset_file(fixture_path("ty2021.json"));
  return rules;
}

inline const TaxRuleSet& ty2021_no_deduction() {
  static const TaxRuleSet rules = load_ruleset_file(fixture_path("ty2021_no_deduction.json"));
  return rules;
}

inline const TaxRuleSet& bracket_example() {
  static const TaxRuleSet rules = load_ruleset_file(fixture_path("bracket_example.json"));
  return rules;
}

}  // namespace taxmorph::testing
