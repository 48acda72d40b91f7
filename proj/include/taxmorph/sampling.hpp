// Seeded sampling of profiles and values. Range mapping is done here rather
// than through <random> distributions so that streams are identical across
// standard library implementations.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "taxmorph/oracle.hpp"

namespace taxmorph {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a campaign seed and a salt.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);  // inclusive
Money uniform_money(Rng& rng, Money lo, Money hi);                      // inclusive, cent grid
double uniform_unit(Rng& rng);                                          // [0, 1)
bool chance(Rng& rng, int percent);

/// The fixed profile that tuple generators perturb one label at a time.
TaxpayerProfile base_profile(ScenarioId scenario, FilingStatus status, const TaxRuleSet& rules);

/// A random profile filling the fields the scenario reads.
TaxpayerProfile random_profile(ScenarioId scenario, const TaxRuleSet& rules, Rng& rng);

}  // namespace taxmorph
