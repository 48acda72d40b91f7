#include "taxmorph/sampling.hpp"

#include <vector>

namespace taxmorph {

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : salt) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(rng() % span);
}

Money uniform_money(Rng& rng, Money lo, Money hi) { return Money::from_units(uniform_int(rng, lo.units(), hi.units())); }

double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

bool chance(Rng& rng, int percent) { return uniform_int(rng, 0, 99) < percent; }

namespace {

void set_code(TaxpayerProfile& p, const std::string& raw, const TaxRuleSet& rules) {
  if (rules.retirement_rules && !rules.retirement_rules->distribution_codes.empty()) {
    p.distribution_code = normalize_distribution_code(raw, rules);
  } else {
    p.distribution_code.raw = raw;
  }
}

}  // namespace

TaxpayerProfile base_profile(ScenarioId scenario, FilingStatus status, const TaxRuleSet& rules) {
  TaxpayerProfile p;
  p.sts = status;
  p.age = 40;
  if (is_joint(status)) p.spouse_age = 40;
  switch (scenario.value()) {
    case 1:
      p.income = dollars(60000);
      break;
    case 2:
      p.income = dollars(15000);
      p.num_qualifying_children = 1;
      break;
    case 3:
      p.income = dollars(150000);
      p.num_qualifying_children = 2;
      p.num_other_dependents = 1;
      break;
    case 4:
      p.income = dollars(80000);
      p.qualified_expenses = dollars(3000);
      break;
    case 5:
      p.income = dollars(100000);
      p.use_itemized = true;
      p.salt_paid = dollars(5000);
      p.mortgage_interest = dollars(8000);
      p.charitable_contributions = dollars(2000);
      break;
    default:
      p.income = dollars(30000);
      p.age = 45;
      p.gross_distribution = dollars(20000);
      set_code(p, "1", rules);
      break;
  }
  return p;
}

TaxpayerProfile random_profile(ScenarioId scenario, const TaxRuleSet& rules, Rng& rng) {
  TaxpayerProfile p;
  p.sts = kAllStatuses[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
  p.age = static_cast<int>(uniform_int(rng, 18, 80));
  if (is_joint(p.sts)) p.spouse_age = static_cast<int>(uniform_int(rng, 18, 80));
  p.blind = chance(rng, 10);
  if (is_joint(p.sts)) p.spouse_blind = chance(rng, 10);
  switch (scenario.value()) {
    case 1:
      p.income = uniform_money(rng, Money{}, dollars(250000));
      break;
    case 2:
      p.income = uniform_money(rng, Money{}, dollars(60000));
      p.num_qualifying_children = static_cast<int>(uniform_int(rng, 0, 3));
      break;
    case 3:
      p.income = uniform_money(rng, Money{}, dollars(450000));
      p.num_qualifying_children = static_cast<int>(uniform_int(rng, 0, 4));
      p.num_other_dependents = static_cast<int>(uniform_int(rng, 0, 3));
      break;
    case 4:
      p.income = uniform_money(rng, Money{}, dollars(150000));
      p.qualified_expenses = uniform_money(rng, Money{}, dollars(6000));
      if (chance(rng, 30)) p.scholarships = uniform_money(rng, Money{}, dollars(2000));
      if (chance(rng, 10)) p.enrollment_status = Enrollment::LessThanHalfTime;
      p.year_in_school = static_cast<int>(uniform_int(rng, 1, 5));
      break;
    case 5:
      p.income = uniform_money(rng, Money{}, dollars(250000));
      p.use_itemized = chance(rng, 70);
      p.medical_expenses = uniform_money(rng, Money{}, dollars(30000));
      p.salt_paid = uniform_money(rng, Money{}, dollars(20000));
      p.mortgage_interest = uniform_money(rng, Money{}, dollars(20000));
      p.charitable_contributions = uniform_money(rng, Money{}, dollars(10000));
      if (chance(rng, 20)) p.casualty_loss = uniform_money(rng, Money{}, dollars(5000));
      break;
    default: {
      p.income = uniform_money(rng, Money{}, dollars(150000));
      p.age = static_cast<int>(uniform_int(rng, 30, 75));
      p.gross_distribution = uniform_money(rng, Money{}, dollars(100000));
      std::vector<std::string> codes;
      if (rules.retirement_rules) {
        for (const auto& [raw, _] : rules.retirement_rules->distribution_codes) codes.push_back(raw);
      }
      if (!codes.empty()) set_code(p, codes[static_cast<std::size_t>(uniform_int(rng, 0, std::ssize(codes) - 1))], rules);
      if (chance(rng, 40)) {
        p.cost_basis = uniform_money(rng, Money{}, dollars(50000));
        p.prior_basis_recovered = uniform_money(rng, Money{}, Money::from_units(p.cost_basis.units() / 2));
      }
      if (chance(rng, 40)) {
        p.annuity_payments_this_year = static_cast<int>(uniform_int(rng, 1, 12));
        p.annuity_start_age = static_cast<int>(uniform_int(rng, 50, 80));
      }
      break;
    }
  }
  return p;
}

}  // namespace taxmorph
