#include "taxmorph/kernels.hpp"

#include <omp.h>

#include "taxmorph/errors.hpp"

namespace taxmorph {

namespace {

EvalOutcome evaluate_one(TaxFunction& f, const TaxpayerProfile& profile) {
  try {
    return {f.evaluate(profile), {}};
  } catch (const std::exception& e) {
    return {std::nullopt, e.what()};
  }
}

}  // namespace

std::vector<EvalOutcome> evaluate_batch_serial(TaxFunction& f, std::span<const TaxpayerProfile> profiles) {
  std::vector<EvalOutcome> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) out.push_back(evaluate_one(f, p));
  return out;
}

std::vector<EvalOutcome> evaluate_batch_parallel(TaxFunction& f, std::span<const TaxpayerProfile> profiles) {
  if (!f.thread_safe()) return evaluate_batch_serial(f, profiles);
  std::vector<EvalOutcome> out(profiles.size());
  const auto n = static_cast<std::ptrdiff_t>(profiles.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = evaluate_one(f, profiles[static_cast<std::size_t>(i)]);
  }
  return out;
}

void set_worker_count(int jobs) {
  if (jobs > 0) omp_set_num_threads(jobs);
}

int worker_count() { return omp_get_max_threads(); }

}  // namespace taxmorph
