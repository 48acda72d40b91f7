// Batch evaluation kernels. The serial path is the reference; the OpenMP
// path must produce identical outcomes in identical order.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taxmorph/tax_function.hpp"

namespace taxmorph {

enum class Execution { Serial, Parallel };

struct EvalOutcome {
  std::optional<Money> value;
  std::string error;  // set iff !value

  bool operator==(const EvalOutcome&) const = default;
};

std::vector<EvalOutcome> evaluate_batch_serial(TaxFunction& f, std::span<const TaxpayerProfile> profiles);

/// Splits the batch across OpenMP threads when `f` is thread-safe; falls
/// back to the serial kernel otherwise.
std::vector<EvalOutcome> evaluate_batch_parallel(TaxFunction& f, std::span<const TaxpayerProfile> profiles);

inline std::vector<EvalOutcome> evaluate_batch(TaxFunction& f, std::span<const TaxpayerProfile> profiles,
                                               Execution mode) {
  return mode == Execution::Parallel ? evaluate_batch_parallel(f, profiles) : evaluate_batch_serial(f, profiles);
}

/// Sets the OpenMP team size; 0 keeps the runtime default.
void set_worker_count(int jobs);
int worker_count();

}  // namespace taxmorph
