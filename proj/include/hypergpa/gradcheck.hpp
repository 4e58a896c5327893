#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hypergpa/tensor.hpp"

namespace hypergpa {

// Builds a scalar loss on `tape` from leaves bound to the given parameter values.
using LossBuilder = std::function<Tensor(Tape& tape, std::span<const Tensor> params)>;

struct GradCheckOptions {
  double eps = 1e-5;
  // Entries whose analytic and numeric gradients are both below this are
  // compared in absolute rather than relative terms.
  double floor = 1e-6;
  // 0 checks every entry; otherwise a seeded sample of at most this many
  // entries per parameter tensor.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients with central differences:
//   err = |analytic - numeric| / max(|analytic|, |numeric|, floor)
// and returns the worst entry. Throws if the loss is ever non-finite.
GradCheckResult finite_diff_check(const LossBuilder& loss, std::span<const Array> params,
                                  const GradCheckOptions& options = {});

}  // namespace hypergpa
