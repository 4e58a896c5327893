#include "hypergpa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hypergpa {
namespace {

double evaluate(const LossBuilder& loss, std::span<const Array> params) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const Array& p : params) leaves.push_back(tape.leaf(p));
  const double v = loss(tape, leaves).value().item();
  if (!std::isfinite(v)) throw Error("finite_diff_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const LossBuilder& loss, std::span<const Array> params,
                                  const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw Error("finite_diff_check: eps must be positive");

  std::vector<Array> analytic;
  {
    Tape tape;
    std::vector<Tensor> leaves;
    for (const Array& p : params) leaves.push_back(tape.leaf(p));
    const Tensor l = loss(tape, leaves);
    if (!std::isfinite(l.value().item())) throw Error("finite_diff_check: loss is not finite");
    analytic = tape.grad(l, leaves);
  }

  std::mt19937_64 rng(options.seed);
  std::vector<Array> work(params.begin(), params.end());
  GradCheckResult result;
  for (std::size_t pi = 0; pi < work.size(); ++pi) {
    std::vector<std::size_t> entries(work[pi].size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_param && entries.size() > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t k : entries) {
      const double original = work[pi][k];
      work[pi][k] = original + options.eps;
      const double up = evaluate(loss, work);
      work[pi][k] = original - options.eps;
      const double down = evaluate(loss, work);
      work[pi][k] = original;

      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[pi][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = pi;
        result.worst_entry = k;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace hypergpa
