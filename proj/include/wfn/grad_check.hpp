#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "wfn/tape.hpp"

namespace wfn {

struct GradCheckOptions {
  float eps = 1e-3f;
  /// Coordinates sampled per tensor; tensors smaller than this are checked
  /// exhaustively.
  std::size_t coords_per_tensor = 16;
  std::uint64_t seed = 0;
  /// Skip coordinates whose perturbation changes which relu units are
  /// active; the loss is not differentiable across such a change.
  bool skip_relu_kinks = false;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;
  std::string worst;  // "<tensor index>[<flat index>]" of the worst coordinate
};

/// Compares reverse-mode gradients against central finite differences.
///
/// `loss_fn` records a scalar loss on the given tape, reading parameters
/// through Tape::param on the tensors in `params`. It must be deterministic.
/// The error per coordinate is |analytic - numeric| / max(1, |numeric|).
/// Parameter values are restored on return; gradients are left holding the
/// analytic result.
GradCheckResult grad_check(const std::function<Var(Tape&)>& loss_fn,
                           std::span<Tensor* const> params, const GradCheckOptions& options = {});

}  // namespace wfn
