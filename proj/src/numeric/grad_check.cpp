#include "wfn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wfn/errors.hpp"

namespace wfn {

namespace {

struct Eval {
  double loss;
  std::uint64_t relu_signature;
};

Eval eval_loss(const std::function<Var(Tape&)>& loss_fn) {
  Tape tape;
  const Var loss = loss_fn(tape);
  const float v = tape.value(loss)[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return {v, tape.relu_signature()};
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(Tape&)>& loss_fn,
                           std::span<Tensor* const> params, const GradCheckOptions& options) {
  for (Tensor* p : params) p->zero_grad();
  std::uint64_t signature = 0;
  {
    Tape tape;
    const Var loss = loss_fn(tape);
    if (!std::isfinite(tape.value(loss)[0])) {
      throw NumericError("grad_check: loss is not finite");
    }
    signature = tape.relu_signature();
    tape.backward(loss);
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    Tensor& p = *params[ti];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > options.coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_tensor);
    }
    for (std::size_t idx : coords) {
      const float original = p[idx];
      p[idx] = original + options.eps;
      const Eval up = eval_loss(loss_fn);
      p[idx] = original - options.eps;
      const Eval down = eval_loss(loss_fn);
      p[idx] = original;
      if (options.skip_relu_kinks &&
          (up.relu_signature != signature || down.relu_signature != signature)) {
        ++result.coords_skipped;
        continue;
      }
      const double numeric = (up.loss - down.loss) / (2.0 * static_cast<double>(options.eps));
      const double analytic = p.grad()[idx];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      ++result.coords_checked;
      if (result.worst.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = std::to_string(ti) + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return result;
}

}  // namespace wfn
