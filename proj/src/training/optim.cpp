#include "wfn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "wfn/errors.hpp"

namespace wfn {

double lr_at(const Schedule& schedule, std::size_t step) {
  if (step == 0) throw ConfigError("lr_at: step must be >= 1");
  if (schedule.warmup_steps == 0) throw ConfigError("lr_at: warmup_steps must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(schedule.warmup_steps);
  return schedule.base_lr * std::min(s * std::pow(w, -1.5), 1.0 / std::sqrt(s)) * std::sqrt(w);
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
  for (const auto& name : params.names()) {
    const Tensor& t = params.physical(name);
    for (float g : t.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in '" + name + "' at optimizer step " +
                           std::to_string(state.step_ + 1));
      }
    }
  }
  ++state.step_;
  const auto& c = state.config_;
  const double t = static_cast<double>(state.step_);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& name : params.names()) {
    Tensor& p = params.physical(name);
    auto& mom = state.moments_[name];
    if (mom.m.empty()) {
      mom.m.assign(p.size(), 0.0f);
      mom.v.assign(p.size(), 0.0f);
    }
    const auto g = std::as_const(p).grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      const double m = c.beta1 * mom.m[i] + (1.0 - c.beta1) * gi;
      const double v = c.beta2 * mom.v[i] + (1.0 - c.beta2) * gi * gi;
      mom.m[i] = static_cast<float>(m);
      mom.v[i] = static_cast<float>(v);
      const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
      p[i] = static_cast<float>(p[i] - update);
    }
  }
}

}  // namespace wfn
