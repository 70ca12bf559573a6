#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "wfn/params.hpp"

namespace wfn {

struct Schedule {
  double base_lr = 7e-4;
  std::size_t warmup_steps = 4000;
};

/// Linear warmup to base_lr at step == warmup, then base_lr * sqrt(warmup / step).
double lr_at(const Schedule& schedule, std::size_t step);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

/// Moments keyed by canonical tensor name, so tied sites share one set.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const noexcept { return config_; }
  std::size_t step() const noexcept { return step_; }
  bool has_moments(const std::string& name) const { return moments_.count(name) != 0; }
  std::size_t moment_sets() const noexcept { return moments_.size(); }

 private:
  friend void adam_step(ParamStore&, AdamState&, double);
  struct Moments {
    std::vector<float> m, v;
  };
  AdamConfig config_;
  std::size_t step_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

/// One bias-corrected Adam update from the accumulated gradients. Tensors
/// without a gradient buffer are treated as having zero gradient. A
/// non-finite gradient throws NumericError before any tensor changes.
void adam_step(ParamStore& params, AdamState& state, double lr);

}  // namespace wfn
