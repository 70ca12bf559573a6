#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wfn/config.hpp"
#include "wfn/corpus.hpp"
#include "wfn/trainer.hpp"

namespace wfn {

struct SweepRow {
  std::size_t d_ff = 0;
  Side side = Side::Encoder;
  double token_accuracy = 0.0;
  std::uint64_t params = 0;
  bool noop = false;
};

/// Config with only `side`'s FFN width changed; 0 turns that side's FFNs
/// into No-ops. The side must use Individual FFNs (or already be No-op).
ModelConfig with_side_dff(ModelConfig base, Side side, std::size_t d_ff);

/// Trains one model per width from `model_seed` and reports teacher-forced
/// token accuracy on `eval`.
std::vector<SweepRow> ffn_dim_sweep(Side side, std::span<const std::size_t> dims,
                                    const ModelConfig& base, const Corpus& train_set,
                                    const Corpus& eval, const TrainOptions& options,
                                    std::uint64_t model_seed);

/// Header `d_ff,side,token_accuracy,params,noop`.
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace wfn
