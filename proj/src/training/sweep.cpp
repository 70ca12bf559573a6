#include "wfn/sweep.hpp"

#include <cstdio>

#include "wfn/errors.hpp"
#include "wfn/params.hpp"

namespace wfn {

ModelConfig with_side_dff(ModelConfig base, Side side, std::size_t d_ff) {
  FfnStrategy& strategy = side == Side::Encoder ? base.sharing.enc_ffn : base.sharing.dec_ffn;
  if (strategy.kind != FfnStrategyKind::Individual && strategy.kind != FfnStrategyKind::NoOp) {
    throw ConfigError("d_ff sweep needs Individual FFNs on the " + to_string(side) + ", got " +
                      to_string(strategy));
  }
  auto& width = side == Side::Encoder ? base.d_ff_enc : base.d_ff_dec;
  if (d_ff == 0) {
    strategy = FfnStrategy::no_op();
    width.reset();
  } else {
    strategy = FfnStrategy::individual();
    width = d_ff;
  }
  validate(base);
  return base;
}

std::vector<SweepRow> ffn_dim_sweep(Side side, std::span<const std::size_t> dims,
                                    const ModelConfig& base, const Corpus& train_set,
                                    const Corpus& eval, const TrainOptions& options,
                                    std::uint64_t model_seed) {
  std::vector<SweepRow> rows;
  for (std::size_t d : dims) {
    const ModelConfig config = with_side_dff(base, side, d);
    TransformerModel model = build_model(config, model_seed);
    train(model, train_set, options);
    rows.push_back({d, side, token_accuracy(model, eval).accuracy(), model.params().total(),
                    d == 0});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "d_ff,side,token_accuracy,params,noop\n";
  for (const auto& r : rows) {
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.6f", r.token_accuracy);
    out += std::to_string(r.d_ff) + "," + to_string(r.side) + "," + acc + "," +
           std::to_string(r.params) + "," + (r.noop ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace wfn
