#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wfn/config.hpp"
#include "wfn/params.hpp"
#include "wfn/tape.hpp"

namespace wfn {

// Reserved vocabulary entries shared by every corpus and model.
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumReserved = 4;

/// Views onto the tensors of one sublayer. Pointers refer into the model's
/// ParamStore; tied sites point at the same tensor.
struct FfnBlock {
  Tensor* w1 = nullptr;
  Tensor* b1 = nullptr;
  Tensor* w2 = nullptr;
  Tensor* b2 = nullptr;
  Tensor* ln_gain = nullptr;
  Tensor* ln_bias = nullptr;

  bool is_noop() const noexcept { return w1 == nullptr; }
};

struct AttentionBlock {
  Tensor* wq = nullptr;
  Tensor* bq = nullptr;
  Tensor* wk = nullptr;
  Tensor* bk = nullptr;
  Tensor* wv = nullptr;
  Tensor* bv = nullptr;
  Tensor* wo = nullptr;
  Tensor* bo = nullptr;
  Tensor* ln_gain = nullptr;
  Tensor* ln_bias = nullptr;
};

/// Sequences concatenated row-wise; each keeps its own positions and masks.
struct PackedBatch {
  std::vector<int> tokens;
  std::vector<std::size_t> offsets{0};  // size() == count() + 1

  static PackedBatch pack(std::span<const std::vector<int>> sequences);
  std::size_t count() const noexcept { return offsets.size() - 1; }
  std::size_t rows() const noexcept { return tokens.size(); }
  std::size_t begin(std::size_t i) const { return offsets[i]; }
  std::size_t length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

/// Sublayer output recorded during a forward pass, keyed "<layer>.sa",
/// "<layer>.ca" or "<layer>.ffn". Order: layer, then sublayer.
struct Tap {
  std::string name;
  Tensor value;
};
using Taps = std::vector<Tap>;

class TransformerModel {
 public:
  TransformerModel(ModelConfig config, ParamStore params);

  const ModelConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  Tensor& embedding() { return params_.at("tgt_embed"); }
  const Tensor& embedding() const { return params_.at("tgt_embed"); }
  FfnBlock ffn_block(Side side, std::size_t layer);
  /// kind is "sa" or "ca".
  AttentionBlock attention_block(Side side, std::size_t layer, std::string_view kind);
  bool has_ffn(Side side) const { return ffn_width(config_, side) > 0; }

  /// Sinusoidal position table, max_len x d_model.
  const Tensor& positions() const noexcept { return positions_; }

 private:
  ModelConfig config_;
  ParamStore params_;
  Tensor positions_;
};

/// Allocates the plan of `config` and initialises it from `seed`: Xavier
/// uniform for matrices, zeros for biases, ones for layer-norm gains.
TransformerModel build_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardOptions {
  bool train = false;
  std::mt19937_64* rng = nullptr;  // required when train && dropout > 0
  bool record_taps = false;
};

/// layer_norm(x + dropout(FFN(x))); x itself when the block is a No-op.
Var ffn_forward(Tape& tape, Var x, const FfnBlock& block, float dropout,
                const ForwardOptions& options);

/// layer_norm(q_in + dropout(MHA(q_in, k_in, v_in))).
Var attention_forward(Tape& tape, Var q_in, Var k_in, Var v_in, const AttentionBlock& block,
                      std::size_t heads, const AttentionMask& mask, float dropout,
                      const ForwardOptions& options);

struct StackResult {
  Var output;
  Taps taps;
};

StackResult encoder_forward(Tape& tape, TransformerModel& model, const PackedBatch& source,
                            const ForwardOptions& options = {});

struct EncoderMemory {
  Var states;
  const PackedBatch* source = nullptr;
};

/// Runs the decoder stack and the tied output projection; `output` holds
/// logits (rows x vocab). Encoder-decoder models need `memory`; decoder-only
/// models must not receive one and may pass per-sequence prefix lengths for
/// the prefix-LM mask (empty means purely causal).
StackResult decoder_forward(Tape& tape, TransformerModel& model,
                            const std::optional<EncoderMemory>& memory, const PackedBatch& target,
                            const ForwardOptions& options = {},
                            std::span<const std::size_t> prefix_lengths = {});

/// Source positions see the whole source; target positions see the whole
/// source and the targets up to themselves.
BoolMatrix prefix_lm_mask(std::size_t src_len, std::size_t tgt_len);

/// Embedding lookup scaled by sqrt(d_model) plus sinusoidal positions that
/// restart at every sequence of the batch.
Var embed_tokens(Tape& tape, TransformerModel& model, const PackedBatch& batch, float dropout,
                 const ForwardOptions& options);

}  // namespace wfn
