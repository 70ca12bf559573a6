#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wfn {

enum class Architecture { EncoderDecoder, DecoderOnly };
enum class Side { Encoder, Decoder };

enum class FfnStrategyKind { Individual, SharedAll, NoOp, Sequence, Cycle, CycleRev };

/// How the N FFN sites of one side map onto physical FFNs. `distinct` is M
/// for Sequence, Cycle and CycleRev and ignored otherwise.
struct FfnStrategy {
  FfnStrategyKind kind = FfnStrategyKind::Individual;
  std::size_t distinct = 0;

  static FfnStrategy individual() { return {FfnStrategyKind::Individual, 0}; }
  static FfnStrategy shared_all() { return {FfnStrategyKind::SharedAll, 0}; }
  static FfnStrategy no_op() { return {FfnStrategyKind::NoOp, 0}; }
  static FfnStrategy sequence(std::size_t m) { return {FfnStrategyKind::Sequence, m}; }
  static FfnStrategy cycle(std::size_t m) { return {FfnStrategyKind::Cycle, m}; }
  static FfnStrategy cycle_rev(std::size_t m) { return {FfnStrategyKind::CycleRev, m}; }

  bool operator==(const FfnStrategy&) const = default;
};

enum class AttnSharing { Individual, SharedAll };

struct SharingSpec {
  FfnStrategy enc_ffn;
  FfnStrategy dec_ffn;
  /// One FFN for both encoder and decoder; requires SharedAll on both sides.
  bool tie_enc_dec_ffn = false;
  AttnSharing enc_self_attn = AttnSharing::Individual;
  AttnSharing dec_self_attn = AttnSharing::Individual;
  AttnSharing dec_cross_attn = AttnSharing::Individual;

  bool operator==(const SharingSpec&) const = default;
};

struct ModelConfig {
  std::size_t n_enc = 6;
  std::size_t n_dec = 6;
  std::size_t d_model = 1024;
  std::size_t d_ff = 4096;
  /// Width of shared FFNs (d_ff'); defaults to d_ff. Zero removes the FFN.
  std::optional<std::size_t> d_ff_shared;
  /// Per-side width of Individual FFNs, overriding d_ff (used by sweeps).
  std::optional<std::size_t> d_ff_enc;
  std::optional<std::size_t> d_ff_dec;
  std::size_t heads = 16;
  std::size_t vocab_size = 32000;
  std::size_t max_len = 256;
  float dropout = 0.1f;
  Architecture architecture = Architecture::EncoderDecoder;
  SharingSpec sharing;

  bool operator==(const ModelConfig&) const = default;
};

/// Throws ConfigError naming the violated rule.
void validate(const ModelConfig& config);

/// Strategy actually applied to a side: NoOp when the resolved width is 0.
FfnStrategy effective_ffn_strategy(const ModelConfig& config, Side side);
/// Inner width of every FFN on a side; 0 when the side has no FFN.
std::size_t ffn_width(const ModelConfig& config, Side side);
std::size_t layer_count(const ModelConfig& config, Side side);

/// Physical FFN index for each of the n layers of a side, 0-based.
///   Individual: i            SharedAll: 0
///   Sequence:   i / (n/m)    Cycle:     i mod m
///   CycleRev:   palindrome, first half 0..m-1, second half m-1..0 (m = n/2)
/// NoOp yields an empty list. Throws ConfigError when m does not divide n
/// (or m != n/2 for CycleRev).
std::vector<std::size_t> resolve_ffn_assignment(FfnStrategyKind kind, std::size_t n,
                                                std::size_t m);
std::vector<std::size_t> resolve_ffn_assignment(const FfnStrategy& strategy, std::size_t n);

/// Width that makes a single shared FFN as large as all individual FFNs:
/// (n_enc + n_dec) * d_ff.
std::size_t one_wide_dff(const ModelConfig& config);

// Architecture shapes used in the experiments.
ModelConfig transformer_big(std::size_t vocab_size = 32000);
ModelConfig transformer_base(std::size_t vocab_size = 32000);
ModelConfig deep_encoder_shallow_decoder(std::size_t vocab_size = 32000);
ModelConfig decoder_only_big(std::size_t vocab_size = 32000);

/// Preset names in table order.
const std::vector<std::string>& preset_names();
/// Rewrites the sharing plan (and d_ff' for OneWideFFN) of `base` according
/// to a named preset. Throws ConfigError listing the valid names.
ModelConfig apply_preset(ModelConfig base, std::string_view preset);

std::string to_string(FfnStrategyKind kind);
std::string to_string(const FfnStrategy& strategy);
std::string to_string(Architecture arch);
std::string to_string(Side side);
FfnStrategyKind parse_ffn_strategy_kind(std::string_view name);
Architecture parse_architecture(std::string_view name);
Side parse_side(std::string_view name);

}  // namespace wfn
