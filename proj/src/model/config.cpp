#include "wfn/config.hpp"

#include <algorithm>

#include "wfn/errors.hpp"

namespace wfn {

namespace {

std::string side_label(Side side) { return side == Side::Encoder ? "encoder" : "decoder"; }

void check_strategy(const FfnStrategy& s, std::size_t n, Side side) {
  const auto where = " (" + side_label(side) + " FFN, " + std::to_string(n) + " layers)";
  switch (s.kind) {
    case FfnStrategyKind::Sequence:
    case FfnStrategyKind::Cycle:
      if (s.distinct == 0 || n % s.distinct != 0) {
        throw ConfigError(to_string(s.kind) + " sharing needs M dividing N, got M=" +
                          std::to_string(s.distinct) + where);
      }
      break;
    case FfnStrategyKind::CycleRev:
      if (n % 2 != 0 || s.distinct != n / 2 || s.distinct == 0) {
        throw ConfigError("CycleRev sharing needs an even N and M = N/2, got M=" +
                          std::to_string(s.distinct) + where);
      }
      break;
    default:
      break;
  }
}

}  // namespace

std::size_t layer_count(const ModelConfig& config, Side side) {
  return side == Side::Encoder ? config.n_enc : config.n_dec;
}

std::size_t ffn_width(const ModelConfig& config, Side side) {
  const FfnStrategy& s = side == Side::Encoder ? config.sharing.enc_ffn : config.sharing.dec_ffn;
  if (s.kind == FfnStrategyKind::NoOp || layer_count(config, side) == 0) return 0;
  if (s.kind == FfnStrategyKind::Individual) {
    const auto& over = side == Side::Encoder ? config.d_ff_enc : config.d_ff_dec;
    return over.value_or(config.d_ff);
  }
  return config.d_ff_shared.value_or(config.d_ff);
}

FfnStrategy effective_ffn_strategy(const ModelConfig& config, Side side) {
  if (ffn_width(config, side) == 0) return FfnStrategy::no_op();
  return side == Side::Encoder ? config.sharing.enc_ffn : config.sharing.dec_ffn;
}

void validate(const ModelConfig& c) {
  if (c.d_model == 0) throw ConfigError("d_model must be positive");
  if (c.heads == 0 || c.d_model % c.heads != 0) {
    throw ConfigError("d_model (" + std::to_string(c.d_model) + ") must be divisible by heads (" +
                      std::to_string(c.heads) + ")");
  }
  if (c.vocab_size < 5) throw ConfigError("vocab_size must exceed the 4 reserved tokens");
  if (c.max_len == 0) throw ConfigError("max_len must be positive");
  if (!(c.dropout >= 0.0f && c.dropout < 1.0f)) throw ConfigError("dropout must be in [0, 1)");
  const auto& s = c.sharing;
  if (c.architecture == Architecture::DecoderOnly) {
    if (c.n_enc != 0) throw ConfigError("decoder-only architecture requires n_enc = 0");
    if (s.tie_enc_dec_ffn) throw ConfigError("decoder-only architecture has no encoder FFN to tie");
    if (s.dec_ffn.kind != FfnStrategyKind::Individual &&
        s.dec_ffn.kind != FfnStrategyKind::SharedAll && s.dec_ffn.kind != FfnStrategyKind::NoOp) {
      throw ConfigError(
          "decoder-only architecture only defines Individual, SharedDec and NoDec FFN configs");
    }
    if (s.enc_self_attn != AttnSharing::Individual || s.dec_cross_attn != AttnSharing::Individual) {
      throw ConfigError("decoder-only architecture has no encoder or cross attention to share");
    }
  }
  if (c.n_dec == 0) throw ConfigError("n_dec must be positive");
  check_strategy(s.enc_ffn, c.n_enc, Side::Encoder);
  check_strategy(s.dec_ffn, c.n_dec, Side::Decoder);
  if (s.tie_enc_dec_ffn) {
    if (s.enc_ffn.kind != FfnStrategyKind::SharedAll ||
        s.dec_ffn.kind != FfnStrategyKind::SharedAll) {
      throw ConfigError("tie_enc_dec_ffn requires enc_ffn = dec_ffn = SharedAll");
    }
    if (c.n_enc == 0) throw ConfigError("tie_enc_dec_ffn requires an encoder");
    if (ffn_width(c, Side::Encoder) != ffn_width(c, Side::Decoder)) {
      throw ConfigError("tie_enc_dec_ffn requires equal d_ff' on both sides");
    }
  }
}

std::vector<std::size_t> resolve_ffn_assignment(FfnStrategyKind kind, std::size_t n,
                                                std::size_t m) {
  std::vector<std::size_t> out;
  switch (kind) {
    case FfnStrategyKind::NoOp:
      return out;
    case FfnStrategyKind::Individual:
      for (std::size_t i = 0; i < n; ++i) out.push_back(i);
      return out;
    case FfnStrategyKind::SharedAll:
      out.assign(n, 0);
      return out;
    case FfnStrategyKind::Sequence:
    case FfnStrategyKind::Cycle:
      if (m == 0 || n % m != 0) {
        throw ConfigError(to_string(kind) + " sharing needs M dividing N, got N=" +
                          std::to_string(n) + ", M=" + std::to_string(m));
      }
      for (std::size_t i = 0; i < n; ++i)
        out.push_back(kind == FfnStrategyKind::Sequence ? i / (n / m) : i % m);
      return out;
    case FfnStrategyKind::CycleRev:
      if (n % 2 != 0 || m == 0 || m != n / 2) {
        throw ConfigError("CycleRev sharing needs an even N and M = N/2, got N=" +
                          std::to_string(n) + ", M=" + std::to_string(m));
      }
      for (std::size_t i = 0; i < m; ++i) out.push_back(i);
      for (std::size_t i = m; i-- > 0;) out.push_back(i);
      return out;
  }
  return out;
}

std::vector<std::size_t> resolve_ffn_assignment(const FfnStrategy& strategy, std::size_t n) {
  return resolve_ffn_assignment(strategy.kind, n, strategy.distinct);
}

std::size_t one_wide_dff(const ModelConfig& config) {
  if (config.architecture != Architecture::EncoderDecoder) {
    throw ConfigError("one_wide_dff is defined for encoder-decoder models");
  }
  return (config.n_enc + config.n_dec) * config.d_ff;
}

ModelConfig transformer_big(std::size_t vocab_size) {
  ModelConfig c;
  c.n_enc = 6;
  c.n_dec = 6;
  c.d_model = 1024;
  c.d_ff = 4096;
  c.heads = 16;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig transformer_base(std::size_t vocab_size) {
  ModelConfig c = transformer_big(vocab_size);
  c.d_model = 512;
  c.d_ff = 2048;
  c.heads = 8;
  return c;
}

ModelConfig deep_encoder_shallow_decoder(std::size_t vocab_size) {
  ModelConfig c = transformer_big(vocab_size);
  c.n_enc = 12;
  c.n_dec = 2;
  return c;
}

ModelConfig decoder_only_big(std::size_t vocab_size) {
  ModelConfig c = transformer_big(vocab_size);
  c.n_enc = 0;
  c.n_dec = 12;
  c.architecture = Architecture::DecoderOnly;
  return c;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "baseline", "SharedEnc",  "SharedDec",      "SharedEncSharedDec", "SharedEncDec",
      "NoEnc",    "NoDec",      "NoEncNoDec",     "SharedEncNoDec",     "NoEncSharedDec",
      "OneWideFFN"};
  return names;
}

ModelConfig apply_preset(ModelConfig base, std::string_view preset) {
  using K = FfnStrategy;
  SharingSpec s;
  s.enc_self_attn = base.sharing.enc_self_attn;
  s.dec_self_attn = base.sharing.dec_self_attn;
  s.dec_cross_attn = base.sharing.dec_cross_attn;
  if (preset == "baseline") {
    s.enc_ffn = K::individual();
    s.dec_ffn = K::individual();
  } else if (preset == "SharedEnc") {
    s.enc_ffn = K::shared_all();
    s.dec_ffn = K::individual();
  } else if (preset == "SharedDec") {
    s.enc_ffn = K::individual();
    s.dec_ffn = K::shared_all();
  } else if (preset == "SharedEncSharedDec") {
    s.enc_ffn = K::shared_all();
    s.dec_ffn = K::shared_all();
  } else if (preset == "SharedEncDec") {
    s.enc_ffn = K::shared_all();
    s.dec_ffn = K::shared_all();
    s.tie_enc_dec_ffn = true;
  } else if (preset == "NoEnc") {
    s.enc_ffn = K::no_op();
    s.dec_ffn = K::individual();
  } else if (preset == "NoDec") {
    s.enc_ffn = K::individual();
    s.dec_ffn = K::no_op();
  } else if (preset == "NoEncNoDec") {
    s.enc_ffn = K::no_op();
    s.dec_ffn = K::no_op();
  } else if (preset == "SharedEncNoDec") {
    s.enc_ffn = K::shared_all();
    s.dec_ffn = K::no_op();
  } else if (preset == "NoEncSharedDec") {
    s.enc_ffn = K::no_op();
    s.dec_ffn = K::shared_all();
  } else if (preset == "OneWideFFN") {
    s.enc_ffn = K::shared_all();
    s.dec_ffn = K::no_op();
    base.d_ff_shared = one_wide_dff(base);
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + std::string(preset) + "'; valid presets: " + valid);
  }
  if (base.architecture == Architecture::DecoderOnly) {
    if (preset != "baseline" && preset != "SharedDec" && preset != "NoDec") {
      throw ConfigError("preset '" + std::string(preset) +
                        "' is not defined for decoder-only models (use baseline, SharedDec, NoDec)");
    }
    s.enc_ffn = K::individual();
  }
  base.sharing = s;
  return base;
}

std::string to_string(FfnStrategyKind kind) {
  switch (kind) {
    case FfnStrategyKind::Individual: return "Individual";
    case FfnStrategyKind::SharedAll: return "SharedAll";
    case FfnStrategyKind::NoOp: return "NoOp";
    case FfnStrategyKind::Sequence: return "Sequence";
    case FfnStrategyKind::Cycle: return "Cycle";
    case FfnStrategyKind::CycleRev: return "CycleRev";
  }
  return "?";
}

std::string to_string(const FfnStrategy& s) {
  switch (s.kind) {
    case FfnStrategyKind::Sequence:
    case FfnStrategyKind::Cycle:
    case FfnStrategyKind::CycleRev:
      return to_string(s.kind) + "(" + std::to_string(s.distinct) + ")";
    default:
      return to_string(s.kind);
  }
}

std::string to_string(Architecture arch) {
  return arch == Architecture::EncoderDecoder ? "encoder-decoder" : "decoder-only";
}

std::string to_string(Side side) { return side_label(side); }

FfnStrategyKind parse_ffn_strategy_kind(std::string_view name) {
  for (auto k : {FfnStrategyKind::Individual, FfnStrategyKind::SharedAll, FfnStrategyKind::NoOp,
                 FfnStrategyKind::Sequence, FfnStrategyKind::Cycle, FfnStrategyKind::CycleRev}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown FFN strategy '" + std::string(name) +
                    "' (Individual, SharedAll, NoOp, Sequence, Cycle, CycleRev)");
}

Architecture parse_architecture(std::string_view name) {
  if (name == "encoder-decoder") return Architecture::EncoderDecoder;
  if (name == "decoder-only") return Architecture::DecoderOnly;
  throw ConfigError("unknown architecture '" + std::string(name) +
                    "' (encoder-decoder, decoder-only)");
}

Side parse_side(std::string_view name) {
  if (name == "encoder") return Side::Encoder;
  if (name == "decoder") return Side::Decoder;
  throw ConfigError("unknown side '" + std::string(name) + "' (encoder, decoder)");
}

}  // namespace wfn
