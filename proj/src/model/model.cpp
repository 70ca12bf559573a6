#include "wfn/model.hpp"

#include <cmath>

#include "wfn/errors.hpp"

namespace wfn {

PackedBatch PackedBatch::pack(std::span<const std::vector<int>> sequences) {
  PackedBatch b;
  for (const auto& s : sequences) {
    b.tokens.insert(b.tokens.end(), s.begin(), s.end());
    b.offsets.push_back(b.tokens.size());
  }
  return b;
}

namespace {

Tensor sinusoidal_table(std::size_t max_len, std::size_t d) {
  Tensor t({max_len, d});
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      t.at(pos, i) = static_cast<float>(std::sin(static_cast<double>(pos) * freq));
      if (i + 1 < d) t.at(pos, i + 1) = static_cast<float>(std::cos(static_cast<double>(pos) * freq));
    }
  }
  return t;
}

Var maybe_dropout(Tape& tape, Var x, float p, const ForwardOptions& options) {
  if (!options.train || p <= 0.0f) return x;
  if (!options.rng) throw ConfigError("training forward with dropout needs an RNG");
  return tape.dropout(x, p, *options.rng);
}

Var linear(Tape& tape, Var x, Tensor& w, Tensor& b) {
  return tape.add_bias(tape.matmul(x, tape.param(w)), tape.param(b));
}

void record(const ForwardOptions& options, Taps& taps, std::string name, const Tape& tape, Var v) {
  if (options.record_taps) taps.push_back({std::move(name), tape.value(v)});
}

}  // namespace

TransformerModel::TransformerModel(ModelConfig config, ParamStore params)
    : config_(std::move(config)),
      params_(std::move(params)),
      positions_(sinusoidal_table(config_.max_len, config_.d_model)) {}

FfnBlock TransformerModel::ffn_block(Side side, std::size_t layer) {
  if (!has_ffn(side)) return {};
  auto get = [&](const char* f) { return &params_.at(ffn_site(side, layer, f)); };
  return {get("w1"), get("b1"), get("w2"), get("b2"), get("ln_g"), get("ln_b")};
}

AttentionBlock TransformerModel::attention_block(Side side, std::size_t layer,
                                                 std::string_view kind) {
  auto get = [&](const char* f) { return &params_.at(attn_site(side, layer, kind, f)); };
  return {get("wq"), get("bq"), get("wk"), get("bk"), get("wv"),
          get("bv"), get("wo"), get("bo"), get("ln_g"), get("ln_b")};
}

TransformerModel build_model(const ModelConfig& config, std::uint64_t seed) {
  const ParamPlan plan = plan_params(config);
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (const auto& t : plan.tensors) {
    Tensor value(t.shape);
    switch (t.init) {
      case PlannedTensor::Init::Zeros:
        break;
      case PlannedTensor::Init::Ones:
        for (auto& v : value.values()) v = 1.0f;
        break;
      case PlannedTensor::Init::Xavier: {
        const double fan_in = static_cast<double>(t.shape[0]);
        const double fan_out = static_cast<double>(t.shape.size() > 1 ? t.shape[1] : t.shape[0]);
        const float bound = static_cast<float>(std::sqrt(6.0 / (fan_in + fan_out)));
        std::uniform_real_distribution<float> u(-bound, bound);
        for (auto& v : value.values()) v = u(rng);
        break;
      }
    }
    store.add(t.name, std::move(value));
  }
  for (const auto& [logical, canonical] : plan.aliases) store.alias(logical, canonical);
  return TransformerModel(config, std::move(store));
}

Var ffn_forward(Tape& tape, Var x, const FfnBlock& block, float dropout,
                const ForwardOptions& options) {
  if (block.is_noop()) return x;
  Var h = tape.relu(linear(tape, x, *block.w1, *block.b1));
  Var y = maybe_dropout(tape, linear(tape, h, *block.w2, *block.b2), dropout, options);
  return tape.layer_norm(tape.add(x, y), tape.param(*block.ln_gain), tape.param(*block.ln_bias));
}

Var attention_forward(Tape& tape, Var q_in, Var k_in, Var v_in, const AttentionBlock& block,
                      std::size_t heads, const AttentionMask& mask, float dropout,
                      const ForwardOptions& options) {
  Var q = linear(tape, q_in, *block.wq, *block.bq);
  Var k = linear(tape, k_in, *block.wk, *block.bk);
  Var v = linear(tape, v_in, *block.wv, *block.bv);
  Var heads_out = tape.attention(q, k, v, heads, mask);
  Var o = maybe_dropout(tape, linear(tape, heads_out, *block.wo, *block.bo), dropout, options);
  return tape.layer_norm(tape.add(q_in, o), tape.param(*block.ln_gain), tape.param(*block.ln_bias));
}

Var embed_tokens(Tape& tape, TransformerModel& model, const PackedBatch& batch, float dropout,
                 const ForwardOptions& options) {
  const auto& c = model.config();
  Var emb = tape.embedding(tape.param(model.embedding()), batch.tokens,
                           std::sqrt(static_cast<float>(c.d_model)));
  Tensor pos({batch.rows(), c.d_model});
  for (std::size_t s = 0; s < batch.count(); ++s) {
    if (batch.length(s) > c.max_len) {
      throw IndexError("sequence of length " + std::to_string(batch.length(s)) +
                       " exceeds max_len " + std::to_string(c.max_len));
    }
    for (std::size_t p = 0; p < batch.length(s); ++p)
      for (std::size_t j = 0; j < c.d_model; ++j)
        pos.at(batch.begin(s) + p, j) = model.positions().at(p, j);
  }
  Var x = tape.add(emb, tape.constant(std::move(pos)));
  return maybe_dropout(tape, x, dropout, options);
}

BoolMatrix prefix_lm_mask(std::size_t src_len, std::size_t tgt_len) {
  const std::size_t n = src_len + tgt_len;
  BoolMatrix m(n, n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool visible = j < src_len || (i >= src_len && j <= i);
      m.set(i, j, visible);
    }
  }
  return m;
}

StackResult encoder_forward(Tape& tape, TransformerModel& model, const PackedBatch& source,
                            const ForwardOptions& options) {
  const auto& c = model.config();
  if (c.architecture != Architecture::EncoderDecoder) {
    throw ConfigError("encoder_forward called on a decoder-only model");
  }
  StackResult r;
  r.output = embed_tokens(tape, model, source, c.dropout, options);
  AttentionMask mask(source.rows(), source.rows());
  for (std::size_t s = 0; s < source.count(); ++s) {
    mask.add_full(source.begin(s), source.begin(s) + source.length(s), source.begin(s),
                  source.begin(s) + source.length(s));
  }
  for (std::size_t i = 0; i < c.n_enc; ++i) {
    const std::string layer = std::to_string(i);
    r.output = attention_forward(tape, r.output, r.output, r.output,
                                 model.attention_block(Side::Encoder, i, "sa"), c.heads, mask,
                                 c.dropout, options);
    record(options, r.taps, layer + ".sa", tape, r.output);
    const FfnBlock ffn = model.ffn_block(Side::Encoder, i);
    if (!ffn.is_noop()) {
      r.output = ffn_forward(tape, r.output, ffn, c.dropout, options);
      record(options, r.taps, layer + ".ffn", tape, r.output);
    }
  }
  return r;
}

StackResult decoder_forward(Tape& tape, TransformerModel& model,
                            const std::optional<EncoderMemory>& memory, const PackedBatch& target,
                            const ForwardOptions& options,
                            std::span<const std::size_t> prefix_lengths) {
  const auto& c = model.config();
  const bool enc_dec = c.architecture == Architecture::EncoderDecoder;
  if (enc_dec && !memory) {
    throw ConfigError("encoder-decoder decoder_forward requires encoder output");
  }
  if (!enc_dec && memory) {
    throw ConfigError("decoder-only decoder_forward must not receive encoder output");
  }
  if (!prefix_lengths.empty() && prefix_lengths.size() != target.count()) {
    throw DimensionError("decoder_forward: one prefix length per sequence required");
  }

  AttentionMask self_mask(target.rows(), target.rows());
  for (std::size_t s = 0; s < target.count(); ++s) {
    const std::size_t b = target.begin(s), n = target.length(s);
    const std::size_t prefix = prefix_lengths.empty() ? 0 : prefix_lengths[s];
    if (prefix == 0) {
      self_mask.add_causal(b, b + n, b);
    } else {
      if (prefix > n) throw DimensionError("decoder_forward: prefix longer than sequence");
      BoolMatrix m = prefix_lm_mask(prefix, n - prefix);
      self_mask.add_block({b, b + n, b, b + n, std::move(m.cells)});
    }
  }
  AttentionMask cross_mask;
  if (enc_dec) {
    const PackedBatch& src = *memory->source;
    if (src.count() != target.count()) {
      throw DimensionError("decoder_forward: " + std::to_string(target.count()) +
                           " targets for " + std::to_string(src.count()) + " sources");
    }
    cross_mask = AttentionMask(target.rows(), src.rows());
    for (std::size_t s = 0; s < target.count(); ++s) {
      cross_mask.add_full(target.begin(s), target.begin(s) + target.length(s), src.begin(s),
                          src.begin(s) + src.length(s));
    }
  }

  StackResult r;
  Var x = embed_tokens(tape, model, target, c.dropout, options);
  for (std::size_t i = 0; i < c.n_dec; ++i) {
    const std::string layer = std::to_string(i);
    x = attention_forward(tape, x, x, x, model.attention_block(Side::Decoder, i, "sa"), c.heads,
                          self_mask, c.dropout, options);
    record(options, r.taps, layer + ".sa", tape, x);
    if (enc_dec) {
      x = attention_forward(tape, x, memory->states, memory->states,
                            model.attention_block(Side::Decoder, i, "ca"), c.heads, cross_mask,
                            c.dropout, options);
      record(options, r.taps, layer + ".ca", tape, x);
    }
    const FfnBlock ffn = model.ffn_block(Side::Decoder, i);
    if (!ffn.is_noop()) {
      x = ffn_forward(tape, x, ffn, c.dropout, options);
      record(options, r.taps, layer + ".ffn", tape, x);
    }
  }
  r.output = tape.matmul_nt(x, tape.param(model.embedding()));
  return r;
}

}  // namespace wfn
