#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "wfn/checkpoint.hpp"
#include "wfn/errors.hpp"
#include "wfn/grad_check.hpp"
#include "wfn/model.hpp"
#include "wfn/trainer.hpp"

using namespace wfn;

namespace {

ModelConfig tiny(std::size_t n_enc = 2, std::size_t n_dec = 2) {
  ModelConfig c;
  c.n_enc = n_enc;
  c.n_dec = n_dec;
  c.d_model = 8;
  c.d_ff = 16;
  c.heads = 2;
  c.vocab_size = 11;
  c.max_len = 16;
  c.dropout = 0.0f;
  return c;
}

// Independent parameter count of a configuration from the layer formulas.
std::uint64_t oracle_count(const ModelConfig& c) {
  const std::uint64_t d = c.d_model;
  auto ffn = [&](std::uint64_t f) { return f == 0 ? 0 : 2 * d * f + f + d; };
  const std::uint64_t attn = 4 * d * d + 4 * d + 2 * d;
  auto side_ffn = [&](const FfnStrategy& s, std::uint64_t n, std::uint64_t f) -> std::uint64_t {
    switch (s.kind) {
      case FfnStrategyKind::NoOp: return 0;
      case FfnStrategyKind::Individual: return n * (ffn(f) + 2 * d);
      case FfnStrategyKind::SharedAll: return ffn(f) + n * 2 * d;
      default: return s.distinct * ffn(f) + n * 2 * d;
    }
  };
  const std::uint64_t shared_w = c.d_ff_shared.value_or(c.d_ff);
  auto width = [&](const FfnStrategy& s) {
    return s.kind == FfnStrategyKind::Individual ? c.d_ff : shared_w;
  };
  std::uint64_t total = c.vocab_size * d + c.n_enc * attn + c.n_dec * 2 * attn;
  if (c.sharing.tie_enc_dec_ffn) {
    total += ffn(shared_w) + 2 * d;
  } else {
    total += side_ffn(c.sharing.enc_ffn, c.n_enc, width(c.sharing.enc_ffn));
    total += side_ffn(c.sharing.dec_ffn, c.n_dec, width(c.sharing.dec_ffn));
  }
  return total;
}

// Copies every logical site of `from` into the same site of `to`.
void synchronise(ParamStore& to, const ParamStore& from) {
  for (const auto& [logical, canonical] : to.aliases()) {
    const Tensor& src = from.at(logical);
    Tensor& dst = to.at(logical);
    std::copy(src.values().begin(), src.values().end(), dst.values().begin());
  }
}

std::vector<const SentencePair*> pointers(const std::vector<SentencePair>& pairs) {
  std::vector<const SentencePair*> out;
  for (const auto& p : pairs) out.push_back(&p);
  return out;
}

std::vector<SentencePair> sample_pairs() {
  return {{{4, 5, 6}, {7, 8}}, {{9, 10}, {5, 5, 6, 4}}, {{6}, {9}}};
}

}  // namespace

TEST(Sharing, AssignmentPatterns) {
  using K = FfnStrategyKind;
  using V = std::vector<std::size_t>;
  EXPECT_EQ(resolve_ffn_assignment(K::Sequence, 6, 3), (V{0, 0, 1, 1, 2, 2}));
  EXPECT_EQ(resolve_ffn_assignment(K::Sequence, 6, 2), (V{0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(resolve_ffn_assignment(K::Sequence, 6, 1), (V{0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(resolve_ffn_assignment(K::Cycle, 6, 3), (V{0, 1, 2, 0, 1, 2}));
  EXPECT_EQ(resolve_ffn_assignment(K::Cycle, 6, 2), (V{0, 1, 0, 1, 0, 1}));
  EXPECT_EQ(resolve_ffn_assignment(K::CycleRev, 6, 3), (V{0, 1, 2, 2, 1, 0}));
  EXPECT_EQ(resolve_ffn_assignment(K::Individual, 4, 0), (V{0, 1, 2, 3}));
  EXPECT_EQ(resolve_ffn_assignment(K::SharedAll, 4, 0), (V{0, 0, 0, 0}));
  EXPECT_TRUE(resolve_ffn_assignment(K::NoOp, 4, 0).empty());
  EXPECT_THROW(resolve_ffn_assignment(K::Sequence, 6, 4), ConfigError);
  EXPECT_THROW(resolve_ffn_assignment(K::CycleRev, 6, 2), ConfigError);
}

TEST(Sharing, ValidationRules) {
  ModelConfig c = tiny();
  c.heads = 3;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny();
  c.sharing.tie_enc_dec_ffn = true;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny();
  c.architecture = Architecture::DecoderOnly;
  EXPECT_THROW(validate(c), ConfigError);  // n_enc must be 0
  c.n_enc = 0;
  EXPECT_NO_THROW(validate(c));
  c.sharing.dec_ffn = FfnStrategy::cycle(2);
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Params, FfnBlockCount) {
  EXPECT_EQ(ffn_savings(1, 4, 8).with_biases, 76u);
  EXPECT_EQ(ffn_savings(1, 4, 8).matrices_only, 64u);
  EXPECT_EQ(ffn_savings(5, 1024, 4096).with_biases, 5u * (2 * 1024 * 4096 + 4096 + 1024));
}

TEST(Params, CountsMatchLayerFormulas) {
  for (ModelConfig shape : {transformer_big(), transformer_base(), deep_encoder_shallow_decoder(), tiny()}) {
    for (const auto& name : preset_names()) {
      const ModelConfig c = apply_preset(shape, name);
      EXPECT_EQ(count_params(c).total, oracle_count(c)) << name;
    }
    for (auto s : {FfnStrategy::sequence(2), FfnStrategy::cycle(2)}) {
      ModelConfig c = shape;
      c.sharing.enc_ffn = s;
      c.sharing.dec_ffn = s;
      EXPECT_EQ(count_params(c).total, oracle_count(c)) << to_string(s);
    }
  }
}

TEST(Params, SharedSavingsIdentity) {
  const ModelConfig big = transformer_big();
  const auto base = count_params(apply_preset(big, "baseline")).total;
  const auto shared = count_params(apply_preset(big, "SharedEnc")).total;
  EXPECT_EQ(base - shared, ffn_savings(big.n_enc - 1, big.d_model, big.d_ff).with_biases);
}

TEST(Params, BreakdownSumsToTotal) {
  const ParamCount pc = count_params(apply_preset(transformer_big(), "SharedEncDec"));
  std::uint64_t sum = 0;
  for (const auto& [k, v] : pc.breakdown) sum += v;
  EXPECT_EQ(sum, pc.total);
  EXPECT_EQ(pc.breakdown.at("dec_ffn"), 0u);
}

TEST(Params, OneWideWidths) {
  EXPECT_EQ(one_wide_dff(transformer_big()), 49152u);
  EXPECT_EQ(one_wide_dff(transformer_base()), 24576u);
  EXPECT_EQ(one_wide_dff(deep_encoder_shallow_decoder()), 57344u);
  EXPECT_THROW(one_wide_dff(decoder_only_big()), ConfigError);
}

TEST(Params, EmbeddingIsOneTensor) {
  TransformerModel m = build_model(tiny(), 1);
  EXPECT_EQ(&m.params().at("src_embed"), &m.params().at("tgt_embed"));
  EXPECT_EQ(&m.params().at("tgt_embed"), &m.params().at("out_proj"));
}

TEST(Params, TiedSitesShareStorage) {
  TransformerModel m = build_model(apply_preset(tiny(), "SharedEncDec"), 1);
  EXPECT_EQ(m.ffn_block(Side::Encoder, 0).w1, m.ffn_block(Side::Decoder, 1).w1);
  TransformerModel s = build_model(apply_preset(tiny(), "SharedEnc"), 1);
  EXPECT_EQ(s.ffn_block(Side::Encoder, 0).w1, s.ffn_block(Side::Encoder, 1).w1);
  EXPECT_NE(s.ffn_block(Side::Encoder, 0).ln_gain, s.ffn_block(Side::Encoder, 1).ln_gain);
  EXPECT_NE(s.ffn_block(Side::Decoder, 0).w1, s.ffn_block(Side::Decoder, 1).w1);
  EXPECT_TRUE(build_model(apply_preset(tiny(), "NoDec"), 1).ffn_block(Side::Decoder, 0).is_noop());
}

TEST(Params, InitialisationRules) {
  TransformerModel m = build_model(tiny(), 3);
  const Tensor& ln = m.params().at(ffn_site(Side::Encoder, 0, "ln_g"));
  for (float v : ln.values()) EXPECT_EQ(v, 1.0f);
  const Tensor& b = m.params().at(ffn_site(Side::Encoder, 0, "b1"));
  for (float v : b.values()) EXPECT_EQ(v, 0.0f);
  const Tensor& w = m.params().at(ffn_site(Side::Encoder, 0, "w1"));
  const float bound = std::sqrt(6.0f / (8 + 16));
  for (float v : w.values()) EXPECT_LE(std::abs(v), bound);
  EXPECT_TRUE(build_model(tiny(), 3).params().same_values(m.params()));
  EXPECT_FALSE(build_model(tiny(), 4).params().same_values(m.params()));
}

TEST(Forward, PackedBatchMatchesSeparateRuns) {
  TransformerModel m = build_model(tiny(), 5);
  const auto pairs = sample_pairs();
  const auto ptrs = pointers(pairs);
  Tape tape;
  const Tensor packed = tape.value(teacher_forced_logits(tape, m, make_teacher_forced(m.config(), ptrs), {}));
  std::size_t row = 0;
  for (const auto* p : ptrs) {
    Tape t;
    std::vector<const SentencePair*> one{p};
    const Tensor& single = t.value(teacher_forced_logits(t, m, make_teacher_forced(m.config(), one), {}));
    for (std::size_t i = 0; i < single.size(); ++i) {
      EXPECT_NEAR(single[i], packed[row * single.cols() + i], 1e-5);
    }
    row += single.rows();
  }
  EXPECT_EQ(row, packed.rows());
}

TEST(Forward, DecoderIsCausal) {
  TransformerModel m = build_model(tiny(), 6);
  std::vector<SentencePair> a{{{4, 5}, {6, 7, 8}}}, b{{{4, 5}, {6, 7, 9}}};
  Tape ta, tb;
  const Tensor la = ta.value(teacher_forced_logits(ta, m, make_teacher_forced(m.config(), pointers(a)), {}));
  const Tensor lb = tb.value(teacher_forced_logits(tb, m, make_teacher_forced(m.config(), pointers(b)), {}));
  const std::size_t v = la.cols();
  for (std::size_t i = 0; i < 3 * v; ++i) EXPECT_EQ(la[i], lb[i]);
  bool differs = false;
  for (std::size_t i = 3 * v; i < 4 * v; ++i) differs |= la[i] != lb[i];
  EXPECT_TRUE(differs);
}

TEST(Forward, PrefixLmMask) {
  BoolMatrix m = prefix_lm_mask(2, 2);
  EXPECT_TRUE(m(0, 1));
  EXPECT_FALSE(m(0, 2));
  EXPECT_TRUE(m(2, 2));
  EXPECT_FALSE(m(2, 3));
  EXPECT_TRUE(m(3, 0));
}

TEST(Forward, DecoderOnlyPrefixIsBidirectional) {
  ModelConfig c = tiny(0, 2);
  c.architecture = Architecture::DecoderOnly;
  TransformerModel m = build_model(c, 2);
  std::vector<SentencePair> a{{{4, 5}, {6}}}, b{{{4, 9}, {6}}};
  Tape ta, tb;
  ForwardOptions taps{.record_taps = true};
  const auto ba = make_teacher_forced(c, pointers(a));
  const auto bb = make_teacher_forced(c, pointers(b));
  EXPECT_EQ(ba.prefix_lengths, (std::vector<std::size_t>{3}));
  const Taps xa = decoder_forward(ta, m, std::nullopt, ba.decoder, taps, ba.prefix_lengths).taps;
  const Taps xb = decoder_forward(tb, m, std::nullopt, bb.decoder, taps, bb.prefix_lengths).taps;
  // The first source position sees the second one.
  EXPECT_NE(xa[0].value.at(0, 0), xb[0].value.at(0, 0));
}

TEST(Forward, TapNamesFollowLayerThenSublayer) {
  TransformerModel m = build_model(apply_preset(tiny(), "NoDec"), 1);
  const auto pairs = sample_pairs();
  const auto batch = make_teacher_forced(m.config(), pointers(pairs));
  Tape t;
  ForwardOptions o{.record_taps = true};
  StackResult enc = encoder_forward(t, m, batch.source, o);
  StackResult dec = decoder_forward(t, m, EncoderMemory{enc.output, &batch.source}, batch.decoder, o);
  std::vector<std::string> en, dn;
  for (const auto& tap : enc.taps) en.push_back(tap.name);
  for (const auto& tap : dec.taps) dn.push_back(tap.name);
  EXPECT_EQ(en, (std::vector<std::string>{"0.sa", "0.ffn", "1.sa", "1.ffn"}));
  EXPECT_EQ(dn, (std::vector<std::string>{"0.sa", "0.ca", "1.sa", "1.ca"}));
}

TEST(Forward, RejectsOverlongSequences) {
  TransformerModel m = build_model(tiny(), 1);
  std::vector<SentencePair> p{{std::vector<int>(20, 4), {5}}};
  Tape t;
  EXPECT_THROW(teacher_forced_logits(t, m, make_teacher_forced(m.config(), pointers(p)), {}), IndexError);
}

TEST(Tying, ForwardBitIdenticalToSynchronisedUntied) {
  for (const char* preset : {"SharedEnc", "SharedEncDec", "SharedEncSharedDec"}) {
    TransformerModel tied = build_model(apply_preset(tiny(), preset), 9);
    TransformerModel untied = build_model(tiny(), 10);
    synchronise(untied.params(), tied.params());
    const auto pairs = sample_pairs();
    const auto batch = make_teacher_forced(tied.config(), pointers(pairs));
    Tape a, b;
    const Tensor& la = a.value(teacher_forced_logits(a, tied, batch, {}));
    const Tensor& lb = b.value(teacher_forced_logits(b, untied, batch, {}));
    EXPECT_TRUE(la.same_values(lb)) << preset;
  }
}

TEST(Tying, GradientIsSumOfSiteGradients) {
  TransformerModel tied = build_model(apply_preset(tiny(), "SharedEncDec"), 9);
  TransformerModel untied = build_model(tiny(), 10);
  synchronise(untied.params(), tied.params());
  const auto pairs = sample_pairs();
  const auto batch = make_teacher_forced(tied.config(), pointers(pairs));
  for (auto* m : {&tied, &untied}) {
    m->params().zero_grad();
    Tape t;
    t.backward(teacher_forced_loss(t, *m, batch, {}));
  }
  const Tensor& shared = tied.params().at(ffn_site(Side::Encoder, 0, "w2"));
  std::vector<double> sum(shared.size(), 0.0);
  for (Side side : {Side::Encoder, Side::Decoder})
    for (std::size_t l = 0; l < 2; ++l) {
      const auto g = std::as_const(untied.params().at(ffn_site(side, l, "w2"))).grad();
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
    }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    EXPECT_NEAR(shared.grad()[i], sum[i], 1e-6 * std::max(1.0, std::abs(sum[i])));
  }
}

TEST(Model, GradCheckSmallEncoderDecoder) {
  TransformerModel m = build_model(apply_preset(tiny(), "SharedEnc"), 4);
  const auto pairs = sample_pairs();
  const auto batch = make_teacher_forced(m.config(), pointers(pairs));
  auto ps = m.params().tensors();
  auto r = grad_check([&](Tape& t) { return teacher_forced_loss(t, m, batch, {}); }, ps,
                      {3e-3f, 4, 2, true});
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
  EXPECT_LT(r.coords_skipped, r.coords_checked / 4);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  TransformerModel m = build_model(apply_preset(tiny(), "SharedEncDec"), 12);
  const auto bytes = encode_checkpoint(m.params());
  TransformerModel other = build_model(apply_preset(tiny(), "SharedEncDec"), 99);
  load_checkpoint(decode_checkpoint(bytes), other.params());
  EXPECT_TRUE(other.params().same_values(m.params()));
  EXPECT_EQ(encode_checkpoint(other.params()), bytes);
  EXPECT_EQ(checkpoint_param_count(decode_checkpoint(bytes)), count_params(m.config()).total);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "wfn_model_test.wfn";
  TransformerModel m = build_model(tiny(), 12);
  save_checkpoint(path, m.params());
  TransformerModel other = build_model(tiny(), 13);
  load_checkpoint(path, other);
  EXPECT_TRUE(other.params().same_values(m.params()));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptOrMismatchedInput) {
  TransformerModel m = build_model(tiny(), 12);
  auto bytes = encode_checkpoint(m.params());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), DataError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), DataError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), DataError);
  TransformerModel shared = build_model(apply_preset(tiny(), "SharedEnc"), 1);
  EXPECT_THROW(load_checkpoint(decode_checkpoint(bytes), shared.params()), DataError);
  ModelConfig wider = tiny();
  wider.d_ff = 32;
  TransformerModel w = build_model(wider, 1);
  EXPECT_THROW(load_checkpoint(decode_checkpoint(bytes), w.params()), DataError);
}

TEST(Checkpoint, SharedEncSizeDelta) {
  const ModelConfig base = tiny();
  const auto full = encode_checkpoint(build_model(base, 1).params()).size();
  const auto shared = encode_checkpoint(build_model(apply_preset(base, "SharedEnc"), 1).params()).size();
  const auto predicted = 4 * ffn_savings(base.n_enc - 1, base.d_model, base.d_ff).with_biases;
  EXPECT_LT(shared, full);
  EXPECT_LE(std::abs(double(full - shared) - double(predicted)), 1024.0);
}
