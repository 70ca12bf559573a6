#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "wfn/corpus.hpp"
#include "wfn/errors.hpp"
#include "wfn/optim.hpp"
#include "wfn/sweep.hpp"
#include "wfn/trainer.hpp"

using namespace wfn;
namespace fs = std::filesystem;

namespace {

ModelConfig toy(std::size_t vocab = 12) {
  ModelConfig c;
  c.n_enc = 2;
  c.n_dec = 2;
  c.d_model = 16;
  c.d_ff = 32;
  c.heads = 2;
  c.vocab_size = vocab;
  c.max_len = 24;
  c.dropout = 0.1f;
  return c;
}

TrainOptions quick(std::size_t steps) {
  TrainOptions o;
  o.steps = steps;
  o.batch_size = 8;
  o.seed = 3;
  o.schedule = {3e-3, 20};
  return o;
}

void write_lines(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(Schedule, WarmupAndDecay) {
  const Schedule s{7e-4, 4000};
  EXPECT_NEAR(lr_at(s, 1), 7e-4 / 4000, 1e-15);
  EXPECT_NEAR(lr_at(s, 1), 1.75e-7, 1e-15);
  EXPECT_NEAR(lr_at(s, 4000), 7e-4, 1e-15);
  EXPECT_NEAR(lr_at(s, 16000), 3.5e-4, 1e-15);
  EXPECT_LT(lr_at(s, 3999), lr_at(s, 4000));
  EXPECT_LT(lr_at(s, 4001), lr_at(s, 4000));
  EXPECT_THROW(lr_at(s, 0), ConfigError);
}

TEST(Schedule, PeakIsTheMaximum) {
  const Schedule s{1e-3, 50};
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t t = 1; t < 500; ++t) {
    if (lr_at(s, t) > best) best = lr_at(s, t), arg = t;
  }
  EXPECT_EQ(arg, 50u);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamStore ps;
  ps.add("w", Tensor({3}, std::vector<float>{1, -2, 3}));
  ps.zero_grad();
  AdamState st;
  adam_step(ps, st, 0.1);
  EXPECT_TRUE(ps.physical("w").same_values(Tensor({3}, std::vector<float>{1, -2, 3})));
  EXPECT_EQ(st.step(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradient) {
  ParamStore ps;
  ps.add("w", Tensor({2}, std::vector<float>{0, 0}));
  ps.physical("w").grad()[0] = 5.0f;
  ps.physical("w").grad()[1] = -0.01f;
  AdamState st;
  adam_step(ps, st, 0.01);
  // Bias-corrected first step is lr * g / |g|.
  EXPECT_NEAR(ps.physical("w")[0], -0.01, 1e-6);
  EXPECT_NEAR(ps.physical("w")[1], 0.01, 1e-6);
}

TEST(Adam, MinimisesQuadratic) {
  ParamStore ps;
  ps.add("w", Tensor({1}, 0.0f));
  AdamState st;
  for (int i = 0; i < 2000; ++i) {
    Tensor& w = ps.physical("w");
    w.zero_grad();
    w.grad()[0] = 2.0f * (w[0] - 3.0f);
    adam_step(ps, st, 0.01);
  }
  EXPECT_NEAR(ps.physical("w")[0], 3.0, 1e-2);
}

TEST(Adam, NonFiniteGradientThrowsBeforeAnyUpdate) {
  ParamStore ps;
  ps.add("a", Tensor({1}, 1.0f));
  ps.add("b", Tensor({1}, 1.0f));
  ps.physical("a").grad()[0] = 1.0f;
  ps.physical("b").grad()[0] = std::nanf("");
  AdamState st;
  EXPECT_THROW(adam_step(ps, st, 0.1), NumericError);
  EXPECT_EQ(ps.physical("a")[0], 1.0f);
}

TEST(Adam, OneMomentSetPerPhysicalTensor) {
  TransformerModel m = build_model(apply_preset(toy(), "SharedEncDec"), 1);
  const Corpus c = generate_toy_task(ToyTask::Copy, 8, 2, 4, 12, 1);
  train(m, c, quick(1));
  AdamState st;
  m.params().zero_grad();
  adam_step(m.params(), st, 1e-3);
  EXPECT_EQ(st.moment_sets(), m.params().names().size());
  EXPECT_LT(m.params().names().size(), m.params().aliases().size());
  for (const auto& [logical, canonical] : m.params().aliases()) {
    EXPECT_TRUE(st.has_moments(canonical));
  }
}

TEST(Vocab, ReservedAndLookup) {
  Vocab v = Vocab::numeric(8);
  EXPECT_EQ(v.size(), 8u);
  EXPECT_EQ(v.token(kPad), "<pad>");
  EXPECT_EQ(v.token(kEos), "<eos>");
  EXPECT_EQ(v.id("5"), 5);
  EXPECT_EQ(v.id("zebra"), kUnk);
  EXPECT_THROW(v.token(8), IndexError);
  const std::vector<int> ids{kBos, 4, 7, kEos, 5};
  EXPECT_EQ(v.decode(ids), "4 7");
}

TEST(Vocab, FrequencyOrder) {
  std::vector<std::vector<std::string>> s{{"b", "a", "c"}, {"a", "b"}, {"a"}};
  Vocab v = Vocab::from_sentences(s);
  EXPECT_EQ(v.token(4), "a");
  EXPECT_EQ(v.token(5), "b");
  EXPECT_EQ(v.token(6), "c");
  EXPECT_EQ(v.encode("c a  q"), (std::vector<int>{6, 4, kUnk}));
}

TEST(ToyTasks, TargetsFollowTheTask) {
  const Corpus copy = generate_toy_task(ToyTask::Copy, 50, 1, 6, 10, 7);
  const Corpus rev = generate_toy_task(ToyTask::Reverse, 50, 1, 6, 10, 7);
  const Corpus sorted = generate_toy_task(ToyTask::Sort, 50, 1, 6, 10, 7);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& src = copy.pairs[i].source;
    EXPECT_GE(src.size(), 1u);
    EXPECT_LE(src.size(), 6u);
    for (int t : src) EXPECT_TRUE(t >= kNumReserved && t < 10);
    EXPECT_EQ(copy.pairs[i].target, src);
    EXPECT_EQ(rev.pairs[i].source, src);
    EXPECT_EQ(rev.pairs[i].target, std::vector<int>(src.rbegin(), src.rend()));
    auto s = src;
    std::sort(s.begin(), s.end());
    EXPECT_EQ(sorted.pairs[i].target, s);
  }
  EXPECT_EQ(copy.content_hash(), generate_toy_task(ToyTask::Copy, 50, 1, 6, 10, 7).content_hash());
  EXPECT_NE(copy.content_hash(), generate_toy_task(ToyTask::Copy, 50, 1, 6, 10, 8).content_hash());
  EXPECT_THROW(generate_toy_task(ToyTask::Copy, 5, 3, 2, 10, 0), ConfigError);
}

TEST(Corpus, LoadsParallelFiles) {
  const fs::path dir = fs::temp_directory_path() / "wfn_corpus_test";
  fs::create_directories(dir);
  write_lines(dir / "s.txt", "a b c\nb a\n");
  write_lines(dir / "t.txt", "x y\ny\n");
  Corpus c = load_parallel_corpus(dir / "s.txt", dir / "t.txt");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.vocab.decode(c.pairs[0].source), "a b c");
  EXPECT_EQ(c.vocab.decode(c.pairs[1].target), "y");
  write_lines(dir / "t3.txt", "x\ny\nz\n");
  try {
    load_parallel_corpus(dir / "s.txt", dir / "t3.txt");
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('2'), std::string::npos);
    EXPECT_NE(msg.find('3'), std::string::npos);
  }
  Corpus shared = load_parallel_corpus(dir / "t.txt", dir / "t.txt", c.vocab);
  EXPECT_EQ(shared.pairs[0].source, c.pairs[0].target);
  fs::remove_all(dir);
}

TEST(TeacherForcing, EncoderDecoderLayout) {
  std::vector<SentencePair> p{{{4, 5}, {6, 7, 8}}};
  std::vector<const SentencePair*> ptr{&p[0]};
  const auto b = make_teacher_forced(toy(), ptr);
  EXPECT_EQ(b.source.tokens, (std::vector<int>{4, 5, kEos}));
  EXPECT_EQ(b.decoder.tokens, (std::vector<int>{kBos, 6, 7, 8}));
  EXPECT_EQ(b.targets, (std::vector<int>{6, 7, 8, kEos}));
  EXPECT_EQ(b.target_tokens(), 4u);
}

TEST(TeacherForcing, DecoderOnlyLayout) {
  ModelConfig c = toy();
  c.n_enc = 0;
  c.architecture = Architecture::DecoderOnly;
  std::vector<SentencePair> p{{{4, 5}, {6}}};
  std::vector<const SentencePair*> ptr{&p[0]};
  const auto b = make_teacher_forced(c, ptr);
  EXPECT_EQ(b.decoder.tokens, (std::vector<int>{4, 5, kEos, kBos, 6}));
  EXPECT_EQ(b.targets, (std::vector<int>{kIgnoreTarget, kIgnoreTarget, kIgnoreTarget, 6, kEos}));
  EXPECT_EQ(b.prefix_lengths, (std::vector<std::size_t>{3}));
  EXPECT_EQ(b.target_tokens(), 2u);
}

TEST(Sampler, CoversEveryIndexEachEpoch) {
  BatchSampler s(10, 4, 1);
  std::vector<int> seen(10, 0);
  for (int i = 0; i < 5; ++i)
    for (auto idx : s.next()) seen[idx]++;
  for (int c : seen) EXPECT_EQ(c, 2);
}

TEST(Training, DeterministicForSeed) {
  const Corpus c = generate_toy_task(ToyTask::Copy, 32, 2, 5, 12, 1);
  TransformerModel a = build_model(toy(), 4);
  TransformerModel b = build_model(toy(), 4);
  const auto la = train(a, c, quick(15));
  const auto lb = train(b, c, quick(15));
  EXPECT_EQ(la, lb);
  EXPECT_TRUE(a.params().same_values(b.params()));
  TransformerModel d = build_model(toy(), 4);
  TrainOptions other = quick(15);
  other.seed = 4;
  EXPECT_NE(train(d, c, other), la);
}

TEST(Training, LossDecreasesOnCopy) {
  const Corpus c = generate_toy_task(ToyTask::Copy, 64, 2, 5, 12, 1);
  TransformerModel m = build_model(toy(), 4);
  const auto losses = train(m, c, quick(200));
  ASSERT_EQ(losses.size(), 200u);
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) head += losses[i], tail += losses[190 + i];
  EXPECT_LT(tail, 0.7 * head);
  EXPECT_GT(token_accuracy(m, c).accuracy(), 0.4);
}

TEST(Training, ZeroStepsIsANoOp) {
  const Corpus c = generate_toy_task(ToyTask::Copy, 8, 2, 5, 12, 1);
  TransformerModel m = build_model(toy(), 4);
  const TransformerModel before = build_model(toy(), 4);
  EXPECT_TRUE(train(m, c, quick(0)).empty());
  EXPECT_TRUE(m.params().same_values(before.params()));
}

TEST(Training, TiedSitesStayIdentical) {
  const Corpus c = generate_toy_task(ToyTask::Reverse, 32, 2, 5, 12, 1);
  TransformerModel m = build_model(apply_preset(toy(), "SharedEnc"), 4);
  train(m, c, quick(10));
  EXPECT_EQ(m.ffn_block(Side::Encoder, 0).w1, m.ffn_block(Side::Encoder, 1).w1);
  EXPECT_EQ(m.params().names().size(), plan_params(m.config()).tensors.size());
}

TEST(Training, RejectsOutOfRangeTokens) {
  Corpus c = generate_toy_task(ToyTask::Copy, 8, 2, 5, 30, 1);
  TransformerModel m = build_model(toy(12), 4);
  EXPECT_ANY_THROW(train(m, c, quick(2)));
}

TEST(Accuracy, UntrainedIsLowAndCountsTargets) {
  const Corpus c = generate_toy_task(ToyTask::Copy, 20, 3, 3, 12, 1);
  TransformerModel m = build_model(toy(), 4);
  const AccuracyResult r = token_accuracy(m, c);
  EXPECT_EQ(r.total, 20u * 4u);
  EXPECT_LE(r.correct, r.total);
}

TEST(Sweep, SideWidthConfigs) {
  const ModelConfig base = toy();
  const ModelConfig z = with_side_dff(base, Side::Decoder, 0);
  EXPECT_EQ(ffn_width(z, Side::Decoder), 0u);
  EXPECT_EQ(ffn_width(z, Side::Encoder), 32u);
  const ModelConfig w = with_side_dff(base, Side::Encoder, 8);
  EXPECT_EQ(ffn_width(w, Side::Encoder), 8u);
  EXPECT_EQ(ffn_width(w, Side::Decoder), 32u);
  EXPECT_THROW(with_side_dff(apply_preset(base, "SharedEnc"), Side::Encoder, 8), ConfigError);
}

TEST(Sweep, RowsAndCsv) {
  const Corpus c = generate_toy_task(ToyTask::Copy, 16, 2, 4, 12, 1);
  const std::vector<std::size_t> dims{0, 8};
  const auto rows = ffn_dim_sweep(Side::Decoder, dims, toy(), c, c, quick(3), 5);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].noop);
  EXPECT_FALSE(rows[1].noop);
  EXPECT_EQ(rows[0].params, count_params(with_side_dff(toy(), Side::Decoder, 0)).total);
  EXPECT_LT(rows[0].params, rows[1].params);
  const std::string csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "d_ff,side,token_accuracy,params,noop");
  const auto again = ffn_dim_sweep(Side::Decoder, dims, toy(), c, c, quick(3), 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(again[i].token_accuracy, rows[i].token_accuracy);
  }
}
