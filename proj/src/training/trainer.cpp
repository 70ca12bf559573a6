#include "wfn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wfn/errors.hpp"

namespace wfn {

std::size_t TeacherForcedBatch::target_tokens() const {
  return static_cast<std::size_t>(
      std::count_if(targets.begin(), targets.end(), [](int t) { return t != kIgnoreTarget; }));
}

TeacherForcedBatch make_teacher_forced(const ModelConfig& config,
                                       std::span<const SentencePair* const> pairs) {
  TeacherForcedBatch b;
  std::vector<std::vector<int>> src_seqs, dec_seqs;
  for (const SentencePair* p : pairs) {
    std::vector<int> src = p->source;
    src.push_back(kEos);
    std::vector<int> dec{kBos};
    dec.insert(dec.end(), p->target.begin(), p->target.end());
    std::vector<int> tgt = p->target;
    tgt.push_back(kEos);
    if (config.architecture == Architecture::EncoderDecoder) {
      src_seqs.push_back(std::move(src));
      dec_seqs.push_back(std::move(dec));
    } else {
      b.prefix_lengths.push_back(src.size());
      b.targets.insert(b.targets.end(), src.size(), kIgnoreTarget);
      src.insert(src.end(), dec.begin(), dec.end());
      dec_seqs.push_back(std::move(src));
    }
    b.targets.insert(b.targets.end(), tgt.begin(), tgt.end());
  }
  b.source = PackedBatch::pack(src_seqs);
  b.decoder = PackedBatch::pack(dec_seqs);
  return b;
}

Var teacher_forced_logits(Tape& tape, TransformerModel& model, const TeacherForcedBatch& batch,
                          const ForwardOptions& options) {
  if (model.config().architecture == Architecture::EncoderDecoder) {
    const StackResult enc = encoder_forward(tape, model, batch.source, options);
    return decoder_forward(tape, model, EncoderMemory{enc.output, &batch.source}, batch.decoder,
                           options)
        .output;
  }
  return decoder_forward(tape, model, std::nullopt, batch.decoder, options, batch.prefix_lengths)
      .output;
}

Var teacher_forced_loss(Tape& tape, TransformerModel& model, const TeacherForcedBatch& batch,
                        const ForwardOptions& options) {
  const Var logits = teacher_forced_logits(tape, model, batch, options);
  return tape.cross_entropy(logits, batch.targets, kIgnoreTarget);
}

BatchSampler::BatchSampler(std::size_t corpus_size, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed), order_(corpus_size) {
  if (corpus_size == 0) throw DataError("cannot sample batches from an empty corpus");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  pos_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> out;
  while (out.size() < batch_size_) {
    if (pos_ == order_.size()) {
      reshuffle();
      if (!out.empty() && order_.size() < batch_size_) break;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

std::vector<float> train(TransformerModel& model, const Corpus& corpus,
                         const TrainOptions& options) {
  std::vector<float> losses;
  if (options.steps == 0) return losses;
  if (corpus.empty()) throw DataError("train: corpus is empty");
  corpus.check();
  if (corpus.vocab.size() > model.config().vocab_size) {
    throw DataError("corpus vocabulary (" + std::to_string(corpus.vocab.size()) +
                    ") exceeds model vocab_size (" + std::to_string(model.config().vocab_size) +
                    ")");
  }
  BatchSampler sampler(corpus.size(), options.batch_size, options.seed);
  std::mt19937_64 dropout_rng(options.seed ^ 0x5DEECE66DULL);
  AdamState state(options.adam);
  ForwardOptions fwd{.train = true, .rng = &dropout_rng, .record_taps = false};
  losses.reserve(options.steps);
  for (std::size_t step = 1; step <= options.steps; ++step) {
    std::vector<const SentencePair*> pairs;
    for (std::size_t i : sampler.next()) pairs.push_back(&corpus.pairs[i]);
    const TeacherForcedBatch batch = make_teacher_forced(model.config(), pairs);
    model.params().zero_grad();
    Tape tape;
    const Var loss = teacher_forced_loss(tape, model, batch, fwd);
    const float value = tape.value(loss)[0];
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at training step " + std::to_string(step));
    }
    tape.backward(loss);
    adam_step(model.params(), state, lr_at(options.schedule, step));
    losses.push_back(value);
  }
  model.params().zero_grad();
  return losses;
}

AccuracyResult token_accuracy(TransformerModel& model, const Corpus& corpus,
                              std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  AccuracyResult r;
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    std::vector<const SentencePair*> pairs;
    for (std::size_t i = start; i < std::min(corpus.size(), start + batch_size); ++i) {
      pairs.push_back(&corpus.pairs[i]);
    }
    const TeacherForcedBatch batch = make_teacher_forced(model.config(), pairs);
    Tape tape;
    const Tensor& logits = tape.value(teacher_forced_logits(tape, model, batch, {}));
    const std::size_t v = logits.cols();
    for (std::size_t row = 0; row < batch.targets.size(); ++row) {
      if (batch.targets[row] == kIgnoreTarget) continue;
      const float* l = logits.data() + row * v;
      const auto best = static_cast<int>(std::max_element(l, l + v) - l);
      r.correct += best == batch.targets[row] ? 1 : 0;
      ++r.total;
    }
  }
  return r;
}

}  // namespace wfn
