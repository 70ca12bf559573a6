#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "wfn/corpus.hpp"
#include "wfn/model.hpp"
#include "wfn/optim.hpp"

namespace wfn {

inline constexpr int kIgnoreTarget = -1;

/// Teacher-forced inputs for a batch of pairs.
///
/// Encoder-decoder: encoder reads `src <eos>`, decoder reads `<bos> tgt` and
/// predicts `tgt <eos>`. Decoder-only: one sequence `src <eos> <bos> tgt`
/// whose `src <eos>` part is a bidirectional prefix; prefix rows carry no
/// target.
struct TeacherForcedBatch {
  PackedBatch source;
  PackedBatch decoder;
  std::vector<std::size_t> prefix_lengths;
  std::vector<int> targets;  // one per decoder row

  std::size_t target_tokens() const;
};

TeacherForcedBatch make_teacher_forced(const ModelConfig& config,
                                       std::span<const SentencePair* const> pairs);

/// Decoder logits for a teacher-forced batch.
Var teacher_forced_logits(Tape& tape, TransformerModel& model, const TeacherForcedBatch& batch,
                          const ForwardOptions& options);

/// Mean cross-entropy over target rows.
Var teacher_forced_loss(Tape& tape, TransformerModel& model, const TeacherForcedBatch& batch,
                        const ForwardOptions& options);

/// Seeded shuffle of the corpus indices, reshuffled at every epoch boundary.
class BatchSampler {
 public:
  BatchSampler(std::size_t corpus_size, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  void reshuffle();

  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct TrainOptions {
  std::size_t steps = 0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  Schedule schedule;
  AdamConfig adam;
};

/// Per-step training losses. Dropout is active; batch order and dropout
/// masks derive from `options.seed`.
std::vector<float> train(TransformerModel& model, const Corpus& corpus,
                         const TrainOptions& options);

struct AccuracyResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

/// Teacher-forced next-token accuracy in evaluation mode.
AccuracyResult token_accuracy(TransformerModel& model, const Corpus& corpus,
                              std::size_t batch_size = 64);

}  // namespace wfn
