#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "wfn/model.hpp"

namespace wfn {

/// Autoregressive next-token log-probabilities for a set of live
/// hypotheses, each attached to one source sentence.
class IncrementalScorer {
 public:
  virtual ~IncrementalScorer() = default;

  virtual std::size_t vocab_size() const = 0;
  /// Resets to one empty hypothesis per source; hypothesis i reads source i.
  virtual void begin(std::span<const std::vector<int>> sources) = 0;
  /// Hypothesis i becomes a copy of former hypothesis parents[i].
  virtual void reorder(std::span<const std::size_t> parents) = 0;
  /// Feeds one token per live hypothesis; returns hypotheses x vocab log-probs.
  virtual Tensor step(std::span<const int> tokens) = 0;
  /// Most tokens that can be generated for `source`.
  virtual std::size_t max_steps(std::size_t /*source*/) const {
    return std::numeric_limits<std::size_t>::max();
  }
};

/// Incremental decoder over a TransformerModel with cached keys and values.
/// Runs outside the autograd tape; parameters are read, never written.
class ModelScorer final : public IncrementalScorer {
 public:
  explicit ModelScorer(TransformerModel& model);
  ~ModelScorer() override;

  std::size_t vocab_size() const override;
  void begin(std::span<const std::vector<int>> sources) override;
  void reorder(std::span<const std::size_t> parents) override;
  Tensor step(std::span<const int> tokens) override;
  std::size_t max_steps(std::size_t source) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct Hypothesis {
  std::vector<int> tokens;  // generated tokens, without <eos>
  double logprob = 0.0;     // includes the <eos> step when finished
  bool finished = false;

  /// Generated length counting <eos>.
  std::size_t length() const noexcept { return tokens.size() + (finished ? 1 : 0); }
  /// logprob / length.
  double score() const;
};

/// Argmax decoding from <bos> until <eos> or max_len tokens; equal
/// log-probabilities go to the lower token id.
std::vector<Hypothesis> decode_greedy(IncrementalScorer& scorer,
                                      std::span<const std::vector<int>> sources,
                                      std::size_t max_len);

/// Beam search pruning on summed log-probability. A hypothesis that emits
/// <eos> keeps its beam slot, so a source finishes once `beam` hypotheses have
/// ended; the result is the ended hypothesis with the best score(). Beam 1
/// is exactly decode_greedy.
std::vector<Hypothesis> decode_beam(IncrementalScorer& scorer,
                                    std::span<const std::vector<int>> sources, std::size_t beam,
                                    std::size_t max_len);

/// Teacher-forced log-probability of `tokens` (plus <eos> when `finished`).
double score_sequence(IncrementalScorer& scorer, const std::vector<int>& source,
                      std::span<const int> tokens, bool finished);

}  // namespace wfn
