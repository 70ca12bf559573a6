#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "wfn/tensor.hpp"

namespace wfn {

/// Block-sparse attention mask. Each block covers a contiguous range of
/// query rows and key columns; entries outside every block are masked out.
/// A query row that ends up with no allowed key attends uniformly over the
/// key range of its block (or over all keys when it belongs to no block).
class AttentionMask {
 public:
  struct Block {
    std::size_t q_begin = 0, q_end = 0, k_begin = 0, k_end = 0;
    // (q_end-q_begin) x (k_end-k_begin) row-major; empty means all allowed.
    std::vector<unsigned char> allow;
  };

  AttentionMask() = default;
  AttentionMask(std::size_t q_len, std::size_t k_len) : q_len_(q_len), k_len_(k_len) {}

  static AttentionMask dense(const BoolMatrix& m);

  /// Query rows must not overlap an existing block.
  void add_block(Block block);
  void add_full(std::size_t q_begin, std::size_t q_end, std::size_t k_begin, std::size_t k_end);
  /// Causal within the block: query i may see key j when j - k_begin <= i - q_begin.
  void add_causal(std::size_t q_begin, std::size_t q_end, std::size_t k_begin);

  std::size_t q_len() const noexcept { return q_len_; }
  std::size_t k_len() const noexcept { return k_len_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }

  /// Blocks plus synthetic full-range blocks for uncovered query rows.
  std::vector<Block> covering_blocks() const;
  BoolMatrix to_dense() const;

 private:
  std::size_t q_len_ = 0, k_len_ = 0;
  std::vector<Block> blocks_;
};

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode automatic differentiation over an ordered record of
/// primitive applications. Nodes are appended in evaluation order, so a
/// reverse sweep visits every node once, after all of its consumers.
///
/// Parameter leaves refer to tensors owned elsewhere (a ParamStore); the
/// backward sweep accumulates into their gradient buffers. A tensor passed
/// to param() several times maps to a single leaf.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(Tensor& tensor);

  const Tensor& value(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Hash of every relu activity pattern recorded so far.
  std::uint64_t relu_signature() const noexcept { return relu_signature_; }

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var add_bias(Var x, Var bias);
  Var mul(Var a, Var b);
  Var scale(Var x, float factor);
  Var relu(Var x);
  Var layer_norm(Var x, Var gain, Var bias);
  Var softmax_rows(Var x);
  Var dropout(Var x, float p, std::mt19937_64& rng);
  /// Rows of `table` selected by `ids`, multiplied by `factor`.
  Var embedding(Var table, std::span<const int> ids, float factor);
  /// Multi-head scaled dot-product attention on projected q/k/v; returns
  /// the concatenated head outputs (q rows x d).
  Var attention(Var q, Var k, Var v, std::size_t heads, const AttentionMask& mask);
  /// Sum of all elements, as a [1] tensor.
  Var sum(Var x);
  /// Mean negative log-likelihood over targets != ignore_index, as [1].
  Var cross_entropy(Var logits, std::span<const int> targets, int ignore_index);

  /// Seeds d(loss)/d(loss) = 1 and sweeps backwards.
  void backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    Tensor* param = nullptr;
    std::vector<float> grad;
    std::function<void(Tape&, Node&)> backward;
  };

  Var push(Tensor value, std::function<void(Tape&, Node&)> backward);
  Node& node(Var v) { return nodes_[v.id]; }
  const Node& node(Var v) const { return nodes_[v.id]; }
  std::span<float> grad_of(Var v);

  std::vector<Node> nodes_;
  std::vector<std::pair<const Tensor*, std::size_t>> param_index_;
  std::uint64_t relu_signature_ = 14695981039346656037ull;
};

}  // namespace wfn
