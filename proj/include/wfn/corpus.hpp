#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wfn {

/// Token <-> id map. Ids 0..3 are <pad>, <bos>, <eos>, <unk>.
class Vocab {
 public:
  Vocab();

  /// Frequency-ordered vocabulary (ties broken lexicographically) over
  /// whitespace-tokenised sentences.
  static Vocab from_sentences(std::span<const std::vector<std::string>> sentences);
  /// Toy vocabulary whose non-reserved tokens are the decimal ids themselves.
  static Vocab numeric(std::size_t size);
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  /// Unknown tokens map to <unk>.
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<int> encode(std::string_view line) const;
  /// Space-joined tokens, stopping at <eos> and skipping <pad>/<bos>.
  std::string decode(std::span<const int> ids) const;

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

std::vector<std::string> tokenize(std::string_view line);

struct SentencePair {
  std::vector<int> source;
  std::vector<int> target;
};

struct Corpus {
  std::vector<SentencePair> pairs;
  Vocab vocab;

  bool empty() const noexcept { return pairs.empty(); }
  std::size_t size() const noexcept { return pairs.size(); }
  /// FNV-1a over all token ids in order; identifies sentence order.
  std::uint64_t content_hash() const;
  /// Throws DataError unless every id fits the vocabulary and no side is empty.
  void check() const;
};

enum class ToyTask { Copy, Reverse, Sort };
ToyTask parse_toy_task(std::string_view name);
std::string to_string(ToyTask task);

/// Random sequences over the non-reserved ids [4, vocab_size) with lengths
/// uniform in [min_len, max_len]; targets are the copy, reversal or ascending
/// sort of the source.
Corpus generate_toy_task(ToyTask task, std::size_t count, std::size_t min_len,
                         std::size_t max_len, std::size_t vocab_size, std::uint64_t seed);

/// Line-aligned parallel text files; builds a joint vocabulary.
Corpus load_parallel_corpus(const std::filesystem::path& src, const std::filesystem::path& tgt);
/// Same, encoding with an existing vocabulary (unseen tokens become <unk>).
Corpus load_parallel_corpus(const std::filesystem::path& src, const std::filesystem::path& tgt,
                            const Vocab& vocab);

}  // namespace wfn
