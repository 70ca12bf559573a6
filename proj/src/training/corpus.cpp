#include "wfn/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "wfn/errors.hpp"
#include "wfn/model.hpp"

namespace wfn {

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
}

void Vocab::add(std::string token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocab Vocab::from_sentences(std::span<const std::vector<std::string>> sentences) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : sentences)
    for (const auto& t : s) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> sorted(freq.begin(), freq.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [tok, n] : sorted) {
    if (!v.ids_.count(tok)) v.add(tok);
  }
  return v;
}

Vocab Vocab::numeric(std::size_t size) {
  Vocab v;
  for (std::size_t i = kNumReserved; i < size; ++i) v.add(std::to_string(i));
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  if (tokens.size() < static_cast<std::size_t>(kNumReserved)) {
    throw DataError("vocabulary must start with the 4 reserved tokens");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens[i] != v.tokens_[i]) throw DataError("vocabulary reserved token mismatch at " + std::to_string(i));
  }
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) v.add(std::move(tokens[i]));
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<int> Vocab::encode(std::string_view line) const {
  std::vector<int> ids;
  for (const auto& t : tokenize(line)) ids.push_back(id(t));
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::uint64_t Corpus::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : pairs) {
    for (int t : p.source) mix(static_cast<std::uint64_t>(t));
    mix(~0ULL);
    for (int t : p.target) mix(static_cast<std::uint64_t>(t));
    mix(~1ULL);
  }
  return h;
}

void Corpus::check() const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.source.empty() || p.target.empty()) {
      throw DataError("pair " + std::to_string(i) + " has an empty side");
    }
    for (const auto* side : {&p.source, &p.target}) {
      for (int t : *side) {
        if (t < 0 || static_cast<std::size_t>(t) >= vocab.size()) {
          throw DataError("pair " + std::to_string(i) + " has id " + std::to_string(t) +
                          " outside vocabulary of size " + std::to_string(vocab.size()));
        }
      }
    }
  }
}

ToyTask parse_toy_task(std::string_view name) {
  if (name == "copy") return ToyTask::Copy;
  if (name == "reverse") return ToyTask::Reverse;
  if (name == "sort") return ToyTask::Sort;
  throw ConfigError("unknown toy task '" + std::string(name) + "' (copy, reverse, sort)");
}

std::string to_string(ToyTask task) {
  switch (task) {
    case ToyTask::Copy: return "copy";
    case ToyTask::Reverse: return "reverse";
    case ToyTask::Sort: return "sort";
  }
  return "?";
}

Corpus generate_toy_task(ToyTask task, std::size_t count, std::size_t min_len,
                         std::size_t max_len, std::size_t vocab_size, std::uint64_t seed) {
  if (vocab_size <= static_cast<std::size_t>(kNumReserved)) {
    throw ConfigError("toy task vocabulary must exceed the 4 reserved tokens");
  }
  if (min_len == 0 || min_len > max_len) throw ConfigError("toy task needs 1 <= min_len <= max_len");
  Corpus c;
  c.vocab = Vocab::numeric(vocab_size);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> tok(kNumReserved, static_cast<int>(vocab_size) - 1);
  for (std::size_t i = 0; i < count; ++i) {
    SentencePair p;
    p.source.resize(len(rng));
    for (auto& t : p.source) t = tok(rng);
    p.target = p.source;
    if (task == ToyTask::Reverse) std::reverse(p.target.begin(), p.target.end());
    if (task == ToyTask::Sort) std::sort(p.target.begin(), p.target.end());
    c.pairs.push_back(std::move(p));
  }
  return c;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

Corpus load_with(const std::vector<std::string>& src, const std::vector<std::string>& tgt,
                 const Vocab& vocab) {
  Corpus c;
  c.vocab = vocab;
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair p{vocab.encode(src[i]), vocab.encode(tgt[i])};
    if (p.source.empty() || p.target.empty()) {
      throw DataError("corpus line " + std::to_string(i + 1) + " is empty on one side");
    }
    c.pairs.push_back(std::move(p));
  }
  return c;
}

void check_aligned(const std::vector<std::string>& src, const std::vector<std::string>& tgt,
                   const std::filesystem::path& sp, const std::filesystem::path& tp) {
  if (src.size() != tgt.size()) {
    throw DataError("corpus files are not line-aligned: " + sp.string() + " has " +
                    std::to_string(src.size()) + " lines, " + tp.string() + " has " +
                    std::to_string(tgt.size()));
  }
}

}  // namespace

Corpus load_parallel_corpus(const std::filesystem::path& src, const std::filesystem::path& tgt) {
  const auto s = read_lines(src);
  const auto t = read_lines(tgt);
  check_aligned(s, t, src, tgt);
  std::vector<std::vector<std::string>> sentences;
  for (const auto& l : s) sentences.push_back(tokenize(l));
  for (const auto& l : t) sentences.push_back(tokenize(l));
  return load_with(s, t, Vocab::from_sentences(sentences));
}

Corpus load_parallel_corpus(const std::filesystem::path& src, const std::filesystem::path& tgt,
                            const Vocab& vocab) {
  const auto s = read_lines(src);
  const auto t = read_lines(tgt);
  check_aligned(s, t, src, tgt);
  return load_with(s, t, vocab);
}

}  // namespace wfn
