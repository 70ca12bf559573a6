#include <algorithm>

#include "wfn/decoding.hpp"
#include "wfn/errors.hpp"

namespace wfn {

double Hypothesis::score() const {
  const std::size_t len = length();
  return len == 0 ? 0.0 : logprob / static_cast<double>(len);
}

namespace {

int argmax(const float* row, std::size_t v) {
  return static_cast<int>(std::max_element(row, row + v) - row);
}

std::size_t step_limit(const IncrementalScorer& scorer, std::size_t source, std::size_t max_len) {
  return std::min(max_len, scorer.max_steps(source));
}

}  // namespace

std::vector<Hypothesis> decode_greedy(IncrementalScorer& scorer,
                                      std::span<const std::vector<int>> sources,
                                      std::size_t max_len) {
  if (max_len == 0) throw ConfigError("decode: max_len must be >= 1");
  std::vector<Hypothesis> out(sources.size());
  scorer.begin(sources);
  std::vector<std::size_t> live(sources.size());
  for (std::size_t i = 0; i < live.size(); ++i) live[i] = i;
  std::vector<int> feed(sources.size(), kBos);
  const std::size_t v = scorer.vocab_size();
  while (!live.empty()) {
    const Tensor logp = scorer.step(feed);
    std::vector<std::size_t> keep, next_live;
    std::vector<int> next_feed;
    for (std::size_t h = 0; h < live.size(); ++h) {
      Hypothesis& hyp = out[live[h]];
      const float* row = logp.data() + h * v;
      const int tok = argmax(row, v);
      hyp.logprob += row[tok];
      if (tok == kEos) {
        hyp.finished = true;
        continue;
      }
      hyp.tokens.push_back(tok);
      if (hyp.tokens.size() >= step_limit(scorer, live[h], max_len)) continue;
      keep.push_back(h);
      next_live.push_back(live[h]);
      next_feed.push_back(tok);
    }
    if (next_live.empty()) break;
    if (next_live.size() != live.size()) scorer.reorder(keep);
    live = std::move(next_live);
    feed = std::move(next_feed);
  }
  return out;
}

std::vector<Hypothesis> decode_beam(IncrementalScorer& scorer,
                                    std::span<const std::vector<int>> sources, std::size_t beam,
                                    std::size_t max_len) {
  if (beam == 0) throw ConfigError("decode: beam must be >= 1");
  if (max_len == 0) throw ConfigError("decode: max_len must be >= 1");
  struct Live {
    std::size_t source;
    Hypothesis hyp;
  };
  struct Candidate {
    double logprob;
    std::size_t parent;
    int token;
  };
  const std::size_t v = scorer.vocab_size();
  std::vector<std::vector<Hypothesis>> ended(sources.size());
  std::vector<Live> live;
  for (std::size_t s = 0; s < sources.size(); ++s) live.push_back({s, {}});
  scorer.begin(sources);
  std::vector<int> feed(sources.size(), kBos);

  while (!live.empty()) {
    const Tensor logp = scorer.step(feed);
    std::vector<Live> next;
    std::vector<std::size_t> parents;
    std::vector<int> next_feed;
    for (std::size_t first = 0; first < live.size();) {
      const std::size_t s = live[first].source;
      std::size_t last = first;
      while (last < live.size() && live[last].source == s) ++last;
      std::vector<Candidate> cands;
      cands.reserve((last - first) * v);
      for (std::size_t h = first; h < last; ++h) {
        const float* row = logp.data() + h * v;
        for (std::size_t t = 0; t < v; ++t) {
          cands.push_back({live[h].hyp.logprob + row[t], h, static_cast<int>(t)});
        }
      }
      const std::size_t slots = std::min(beam - ended[s].size(), cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(slots),
                        cands.end(), [](const Candidate& a, const Candidate& b) {
                          if (a.logprob != b.logprob) return a.logprob > b.logprob;
                          if (a.parent != b.parent) return a.parent < b.parent;
                          return a.token < b.token;
                        });
      const std::size_t limit = step_limit(scorer, s, max_len);
      for (std::size_t c = 0; c < slots; ++c) {
        Hypothesis hyp = live[cands[c].parent].hyp;
        hyp.logprob = cands[c].logprob;
        if (cands[c].token == kEos) {
          hyp.finished = true;
          ended[s].push_back(std::move(hyp));
          continue;
        }
        hyp.tokens.push_back(cands[c].token);
        if (hyp.tokens.size() >= limit) {
          ended[s].push_back(std::move(hyp));
          continue;
        }
        parents.push_back(cands[c].parent);
        next_feed.push_back(cands[c].token);
        next.push_back({s, std::move(hyp)});
      }
      first = last;
    }
    if (next.empty()) break;
    scorer.reorder(parents);
    live = std::move(next);
    feed = std::move(next_feed);
  }

  std::vector<Hypothesis> out;
  for (auto& e : ended) {
    auto best = e.begin();
    for (auto it = e.begin(); it != e.end(); ++it) {
      if (it->score() > best->score()) best = it;
    }
    out.push_back(std::move(*best));
  }
  return out;
}

double score_sequence(IncrementalScorer& scorer, const std::vector<int>& source,
                      std::span<const int> tokens, bool finished) {
  std::vector<std::vector<int>> src{source};
  scorer.begin(src);
  const std::size_t v = scorer.vocab_size();
  double total = 0.0;
  int feed = kBos;
  const std::size_t steps = tokens.size() + (finished ? 1 : 0);
  for (std::size_t i = 0; i < steps; ++i) {
    const int next = i < tokens.size() ? tokens[i] : kEos;
    const Tensor logp = scorer.step({&feed, 1});
    if (next < 0 || static_cast<std::size_t>(next) >= v) {
      throw IndexError("score_sequence: token " + std::to_string(next) + " outside vocabulary");
    }
    total += logp[static_cast<std::size_t>(next)];
    feed = next;
  }
  return total;
}

}  // namespace wfn
