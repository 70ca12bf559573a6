#include "wfn/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "wfn/corpus.hpp"
#include "wfn/errors.hpp"

namespace wfn {

namespace {

using Ngrams = std::map<std::vector<std::string>, std::size_t>;

Ngrams count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  Ngrams counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double corpus_bleu(std::span<const std::string> hypotheses,
                   std::span<const std::string> references) {
  if (hypotheses.size() != references.size()) {
    throw DimensionError("corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                         std::to_string(references.size()) + " references");
  }
  std::size_t matches[4] = {}, totals[4] = {};
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = tokenize(hypotheses[s]);
    const auto ref = tokenize(references[s]);
    if (ref.empty()) throw DataError("corpus_bleu: reference " + std::to_string(s) + " is empty");
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const Ngrams h = count_ngrams(hyp, n);
      const Ngrams r = count_ngrams(ref, n);
      for (const auto& [gram, count] : h) {
        const auto it = r.find(gram);
        matches[n - 1] += it == r.end() ? 0 : std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double bp = hyp_len < ref_len
                        ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                        : 1.0;
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

}  // namespace wfn
