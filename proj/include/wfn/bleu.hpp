#pragma once

#include <span>
#include <string>

namespace wfn {

/// Corpus BLEU-4 over whitespace tokens: geometric mean of clipped n-gram
/// precisions (n = 1..4, counts pooled over the corpus) times the brevity
/// penalty, on a 0-100 scale. Unsmoothed, so any zero precision gives 0.
double corpus_bleu(std::span<const std::string> hypotheses,
                   std::span<const std::string> references);

}  // namespace wfn
