#include "wfn/throughput.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "wfn/decoding.hpp"
#include "wfn/errors.hpp"

namespace wfn {

namespace {

std::atomic<bool> g_measuring{false};

class MeasurementGuard {
 public:
  MeasurementGuard() {
    if (g_measuring.exchange(true)) {
      throw ConfigError("a throughput measurement is already running in this process");
    }
  }
  ~MeasurementGuard() { g_measuring.store(false); }
  MeasurementGuard(const MeasurementGuard&) = delete;
  MeasurementGuard& operator=(const MeasurementGuard&) = delete;
};

std::size_t decode_corpus(ModelScorer& scorer, const Corpus& corpus,
                          const ThroughputOptions& o) {
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < corpus.size(); start += o.batch_size) {
    std::vector<std::vector<int>> sources;
    std::size_t longest = 0;
    for (std::size_t i = start; i < std::min(corpus.size(), start + o.batch_size); ++i) {
      sources.push_back(corpus.pairs[i].source);
      longest = std::max(longest, sources.back().size());
    }
    const std::size_t cap = o.max_len != 0 ? o.max_len : 2 * longest + 10;
    const auto hyps = o.beam == 1 ? decode_greedy(scorer, sources, cap)
                                  : decode_beam(scorer, sources, o.beam, cap);
    for (const auto& h : hyps) tokens += h.tokens.size();
  }
  return tokens;
}

}  // namespace

ThroughputReport measure_throughput(TransformerModel& model, const Corpus& corpus,
                                    const ThroughputOptions& options,
                                    const std::string& config_id) {
  if (corpus.empty()) throw DataError("measure_throughput: corpus is empty");
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (options.runs < 2) throw ConfigError("throughput needs at least 2 runs");
  MeasurementGuard guard;
  ModelScorer scorer(model);
  ThroughputReport r;
  r.config_id = config_id;
  r.batch_size = options.batch_size;
  r.beam = options.beam;
  r.runs = options.runs;
  r.n_batches = (corpus.size() + options.batch_size - 1) / options.batch_size;
  r.tokens = decode_corpus(scorer, corpus, options);
  if (r.tokens == 0) throw DataError("measure_throughput: decoding generated no tokens");
  for (std::size_t i = 0; i < options.runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t tokens = decode_corpus(scorer, corpus, options);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    r.samples.push_back(static_cast<double>(tokens) / std::max(dt.count(), 1e-12));
  }
  const double n = static_cast<double>(r.samples.size());
  r.tokens_per_sec_mean = std::accumulate(r.samples.begin(), r.samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : r.samples) ss += (s - r.tokens_per_sec_mean) * (s - r.tokens_per_sec_mean);
  r.tokens_per_sec_std = std::sqrt(ss / (n - 1.0));
  return r;
}

std::vector<ThroughputRow> batch_size_sweep(std::span<TransformerModel* const> models,
                                            std::span<const std::string> ids,
                                            std::span<const std::size_t> batch_sizes,
                                            const Corpus& corpus, ThroughputOptions options) {
  if (models.size() != ids.size()) throw ConfigError("batch_size_sweep: one id per model");
  if (models.empty()) throw ConfigError("batch_size_sweep: no models");
  std::vector<ThroughputRow> rows;
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t b = 0; b < batch_sizes.size(); ++b) {
      if (batch_sizes[b] == 0) throw ConfigError("batch sizes must be >= 1");
      options.batch_size = batch_sizes[b];
      ThroughputRow row{measure_throughput(*models[m], corpus, options, ids[m]), std::nullopt};
      if (models.size() > 1) {
        const double base = m == 0 ? row.report.tokens_per_sec_mean
                                   : rows[b].report.tokens_per_sec_mean;
        row.delta_pct = 100.0 * (row.report.tokens_per_sec_mean - base) / base;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string throughput_csv(std::span<const ThroughputRow> rows) {
  std::set<std::string> configs;
  for (const auto& r : rows) configs.insert(r.report.config_id);
  const bool with_delta = configs.size() > 1;
  std::string out = "# nondeterministic: timing\n";
  out += with_delta ? "config,batch_size,tokens_per_sec,std,delta_pct,n_batches\n"
                    : "config,batch_size,tokens_per_sec,std,n_batches\n";
  char buf[64];
  for (const auto& row : rows) {
    const auto& r = row.report;
    out += r.config_id + "," + std::to_string(r.batch_size);
    std::snprintf(buf, sizeof buf, ",%.3f,%.3f", r.tokens_per_sec_mean, r.tokens_per_sec_std);
    out += buf;
    if (with_delta) {
      std::snprintf(buf, sizeof buf, ",%.2f", row.delta_pct.value_or(0.0));
      out += buf;
    }
    out += "," + std::to_string(r.n_batches) + "\n";
  }
  return out;
}

}  // namespace wfn
