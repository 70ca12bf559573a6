#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wfn/corpus.hpp"
#include "wfn/model.hpp"

namespace wfn {

struct ThroughputOptions {
  std::size_t batch_size = 1;
  std::size_t beam = 1;
  std::size_t runs = 5;
  /// Generation cap per sentence; 0 means 2 * source length + 10.
  std::size_t max_len = 0;
};

struct ThroughputReport {
  std::string config_id;
  std::size_t batch_size = 0;
  std::size_t beam = 0;
  std::size_t runs = 0;
  std::size_t n_batches = 0;
  std::size_t tokens = 0;  // generated per run, <eos> excluded
  double tokens_per_sec_mean = 0.0;
  double tokens_per_sec_std = 0.0;  // sample standard deviation over runs
  std::vector<double> samples;
};

/// Decodes the whole corpus `runs` times after one untimed warmup pass and
/// reports generated target tokens per second. Throws ConfigError if another
/// measurement is already running in this process.
ThroughputReport measure_throughput(TransformerModel& model, const Corpus& corpus,
                                    const ThroughputOptions& options,
                                    const std::string& config_id = "");

struct ThroughputRow {
  ThroughputReport report;
  std::optional<double> delta_pct;  // 100 * (this - first model) / first model
};

/// One report per (model, batch size), models outermost.
std::vector<ThroughputRow> batch_size_sweep(std::span<TransformerModel* const> models,
                                            std::span<const std::string> ids,
                                            std::span<const std::size_t> batch_sizes,
                                            const Corpus& corpus, ThroughputOptions options);

/// `config,batch_size,tokens_per_sec,std[,delta_pct],n_batches` preceded by a
/// `# nondeterministic: timing` line; delta_pct appears only with two or more
/// configs.
std::string throughput_csv(std::span<const ThroughputRow> rows);

}  // namespace wfn
