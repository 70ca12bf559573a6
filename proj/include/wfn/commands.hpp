#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfn/model.hpp"
#include "wfn/params.hpp"
#include "wfn/run_config.hpp"
#include "wfn/similarity.hpp"

namespace wfn {

/// Process exit code for an exception escaping a command: 2 configuration,
/// 3 data, 4 numeric failure, 1 anything else.
int exit_code_for(const std::exception& e);

// Checkpoints are written with a `<checkpoint>.json` sidecar holding the
// model configuration and vocabulary.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);
void save_model(const std::filesystem::path& checkpoint, const TransformerModel& model,
                const Vocab& vocab, const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
  TransformerModel model;
  Vocab vocab;
  nlohmann::json meta;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

struct ParamsReport {
  std::string label;
  ParamCount count;
  std::uint64_t baseline_total = 0;
  double percent = 0.0;  // of the same shape with no sharing
};
ParamsReport params_report(const ModelConfig& config, const std::string& label);
nlohmann::json to_json(const ParamsReport& report);

/// Table followed by a JSON document; `json_only` prints just the JSON.
void cmd_params(const ModelConfig& config, const std::string& label, bool json_only,
                std::ostream& out);
/// One row per preset of `shape` that applies to it.
void cmd_params_presets(const ModelConfig& shape, bool json_only, std::ostream& out);

struct TrainCommand {
  RunConfig config;
  std::filesystem::path checkpoint;
  std::filesystem::path loss_csv;  // defaults to <checkpoint>.loss.csv
  std::optional<std::filesystem::path> resume;
};
void cmd_train(const TrainCommand& cmd, std::ostream& out);

struct EvalCommand {
  std::filesystem::path checkpoint;
  DataSpec data;
  std::size_t beam = 1;
  std::size_t max_len = 0;  // 0: 2 * source length + 10
};
void cmd_eval(const EvalCommand& cmd, std::ostream& out);

struct CompareCommand {
  std::filesystem::path a;
  std::filesystem::path b;
  DataSpec data;
  Metric metric = Metric::Cka;
  std::optional<std::size_t> k;
  std::vector<std::filesystem::path> benchmarks;
  std::filesystem::path out_dir = ".";
  bool save_activations = false;
};
/// Checkpoint pairs are compared per side; two activation dumps are compared
/// directly.
void cmd_compare(const CompareCommand& cmd, std::ostream& out);

void cmd_selfsim(const std::filesystem::path& checkpoint, const DataSpec& data,
                 const std::filesystem::path& out_dir, std::ostream& out);

struct BenchCommand {
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::size_t> batch_sizes{1};
  std::size_t beam = 1;
  std::size_t runs = 5;
  std::size_t max_len = 0;
  DataSpec data;
  std::filesystem::path out;  // empty: print only
};
void cmd_bench(const BenchCommand& cmd, std::ostream& out);

struct SweepCommand {
  RunConfig config;
  Side side = Side::Encoder;
  std::vector<std::size_t> dims;
  std::filesystem::path out;  // empty: print only
};
void cmd_sweep(const SweepCommand& cmd, std::ostream& out);

}  // namespace wfn
