#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "wfn/config.hpp"
#include "wfn/corpus.hpp"
#include "wfn/trainer.hpp"

namespace wfn {

struct TaskSpec {
  ToyTask kind = ToyTask::Copy;
  std::size_t count = 1000;
  std::size_t min_len = 1;
  std::size_t max_len = 8;
  std::size_t vocab = 20;
  std::uint64_t seed = 0;
};

/// Either a toy task or a pair of line-aligned text files.
struct DataSpec {
  std::optional<TaskSpec> task;
  std::filesystem::path src;
  std::filesystem::path tgt;

  bool present() const { return task.has_value() || !src.empty(); }
};

/// A run described by a JSON document:
///
///   {
///     "seed": 1,
///     "preset": "SharedEnc",
///     "model": {"shape": "toy", "d_model": 32, ...,
///               "sharing": {"enc_ffn": "SharedAll", "dec_ffn": {"kind": "Cycle", "distinct": 3}}},
///     "train": {"steps": 2000, "batch_size": 32, "base_lr": 0.003, "warmup_steps": 200},
///     "data": {"task": "copy", "count": 2000, "max_len": 8, "vocab": 20},
///     "eval": {"src": "dev.src", "tgt": "dev.tgt"}
///   }
///
/// Unknown keys anywhere are rejected. `preset` and `model.sharing` are
/// mutually exclusive.
struct RunConfig {
  ModelConfig model;
  bool vocab_explicit = false;
  std::optional<std::string> preset;
  std::string shape = "big";
  std::uint64_t seed = 0;
  TrainOptions train;
  DataSpec data;
  DataSpec eval;
};

RunConfig parse_run_config(const nlohmann::json& doc);
/// Reads `path`; WFN_SEED, when set, overrides the seed.
RunConfig load_run_config(const std::filesystem::path& path);
/// Applies WFN_SEED to `config` when the variable is set.
void apply_seed_override(RunConfig& config);

/// Named base shape: big, base, deep-shallow, decoder-only, toy.
ModelConfig shape_config(std::string_view shape);

DataSpec parse_data_spec(const nlohmann::json& j, std::string_view where);
/// Loads a corpus; with `vocab`, encodes against it instead of building one.
Corpus load_data(const DataSpec& spec, const Vocab* vocab = nullptr);

/// Complete, explicit serialisation of a ModelConfig (checkpoint sidecars).
nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace wfn
