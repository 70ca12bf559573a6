#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wfn/model.hpp"
#include "wfn/params.hpp"

namespace wfn {

// Binary layout, all integers little-endian:
//
//   "WFN1"
//   u32 tensor_count
//   tensor_count x { u32 name_len, name bytes, u8 dtype (0 = f32),
//                    u32 rank, rank x u64 dim }
//   u32 alias_count
//   alias_count x { u32 len, logical bytes, u32 len, canonical bytes }
//   payloads: f32 little-endian values of each tensor, in header order
//
// Tied tensors appear once in the payload; every logical site is listed in
// the alias table.

inline constexpr char kCheckpointMagic[4] = {'W', 'F', 'N', '1'};

struct CheckpointEntry {
  std::string name;
  Shape shape;
};

struct CheckpointContents {
  std::vector<CheckpointEntry> entries;
  std::vector<std::pair<std::string, std::string>> aliases;
  std::vector<Tensor> tensors;  // parallel to entries
};

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);

CheckpointContents decode_checkpoint(const std::vector<std::uint8_t>& bytes);
CheckpointContents read_checkpoint(const std::filesystem::path& path);

/// Loads values into `model`; names, shapes and aliases must match exactly.
void load_checkpoint(const std::filesystem::path& path, TransformerModel& model);
void load_checkpoint(const CheckpointContents& contents, ParamStore& params);

/// Parameter census of a checkpoint: sum of tensor element counts.
std::uint64_t checkpoint_param_count(const CheckpointContents& contents);

}  // namespace wfn
