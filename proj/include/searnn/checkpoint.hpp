#pragma once

#include <string>

#include "searnn/model.hpp"

namespace searnn {

// Checkpoint layout (little-endian):
//   "SRNN" | u32 version | u64 src_vocab_hash | u64 tgt_vocab_hash |
//   u32 src_vocab | u32 tgt_vocab | u32 embed | u32 hidden |
//   u32 param_count | { u32 name_len | name | u32 rank | u32 dims[rank] |
//                       f32 values[] } per parameter, name order.
// Values are stored at 32-bit precision; training math stays 64-bit.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t src_vocab_hash = 0;
  std::uint64_t tgt_vocab_hash = 0;
  ModelDims dims;
};

void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::string& path);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  Model model;
};

// Parses and validates the whole file before returning; a truncated or
// malformed file leaves no partial state behind.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Refuses checkpoints whose vocabulary hashes do not match the given ones.
void require_vocab_match(const CheckpointMeta& meta,
                         std::uint64_t src_vocab_hash,
                         std::uint64_t tgt_vocab_hash);

}  // namespace searnn
