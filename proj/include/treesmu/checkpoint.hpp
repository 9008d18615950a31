#pragma once

#include <filesystem>

#include "json.hpp"
#include "treesmu/param_store.hpp"

namespace treesmu::ad {

// Binary checkpoint container, version 1 (see docs/checkpoint_format.md):
//
//   bytes 0..7    magic "TSMUCKPT"
//   u32 LE        format version
//   u64 LE        header length H
//   H bytes       UTF-8 JSON header {"metadata": ..., "adam_step": t,
//                 "params": [{"key", "rows", "cols"}, ...]}
//   per param, in header order: value, first moment, second moment as
//   rows*cols little-endian IEEE-754 float64 each (row-major)
struct Checkpoint {
  ParamStore params;
  nlohmann::json metadata;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace treesmu::ad
