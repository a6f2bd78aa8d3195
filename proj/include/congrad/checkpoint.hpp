#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "congrad/estimation.hpp"
#include "congrad/policy.hpp"

namespace congrad {

// Binary snapshot layout, all integers and doubles little-endian:
//   bytes 0..15   magic "CONGRADSNAPSHOT\0"
//   byte  16      format version (1)
//   u32           block count
//   per block     u8 role, u32 rows, u32 cols
//   then          rows*cols doubles per block, concatenated in block order
enum class BlockRole : std::uint8_t {
  Backbone = 0,
  Head = 1,
  Critic = 2,
  RawTheta = 3,
};

struct CheckpointBlock {
  BlockRole role = BlockRole::RawTheta;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  Vec data;
};

void save_checkpoint(const std::string& path,
                     const std::vector<CheckpointBlock>& blocks);
// throws std::runtime_error on missing file, bad magic, unsupported version
// or truncation
std::vector<CheckpointBlock> load_checkpoint(const std::string& path);

std::vector<CheckpointBlock> checkpoint_blocks(const PolicyParams& policy,
                                               const CriticParams& critic);
std::vector<CheckpointBlock> checkpoint_blocks(const Vec& theta);

}  // namespace congrad
