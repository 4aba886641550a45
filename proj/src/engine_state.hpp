#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "emclt/common.hpp"
#include "emclt/engine.hpp"

namespace emclt::detail {

struct ChainState {
  std::array<double, kMaxDim> theta{};
  std::size_t k = 0;
  std::vector<CompensatedSum> sums;
  CompensatedSum stat, martingale, r0, r1, r2, z_sq;
  double z_abs_max = 0.0;
  bool stopped = false;
};

struct CheckpointHeader {
  std::string config_hash;
  std::uint64_t first_chain = 0;
  std::uint64_t chains = 0;
  std::uint64_t steps_done = 0;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                     const std::vector<ChainState>& states,
                     const std::vector<ChainAccumulator>& accs);

/// Returns false if the file is absent; throws if it exists but does not match.
bool load_checkpoint(const std::filesystem::path& path, const CheckpointHeader& expect,
                     std::vector<ChainState>& states, std::vector<ChainAccumulator>& accs,
                     std::uint64_t& steps_done);

}  // namespace emclt::detail
