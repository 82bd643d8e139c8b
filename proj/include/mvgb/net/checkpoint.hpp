// SPDX-License-Identifier: Apache-2.0
/**
 * @file   checkpoint.hpp
 * @brief  "BCKP" binary checkpoint container.
 *
 * Layout (little-endian):
 *   "BCKP" u32 version
 *   str config                       (key = value text)
 *   u32 n, n x {str name, u32 rank, u64 dims[rank], f64 values[]}
 *   f64 blend_weights[5], u8 branch_mask
 *   f64 best_validation_accuracy, u64 step, u64 epoch
 *   str ledger                       (opaque blending state)
 * where str is u32 length + bytes.
 */
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvgb/net/network.hpp"

namespace mvgb::net {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string config;
  std::vector<std::pair<std::string, ad::Tensor>> tensors;
  std::array<double, kMaxBranches> blend_weights{};
  std::uint8_t branch_mask = 0; // bit k set when branch k exists
  double best_validation_accuracy = 0.0;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::string ledger;
};

std::string serialize(const Checkpoint &c);
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &c);
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Every parameter (including batchnorm running statistics) by name.
std::vector<std::pair<std::string, ad::Tensor>> snapshot_parameters(MultiViewNet &net);
/// Copies tensors back by name. Throws CheckpointError on a missing name or
/// a shape mismatch.
void restore_parameters(MultiViewNet &net,
                        const std::vector<std::pair<std::string, ad::Tensor>> &tensors);

} // namespace mvgb::net
