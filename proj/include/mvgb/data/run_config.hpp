// SPDX-License-Identifier: Apache-2.0
/**
 * @file   run_config.hpp
 * @brief  Flat key = value experiment configuration.
 *
 * Training keys are bare (epochs, batch_size, init_lr, ...), network keys
 * carry a "net." prefix and the validation rule lives under "split.rule"
 * and "split.seed". Missing keys keep their defaults.
 */
#pragma once

#include <filesystem>

#include "mvgb/data/manifest.hpp"
#include "mvgb/kv.hpp"
#include "mvgb/net/network.hpp"
#include "mvgb/train/config.hpp"

namespace mvgb::data {

struct RunConfig {
  train::TrainConfig train;
  net::NetworkConfig net;
  SplitSpec split;

  kv::Map to_key_values() const;
  static RunConfig from_key_values(const kv::Map &m);
  static RunConfig load(const std::filesystem::path &path);
  /// Throws std::invalid_argument.
  void validate() const;
};

} // namespace mvgb::data
