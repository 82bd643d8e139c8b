// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Training configuration, mode selection and the learning-rate schedule.
 */
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mvgb/kv.hpp"
#include "mvgb/net/network.hpp"

namespace mvgb::train {

/// blend: adaptive branch weights. concat: joint branch only. single: one
/// view, one head. late: four independent single-view nets averaged.
enum class Mode { blend, concat, single, late };

struct TrainConfig {
  std::size_t epochs = 1500;
  std::size_t batch_size = 64;
  double init_lr = 2e-4;
  double warmup_lr = 2e-5;
  std::size_t warmup_epochs = 10;
  double decay = 0.8;
  std::array<double, 3> decay_at{0.1, 0.2, 0.3}; // fractions of epochs
  std::size_t eval_interval = 1;                 // epochs
  std::uint64_t seed = 0;
  Mode mode = Mode::blend;
  View single_view = View::mel;
  std::size_t blend_window = 5;
  double blend_epsilon = 1e-6;
  std::size_t eval_chunk = 64; // segments per inference batch

  /// Throws std::invalid_argument.
  void validate() const;
  kv::Map to_key_values() const;
  static TrainConfig from_key_values(const kv::Map &m);
};

/// "blend", "concat", "single:<view>" or "late".
std::string mode_name(const TrainConfig &cfg);
/// Sets mode (and single_view). Throws std::invalid_argument.
void parse_mode(std::string_view s, TrainConfig &cfg);

/// Warm-up rate for the first warmup_epochs, then init_lr times decay per
/// threshold decay_at[i] * epochs strictly exceeded. Epochs are 1-based.
double lr_at(std::size_t epoch, const TrainConfig &cfg);

/// The network a mode trains: all configured views plus the joint head for
/// blend/concat, a single headless-joint subnet for single.
net::NetworkConfig network_for(const TrainConfig &cfg, net::NetworkConfig base);

} // namespace mvgb::train
