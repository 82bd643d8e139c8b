// SPDX-License-Identifier: Apache-2.0
/**
 * @file   engine.hpp
 * @brief  Training loop with periodic evaluation, weight updates and model
 *         selection.
 */
#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "mvgb/blend/blending.hpp"
#include "mvgb/net/checkpoint.hpp"
#include "mvgb/train/adam.hpp"
#include "mvgb/train/config.hpp"
#include "mvgb/train/dataset.hpp"

namespace mvgb::train {

struct TrainLogs {
  std::ostream *metrics = nullptr;     // one row per evaluation
  std::ostream *weights = nullptr;     // blend mode weight trajectory
  std::ostream *diagnostics = nullptr; // free text
};

struct EvalPoint {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double blended_loss = 0.0; // mean minibatch loss since the previous row
  std::array<double, kMaxBranches> train_loss{};
  std::array<double, kMaxBranches> val_loss{};
  std::array<double, kMaxBranches> val_accuracy{};
  double ensemble_val_accuracy = 0.0;
};

struct TrainResult {
  net::Checkpoint best;
  blend::BlendWeights ensemble_weights;
  Branch selection_branch = Branch::joint;
  double best_validation_accuracy = 0.0;
  std::array<double, kMaxBranches> best_validation_loss{};
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  std::vector<EvalPoint> history;
};

/// Branch whose validation accuracy drives model selection: the joint branch
/// when present, else the first branch.
Branch selection_branch(const net::MultiViewNet &net);

/// Fixed weights of a non-adaptive mode, or uniform for blend.
blend::BlendWeights initial_weights(const TrainConfig &cfg, const net::MultiViewNet &net);

/// Train `net` and leave it holding the selected parameters. Throws
/// DivergenceError on a non-finite loss or gradient, std::invalid_argument
/// on unusable inputs.
TrainResult train(net::MultiViewNet &net, std::span<const Clip> train_set,
                  std::span<const Clip> validation, const TrainConfig &cfg,
                  const TrainLogs &logs = {});

/// Indices of the fixed training subset used for the training-loss term of
/// the weight update: `size` clips drawn without replacement.
std::vector<std::size_t> training_subset(std::size_t n_train, std::size_t size, std::uint64_t seed);

std::string metrics_header(std::span<const Branch> branches);
std::string metrics_row(const EvalPoint &p, std::span<const Branch> branches);

/// Checkpoint config text: training keys plus network keys under "net.".
std::string run_config_text(const TrainConfig &t, const net::NetworkConfig &n);
net::NetworkConfig network_from_config(const kv::Map &m);

} // namespace mvgb::train
