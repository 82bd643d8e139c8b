// SPDX-License-Identifier: Apache-2.0
/**
 * @file   inference.hpp
 * @brief  File-level inference, self-ensemble, late fusion and evaluation.
 */
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "mvgb/blend/blending.hpp"
#include "mvgb/net/network.hpp"
#include "mvgb/train/dataset.hpp"

namespace mvgb::train {

using Distribution = std::vector<double>;

/// Per-branch class distributions for one file; empty where the branch is
/// absent.
struct FileProbs {
  std::array<Distribution, kMaxBranches> branch;

  bool has(Branch b) const { return !branch[index_of(b)].empty(); }
};

/// Segment-averaged branch distributions for each clip. Segments of all
/// clips are batched `chunk` at a time in inference mode.
std::vector<FileProbs> infer(net::MultiViewNet &net, std::span<const Clip> clips,
                             std::size_t chunk = 64);
FileProbs infer_file(net::MultiViewNet &net, const Clip &clip);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> p);

struct EnsembleDecision {
  Distribution p; // (1/K) sum_k w_k P_k, not renormalized
  std::size_t label = 0;
};

/// Weighted average over the branches present in `probs`.
EnsembleDecision self_ensemble(const FileProbs &probs, const blend::BlendWeights &w);

/// Unweighted mean. Throws std::invalid_argument on an empty set or
/// mismatched sizes.
Distribution late_fusion(std::span<const Distribution> dists);

struct EvalReport {
  std::size_t n_files = 0;
  std::size_t n_classes = 0;
  std::array<bool, kMaxBranches> present{};
  std::array<double, kMaxBranches> loss{};
  std::array<double, kMaxBranches> accuracy{};
  double ensemble_accuracy = 0.0;
  /// confusion[true][predicted] of the ensemble decision.
  std::vector<std::vector<std::size_t>> confusion;
};

/// Fraction of predictions equal to labels. Throws on empty or mismatched input.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

/// Report from per-file branch distributions; the ensemble decision is the
/// self-ensemble under `w`.
EvalReport evaluate_probs(std::span<const FileProbs> probs, std::span<const std::size_t> labels,
                          const blend::BlendWeights &w, std::size_t n_classes);
/// Same, with the ensemble decision given directly (late fusion).
EvalReport evaluate_decisions(std::span<const FileProbs> probs, std::span<const Distribution> combined,
                              std::span<const std::size_t> labels, std::size_t n_classes);

EvalReport evaluate(net::MultiViewNet &net, std::span<const Clip> clips,
                    const blend::BlendWeights &w, std::size_t chunk = 64);

/// "branch,loss,accuracy" rows plus an "ensemble" row.
void write_report_csv(std::ostream &out, const EvalReport &r);

/// Arithmetic mean of per-fold accuracies.
double mean_accuracy(std::span<const double> per_fold);

} // namespace mvgb::train
