// SPDX-License-Identifier: Apache-2.0
/**
 * @file   blending.hpp
 * @brief  Overfitting-aware branch weights and the blended training loss.
 *
 * For each branch k the ledger keeps the loss on a fixed training subset
 * (L_tr) and on the validation set (L_v, a proxy for the true loss), one
 * entry per evaluation. With smoothed values Ltr_n, Lv_n over the last W
 * evaluations and the best smoothed values so far Ltr*, Lv*:
 *
 *   G = Lv* - Lv_n
 *   O = (Ltr* - Ltr_n) - G
 *   w = max(G, eps) / max(O, eps)^2
 *
 * after which the bests absorb the current smoothed values. Weights are
 * normalized to sum to one over the branches present.
 */
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvgb/ad/ops.hpp"
#include "mvgb/views.hpp"

namespace mvgb::blend {

inline constexpr double kClampEpsilon = 1e-6;
inline constexpr std::size_t kDefaultWindow = 5;

/// -1/M sum_m y_m . log p_m over rows of (M, C) probabilities. Throws
/// std::domain_error on non-finite or negative probabilities.
double branch_loss(const ad::Tensor &probs, const ad::Tensor &labels);

/// Mean of the last min(window, n) entries.
double smooth(std::span<const double> history, std::size_t window);

struct GOMeasures {
  double g_raw = 0.0;
  double o_raw = 0.0;
  double g = 0.0; // clamped
  double o = 0.0; // clamped
};

struct WeightUpdate {
  double weight = 0.0; // unnormalized G / O^2
  GOMeasures measures;
  double smoothed_train = 0.0;
  double smoothed_true = 0.0;
  /// Both G and O hit the clamp, so the ratio carries no information.
  bool degenerate = false;
};

class BranchLedger {
public:
  explicit BranchLedger(std::size_t window = kDefaultWindow);

  void record(double train_loss, double true_loss);

  /// Weight at the latest evaluation, then folds the smoothed losses into
  /// the bests. The first call initializes the bests to the smoothed values.
  WeightUpdate adaptive_weight(double eps = kClampEpsilon);

  std::size_t size() const { return train_.size(); }
  std::size_t window() const { return window_; }
  std::span<const double> train_history() const { return train_; }
  std::span<const double> true_history() const { return true_; }
  bool has_bests() const { return has_bests_; }
  double best_train() const { return best_train_; }
  double best_true() const { return best_true_; }

  friend bool operator==(const BranchLedger &, const BranchLedger &) = default;

private:
  std::size_t window_;
  std::vector<double> train_;
  std::vector<double> true_;
  bool has_bests_ = false;
  double best_train_ = 0.0;
  double best_true_ = 0.0;
  friend class Blender;
};

struct BlendWeights {
  std::array<double, kMaxBranches> w{};
  double z = 0.0;

  double operator[](Branch b) const { return w[index_of(b)]; }
  friend bool operator==(const BlendWeights &, const BlendWeights &) = default;
};

/// w / sum(w) over the branches present; uniform over them when the sum is
/// zero. Throws std::invalid_argument on negative or non-finite input.
BlendWeights normalize(const std::array<double, kMaxBranches> &raw, std::span<const Branch> present);

/// Uniform weights over `present`.
BlendWeights uniform(std::span<const Branch> present);

/// Fixed weights with everything on one branch.
BlendWeights one_hot(Branch b);

/// sum_k w_k L_k over the given (branch, loss) pairs.
ad::Var blended_loss(std::span<const std::pair<Branch, ad::Var>> losses, const BlendWeights &w);

struct BranchUpdate {
  Branch branch = Branch::joint;
  WeightUpdate update;
  double raw_weight = 0.0; // after degenerate substitution
  double normalized = 0.0;
};

/// Per-branch ledgers plus the weights they imply. Degenerate updates are
/// replaced by eps, so a first update (all degenerate) gives uniform weights.
class Blender {
public:
  explicit Blender(std::vector<Branch> branches, std::size_t window = kDefaultWindow,
                   double eps = kClampEpsilon);

  /// Record one evaluation (losses indexed by branch) and recompute weights.
  const BlendWeights &update(const std::array<double, kMaxBranches> &train_losses,
                             const std::array<double, kMaxBranches> &true_losses);

  const BlendWeights &weights() const { return weights_; }
  const std::vector<Branch> &branches() const { return branches_; }
  const std::vector<BranchUpdate> &last_updates() const { return last_; }
  const BranchLedger &ledger(Branch b) const;
  std::size_t evaluations() const;
  double epsilon() const { return eps_; }

  /// Lossless text form (hex floats).
  std::string serialize() const;
  static Blender deserialize(std::string_view text);

  friend bool operator==(const Blender &, const Blender &) = default;

private:
  std::vector<Branch> branches_;
  double eps_;
  std::array<std::optional<BranchLedger>, kMaxBranches> ledgers_;
  BlendWeights weights_;
  std::vector<BranchUpdate> last_;
};

/// Weight-trajectory CSV; G and O are written before clamping.
inline constexpr const char *kWeightCsvHeader =
    "step,epoch,branch,raw_w,normalized_w,G,O,smoothed_train_loss,smoothed_true_loss";
void write_weight_rows(std::ostream &out, std::uint64_t step, std::uint64_t epoch,
                       const std::vector<BranchUpdate> &updates);

} // namespace mvgb::blend
