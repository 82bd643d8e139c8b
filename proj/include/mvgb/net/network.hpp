// SPDX-License-Identifier: Apache-2.0
/**
 * @file   network.hpp
 * @brief  2D/1D CRNN subnets and the multi-view network.
 *
 * A subnet maps one view to an embedding (conv blocks -> reshape -> BiGRU ->
 * attention) and owns a classification head over that embedding. The
 * multi-view network concatenates the per-view embeddings and adds a joint
 * head, giving one branch per view plus the joint branch.
 */
#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvgb/nn/layers.hpp"
#include "mvgb/views.hpp"

namespace mvgb::net {

using ad::Shape;
using ad::Var;

enum class Scale { full, reduced };

std::string_view name_of(Scale s);
Scale parse_scale(std::string_view s);

/// conv01 and conv02 (+ pool02) of the raw-waveform network; the result is
/// reshaped from (T, 1, C) to (T, C, 1) before the 2D blocks.
struct RawFrontEnd {
  nn::ConvBlockSpec conv01;
  nn::ConvBlockSpec conv02;
};

struct CrnnSpec {
  std::string name;
  Shape input; // per sample, (T, F, 1)
  std::optional<RawFrontEnd> front;
  std::vector<nn::ConvBlockSpec> blocks;
  std::size_t gru_hidden = 256;
  std::size_t attention_dim = 64;
  std::vector<std::size_t> fc_widths{1024, 1024};
  std::size_t n_classes = 0;
  double dropout = 0.1;

  std::size_t embedding_dim() const { return 2 * gru_hidden; }
};

struct NetworkConfig {
  std::size_t n_classes = 0;
  std::vector<View> views{View::mel, View::gam, View::cqt, View::raw};
  Scale scale = Scale::reduced;
  bool joint_head = true;
  double dropout = 0.1;

  // Reduced-scale knobs.
  std::size_t filter_divisor = 4;
  std::size_t gru_hidden = 32;
  std::size_t attention_dim = 16;
  std::size_t fc_width = 128;
  std::size_t joint_fc_width = 256;
  std::size_t time_frames = 16;
  std::size_t bands = 16;
  std::size_t raw_length = 4096;

  // Full-scale input lengths.
  std::size_t full_time_frames = 75;
  std::size_t full_cqt_frames = 65;
  std::size_t full_raw_length = 66650;

  /// Throws std::invalid_argument when unusable.
  void validate() const;
  /// key=value lines; round-trips through from_key_values.
  std::map<std::string, std::string> to_key_values() const;
  static NetworkConfig from_key_values(const std::map<std::string, std::string> &kv);

  /// Per-sample input shape of a view, (T, F, 1).
  Shape input_shape(View v) const;
};

/// Table-exact 2D CRNN for a (T, 64, 1) input.
CrnnSpec full_crnn2d(std::string name, std::size_t time_frames, std::size_t n_classes);
/// Table-exact 1D CRNN. Accepts 66650 or 33330 samples (pool02 halved for the
/// shorter input); other lengths throw std::invalid_argument.
CrnnSpec full_crnn1d(std::string name, std::size_t length, std::size_t n_classes);
/// Filters divided, GRU/attention/fc shrunk; only the first log2(bands)
/// blocks pool in frequency.
CrnnSpec reduced_crnn2d(std::string name, const NetworkConfig &cfg);
CrnnSpec reduced_crnn1d(std::string name, const NetworkConfig &cfg);

CrnnSpec crnn_spec(View v, const NetworkConfig &cfg);
std::vector<std::size_t> joint_fc_widths(const NetworkConfig &cfg);

class Crnn {
public:
  Crnn(CrnnSpec spec, ad::Rng &rng);

  /// (B, input...) -> (B, embedding_dim).
  Var embed(const nn::ForwardContext &ctx, Var x);
  /// (B, embedding_dim) -> logits (B, n_classes).
  Var classify(const nn::ForwardContext &ctx, Var embedding);
  Var forward(const nn::ForwardContext &ctx, Var x) { return classify(ctx, embed(ctx, x)); }

  void parameters(std::vector<ad::Parameter *> &out);
  const CrnnSpec &spec() const { return spec_; }

private:
  CrnnSpec spec_;
  std::optional<nn::ConvBlock> conv01_;
  std::optional<nn::ConvBlock> conv02_;
  std::vector<nn::ConvBlock> blocks_;
  nn::BiGru rnn_;
  nn::AttentionPool attention_;
  nn::FcStack head_;
};

/// Per-view inputs indexed by View; views not in the network stay invalid.
using ViewInputs = std::array<Var, 4>;

struct BranchOutputs {
  std::array<Var, kMaxBranches> logits;  // invalid where the branch is absent
  std::array<Var, 4> embeddings;
  Var joint_input;

  bool has(Branch b) const { return logits[index_of(b)].valid(); }
};

class MultiViewNet {
public:
  MultiViewNet(NetworkConfig cfg, std::uint64_t seed);

  const NetworkConfig &config() const { return cfg_; }
  /// Views in canonical order, then the joint branch when enabled.
  const std::vector<Branch> &branches() const { return branches_; }
  bool has_view(View v) const { return subnets_[index_of(v)] != nullptr; }

  BranchOutputs forward(const nn::ForwardContext &ctx, const ViewInputs &inputs);

  Crnn &subnet(View v);
  nn::FcStack *joint_head() { return joint_.get(); }
  const nn::FcStack *joint_head() const { return joint_.get(); }

  std::vector<ad::Parameter *> parameters();
  std::size_t parameter_count();

private:
  NetworkConfig cfg_;
  std::vector<Branch> branches_;
  std::array<std::unique_ptr<Crnn>, 4> subnets_;
  std::unique_ptr<nn::FcStack> joint_;
};

} // namespace mvgb::net
