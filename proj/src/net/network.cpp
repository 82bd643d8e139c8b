// SPDX-License-Identifier: Apache-2.0
#include "mvgb/net/network.hpp"

#include <bit>
#include <stdexcept>

#include "mvgb/kv.hpp"

namespace mvgb::net {

using ad::Padding;
using nn::ConvBlockSpec;

std::string_view name_of(Scale s) { return s == Scale::full ? "full" : "reduced"; }

Scale parse_scale(std::string_view s) {
  if (s == "full")
    return Scale::full;
  if (s == "reduced")
    return Scale::reduced;
  throw std::invalid_argument("unknown scale '" + std::string(s) + "' (expected full or reduced)");
}

namespace {

ConvBlockSpec block(std::size_t filters, std::string conv, std::string pool, bool pooled = true) {
  ConvBlockSpec s;
  s.kernel = {3, 3};
  s.stride = {1, 1};
  s.filters = filters;
  s.padding = Padding::same;
  s.pool = pooled;
  s.pool_kernel = {1, 2};
  s.pool_stride = {1, 2};
  s.conv_name = std::move(conv);
  s.pool_name = std::move(pool);
  return s;
}

ConvBlockSpec strided(std::size_t k, std::size_t s, std::size_t filters, std::string name) {
  ConvBlockSpec c;
  c.kernel = {k, 1};
  c.stride = {s, 1};
  c.filters = filters;
  c.padding = Padding::valid;
  c.pool = false;
  c.conv_name = std::move(name);
  return c;
}

ConvBlockSpec conv1_block(std::size_t filters) {
  ConvBlockSpec c;
  c.kernel = {5, 3};
  c.filters = filters;
  c.padding = Padding::same;
  c.pool_kernel = {4, 2};
  c.pool_stride = {4, 2};
  c.conv_name = "conv1";
  c.pool_name = "pool1";
  return c;
}

std::string level(const char *what, std::size_t l) { return std::string(what) + "-" + std::to_string(l); }

constexpr std::array<std::size_t, 6> kFilters2d{32, 64, 128, 128, 256, 512};
constexpr std::array<std::size_t, 5> kFilters1d{64, 128, 128, 256, 512};

std::size_t log2_exact(std::size_t v) { return static_cast<std::size_t>(std::countr_zero(v)); }

} // namespace

// ---------------------------------------------------------------- config

void NetworkConfig::validate() const {
  if (n_classes < 2)
    throw std::invalid_argument("n_classes must be at least 2");
  if (views.empty())
    throw std::invalid_argument("network needs at least one view");
  for (std::size_t i = 1; i < views.size(); ++i)
    if (index_of(views[i]) <= index_of(views[i - 1]))
      throw std::invalid_argument("views must be unique and in canonical order");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("dropout must be in [0, 1)");
  if (scale == Scale::reduced) {
    if (bands < 2 || bands > 64 || !std::has_single_bit(bands))
      throw std::invalid_argument("reduced bands must be a power of two in [2, 64]");
    if (filter_divisor == 0 || filter_divisor > 32 || gru_hidden == 0 || attention_dim == 0 ||
        fc_width == 0 || joint_fc_width == 0 || time_frames == 0)
      throw std::invalid_argument("reduced-scale sizes must be positive");
  }
}

std::map<std::string, std::string> NetworkConfig::to_key_values() const {
  std::string view_list;
  for (View v : views)
    view_list += (view_list.empty() ? "" : ",") + std::string(mvgb::name_of(v));
  return {
      {"n_classes", std::to_string(n_classes)},
      {"views", view_list},
      {"scale", std::string(name_of(scale))},
      {"joint_head", joint_head ? "true" : "false"},
      {"dropout", kv::to_text(dropout)},
      {"filter_divisor", std::to_string(filter_divisor)},
      {"gru_hidden", std::to_string(gru_hidden)},
      {"attention_dim", std::to_string(attention_dim)},
      {"fc_width", std::to_string(fc_width)},
      {"joint_fc_width", std::to_string(joint_fc_width)},
      {"time_frames", std::to_string(time_frames)},
      {"bands", std::to_string(bands)},
      {"raw_length", std::to_string(raw_length)},
      {"full_time_frames", std::to_string(full_time_frames)},
      {"full_cqt_frames", std::to_string(full_cqt_frames)},
      {"full_raw_length", std::to_string(full_raw_length)},
  };
}

NetworkConfig NetworkConfig::from_key_values(const std::map<std::string, std::string> &m) {
  NetworkConfig c;
  c.n_classes = kv::get_size(m, "n_classes", c.n_classes);
  if (auto it = m.find("views"); it != m.end())
    c.views = parse_view_list(it->second);
  c.scale = parse_scale(kv::get(m, "scale", std::string(name_of(c.scale))));
  c.joint_head = kv::get_bool(m, "joint_head", c.joint_head);
  c.dropout = kv::get_double(m, "dropout", c.dropout);
  c.filter_divisor = kv::get_size(m, "filter_divisor", c.filter_divisor);
  c.gru_hidden = kv::get_size(m, "gru_hidden", c.gru_hidden);
  c.attention_dim = kv::get_size(m, "attention_dim", c.attention_dim);
  c.fc_width = kv::get_size(m, "fc_width", c.fc_width);
  c.joint_fc_width = kv::get_size(m, "joint_fc_width", c.joint_fc_width);
  c.time_frames = kv::get_size(m, "time_frames", c.time_frames);
  c.bands = kv::get_size(m, "bands", c.bands);
  c.raw_length = kv::get_size(m, "raw_length", c.raw_length);
  c.full_time_frames = kv::get_size(m, "full_time_frames", c.full_time_frames);
  c.full_cqt_frames = kv::get_size(m, "full_cqt_frames", c.full_cqt_frames);
  c.full_raw_length = kv::get_size(m, "full_raw_length", c.full_raw_length);
  return c;
}

Shape NetworkConfig::input_shape(View v) const {
  if (scale == Scale::full) {
    switch (v) {
    case View::raw:
      return {full_raw_length, 1, 1};
    case View::cqt:
      return {full_cqt_frames, 64, 1};
    default:
      return {full_time_frames, 64, 1};
    }
  }
  if (v == View::raw)
    return {raw_length, 1, 1};
  return {time_frames, bands, 1};
}

// ---------------------------------------------------------------- presets

CrnnSpec full_crnn2d(std::string name, std::size_t time_frames, std::size_t n_classes) {
  CrnnSpec s;
  s.name = std::move(name);
  s.input = {time_frames, 64, 1};
  for (std::size_t l = 0; l < kFilters2d.size(); ++l)
    s.blocks.push_back(block(kFilters2d[l], level("conv", l + 1), level("pool", l + 1)));
  s.n_classes = n_classes;
  return s;
}

CrnnSpec full_crnn1d(std::string name, std::size_t length, std::size_t n_classes) {
  std::size_t pool02 = 0;
  if (length == 66650)
    pool02 = 64;
  else if (length == 33330)
    pool02 = 32;
  else
    throw std::invalid_argument("unsupported raw input length " + std::to_string(length) +
                                " (expected 66650 or 33330)");
  CrnnSpec s;
  s.name = std::move(name);
  s.input = {length, 1, 1};
  RawFrontEnd f;
  f.conv01 = strided(64, 2, 32, "conv01");
  f.conv02 = strided(16, 2, 64, "conv02");
  f.conv02.pool = true;
  f.conv02.pool_kernel = {pool02, 1};
  f.conv02.pool_stride = {pool02, 1};
  f.conv02.pool_name = "pool02";
  s.front = f;
  s.blocks.push_back(conv1_block(32));
  for (std::size_t l = 0; l < kFilters1d.size(); ++l)
    s.blocks.push_back(block(kFilters1d[l], level("conv", l + 2), level("pool", l + 2)));
  s.n_classes = n_classes;
  return s;
}

CrnnSpec reduced_crnn2d(std::string name, const NetworkConfig &cfg) {
  CrnnSpec s;
  s.name = std::move(name);
  s.input = {cfg.time_frames, cfg.bands, 1};
  const std::size_t pooled = log2_exact(cfg.bands);
  for (std::size_t l = 0; l < kFilters2d.size(); ++l)
    s.blocks.push_back(block(std::max<std::size_t>(1, kFilters2d[l] / cfg.filter_divisor),
                             level("conv", l + 1), level("pool", l + 1), l < pooled));
  s.gru_hidden = cfg.gru_hidden;
  s.attention_dim = cfg.attention_dim;
  s.fc_widths = {cfg.fc_width, cfg.fc_width};
  s.n_classes = cfg.n_classes;
  s.dropout = cfg.dropout;
  return s;
}

CrnnSpec reduced_crnn1d(std::string name, const NetworkConfig &cfg) {
  CrnnSpec s;
  s.name = std::move(name);
  s.input = {cfg.raw_length, 1, 1};
  RawFrontEnd f;
  const std::size_t d = cfg.filter_divisor;
  f.conv01 = strided(16, 4, std::max<std::size_t>(1, 32 / d), "conv01");
  // conv02's channels become the frequency axis after the reshape.
  f.conv02 = strided(8, 2, cfg.bands, "conv02");
  f.conv02.pool = true;
  f.conv02.pool_kernel = {8, 1};
  f.conv02.pool_stride = {8, 1};
  f.conv02.pool_name = "pool02";
  s.front = f;
  s.blocks.push_back(conv1_block(std::max<std::size_t>(1, 32 / d)));
  const std::size_t pooled = log2_exact(cfg.bands) - 1;
  for (std::size_t l = 0; l < kFilters1d.size(); ++l)
    s.blocks.push_back(block(std::max<std::size_t>(1, kFilters1d[l] / d), level("conv", l + 2),
                             level("pool", l + 2), l < pooled));
  s.gru_hidden = cfg.gru_hidden;
  s.attention_dim = cfg.attention_dim;
  s.fc_widths = {cfg.fc_width, cfg.fc_width};
  s.n_classes = cfg.n_classes;
  s.dropout = cfg.dropout;
  return s;
}

CrnnSpec crnn_spec(View v, const NetworkConfig &cfg) {
  const std::string name(mvgb::name_of(v));
  if (cfg.scale == Scale::full) {
    CrnnSpec s = v == View::raw ? full_crnn1d(name, cfg.full_raw_length, cfg.n_classes)
                                : full_crnn2d(name, cfg.input_shape(v)[0], cfg.n_classes);
    s.dropout = cfg.dropout;
    return s;
  }
  return v == View::raw ? reduced_crnn1d(name, cfg) : reduced_crnn2d(name, cfg);
}

std::vector<std::size_t> joint_fc_widths(const NetworkConfig &cfg) {
  if (cfg.scale == Scale::full)
    return {4096, 4096};
  return {cfg.joint_fc_width, cfg.joint_fc_width};
}

// ---------------------------------------------------------------- Crnn

namespace {

// Per-sample shape after a block, without building anything.
Shape block_output(const Shape &in, const ConvBlockSpec &b) {
  Shape out{ad::window_output(in[0], b.kernel.rows, b.stride.rows, b.padding, b.conv_name.c_str()),
            ad::window_output(in[1], b.kernel.cols, b.stride.cols, b.padding, b.conv_name.c_str()),
            b.filters};
  if (b.pool) {
    out[0] = ad::window_output(out[0], b.pool_kernel.rows, b.pool_stride.rows, Padding::valid,
                               b.pool_name.c_str());
    out[1] = ad::window_output(out[1], b.pool_kernel.cols, b.pool_stride.cols, Padding::valid,
                               b.pool_name.c_str());
  }
  return out;
}

} // namespace

Crnn::Crnn(CrnnSpec spec, ad::Rng &rng) : spec_(std::move(spec)) {
  if (spec_.input.size() != 3 || spec_.input[2] != 1)
    throw std::invalid_argument(spec_.name + ": input must be (T, F, 1)");
  if (spec_.blocks.empty())
    throw std::invalid_argument(spec_.name + ": no conv blocks");
  if (spec_.n_classes == 0)
    throw std::invalid_argument(spec_.name + ": n_classes must be positive");
  const std::string &p = spec_.name;
  Shape shape = spec_.input;
  if (spec_.front) {
    conv01_.emplace(p + ".conv01", 1, spec_.front->conv01, rng);
    shape = block_output(shape, spec_.front->conv01);
    conv02_.emplace(p + ".conv02", shape[2], spec_.front->conv02, rng);
    shape = block_output(shape, spec_.front->conv02);
    if (shape[1] != 1)
      throw std::invalid_argument(p + ": raw front end must collapse the frequency axis");
    shape = {shape[0], shape[2], 1};
  }
  for (const ConvBlockSpec &b : spec_.blocks) {
    blocks_.emplace_back(p + "." + b.conv_name, shape[2], b, rng);
    shape = block_output(shape, b);
  }
  const std::size_t features = shape[1] * shape[2];
  rnn_ = nn::BiGru(p + ".rnn", features, spec_.gru_hidden, rng);
  attention_ = nn::AttentionPool(p + ".attention", spec_.embedding_dim(), spec_.attention_dim, rng);
  head_ = nn::FcStack(p + ".head", spec_.embedding_dim(), spec_.fc_widths, spec_.n_classes, rng);
}

Var Crnn::embed(const nn::ForwardContext &ctx, Var x) {
  const Shape xs = x.shape();
  if (xs.size() != 4 || Shape(xs.begin() + 1, xs.end()) != spec_.input)
    throw ad::ShapeError(spec_.name + ": expected input (batch, " + ad::to_string(spec_.input) +
                         "), got " + ad::to_string(xs));
  const std::size_t batch = xs[0];
  const double rate = spec_.dropout;
  ctx.record("input", x);
  if (spec_.front) {
    x = conv01_->forward(ctx, x, rate);
    x = conv02_->forward(ctx, x, rate);
    const Shape s = x.shape();
    x = ad::reshape(x, {batch, s[1], s[3], 1});
    ctx.record("reshape", x);
  }
  for (nn::ConvBlock &b : blocks_)
    x = b.forward(ctx, x, rate);
  const Shape s = x.shape();
  x = ad::reshape(x, {batch, s[1], s[2] * s[3]});
  ctx.record("reshape", x);
  x = rnn_.forward(ctx, x, rate);
  ctx.record("biRNN", x);
  x = attention_.forward(ctx, x);
  ctx.record("attention", x);
  return x;
}

Var Crnn::classify(const nn::ForwardContext &ctx, Var embedding) {
  return head_.forward(ctx, embedding, spec_.dropout);
}

void Crnn::parameters(std::vector<ad::Parameter *> &out) {
  if (conv01_) {
    conv01_->parameters(out);
    conv02_->parameters(out);
  }
  for (nn::ConvBlock &b : blocks_)
    b.parameters(out);
  rnn_.parameters(out);
  attention_.parameters(out);
  head_.parameters(out);
}

// ---------------------------------------------------------------- MultiViewNet

MultiViewNet::MultiViewNet(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  ad::Rng rng(seed);
  std::size_t joint_width = 0;
  for (View v : cfg_.views) {
    subnets_[index_of(v)] = std::make_unique<Crnn>(crnn_spec(v, cfg_), rng);
    joint_width += subnets_[index_of(v)]->spec().embedding_dim();
    branches_.push_back(branch_of(v));
  }
  if (cfg_.joint_head) {
    joint_ = std::make_unique<nn::FcStack>("joint.head", joint_width, joint_fc_widths(cfg_),
                                           cfg_.n_classes, rng);
    branches_.push_back(Branch::joint);
  }
}

Crnn &MultiViewNet::subnet(View v) {
  if (!subnets_[index_of(v)])
    throw std::out_of_range("network has no " + std::string(mvgb::name_of(v)) + " view");
  return *subnets_[index_of(v)];
}

BranchOutputs MultiViewNet::forward(const nn::ForwardContext &ctx, const ViewInputs &inputs) {
  BranchOutputs out;
  std::vector<Var> parts;
  for (View v : cfg_.views) {
    const Var &x = inputs[index_of(v)];
    if (!x.valid())
      throw std::invalid_argument("missing input for view " + std::string(mvgb::name_of(v)));
    Crnn &net = *subnets_[index_of(v)];
    Var e = net.embed(ctx, x);
    out.embeddings[index_of(v)] = e;
    out.logits[index_of(branch_of(v))] = net.classify(ctx, e);
    parts.push_back(e);
  }
  if (joint_) {
    out.joint_input = parts.size() == 1 ? parts.front() : ad::concat(parts);
    out.logits[index_of(Branch::joint)] = joint_->forward(ctx, out.joint_input, cfg_.dropout);
  }
  return out;
}

std::vector<ad::Parameter *> MultiViewNet::parameters() {
  std::vector<ad::Parameter *> out;
  for (View v : cfg_.views)
    subnets_[index_of(v)]->parameters(out);
  if (joint_)
    joint_->parameters(out);
  return out;
}

std::size_t MultiViewNet::parameter_count() { return nn::parameter_count(parameters()); }

} // namespace mvgb::net
