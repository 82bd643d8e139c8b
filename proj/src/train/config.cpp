// SPDX-License-Identifier: Apache-2.0
#include "mvgb/train/config.hpp"

#include <cmath>
#include <stdexcept>

namespace mvgb::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string &msg) { throw std::invalid_argument("train config: " + msg); };
  if (epochs == 0)
    fail("epochs must be positive");
  if (batch_size == 0)
    fail("batch_size must be positive");
  if (eval_interval == 0)
    fail("eval_interval must be at least 1");
  if (!(init_lr > 0) || !(warmup_lr > 0) || !std::isfinite(init_lr) || !std::isfinite(warmup_lr))
    fail("learning rates must be positive");
  if (!(decay > 0) || !std::isfinite(decay))
    fail("decay must be positive");
  for (double f : decay_at)
    if (!(f >= 0) || !std::isfinite(f))
      fail("decay_at fractions must be nonnegative");
  if (blend_window == 0)
    fail("blend_window must be positive");
  if (!(blend_epsilon > 0))
    fail("blend_epsilon must be positive");
  if (eval_chunk == 0)
    fail("eval_chunk must be positive");
}

kv::Map TrainConfig::to_key_values() const {
  return {
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"init_lr", kv::to_text(init_lr)},
      {"warmup_lr", kv::to_text(warmup_lr)},
      {"warmup_epochs", std::to_string(warmup_epochs)},
      {"decay", kv::to_text(decay)},
      {"decay_at", kv::to_text(decay_at[0]) + "," + kv::to_text(decay_at[1]) + "," +
                       kv::to_text(decay_at[2])},
      {"eval_interval", std::to_string(eval_interval)},
      {"seed", std::to_string(seed)},
      {"mode", mode_name(*this)},
      {"blend_window", std::to_string(blend_window)},
      {"blend_epsilon", kv::to_text(blend_epsilon)},
      {"eval_chunk", std::to_string(eval_chunk)},
  };
}

TrainConfig TrainConfig::from_key_values(const kv::Map &m) {
  TrainConfig c;
  c.epochs = kv::get_size(m, "epochs", c.epochs);
  c.batch_size = kv::get_size(m, "batch_size", c.batch_size);
  c.init_lr = kv::get_double(m, "init_lr", c.init_lr);
  c.warmup_lr = kv::get_double(m, "warmup_lr", c.warmup_lr);
  c.warmup_epochs = kv::get_size(m, "warmup_epochs", c.warmup_epochs);
  c.decay = kv::get_double(m, "decay", c.decay);
  if (auto it = m.find("decay_at"); it != m.end()) {
    kv::Map parts;
    std::string_view s = it->second;
    for (std::size_t i = 0; i < 3; ++i) {
      auto comma = s.find(',');
      if ((i < 2) == (comma == std::string_view::npos))
        throw kv::KeyValueError("decay_at: expected three comma separated fractions");
      parts["f"] = std::string(s.substr(0, comma));
      c.decay_at[i] = kv::get_double(parts, "f", 0.0);
      if (comma != std::string_view::npos)
        s.remove_prefix(comma + 1);
    }
  }
  c.eval_interval = kv::get_size(m, "eval_interval", c.eval_interval);
  c.seed = kv::get_size(m, "seed", c.seed);
  if (auto it = m.find("mode"); it != m.end())
    parse_mode(it->second, c);
  c.blend_window = kv::get_size(m, "blend_window", c.blend_window);
  c.blend_epsilon = kv::get_double(m, "blend_epsilon", c.blend_epsilon);
  c.eval_chunk = kv::get_size(m, "eval_chunk", c.eval_chunk);
  return c;
}

std::string mode_name(const TrainConfig &cfg) {
  switch (cfg.mode) {
  case Mode::blend:
    return "blend";
  case Mode::concat:
    return "concat";
  case Mode::single:
    return "single:" + std::string(name_of(cfg.single_view));
  case Mode::late:
    return "late";
  }
  return "?";
}

void parse_mode(std::string_view s, TrainConfig &cfg) {
  if (s == "blend") {
    cfg.mode = Mode::blend;
  } else if (s == "concat") {
    cfg.mode = Mode::concat;
  } else if (s == "late") {
    cfg.mode = Mode::late;
  } else if (s.starts_with("single:")) {
    cfg.single_view = parse_view(s.substr(7));
    cfg.mode = Mode::single;
  } else {
    throw std::invalid_argument("unknown mode '" + std::string(s) +
                                "' (expected blend, concat, single:<view> or late)");
  }
}

double lr_at(std::size_t epoch, const TrainConfig &cfg) {
  if (epoch == 0 || epoch > cfg.epochs)
    throw std::out_of_range("lr_at: epoch " + std::to_string(epoch) + " outside [1, " +
                            std::to_string(cfg.epochs) + "]");
  if (epoch <= cfg.warmup_epochs)
    return cfg.warmup_lr;
  double lr = cfg.init_lr;
  for (double f : cfg.decay_at)
    if (static_cast<double>(epoch) > f * static_cast<double>(cfg.epochs))
      lr *= cfg.decay;
  return lr;
}

net::NetworkConfig network_for(const TrainConfig &cfg, net::NetworkConfig base) {
  switch (cfg.mode) {
  case Mode::blend:
  case Mode::concat:
    base.joint_head = true;
    break;
  case Mode::single:
    base.views = {cfg.single_view};
    base.joint_head = false;
    break;
  case Mode::late:
    throw std::invalid_argument("late fusion trains one single-view network per view");
  }
  return base;
}

} // namespace mvgb::train
