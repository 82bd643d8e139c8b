// SPDX-License-Identifier: Apache-2.0
#include "mvgb/data/run_config.hpp"

#include <fstream>
#include <sstream>

#include "mvgb/train/engine.hpp"

namespace mvgb::data {

kv::Map RunConfig::to_key_values() const {
  kv::Map m = kv::parse(train::run_config_text(train, net));
  m["split.rule"] = split.rule_text();
  m["split.seed"] = std::to_string(split.seed);
  return m;
}

RunConfig RunConfig::from_key_values(const kv::Map &m) {
  static const char *const kTrainKeys[] = {
      "epochs", "batch_size",    "init_lr", "warmup_lr",    "warmup_epochs", "decay",     "decay_at",
      "eval_interval", "seed", "mode",    "blend_window", "blend_epsilon", "eval_chunk"};
  static const char *const kNetKeys[] = {
      "n_classes",     "views",          "scale",       "joint_head",        "dropout",
      "filter_divisor", "gru_hidden",    "attention_dim", "fc_width",        "joint_fc_width",
      "time_frames",   "bands",          "raw_length",  "full_time_frames", "full_cqt_frames",
      "full_raw_length"};
  for (const auto &[k, v] : m) {
    bool known = k == "split.rule" || k == "split.seed";
    for (const char *t : kTrainKeys)
      known = known || k == t;
    for (const char *n : kNetKeys)
      known = known || k == std::string("net.") + n;
    if (!known)
      throw kv::KeyValueError("config: unknown key '" + k + "'");
  }
  RunConfig c;
  c.train = train::TrainConfig::from_key_values(m);
  c.net = train::network_from_config(m);
  c.split = SplitSpec::parse(kv::get(m, "split.rule", c.split.rule_text()),
                             kv::get_size(m, "split.seed", 0));
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_key_values(kv::parse(text.str()));
}

void RunConfig::validate() const {
  train.validate();
  net.validate();
}

} // namespace mvgb::data
