// SPDX-License-Identifier: Apache-2.0
#include "mvgb/train/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "mvgb/train/inference.hpp"

namespace mvgb::train {

namespace {

ad::Rng stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return ad::Rng(seq);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct SetProbs {
  std::vector<FileProbs> probs;
  std::vector<std::size_t> labels;

  EvalReport report(const blend::BlendWeights &w, std::size_t n_classes) const {
    return evaluate_probs(probs, labels, w, n_classes);
  }
};

SetProbs measure(net::MultiViewNet &net, std::span<const Clip> clips, std::size_t chunk,
                 std::size_t epoch) {
  SetProbs s{infer(net, clips, chunk), {}};
  for (const Clip &c : clips)
    s.labels.push_back(c.label);
  for (const FileProbs &f : s.probs)
    for (std::size_t b = 0; b < kMaxBranches; ++b)
      for (double p : f.branch[b])
        if (!std::isfinite(p))
          throw DivergenceError("diverged at epoch " + std::to_string(epoch) + ": non-finite " +
                                std::string(name_of(static_cast<Branch>(b))) +
                                " output during evaluation");
  return s;
}

} // namespace

Branch selection_branch(const net::MultiViewNet &net) {
  const auto &b = net.branches();
  if (b.empty())
    throw std::invalid_argument("network has no branches");
  return std::find(b.begin(), b.end(), Branch::joint) != b.end() ? Branch::joint : b.front();
}

blend::BlendWeights initial_weights(const TrainConfig &cfg, const net::MultiViewNet &net) {
  switch (cfg.mode) {
  case Mode::blend:
    return blend::uniform(net.branches());
  case Mode::concat:
    if (!net.joint_head())
      throw std::invalid_argument("concat mode needs the joint head");
    return blend::one_hot(Branch::joint);
  case Mode::single:
    if (!net.has_view(cfg.single_view))
      throw std::invalid_argument("single-view mode: network lacks view " +
                                  std::string(name_of(cfg.single_view)));
    return blend::one_hot(branch_of(cfg.single_view));
  case Mode::late:
    break;
  }
  throw std::invalid_argument("late fusion trains one single-view network per view");
}

std::vector<std::size_t> training_subset(std::size_t n_train, std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> idx(n_train);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  ad::Rng rng = stream(seed, 0x5b5e7u);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(size, n_train));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string metrics_header(std::span<const Branch> branches) {
  std::string h = "step,epoch,lr,blended_loss";
  for (const char *what : {"train_loss_", "val_loss_", "val_acc_"})
    for (Branch b : branches)
      h += "," + std::string(what) + std::string(name_of(b));
  return h + ",ensemble_val_acc";
}

std::string metrics_row(const EvalPoint &p, std::span<const Branch> branches) {
  std::string r = std::to_string(p.step) + "," + std::to_string(p.epoch) + "," + fmt(p.lr) + "," +
                  fmt(p.blended_loss);
  for (const auto *col : {&p.train_loss, &p.val_loss, &p.val_accuracy})
    for (Branch b : branches)
      r += "," + fmt((*col)[index_of(b)]);
  return r + "," + fmt(p.ensemble_val_accuracy);
}

std::string run_config_text(const TrainConfig &t, const net::NetworkConfig &n) {
  kv::Map m = t.to_key_values();
  for (auto &[k, v] : n.to_key_values())
    m["net." + k] = v;
  return kv::format(m);
}

net::NetworkConfig network_from_config(const kv::Map &m) {
  kv::Map inner;
  for (const auto &[k, v] : m)
    if (k.starts_with("net."))
      inner[k.substr(4)] = v;
  return net::NetworkConfig::from_key_values(inner);
}

TrainResult train(net::MultiViewNet &net, std::span<const Clip> train_set,
                  std::span<const Clip> validation, const TrainConfig &cfg, const TrainLogs &logs) {
  cfg.validate();
  if (train_set.empty())
    throw std::invalid_argument("train: empty training set");
  if (validation.empty())
    throw std::invalid_argument("train: empty validation set");
  const net::NetworkConfig &ncfg = net.config();
  for (const Clip &c : train_set)
    check_clip(c, ncfg);

  const std::vector<Branch> branches = net.branches();
  blend::BlendWeights weights = initial_weights(cfg, net);
  blend::Blender blender(branches, cfg.blend_window, cfg.blend_epsilon);

  std::vector<Clip> subset;
  for (std::size_t i : training_subset(train_set.size(), validation.size(), cfg.seed))
    subset.push_back(train_set[i]);

  TrainResult result;
  result.selection_branch = selection_branch(net);
  bool have_best = false;

  std::vector<ad::Parameter *> params = net.parameters();
  Adam adam;
  ad::Rng data_rng = stream(cfg.seed, 0xda7au);
  ad::Rng dropout_rng = stream(cfg.seed, 0xd20fu);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (logs.metrics)
    *logs.metrics << metrics_header(branches) << '\n';
  if (logs.weights && cfg.mode == Mode::blend)
    *logs.weights << blend::kWeightCsvHeader << '\n';

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::shuffle(order.begin(), order.end(), data_rng);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::vector<SegmentRef> refs(n);
      for (std::size_t i = 0; i < n; ++i)
        refs[i] = SegmentRef{order[start + i], unit(data_rng)};
      BatchTensors batch = assemble(train_set, refs, ncfg);
      const ad::Tensor labels = one_hot_labels(train_set, refs, ncfg.n_classes);

      ad::Tape tape;
      nn::ForwardContext ctx{tape, true, &dropout_rng};
      net::ViewInputs inputs;
      for (View v : ncfg.views)
        inputs[index_of(v)] = tape.constant(std::move(batch[index_of(v)]));
      net::BranchOutputs out = net.forward(ctx, inputs);

      std::vector<std::pair<Branch, ad::Var>> losses;
      for (Branch b : branches)
        if (weights[b] > 0.0)
          losses.emplace_back(b, ad::softmax_cross_entropy(out.logits[index_of(b)], labels));
      ad::Var loss = blend::blended_loss(losses, weights);
      const double value = loss.value().item();
      ++step;
      if (!std::isfinite(value)) {
        std::string msg = "diverged at step " + std::to_string(step) + " (epoch " +
                          std::to_string(epoch) + "): blended loss " + fmt(value);
        for (const auto &[b, l] : losses)
          msg += ", " + std::string(name_of(b)) + "=" + fmt(l.value().item());
        if (logs.diagnostics)
          *logs.diagnostics << msg << '\n';
        throw DivergenceError(msg);
      }

      ad::Gradients grads = tape.backward(loss);
      for (ad::Parameter *p : params)
        p->zero_grad();
      tape.accumulate_parameter_grads(grads);
      try {
        adam.step(params, lr);
      } catch (const NonFiniteGradient &e) {
        if (logs.diagnostics)
          *logs.diagnostics << "step " << step << " (epoch " << epoch << "): " << e.what() << '\n';
        throw;
      }
      loss_sum += value;
      ++loss_count;
    }

    if (epoch % cfg.eval_interval != 0 && epoch != cfg.epochs)
      continue;

    EvalPoint pt;
    pt.step = step;
    pt.epoch = epoch;
    pt.lr = lr;
    pt.blended_loss = loss_sum / static_cast<double>(loss_count);
    loss_sum = 0.0;
    loss_count = 0;

    const EvalReport tr = measure(net, subset, cfg.eval_chunk, epoch).report(weights, ncfg.n_classes);
    const SetProbs val = measure(net, validation, cfg.eval_chunk, epoch);
    EvalReport va = val.report(weights, ncfg.n_classes);
    if (cfg.mode == Mode::blend) {
      weights = blender.update(tr.loss, va.loss);
      if (logs.weights)
        blend::write_weight_rows(*logs.weights, step, epoch, blender.last_updates());
      // The ensemble decision follows the refreshed weights.
      va = val.report(weights, ncfg.n_classes);
    }
    pt.train_loss = tr.loss;
    pt.val_loss = va.loss;
    pt.val_accuracy = va.accuracy;
    pt.ensemble_val_accuracy = va.ensemble_accuracy;
    result.history.push_back(pt);
    if (logs.metrics)
      *logs.metrics << metrics_row(pt, branches) << '\n' << std::flush;

    const double acc = va.accuracy[index_of(result.selection_branch)];
    if (!have_best || acc > result.best_validation_accuracy) {
      have_best = true;
      result.best_validation_accuracy = acc;
      result.best_validation_loss = va.loss;
      result.best_epoch = epoch;
      result.ensemble_weights = weights;
      net::Checkpoint &c = result.best;
      c.config = run_config_text(cfg, ncfg);
      c.tensors = net::snapshot_parameters(net);
      c.blend_weights = weights.w;
      c.branch_mask = 0;
      for (Branch b : branches)
        c.branch_mask |= static_cast<std::uint8_t>(1u << index_of(b));
      c.best_validation_accuracy = acc;
      c.step = step;
      c.epoch = epoch;
      c.ledger = blender.serialize();
    }
  }

  result.steps = step;
  net::restore_parameters(net, result.best.tensors);
  return result;
}

} // namespace mvgb::train
