// SPDX-License-Identifier: Apache-2.0
#include "mvgb/train/inference.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "mvgb/dsp/segment.hpp"

namespace mvgb::train {

std::vector<FileProbs> infer(net::MultiViewNet &net, std::span<const Clip> clips,
                             std::size_t chunk) {
  if (chunk == 0)
    throw std::invalid_argument("infer: chunk must be positive");
  const net::NetworkConfig &cfg = net.config();
  std::vector<SegmentRef> refs;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    check_clip(clips[i], cfg);
    for (const SegmentRef &r : inference_segments(i, clips[i]))
      refs.push_back(r);
  }

  const std::size_t c = cfg.n_classes;
  std::vector<FileProbs> out(clips.size());
  for (FileProbs &f : out)
    for (Branch b : net.branches())
      f.branch[index_of(b)].assign(c, 0.0);

  for (std::size_t start = 0; start < refs.size(); start += chunk) {
    const std::size_t n = std::min(chunk, refs.size() - start);
    std::span<const SegmentRef> part(refs.data() + start, n);
    BatchTensors batch = assemble(clips, part, cfg);

    ad::Tape tape;
    tape.set_grad_enabled(false);
    nn::ForwardContext ctx{tape};
    net::ViewInputs inputs;
    for (View v : cfg.views)
      inputs[index_of(v)] = tape.constant(std::move(batch[index_of(v)]));
    net::BranchOutputs y = net.forward(ctx, inputs);

    for (Branch b : net.branches()) {
      const ad::Tensor p = ad::softmax_rows(y.logits[index_of(b)].value());
      for (std::size_t i = 0; i < n; ++i) {
        const SegmentRef &r = part[i];
        Distribution &acc = out[r.clip].branch[index_of(b)];
        for (std::size_t k = 0; k < c; ++k)
          acc[k] += p[i * c + k];
      }
    }
  }
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const double s = static_cast<double>(dsp::segment_count(clips[i].duration));
    for (Distribution &d : out[i].branch)
      for (double &v : d)
        v /= s;
  }
  return out;
}

FileProbs infer_file(net::MultiViewNet &net, const Clip &clip) {
  return infer(net, std::span<const Clip>(&clip, 1)).front();
}

std::size_t argmax(std::span<const double> p) {
  if (p.empty())
    throw std::invalid_argument("argmax of an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best])
      best = i;
  return best;
}

EnsembleDecision self_ensemble(const FileProbs &probs, const blend::BlendWeights &w) {
  EnsembleDecision d;
  std::size_t k = 0;
  for (std::size_t b = 0; b < kMaxBranches; ++b) {
    const Distribution &p = probs.branch[b];
    if (p.empty())
      continue;
    if (d.p.empty())
      d.p.assign(p.size(), 0.0);
    if (p.size() != d.p.size())
      throw std::invalid_argument("self_ensemble: branch distributions differ in size");
    for (std::size_t c = 0; c < p.size(); ++c)
      d.p[c] += w.w[b] * p[c];
    ++k;
  }
  if (k == 0)
    throw std::invalid_argument("self_ensemble: no branch distributions");
  for (double &v : d.p)
    v /= static_cast<double>(k);
  d.label = argmax(d.p);
  return d;
}

Distribution late_fusion(std::span<const Distribution> dists) {
  if (dists.empty())
    throw std::invalid_argument("late_fusion: no distributions");
  Distribution out(dists.front().size(), 0.0);
  for (const Distribution &d : dists) {
    if (d.size() != out.size())
      throw std::invalid_argument("late_fusion: distributions differ in size");
    for (std::size_t c = 0; c < d.size(); ++c)
      out[c] += d[c];
  }
  for (double &v : out)
    v /= static_cast<double>(dists.size());
  return out;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.empty())
    throw std::invalid_argument("accuracy: empty set");
  if (predicted.size() != labels.size())
    throw std::invalid_argument("accuracy: prediction and label counts differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

void fill_branches(EvalReport &r, std::span<const FileProbs> probs,
                   std::span<const std::size_t> labels) {
  for (std::size_t b = 0; b < kMaxBranches; ++b) {
    r.present[b] = probs.front().has(static_cast<Branch>(b));
    if (!r.present[b])
      continue;
    ad::Tensor p(ad::Shape{probs.size(), r.n_classes});
    ad::Tensor y(ad::Shape{probs.size(), r.n_classes});
    std::vector<std::size_t> predicted(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const Distribution &d = probs[i].branch[b];
      if (d.size() != r.n_classes)
        throw std::invalid_argument("evaluate: branch distribution has the wrong class count");
      std::copy(d.begin(), d.end(), p.data() + i * r.n_classes);
      y[i * r.n_classes + labels[i]] = 1.0;
      predicted[i] = argmax(d);
    }
    r.loss[b] = blend::branch_loss(p, y);
    r.accuracy[b] = accuracy(predicted, labels);
  }
}

EvalReport start_report(std::span<const FileProbs> probs, std::span<const std::size_t> labels,
                        std::size_t n_classes) {
  if (probs.empty())
    throw std::invalid_argument("evaluate: empty test set");
  if (probs.size() != labels.size())
    throw std::invalid_argument("evaluate: file and label counts differ");
  for (std::size_t l : labels)
    if (l >= n_classes)
      throw std::invalid_argument("evaluate: label outside the class range");
  EvalReport r;
  r.n_files = probs.size();
  r.n_classes = n_classes;
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  fill_branches(r, probs, labels);
  return r;
}

void finish_ensemble(EvalReport &r, std::span<const std::size_t> predicted,
                     std::span<const std::size_t> labels) {
  r.ensemble_accuracy = accuracy(predicted, labels);
  for (std::size_t i = 0; i < labels.size(); ++i)
    ++r.confusion[labels[i]][predicted[i]];
}

} // namespace

EvalReport evaluate_probs(std::span<const FileProbs> probs, std::span<const std::size_t> labels,
                          const blend::BlendWeights &w, std::size_t n_classes) {
  EvalReport r = start_report(probs, labels, n_classes);
  std::vector<std::size_t> predicted(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    predicted[i] = self_ensemble(probs[i], w).label;
  finish_ensemble(r, predicted, labels);
  return r;
}

EvalReport evaluate_decisions(std::span<const FileProbs> probs, std::span<const Distribution> combined,
                              std::span<const std::size_t> labels, std::size_t n_classes) {
  EvalReport r = start_report(probs, labels, n_classes);
  if (combined.size() != probs.size())
    throw std::invalid_argument("evaluate: decision and file counts differ");
  std::vector<std::size_t> predicted(combined.size());
  for (std::size_t i = 0; i < combined.size(); ++i)
    predicted[i] = argmax(combined[i]);
  finish_ensemble(r, predicted, labels);
  return r;
}

EvalReport evaluate(net::MultiViewNet &net, std::span<const Clip> clips,
                    const blend::BlendWeights &w, std::size_t chunk) {
  if (clips.empty())
    throw std::invalid_argument("evaluate: empty test set");
  std::vector<FileProbs> probs = infer(net, clips, chunk);
  std::vector<std::size_t> labels(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i)
    labels[i] = clips[i].label;
  return evaluate_probs(probs, labels, w, net.config().n_classes);
}

void write_report_csv(std::ostream &out, const EvalReport &r) {
  char buf[128];
  out << "branch,loss,accuracy\n";
  for (std::size_t b = 0; b < kMaxBranches; ++b) {
    if (!r.present[b])
      continue;
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n",
                  std::string(name_of(static_cast<Branch>(b))).c_str(), r.loss[b], r.accuracy[b]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "ensemble,,%.17g\n", r.ensemble_accuracy);
  out << buf;
}

double mean_accuracy(std::span<const double> per_fold) {
  if (per_fold.empty())
    throw std::invalid_argument("mean_accuracy: no folds");
  return std::accumulate(per_fold.begin(), per_fold.end(), 0.0) /
         static_cast<double>(per_fold.size());
}

} // namespace mvgb::train
