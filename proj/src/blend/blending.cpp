// SPDX-License-Identifier: Apache-2.0
#include "mvgb/blend/blending.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "mvgb/kv.hpp"

namespace mvgb::blend {

double branch_loss(const ad::Tensor &probs, const ad::Tensor &labels) {
  if (probs.rank() != 2 || probs.shape() != labels.shape())
    throw ad::ShapeError("branch_loss: probabilities " + ad::to_string(probs.shape()) +
                         " vs labels " + ad::to_string(labels.shape()));
  const std::size_t m = probs.dim(0);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!std::isfinite(p) || p < 0.0)
      throw std::domain_error("branch_loss: invalid probability " + std::to_string(p));
    if (labels[i] != 0.0)
      total -= labels[i] * std::log(p);
  }
  return total / static_cast<double>(m);
}

double smooth(std::span<const double> history, std::size_t window) {
  if (history.empty())
    throw std::invalid_argument("smooth: empty history");
  if (window == 0)
    throw std::invalid_argument("smooth: window must be at least 1");
  const std::size_t k = std::min(window, history.size());
  double s = 0.0;
  for (double v : history.last(k))
    s += v;
  return s / static_cast<double>(k);
}

// ---------------------------------------------------------------- ledger

BranchLedger::BranchLedger(std::size_t window) : window_(window) {
  if (window == 0)
    throw std::invalid_argument("smoothing window must be at least 1");
}

void BranchLedger::record(double train_loss, double true_loss) {
  if (!std::isfinite(train_loss) || !std::isfinite(true_loss))
    throw std::domain_error("ledger: non-finite loss");
  train_.push_back(train_loss);
  true_.push_back(true_loss);
}

WeightUpdate BranchLedger::adaptive_weight(double eps) {
  if (train_.empty())
    throw std::logic_error("adaptive_weight: no evaluations recorded");
  WeightUpdate u;
  u.smoothed_train = smooth(train_, window_);
  u.smoothed_true = smooth(true_, window_);
  if (!has_bests_) {
    best_train_ = u.smoothed_train;
    best_true_ = u.smoothed_true;
    has_bests_ = true;
  }
  GOMeasures &m = u.measures;
  m.g_raw = best_true_ - u.smoothed_true;
  m.o_raw = (best_train_ - u.smoothed_train) - m.g_raw;
  m.g = std::max(m.g_raw, eps);
  m.o = std::max(m.o_raw, eps);
  u.weight = m.g / (m.o * m.o);
  u.degenerate = m.g_raw <= eps && m.o_raw <= eps;
  best_train_ = std::min(best_train_, u.smoothed_train);
  best_true_ = std::min(best_true_, u.smoothed_true);
  return u;
}

// ---------------------------------------------------------------- weights

BlendWeights normalize(const std::array<double, kMaxBranches> &raw, std::span<const Branch> present) {
  if (present.empty())
    throw std::invalid_argument("normalize: no branches");
  BlendWeights out;
  for (Branch b : present) {
    const double v = raw[index_of(b)];
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("normalize: weight of " + std::string(name_of(b)) +
                                  " is negative or non-finite");
    out.z += v;
  }
  if (out.z == 0.0)
    return uniform(present);
  for (Branch b : present)
    out.w[index_of(b)] = raw[index_of(b)] / out.z;
  return out;
}

BlendWeights uniform(std::span<const Branch> present) {
  if (present.empty())
    throw std::invalid_argument("uniform: no branches");
  BlendWeights out;
  out.z = static_cast<double>(present.size());
  for (Branch b : present)
    out.w[index_of(b)] = 1.0 / out.z;
  return out;
}

BlendWeights one_hot(Branch b) {
  BlendWeights out;
  out.w[index_of(b)] = 1.0;
  out.z = 1.0;
  return out;
}

ad::Var blended_loss(std::span<const std::pair<Branch, ad::Var>> losses, const BlendWeights &w) {
  if (losses.empty())
    throw std::invalid_argument("blended_loss: no branch losses");
  ad::Var total;
  for (const auto &[b, loss] : losses) {
    ad::Var term = ad::scale(loss, w[b]);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

// ---------------------------------------------------------------- Blender

Blender::Blender(std::vector<Branch> branches, std::size_t window, double eps)
    : branches_(std::move(branches)), eps_(eps) {
  if (branches_.empty())
    throw std::invalid_argument("blender needs at least one branch");
  if (!(eps > 0.0))
    throw std::invalid_argument("clamp epsilon must be positive");
  for (Branch b : branches_) {
    if (ledgers_[index_of(b)])
      throw std::invalid_argument("branch " + std::string(name_of(b)) + " listed twice");
    ledgers_[index_of(b)].emplace(window);
  }
  weights_ = uniform(branches_);
}

const BranchLedger &Blender::ledger(Branch b) const {
  if (!ledgers_[index_of(b)])
    throw std::out_of_range("no ledger for branch " + std::string(name_of(b)));
  return *ledgers_[index_of(b)];
}

std::size_t Blender::evaluations() const { return ledger(branches_.front()).size(); }

const BlendWeights &Blender::update(const std::array<double, kMaxBranches> &train_losses,
                                    const std::array<double, kMaxBranches> &true_losses) {
  std::array<double, kMaxBranches> raw{};
  last_.clear();
  for (Branch b : branches_) {
    BranchLedger &l = *ledgers_[index_of(b)];
    l.record(train_losses[index_of(b)], true_losses[index_of(b)]);
    BranchUpdate u;
    u.branch = b;
    u.update = l.adaptive_weight(eps_);
    u.raw_weight = u.update.degenerate ? eps_ : u.update.weight;
    raw[index_of(b)] = u.raw_weight;
    last_.push_back(u);
  }
  weights_ = normalize(raw, branches_);
  for (BranchUpdate &u : last_)
    u.normalized = weights_[u.branch];
  return weights_;
}

namespace {

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double unhex(const std::string &s) {
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0')
    throw std::invalid_argument("blender state: bad number '" + s + "'");
  return v;
}

std::string join(std::span<const double> xs) {
  std::string out;
  for (double x : xs)
    out += (out.empty() ? "" : ",") + hex(x);
  return out;
}

std::vector<double> split(const std::string &s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start < s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string::npos)
      comma = s.size();
    out.push_back(unhex(s.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

} // namespace

std::string Blender::serialize() const {
  kv::Map m;
  std::string names;
  for (Branch b : branches_)
    names += (names.empty() ? "" : ",") + std::string(name_of(b));
  m["branches"] = names;
  m["epsilon"] = hex(eps_);
  for (std::size_t k = 0; k < kMaxBranches; ++k)
    m["weight." + std::string(name_of(static_cast<Branch>(k)))] = hex(weights_.w[k]);
  m["weight.z"] = hex(weights_.z);
  for (Branch b : branches_) {
    const BranchLedger &l = *ledgers_[index_of(b)];
    const std::string p = "ledger." + std::string(name_of(b)) + ".";
    m[p + "window"] = std::to_string(l.window_);
    m[p + "train"] = join(l.train_);
    m[p + "true"] = join(l.true_);
    m[p + "has_bests"] = l.has_bests_ ? "true" : "false";
    m[p + "best_train"] = hex(l.best_train_);
    m[p + "best_true"] = hex(l.best_true_);
  }
  return kv::format(m);
}

Blender Blender::deserialize(std::string_view text) {
  const kv::Map m = kv::parse(text);
  auto need = [&](const std::string &key) -> const std::string & {
    auto it = m.find(key);
    if (it == m.end())
      throw std::invalid_argument("blender state: missing " + key);
    return it->second;
  };
  std::vector<Branch> branches;
  {
    const std::string &s = need("branches");
    std::size_t start = 0;
    while (start <= s.size()) {
      auto comma = s.find(',', start);
      if (comma == std::string::npos)
        comma = s.size();
      branches.push_back(parse_branch(s.substr(start, comma - start)));
      start = comma + 1;
    }
  }
  Blender out(branches, kDefaultWindow, unhex(need("epsilon")));
  for (std::size_t k = 0; k < kMaxBranches; ++k)
    out.weights_.w[k] = unhex(need("weight." + std::string(name_of(static_cast<Branch>(k)))));
  out.weights_.z = unhex(need("weight.z"));
  for (Branch b : branches) {
    const std::string p = "ledger." + std::string(name_of(b)) + ".";
    BranchLedger l(kv::get_size(m, p + "window", kDefaultWindow));
    l.train_ = split(need(p + "train"));
    l.true_ = split(need(p + "true"));
    if (l.train_.size() != l.true_.size())
      throw std::invalid_argument("blender state: history lengths differ for " +
                                  std::string(name_of(b)));
    l.has_bests_ = kv::get_bool(m, p + "has_bests", false);
    l.best_train_ = unhex(need(p + "best_train"));
    l.best_true_ = unhex(need(p + "best_true"));
    out.ledgers_[index_of(b)] = std::move(l);
  }
  return out;
}

void write_weight_rows(std::ostream &out, std::uint64_t step, std::uint64_t epoch,
                       const std::vector<BranchUpdate> &updates) {
  char buf[512];
  for (const BranchUpdate &u : updates) {
    std::snprintf(buf, sizeof buf, "%llu,%llu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(step), static_cast<unsigned long long>(epoch),
                  std::string(name_of(u.branch)).c_str(), u.raw_weight, u.normalized,
                  u.update.measures.g_raw, u.update.measures.o_raw, u.update.smoothed_train,
                  u.update.smoothed_true);
    out << buf;
  }
}

} // namespace mvgb::blend
