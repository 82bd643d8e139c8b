// SPDX-License-Identifier: Apache-2.0
/**
 * @file   blend_oracle.hpp
 * @brief  Straight-line adaptive-weight oracle and scripted loss histories
 *         (test only).
 */
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mvgb/ad/ops.hpp"

namespace mvgb::testing {

constexpr double kEps = 1e-6;

inline ad::Tensor one_hot_rows(std::vector<std::size_t> labels, std::size_t classes) {
  ad::Tensor t({labels.size(), classes}, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    t[i * classes + labels[i]] = 1.0;
  return t;
}

// Straight-line evaluation of the adaptive weight over whole histories.
struct OracleStep {
  double w, g, o, best_train, best_true;
};

inline std::vector<OracleStep> oracle(const std::vector<double> &tr, const std::vector<double> &va,
                               std::size_t window) {
  std::vector<OracleStep> out;
  double best_tr = 0, best_va = 0;
  for (std::size_t n = 1; n <= tr.size(); ++n) {
    const std::size_t k = n < window ? n : window;
    double s_tr = 0, s_va = 0;
    for (std::size_t i = n - k; i < n; ++i) {
      s_tr += tr[i];
      s_va += va[i];
    }
    s_tr /= static_cast<double>(k);
    s_va /= static_cast<double>(k);
    if (n == 1) {
      best_tr = s_tr;
      best_va = s_va;
    }
    double g = best_va - s_va;
    double o = (best_tr - s_tr) - g;
    if (g < kEps)
      g = kEps;
    if (o < kEps)
      o = kEps;
    if (s_tr < best_tr)
      best_tr = s_tr;
    if (s_va < best_va)
      best_va = s_va;
    out.push_back({g / (o * o), g, o, best_tr, best_va});
  }
  return out;
}

struct Scenario {
  std::string name;
  std::vector<double> train, val;
  std::size_t window;
};

inline std::vector<Scenario> scripted_scenarios() {
  std::vector<Scenario> out;
  ad::Rng rng(2024);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t n = 40;
  for (int v = 0; v < 5; ++v) {
    Scenario s{"monotone" + std::to_string(v), {}, {}, std::size_t(1 + v)};
    for (std::size_t i = 0; i < n; ++i) {
      s.train.push_back(2.0 * std::exp(-0.1 * (v + 1) * i) + 0.1);
      s.val.push_back(2.1 * std::exp(-0.08 * (v + 1) * i) + 0.3);
    }
    out.push_back(s);
  }
  for (int v = 0; v < 5; ++v) {
    Scenario s{"overfit" + std::to_string(v), {}, {}, std::size_t(5)};
    const double onset = 8.0 + 4 * v;
    for (std::size_t i = 0; i < n; ++i) {
      s.train.push_back(1.5 * std::exp(-0.15 * i));
      const double x = static_cast<double>(i);
      s.val.push_back(1.6 * std::exp(-0.15 * std::min(x, onset)) + 0.02 * std::max(0.0, x - onset));
    }
    out.push_back(s);
  }
  for (int v = 0; v < 5; ++v) {
    Scenario s{"plateau" + std::to_string(v), {}, {}, std::size_t(3)};
    for (std::size_t i = 0; i < n; ++i) {
      s.train.push_back(i < 10u * v ? 1.0 - 0.05 * i : 1.0 - 0.05 * 10 * v);
      s.val.push_back(i < 10u * v ? 1.1 - 0.04 * i : 1.1 - 0.04 * 10 * v);
    }
    out.push_back(s);
  }
  for (int v = 0; v < 5; ++v) {
    Scenario s{"noisy" + std::to_string(v), {}, {}, std::size_t(2 + v)};
    for (std::size_t i = 0; i < n; ++i) {
      s.train.push_back(std::exp(-0.05 * i) + 0.05 * (v + 1) * noise(rng));
      s.val.push_back(1.2 * std::exp(-0.03 * i) + 0.05 * (v + 1) * noise(rng));
    }
    out.push_back(s);
  }
  return out;
}

} // namespace mvgb::testing
