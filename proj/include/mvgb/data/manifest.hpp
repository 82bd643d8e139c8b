// SPDX-License-Identifier: Apache-2.0
/**
 * @file   manifest.hpp
 * @brief  Dataset manifest CSV and validation-split rules.
 *
 * Manifest format: optional "# folds=K" line, then a header with at least
 * path,label,fold,source. Optional columns: class_name, and path_<view> to
 * give a view its own audio file. Folds are numbered 1..K; paths are
 * relative to the manifest's directory unless absolute.
 */
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvgb/views.hpp"

namespace mvgb::data {

inline constexpr int kManifestVersion = 1;

class ManifestError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct Record {
  std::string path;
  std::size_t label = 0;
  std::size_t fold = 1;
  std::string source;
  std::array<std::string, 4> view_paths; // empty: use `path`

  const std::string &path_for(View v) const {
    return view_paths[index_of(v)].empty() ? path : view_paths[index_of(v)];
  }
};

struct Manifest {
  std::filesystem::path root;
  std::vector<Record> records;
  std::vector<std::string> class_names;
  std::size_t n_folds = 0;

  std::size_t n_classes() const { return class_names.size(); }
  std::filesystem::path resolve(const std::string &relative) const;
};

/// `folds` overrides the "# folds=" line; without either, the largest fold
/// seen is the fold count.
Manifest parse_manifest(std::string_view text, std::filesystem::path root = {},
                        std::optional<std::size_t> folds = std::nullopt);
Manifest load_manifest(const std::filesystem::path &path,
                       std::optional<std::size_t> folds = std::nullopt);
void write_manifest(std::ostream &out, const Manifest &m);

enum class SplitRule { sources_per_class, fraction_of_sources, fraction_of_samples };

struct SplitSpec {
  SplitRule rule = SplitRule::fraction_of_samples;
  double amount = 0.1; // source count or fraction
  std::uint64_t seed = 0;

  /// "sources_per_class:2", "fraction_of_sources:0.1", "fraction_of_samples:0.1".
  static SplitSpec parse(std::string_view rule, std::uint64_t seed);
  std::string rule_text() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Test is the held-out fold (0: none). Validation is drawn from the rest per
/// the rule; source-based rules move every remaining record of a drawn
/// source to validation. Throws ManifestError when the rule cannot be met.
Split split(const Manifest &m, std::size_t held_out_fold, const SplitSpec &spec);

} // namespace mvgb::data
