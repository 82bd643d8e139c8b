// SPDX-License-Identifier: Apache-2.0
#include "mvgb/data/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "mvgb/kv.hpp"

namespace mvgb::data {

namespace {

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  while (true) {
    auto comma = line.find(',');
    out.emplace_back(kv::trim(line.substr(0, comma)));
    if (comma == std::string_view::npos)
      return out;
    line.remove_prefix(comma + 1);
  }
}

std::size_t to_index(const std::string &s, const std::string &what, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ManifestError("manifest line " + std::to_string(line) + ": " + what + " '" + s +
                        "' is not a nonnegative integer");
  return v;
}

} // namespace

std::filesystem::path Manifest::resolve(const std::string &relative) const {
  std::filesystem::path p(relative);
  return p.is_absolute() ? p : root / p;
}

Manifest parse_manifest(std::string_view text, std::filesystem::path root,
                        std::optional<std::size_t> folds) {
  Manifest m;
  m.root = std::move(root);
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared_folds;
  std::vector<std::string> header;
  std::map<std::string, std::size_t> col;
  std::map<std::size_t, std::string> names;
  std::set<std::string> paths;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = kv::trim(raw);
    if (line.empty())
      continue;
    if (line.front() == '#') {
      line.remove_prefix(1);
      line = kv::trim(line);
      if (line.starts_with("folds=")) {
        std::string v(kv::trim(line.substr(6)));
        declared_folds = to_index(v, "fold count", line_no);
      }
      continue;
    }
    if (header.empty()) {
      header = split_csv(line);
      for (std::size_t i = 0; i < header.size(); ++i)
        if (!col.emplace(header[i], i).second)
          throw ManifestError("manifest: duplicate column '" + header[i] + "'");
      for (const char *required : {"path", "label", "fold", "source"})
        if (!col.contains(required))
          throw ManifestError(std::string("manifest: missing column '") + required + "'");
      continue;
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != header.size())
      throw ManifestError("manifest line " + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " fields, got " +
                          std::to_string(f.size()));
    Record r;
    r.path = f[col["path"]];
    r.label = to_index(f[col["label"]], "label", line_no);
    r.fold = to_index(f[col["fold"]], "fold", line_no);
    r.source = f[col["source"]];
    if (r.path.empty())
      throw ManifestError("manifest line " + std::to_string(line_no) + ": empty path");
    if (r.source.empty())
      throw ManifestError("manifest line " + std::to_string(line_no) + ": empty source");
    if (r.fold == 0)
      throw ManifestError("manifest line " + std::to_string(line_no) + ": folds start at 1");
    for (View v : kAllViews)
      if (auto it = col.find("path_" + std::string(name_of(v))); it != col.end())
        r.view_paths[index_of(v)] = f[it->second];
    if (auto it = col.find("class_name"); it != col.end()) {
      auto [pos, fresh] = names.emplace(r.label, f[it->second]);
      if (!fresh && pos->second != f[it->second])
        throw ManifestError("manifest line " + std::to_string(line_no) + ": label " +
                            std::to_string(r.label) + " has two class names");
    }
    if (!paths.insert(r.path).second)
      throw ManifestError("manifest line " + std::to_string(line_no) + ": duplicate path '" +
                          r.path + "'");
    m.records.push_back(std::move(r));
  }
  if (header.empty())
    throw ManifestError("manifest: no header");
  if (m.records.empty())
    throw ManifestError("manifest: no records");

  std::size_t max_label = 0, max_fold = 0;
  for (const Record &r : m.records) {
    max_label = std::max(max_label, r.label);
    max_fold = std::max(max_fold, r.fold);
  }
  std::vector<bool> seen(max_label + 1, false);
  for (const Record &r : m.records)
    seen[r.label] = true;
  for (std::size_t k = 0; k <= max_label; ++k) {
    if (!seen[k])
      throw ManifestError("manifest: class ids are not dense, label " + std::to_string(k) +
                          " has no records");
    auto it = names.find(k);
    m.class_names.push_back(it != names.end() ? it->second : "class" + std::to_string(k));
  }

  m.n_folds = folds ? *folds : declared_folds ? *declared_folds : max_fold;
  for (const Record &r : m.records)
    if (r.fold > m.n_folds)
      throw ManifestError("manifest: '" + r.path + "' has fold " + std::to_string(r.fold) +
                          " in a " + std::to_string(m.n_folds) + "-fold manifest");
  return m;
}

Manifest load_manifest(const std::filesystem::path &path, std::optional<std::size_t> folds) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ManifestError("cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path(), folds);
}

void write_manifest(std::ostream &out, const Manifest &m) {
  std::array<bool, 4> has_view{};
  for (const Record &r : m.records)
    for (View v : kAllViews)
      has_view[index_of(v)] = has_view[index_of(v)] || !r.view_paths[index_of(v)].empty();
  out << "# folds=" << m.n_folds << '\n' << "path,label,fold,source,class_name";
  for (View v : kAllViews)
    if (has_view[index_of(v)])
      out << ",path_" << name_of(v);
  out << '\n';
  for (const Record &r : m.records) {
    out << r.path << ',' << r.label << ',' << r.fold << ',' << r.source << ','
        << m.class_names.at(r.label);
    for (View v : kAllViews)
      if (has_view[index_of(v)])
        out << ',' << r.view_paths[index_of(v)];
    out << '\n';
  }
}

// ---------------------------------------------------------------- splits

SplitSpec SplitSpec::parse(std::string_view rule, std::uint64_t seed) {
  const auto colon = rule.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("split rule '" + std::string(rule) + "' needs the form name:amount");
  const std::string name(rule.substr(0, colon));
  kv::Map tmp{{"a", std::string(rule.substr(colon + 1))}};
  SplitSpec s;
  s.seed = seed;
  s.amount = kv::get_double(tmp, "a", 0.0);
  if (name == "sources_per_class") {
    s.rule = SplitRule::sources_per_class;
    if (s.amount < 1 || s.amount != std::floor(s.amount))
      throw std::invalid_argument("sources_per_class needs a positive integer");
  } else if (name == "fraction_of_sources" || name == "fraction_of_samples") {
    s.rule = name == "fraction_of_sources" ? SplitRule::fraction_of_sources
                                           : SplitRule::fraction_of_samples;
    if (!(s.amount > 0.0 && s.amount < 1.0))
      throw std::invalid_argument(name + " needs a fraction in (0, 1)");
  } else {
    throw std::invalid_argument("unknown split rule '" + name + "'");
  }
  return s;
}

std::string SplitSpec::rule_text() const {
  switch (rule) {
  case SplitRule::sources_per_class:
    return "sources_per_class:" + std::to_string(static_cast<std::size_t>(amount));
  case SplitRule::fraction_of_sources:
    return "fraction_of_sources:" + kv::to_text(amount);
  case SplitRule::fraction_of_samples:
    return "fraction_of_samples:" + kv::to_text(amount);
  }
  return "?";
}

Split split(const Manifest &m, std::size_t held_out_fold, const SplitSpec &spec) {
  if (held_out_fold > m.n_folds)
    throw ManifestError("held-out fold " + std::to_string(held_out_fold) + " outside 1.." +
                        std::to_string(m.n_folds));
  Split s;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < m.records.size(); ++i)
    (m.records[i].fold == held_out_fold ? s.test : pool).push_back(i);
  if (pool.empty())
    throw ManifestError("split: nothing left outside the held-out fold");

  std::mt19937_64 rng(spec.seed);
  std::vector<bool> to_val(m.records.size(), false);

  if (spec.rule == SplitRule::fraction_of_samples) {
    std::vector<std::size_t> order = pool;
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = static_cast<std::size_t>(std::llround(spec.amount * static_cast<double>(pool.size())));
    if (n == 0 || n >= pool.size())
      throw ManifestError("split: fraction_of_samples leaves an empty train or validation set");
    for (std::size_t i = 0; i < n; ++i)
      to_val[order[i]] = true;
  } else {
    // sources per class, sorted for a seed-only dependence
    std::map<std::size_t, std::set<std::string>> sources;
    for (std::size_t i : pool)
      sources[m.records[i].label].insert(m.records[i].source);
    std::set<std::string> drawn;
    for (auto &[label, set] : sources) {
      std::vector<std::string> list(set.begin(), set.end());
      std::shuffle(list.begin(), list.end(), rng);
      std::size_t n;
      if (spec.rule == SplitRule::sources_per_class) {
        n = static_cast<std::size_t>(spec.amount);
        if (list.size() < n)
          throw ManifestError("split: class " + m.class_names.at(label) + " has " +
                              std::to_string(list.size()) + " sources, fewer than the " +
                              std::to_string(n) + " required");
      } else {
        n = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(spec.amount * static_cast<double>(list.size()))));
      }
      drawn.insert(list.begin(), list.begin() + static_cast<long>(n));
    }
    for (std::size_t i : pool)
      to_val[i] = drawn.contains(m.records[i].source);
  }
  for (std::size_t i : pool)
    (to_val[i] ? s.validation : s.train).push_back(i);
  if (s.train.empty() || s.validation.empty())
    throw ManifestError("split: empty train or validation set");
  return s;
}

} // namespace mvgb::data
