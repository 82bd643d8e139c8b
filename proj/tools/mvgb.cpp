// SPDX-License-Identifier: Apache-2.0
// mvgb: command-line front end for feature extraction, training, evaluation
// and cross-validation.
//
// Exit status: 0 success, 2 training diverged, 3 configuration or usage
// error, 1 anything else (I/O, corrupt files).
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mvgb/data/features.hpp"
#include "mvgb/data/manifest.hpp"
#include "mvgb/data/run_config.hpp"
#include "mvgb/data/synth.hpp"
#include "mvgb/train/engine.hpp"
#include "mvgb/train/inference.hpp"

namespace fs = std::filesystem;
using namespace mvgb;

namespace {

constexpr int kExitDiverged = 2;
constexpr int kExitConfig = 3;

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw std::invalid_argument("cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const fs::path &p) {
  std::ofstream out(p, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::optional<fs::path> cache_opt(const std::string &dir) {
  if (dir.empty())
    return std::nullopt;
  return fs::path(dir);
}

std::vector<std::size_t> fold_range(const data::Manifest &m) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k <= m.n_folds; ++k)
    out.push_back(k);
  return out;
}

/// Config file (if any) with `key=value` overrides applied on top.
data::RunConfig load_run_config(const std::string &path, const std::vector<std::string> &sets) {
  kv::Map m = path.empty() ? kv::Map{} : kv::parse(read_file(path));
  for (const auto &s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw kv::KeyValueError("--set expects key=value, got '" + s + "'");
    m[std::string(kv::trim(s.substr(0, eq)))] = std::string(kv::trim(s.substr(eq + 1)));
  }
  return data::RunConfig::from_key_values(m);
}

void bind_classes(data::RunConfig &rc, const data::Manifest &m) {
  if (rc.net.n_classes == 0)
    rc.net.n_classes = m.n_classes();
  else if (rc.net.n_classes != m.n_classes())
    throw std::invalid_argument("config has " + std::to_string(rc.net.n_classes) +
                                " classes, manifest has " + std::to_string(m.n_classes()));
}

// ---- train ----------------------------------------------------------------

struct TrainedModel {
  fs::path checkpoint;
  train::TrainResult result;
};

TrainedModel train_one(const data::RunConfig &rc, const data::Manifest &m, std::size_t fold,
                       const fs::path &out, const std::optional<fs::path> &cache) {
  fs::create_directories(out);
  const net::NetworkConfig ncfg = train::network_for(rc.train, rc.net);
  const data::Split sp = data::split(m, fold, rc.split);
  const auto train_clips = data::load_clips(m, sp.train, ncfg.views, ncfg, cache);
  const auto val_clips = data::load_clips(m, sp.validation, ncfg.views, ncfg, cache);

  {
    std::ofstream cfg = open_out(out / "config.txt");
    cfg << "# held_out_fold = " << fold << "\n" << kv::format(rc.to_key_values());
  }
  std::ofstream metrics = open_out(out / "metrics.csv");
  std::optional<std::ofstream> weights;
  if (rc.train.mode == train::Mode::blend)
    weights = open_out(out / "weights.csv");

  net::MultiViewNet model(ncfg, rc.train.seed);
  TrainedModel t;
  t.result = train::train(model, train_clips, val_clips, rc.train,
                          {&metrics, weights ? &*weights : nullptr, &std::cerr});
  t.checkpoint = out / "checkpoint.bin";
  net::save_checkpoint(t.checkpoint, t.result.best);
  std::cerr << "best epoch " << t.result.best_epoch << ", validation accuracy "
            << t.result.best_validation_accuracy << "\n";
  return t;
}

/// Late fusion: one single-view model per view, each in its own directory.
void train_late(const data::RunConfig &rc, const data::Manifest &m, std::size_t fold,
                const fs::path &out, const std::optional<fs::path> &cache) {
  for (View v : rc.net.views) {
    data::RunConfig sub = rc;
    sub.train.mode = train::Mode::single;
    sub.train.single_view = v;
    std::cerr << "late fusion: training " << name_of(v) << "\n";
    train_one(sub, m, fold, out / std::string(name_of(v)), cache);
  }
}

void train_any(const data::RunConfig &rc, const data::Manifest &m, std::size_t fold,
               const fs::path &out, const std::optional<fs::path> &cache) {
  if (rc.train.mode == train::Mode::late)
    train_late(rc, m, fold, out, cache);
  else
    train_one(rc, m, fold, out, cache);
}

// ---- eval -----------------------------------------------------------------

struct Loaded {
  net::MultiViewNet model;
  blend::BlendWeights weights;
};

Loaded load_model(const fs::path &path) {
  const net::Checkpoint c = net::load_checkpoint(path);
  const data::RunConfig rc = data::RunConfig::from_key_values(kv::parse(c.config));
  Loaded l{net::MultiViewNet(train::network_for(rc.train, rc.net), 0), {}};
  net::restore_parameters(l.model, c.tensors);
  l.weights.w = c.blend_weights;
  return l;
}

struct Evaluation {
  train::EvalReport report;
  std::string headline_name; // branch name or "late"
  double headline = 0.0;
};

std::vector<std::size_t> labels_of(std::span<const train::Clip> clips) {
  std::vector<std::size_t> out;
  for (const auto &c : clips)
    out.push_back(c.label);
  return out;
}

std::vector<train::Clip> test_clips(const data::Manifest &m, std::size_t fold,
                                    const net::NetworkConfig &ncfg,
                                    const std::optional<fs::path> &cache) {
  if (fold == 0)
    throw std::invalid_argument("evaluation needs a held-out fold (--fold 1.." +
                                std::to_string(m.n_folds) + ")");
  const data::Split sp = data::split(m, fold, {});
  return data::load_clips(m, sp.test, ncfg.views, ncfg, cache);
}

Evaluation eval_checkpoint(const fs::path &path, const data::Manifest &m, std::size_t fold,
                           const std::optional<fs::path> &cache) {
  Loaded l = load_model(path);
  const auto clips = test_clips(m, fold, l.model.config(), cache);
  Evaluation e;
  e.report = train::evaluate(l.model, clips, l.weights);
  const Branch b = train::selection_branch(l.model);
  e.headline_name = std::string(name_of(b));
  e.headline = e.report.accuracy[index_of(b)];
  return e;
}

Evaluation eval_late(const fs::path &dir, const data::Manifest &m, std::size_t fold,
                     const std::optional<fs::path> &cache) {
  std::vector<train::FileProbs> probs;
  std::vector<std::size_t> labels;
  for (View v : kAllViews) {
    const fs::path p = dir / std::string(name_of(v)) / "checkpoint.bin";
    if (!fs::exists(p))
      continue;
    Loaded l = load_model(p);
    const auto clips = test_clips(m, fold, l.model.config(), cache);
    const auto got = train::infer(l.model, clips);
    if (probs.empty()) {
      probs.resize(got.size());
      labels = labels_of(clips);
    }
    for (std::size_t i = 0; i < got.size(); ++i)
      probs[i].branch[index_of(v)] = got[i].branch[index_of(v)];
  }
  if (probs.empty())
    throw std::invalid_argument(dir.string() + " holds no per-view checkpoints");
  std::vector<train::Distribution> fused;
  for (const auto &p : probs) {
    std::vector<train::Distribution> views;
    for (View v : kAllViews)
      if (p.has(branch_of(v)))
        views.push_back(p.branch[index_of(v)]);
    fused.push_back(train::late_fusion(views));
  }
  Evaluation e;
  e.report = train::evaluate_decisions(probs, fused, labels, m.n_classes());
  e.headline_name = "late";
  e.headline = e.report.ensemble_accuracy;
  return e;
}

Evaluation eval_any(const fs::path &path, const data::Manifest &m, std::size_t fold,
                    const std::optional<fs::path> &cache) {
  if (fs::is_directory(path)) {
    if (fs::exists(path / "checkpoint.bin"))
      return eval_checkpoint(path / "checkpoint.bin", m, fold, cache);
    return eval_late(path, m, fold, cache);
  }
  return eval_checkpoint(path, m, fold, cache);
}

// ---- blend-report ---------------------------------------------------------

void blend_report(const fs::path &log_dir, const fs::path &out_path) {
  std::size_t window = blend::kDefaultWindow;
  double eps = blend::kClampEpsilon;
  if (fs::exists(log_dir / "config.txt")) {
    const auto rc = data::RunConfig::from_key_values(kv::parse(read_file(log_dir / "config.txt")));
    window = rc.train.blend_window;
    eps = rc.train.blend_epsilon;
  }
  std::istringstream in(read_file(log_dir / "metrics.csv"));
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty metrics log");
  std::vector<std::string> cols;
  std::istringstream header(line);
  for (std::string c; std::getline(header, c, ',');)
    cols.push_back(c);
  std::array<std::ptrdiff_t, kMaxBranches> train_col, val_col;
  train_col.fill(-1);
  val_col.fill(-1);
  std::vector<Branch> branches;
  for (std::size_t b = 0; b < kMaxBranches; ++b) {
    const std::string n(name_of(static_cast<Branch>(b)));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == "train_loss_" + n)
        train_col[b] = static_cast<std::ptrdiff_t>(i);
      if (cols[i] == "val_loss_" + n)
        val_col[b] = static_cast<std::ptrdiff_t>(i);
    }
    if ((train_col[b] < 0) != (val_col[b] < 0))
      throw std::invalid_argument("metrics log lacks a loss column for " + n);
    if (train_col[b] >= 0)
      branches.push_back(static_cast<Branch>(b));
  }
  if (branches.empty() || cols.size() < 2 || cols[0] != "step" || cols[1] != "epoch")
    throw std::invalid_argument("not a metrics log: " + (log_dir / "metrics.csv").string());

  blend::Blender blender(branches, window, eps);
  std::ofstream out = open_out(out_path);
  out << blend::kWeightCsvHeader << "\n";
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::vector<std::string> f;
    std::istringstream r(line);
    for (std::string c; std::getline(r, c, ',');)
      f.push_back(c);
    if (f.size() != cols.size())
      throw std::invalid_argument("ragged metrics row: " + line);
    std::array<double, kMaxBranches> tr{}, va{};
    for (Branch b : branches) {
      tr[index_of(b)] = std::stod(f[static_cast<std::size_t>(train_col[index_of(b)])]);
      va[index_of(b)] = std::stod(f[static_cast<std::size_t>(val_col[index_of(b)])]);
    }
    blender.update(tr, va);
    blend::write_weight_rows(out, std::stoull(f[0]), std::stoull(f[1]), blender.last_updates());
  }
}

// ---- output helpers -------------------------------------------------------

void print_eval(const Evaluation &e, bool ensemble, const std::string &csv) {
  if (!csv.empty()) {
    std::ofstream out = open_out(csv);
    train::write_report_csv(out, e.report);
  } else {
    train::write_report_csv(std::cout, e.report);
  }
  if (e.headline_name == "late") {
    std::printf("late-fusion accuracy %.4f (%zu files)\n", e.headline, e.report.n_files);
    return;
  }
  if (ensemble && e.report.present[index_of(Branch::joint)]) {
    std::printf("multi-view accuracy %.4f\n", e.report.accuracy[index_of(Branch::joint)]);
    std::printf("self-ensemble accuracy %.4f\n", e.report.ensemble_accuracy);
  } else {
    std::printf("%s accuracy %.4f (%zu files)\n", e.headline_name.c_str(), e.headline,
                e.report.n_files);
  }
}

int run(int argc, char **argv) {
  CLI::App app{"Multi-view audio classification with adaptive gradient blending"};
  app.require_subcommand(1);

  std::string manifest, config, out, cache, views = "mel,gam,cqt,raw", mode = "blend";
  std::string checkpoint, csv, spec_path;
  std::vector<std::string> sets;
  std::size_t fold = 0;
  unsigned threads = 0;
  bool ensemble = false;

  auto *extract = app.add_subcommand("extract", "Write the feature cache for a manifest");
  extract->add_option("--manifest", manifest)->required();
  extract->add_option("--views", views, "Comma-separated views");
  extract->add_option("--out", out, "Cache directory")->required();
  extract->add_option("--config", config, "Run config (band counts)");
  extract->add_option("--threads", threads, "Worker threads, 0 = all cores");

  auto *trn = app.add_subcommand("train", "Train one model");
  trn->add_option("--manifest", manifest)->required();
  trn->add_option("--mode", mode, "blend | concat | late | single:<view>");
  trn->add_option("--fold", fold, "Held-out test fold, 0 = none");
  trn->add_option("--config", config);
  trn->add_option("--set", sets, "Config override key=value")->take_all();
  trn->add_option("--cache", cache, "Feature cache directory");
  trn->add_option("--out", out)->required();

  auto *ev = app.add_subcommand("eval", "Evaluate a checkpoint on a held-out fold");
  ev->add_option("--checkpoint", checkpoint, "checkpoint.bin or a training output directory")
      ->required();
  ev->add_option("--manifest", manifest)->required();
  ev->add_option("--fold", fold)->required();
  ev->add_flag("--ensemble", ensemble, "Also report the self-ensemble accuracy");
  ev->add_option("--cache", cache);
  ev->add_option("--csv", csv, "Write the report here instead of stdout");

  auto *report = app.add_subcommand("blend-report", "Replay a metrics log through the blender");
  report->add_option("--log", out, "Training output directory")->required();
  report->add_option("--out", csv, "Weight CSV")->required();

  auto *synth = app.add_subcommand("synth-data", "Generate the synthetic multi-view dataset");
  synth->add_option("--spec", spec_path, "key = value synth spec");
  synth->add_option("--set", sets, "Spec override key=value")->take_all();
  synth->add_option("--out", out)->required();

  auto *cv = app.add_subcommand("crossval", "Train and evaluate on every fold");
  cv->add_option("--manifest", manifest)->required();
  cv->add_option("--mode", mode);
  cv->add_option("--config", config);
  cv->add_option("--set", sets)->take_all();
  cv->add_option("--cache", cache);
  cv->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*extract) {
    const data::Manifest m = data::load_manifest(manifest);
    data::RunConfig rc = load_run_config(config, {});
    bind_classes(rc, m);
    const auto vs = parse_view_list(views);
    data::write_cache(m, vs, rc.net, out, threads);
    std::printf("cached %zu files x %zu views under %s\n", m.records.size(), vs.size(),
                out.c_str());
  } else if (*trn) {
    const data::Manifest m = data::load_manifest(manifest);
    data::RunConfig rc = load_run_config(config, sets);
    train::parse_mode(mode, rc.train);
    bind_classes(rc, m);
    rc.validate();
    if (fold > m.n_folds)
      throw std::invalid_argument("fold " + std::to_string(fold) + " outside 1.." +
                                  std::to_string(m.n_folds));
    train_any(rc, m, fold, out, cache_opt(cache));
  } else if (*ev) {
    const data::Manifest m = data::load_manifest(manifest);
    print_eval(eval_any(checkpoint, m, fold, cache_opt(cache)), ensemble, csv);
  } else if (*report) {
    blend_report(out, csv);
  } else if (*synth) {
    kv::Map kvm = spec_path.empty() ? kv::Map{} : kv::parse(read_file(spec_path));
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw kv::KeyValueError("--set expects key=value, got '" + s + "'");
      kvm[std::string(kv::trim(s.substr(0, eq)))] = std::string(kv::trim(s.substr(eq + 1)));
    }
    const data::SynthSpec spec = data::SynthSpec::from_key_values(kvm);
    spec.validate();
    const data::Manifest m = data::synth_dataset(spec, out);
    std::printf("wrote %zu records to %s\n", m.records.size(), out.c_str());
  } else if (*cv) {
    const data::Manifest m = data::load_manifest(manifest);
    data::RunConfig rc = load_run_config(config, sets);
    train::parse_mode(mode, rc.train);
    bind_classes(rc, m);
    rc.validate();
    std::vector<double> acc;
    fs::create_directories(out);
    std::ofstream summary = open_out(fs::path(out) / "crossval.csv");
    summary << "fold,accuracy\n";
    for (std::size_t k : fold_range(m)) {
      const fs::path dir = fs::path(out) / ("fold" + std::to_string(k));
      train_any(rc, m, k, dir, cache_opt(cache));
      const Evaluation e = eval_any(dir, m, k, cache_opt(cache));
      acc.push_back(e.headline);
      summary << k << "," << kv::to_text(e.headline) << "\n";
      std::printf("fold %zu %s accuracy %.4f\n", k, e.headline_name.c_str(), e.headline);
    }
    const double mean = train::mean_accuracy(acc);
    summary << "mean," << kv::to_text(mean) << "\n";
    std::printf("mean accuracy %.4f over %zu folds\n", mean, acc.size());
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  try {
    return run(argc, argv);
  } catch (const train::DivergenceError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
