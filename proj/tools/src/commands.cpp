#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "artifacts.hpp"
#include "mfegan/checkpoint.hpp"
#include "mfegan/errors.hpp"
#include "mfegan/evaluation.hpp"
#include "mfegan/hsi.hpp"
#include "mfegan/networks.hpp"
#include "mfegan/training.hpp"

namespace fs = std::filesystem;

namespace mfegan::cli {

void cmd_prepare(const ExperimentConfig& cfg) {
  HSICube cube;
  LabelRaster labels;
  if (cfg.synthetic) {
    SyntheticScene scene = synth_cube(cfg.synth, cfg.seed);
    cube = std::move(scene.cube);
    labels = std::move(scene.raster);
    std::cout << "synthesized " << cube.height << "x" << cube.width
              << " scene with " << cube.bands << " bands\n";
  } else {
    cube = load_cube(cfg.cube_path);
    labels = load_labels(cfg.labels_path);
    std::cout << "loaded " << cube.height << "x" << cube.width << " cube ("
              << cube.bands << " bands) from " << cfg.cube_path.string()
              << "\n";
  }
  const int n_classes = validate_labels(labels);

  const HSICube normalized = normalize_bands(cube);
  const PcaResult pca = pca_reduce(normalized, 3);
  const PatchSet patches = extract_patches(pca.cube, labels, cfg.sp);
  const SplitSpec split = stratified_split(patches, cfg.train_fraction,
                                           cfg.seed, cfg.train_count_overrides);

  fs::create_directories(cfg.out_dir);
  const Paths paths{cfg.out_dir};
  save_cube(paths.cube(), pca.cube);
  save_labels(paths.labels(), labels);
  save_patches(paths.patches(), patches);
  save_split(paths.split(), split);

  // class histogram with the train/test breakdown (slot 0 of the per-class
  // vectors is the unused background slot)
  const std::vector<std::size_t> totals = class_counts(patches);
  std::vector<std::size_t> train_per_class(totals.size(), 0);
  for (const std::uint32_t i : split.train) {
    train_per_class[static_cast<std::size_t>(patches.labels[i])] += 1;
  }
  std::cout << "class   total   train    test\n";
  for (int c = 1; c <= n_classes; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    std::printf("%5d %7zu %7zu %7zu\n", c, totals[idx],
                train_per_class[idx], totals[idx] - train_per_class[idx]);
  }
  const auto [min_it, max_it] =
      std::minmax_element(totals.begin() + 1, totals.end());
  std::cout << "total " << patches.count() << " patches, train "
            << split.train.size() << " / test " << split.test.size() << "\n";
  std::cout << "imbalance ratio (majority/minority): "
            << fixed2(static_cast<double>(*max_it) /
                      static_cast<double>(*min_it))
            << "\n";
  std::cout << "wrote " << paths.cube().string() << ", "
            << paths.labels().string() << ", " << paths.patches().string()
            << ", " << paths.split().string() << "\n";
}

namespace {

// Per-epoch progress line; which loss is representative depends on the
// variant.
void print_epoch(const std::string& name, Variant variant, int epoch,
                 int total_epochs, const TrainTrace& trace) {
  double sum = 0.0;
  int n = 0;
  for (auto it = trace.rows.rbegin();
       it != trace.rows.rend() && it->epoch == epoch; ++it) {
    sum += variant == Variant::Cnn ? it->loss_c : it->loss_d;
    ++n;
  }
  const double mean = n > 0 ? sum / n : 0.0;
  std::printf("[%s] epoch %d/%d  %s %.4f  (%.2f s)\n", name.c_str(), epoch,
              total_epochs, variant == Variant::Cnn ? "loss_c" : "loss_d",
              mean, trace.epoch_seconds.back());
  std::fflush(stdout);
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg) {
  const Paths paths{cfg.out_dir};
  const PatchSet all = load_patches(paths.patches());
  const SplitSpec split = load_split(paths.split());
  const PatchSet train_set = subset(all, split.train);

  for (const Method m : cfg.methods) {
    const std::string name = method_name(m);
    TrainConfig tc = cfg.train;
    const Variant variant = m == Method::Acgan    ? Variant::Acgan
                            : m == Method::Mfegan ? Variant::Mfegan
                                                  : Variant::Cnn;
    std::cout << "training " << name << " on " << train_set.count()
              << " patches (seed " << cfg.seed << ")\n";

    const auto cb = [&](int epoch, const TrainTrace& t) {
      print_epoch(name, variant, epoch, tc.epochs, t);
    };
    TrainResult res;
    switch (m) {
      case Method::Cnn:
        tc.oversample = false;  // the plain baseline
        res = train_cnn(train_set, tc, cfg.seed, cb);
        break;
      case Method::RoCnn:
        tc.oversample = true;  // the whole point of this variant
        res = train_cnn(train_set, tc, cfg.seed, cb);
        break;
      case Method::Acgan:
        res = train_acgan(train_set, tc, cfg.seed, cb);
        break;
      case Method::Mfegan:
        res = train_mfegan(train_set, tc, cfg.seed, cb);
        break;
    }

    std::vector<CheckpointRecord> records = discriminator_records(res.d, "d");
    if (m == Method::Acgan || m == Method::Mfegan) {
      const std::vector<CheckpointRecord> g_records =
          generator_records(res.g, "g");
      records.insert(records.end(), g_records.begin(), g_records.end());
    }
    save_records(paths.checkpoint(name), records);
    write_text(paths.trace(name), trace_csv(res.variant, res.trace));
    write_text(paths.timing(name), timing_csv(res.trace));
    std::cout << "wrote " << paths.checkpoint(name).string() << ", "
              << paths.trace(name).string() << ", "
              << paths.timing(name).string() << "\n";
  }
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& model,
                  const std::string& name) {
  const Paths paths{cfg.out_dir};
  const PatchSet all = load_patches(paths.patches());
  const SplitSpec split = load_split(paths.split());
  const LabelRaster truth_raster = load_labels(paths.labels());
  const PatchSet test = subset(all, split.test);
  const int n_classes = all.n_classes;

  std::vector<int> pred_test, pred_all;
  double epoch_time = 0.0;
  if (model == "knn") {
    const PatchSet train_set = subset(all, split.train);
    pred_test = knn_classify(train_set, test, cfg.knn_k);
    pred_all = knn_classify(train_set, all, cfg.knn_k);
  } else {
    Discriminator d =
        build_discriminator(all.sp, n_classes, cfg.seed);
    const std::vector<CheckpointRecord> records =
        load_records(paths.checkpoint(model));
    load_discriminator(d, records, "d");
    pred_test = classify_all(d, test);
    pred_all = classify_all(d, all);
    epoch_time = mean_epoch_seconds(paths.timing(model));
  }

  const std::vector<int> truth(test.labels.begin(), test.labels.end());
  const std::vector<std::size_t> cm = confusion(truth, pred_test, n_classes);
  const Metrics m = compute_metrics(cm, n_classes);
  write_text(paths.report(name),
             report_csv(m.per_class, m.oa, m.aa, m.kappa, epoch_time));

  Predictions p;
  p.index = split.test;
  p.truth = truth;
  p.pred = pred_test;
  write_text(paths.predictions(name), predictions_csv(p));

  // full-scene map: every labeled pixel painted with its predicted class
  LabelRaster pred_raster = truth_raster;
  for (std::size_t i = 0; i < all.count(); ++i) {
    const auto offset =
        static_cast<std::size_t>(all.rows[i]) * pred_raster.width +
        static_cast<std::size_t>(all.cols[i]);
    pred_raster.labels[offset] = static_cast<std::uint16_t>(pred_all[i]);
  }
  render_map(pred_raster, paths.map(name));

  std::cout << name << ": oa " << fixed2(m.oa * 100.0) << "  aa "
            << fixed2(m.aa * 100.0) << "  kappa " << fixed2(m.kappa * 100.0)
            << "\n";
  std::cout << "wrote " << paths.report(name).string() << ", "
            << paths.predictions(name).string() << ", "
            << paths.map(name).string() << "\n";
}

void cmd_compare(const ExperimentConfig& cfg,
                 const std::vector<std::string>& inputs) {
  if (inputs.size() < 2) {
    throw ParameterError("compare needs at least two prediction files");
  }
  const Paths paths{cfg.out_dir};

  struct Entry {
    std::string name;
    Predictions p;
  };
  std::vector<Entry> entries;
  for (const std::string& arg : inputs) {
    fs::path path = arg;
    if (!fs::exists(path)) path = paths.predictions(arg);
    std::string name = path.stem().string();
    const std::string suffix = "_predictions";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) ==
            0) {
      name.resize(name.size() - suffix.size());
    }
    entries.push_back({std::move(name), read_predictions(path)});
  }

  const Predictions& ref = entries.front().p;
  for (const Entry& e : entries) {
    if (e.p.index != ref.index || e.p.truth != ref.truth) {
      throw DimensionError("prediction files cover different test sets: " +
                           entries.front().name + " vs " + e.name);
    }
  }

  const std::size_t n = entries.size();
  std::string out = "method";
  for (const Entry& e : entries) out += "," + e.name;
  out += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += entries[i].name;
    for (std::size_t j = 0; j < n; ++j) {
      const double v =
          i == j ? 0.0 : mcnemar(ref.truth, entries[i].p.pred,
                                 entries[j].p.pred);
      out += "," + fixed3(v);
      if (i != j && v > 1.96) out += "*";
    }
    out += "\n";
  }
  write_text(paths.mcnemar_matrix(), out);

  std::cout << "pairwise McNemar statistics (N = " << ref.index.size()
            << " test samples; * marks |M_t| > 1.96):\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = mcnemar(ref.truth, entries[i].p.pred,
                               entries[j].p.pred);
      std::cout << "  " << entries[i].name << " vs " << entries[j].name
                << ": " << fixed3(v) << (v > 1.96 ? "  (significant)" : "")
                << "\n";
    }
  }
  std::cout << "wrote " << paths.mcnemar_matrix().string() << "\n";
}

void cmd_render_map(const fs::path& labels_path, const fs::path& out_path) {
  const LabelRaster raster = load_labels(labels_path);
  render_map(raster, out_path);
  std::cout << "wrote " << out_path.string() << " (" << raster.width << "x"
            << raster.height << ")\n";
}

}  // namespace mfegan::cli
