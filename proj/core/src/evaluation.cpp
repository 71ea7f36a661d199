#include "mfegan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mfegan/errors.hpp"

namespace mfegan {

namespace {

void check_labels(std::span<const int> labels, int n_classes,
                  const char* what) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > n_classes) {
      throw ParameterError(std::string(what) + " label " +
                           std::to_string(labels[i]) + " at index " +
                           std::to_string(i) + " outside 1.." +
                           std::to_string(n_classes));
    }
  }
}

}  // namespace

std::vector<std::size_t> confusion(std::span<const int> truth,
                                   std::span<const int> pred, int n_classes) {
  if (n_classes < 1) {
    throw ParameterError("confusion needs at least one class");
  }
  if (truth.size() != pred.size()) {
    throw DimensionError("confusion label count mismatch: " +
                         std::to_string(truth.size()) + " true vs " +
                         std::to_string(pred.size()) + " predicted");
  }
  if (truth.empty()) {
    throw DataError("confusion needs at least one sample");
  }
  check_labels(truth, n_classes, "true");
  check_labels(pred, n_classes, "predicted");
  const auto n = static_cast<std::size_t>(n_classes);
  std::vector<std::size_t> cm(n * n, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    cm[static_cast<std::size_t>(truth[i] - 1) * n +
       static_cast<std::size_t>(pred[i] - 1)] += 1;
  }
  return cm;
}

Metrics compute_metrics(std::span<const std::size_t> cm, int n_classes) {
  if (n_classes < 1) {
    throw ParameterError("metrics need at least one class");
  }
  const auto n = static_cast<std::size_t>(n_classes);
  if (cm.size() != n * n) {
    throw DimensionError("confusion matrix size " + std::to_string(cm.size()) +
                         " does not match " + std::to_string(n_classes) +
                         " classes");
  }
  double total = 0.0;
  double trace = 0.0;
  std::vector<double> row_sum(n, 0.0);
  std::vector<double> col_sum(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const auto v = static_cast<double>(cm[r * n + c]);
      total += v;
      row_sum[r] += v;
      col_sum[c] += v;
      if (r == c) trace += v;
    }
  }
  if (total == 0.0) {
    throw DataError("confusion matrix is empty");
  }

  Metrics m;
  m.oa = trace / total;
  m.per_class.assign(n, 0.0);
  double recall_sum = 0.0;
  std::size_t observed = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (row_sum[c] > 0.0) {
      m.per_class[c] = static_cast<double>(cm[c * n + c]) / row_sum[c];
      recall_sum += m.per_class[c];
      ++observed;
    }
  }
  m.aa = observed > 0 ? recall_sum / static_cast<double>(observed) : 0.0;

  double chance = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    chance += row_sum[c] * col_sum[c];
  }
  chance /= total * total;
  if (chance >= 1.0) {
    m.kappa = m.oa == 1.0 ? 1.0 : 0.0;
  } else {
    m.kappa = (m.oa - chance) / (1.0 - chance);
  }
  return m;
}

double mcnemar(std::span<const int> truth, std::span<const int> pred_a,
               std::span<const int> pred_b) {
  if (truth.size() != pred_a.size() || truth.size() != pred_b.size()) {
    throw DimensionError("mcnemar label count mismatch");
  }
  if (truth.empty()) {
    throw DataError("mcnemar needs at least one sample");
  }
  double f_ab = 0.0;  // a correct, b wrong
  double f_ba = 0.0;  // a wrong, b correct
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool a_ok = pred_a[i] == truth[i];
    const bool b_ok = pred_b[i] == truth[i];
    if (a_ok && !b_ok) f_ab += 1.0;
    if (!a_ok && b_ok) f_ba += 1.0;
  }
  const double discordant = f_ab + f_ba;
  if (discordant == 0.0) return 0.0;
  return std::abs(f_ab - f_ba) / std::sqrt(discordant);
}

std::vector<int> knn_classify(const PatchSet& train, const PatchSet& queries,
                              int k) {
  if (k < 1) {
    throw ParameterError("k must be positive, got " + std::to_string(k));
  }
  if (train.count() == 0) {
    throw DataError("nearest-neighbour vote needs training samples");
  }
  if (static_cast<std::size_t>(k) > train.count()) {
    throw ParameterError("k = " + std::to_string(k) + " exceeds the " +
                         std::to_string(train.count()) + " training samples");
  }
  if (train.sp != queries.sp || train.channels != queries.channels) {
    throw DimensionError("training and query patches differ in shape");
  }
  const std::size_t dim = train.patch_floats();
  const std::size_t tn = train.count();
  const auto kk = static_cast<std::size_t>(k);

  std::vector<int> out(queries.count(), 0);
  std::vector<std::pair<double, std::size_t>> dist(tn);
  std::vector<std::size_t> votes(static_cast<std::size_t>(train.n_classes),
                                 0);
  for (std::size_t q = 0; q < queries.count(); ++q) {
    const float* qv = queries.patch(q).data();
    for (std::size_t t = 0; t < tn; ++t) {
      const float* tv = train.patch(t).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d =
            static_cast<double>(qv[j]) - static_cast<double>(tv[j]);
        acc += d * d;
      }
      dist[t] = {acc, t};
    }
    // Pair ordering breaks distance ties toward the lower training index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(kk),
                      dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t j = 0; j < kk; ++j) {
      votes[static_cast<std::size_t>(train.labels[dist[j].second] - 1)] += 1;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
      if (votes[c] > votes[best]) best = c;  // ties keep the lower class id
    }
    out[q] = static_cast<int>(best) + 1;
  }
  return out;
}

std::span<const std::array<std::uint8_t, 3>> class_palette() {
  static const std::array<std::array<std::uint8_t, 3>, 17> palette = {{
      {0, 0, 0},        // background / unlabeled
      {230, 25, 75},    // 1 red
      {60, 180, 75},    // 2 green
      {255, 225, 25},   // 3 yellow
      {0, 130, 200},    // 4 blue
      {245, 130, 48},   // 5 orange
      {145, 30, 180},   // 6 purple
      {70, 240, 240},   // 7 cyan
      {240, 50, 230},   // 8 magenta
      {210, 245, 60},   // 9 lime
      {250, 190, 212},  // 10 pink
      {0, 128, 128},    // 11 teal
      {220, 190, 255},  // 12 lavender
      {170, 110, 40},   // 13 brown
      {255, 250, 200},  // 14 beige
      {128, 0, 0},      // 15 maroon
      {128, 128, 0},    // 16 olive
  }};
  return {palette.data(), palette.size()};
}

void render_map(const LabelRaster& raster, const std::filesystem::path& path) {
  if (raster.height == 0 || raster.width == 0) {
    throw DataError("cannot render an empty label map");
  }
  const std::size_t pixels =
      static_cast<std::size_t>(raster.height) * raster.width;
  if (raster.labels.size() != pixels) {
    throw DimensionError("label raster size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open " + path.string() + " for writing");
  }
  out << "P6\n" << raster.width << " " << raster.height << "\n255\n";
  const auto palette = class_palette();
  std::vector<std::uint8_t> row(static_cast<std::size_t>(raster.width) * 3);
  for (std::uint32_t r = 0; r < raster.height; ++r) {
    for (std::uint32_t c = 0; c < raster.width; ++c) {
      const std::uint16_t label =
          raster.labels[static_cast<std::size_t>(r) * raster.width + c];
      // Class colors cycle past 16; 0 stays the background color.
      const std::size_t idx =
          label == 0 ? 0 : (static_cast<std::size_t>(label) - 1) % 16 + 1;
      const auto& rgb = palette[idx];
      row[static_cast<std::size_t>(c) * 3 + 0] = rgb[0];
      row[static_cast<std::size_t>(c) * 3 + 1] = rgb[1];
      row[static_cast<std::size_t>(c) * 3 + 2] = rgb[2];
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  out.flush();
  if (!out) {
    throw FormatError("failed writing " + path.string());
  }
}

}  // namespace mfegan
