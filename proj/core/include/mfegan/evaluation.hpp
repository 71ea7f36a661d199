#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mfegan/hsi.hpp"

// Classification scoring: confusion matrices, the usual agreement metrics,
// a paired significance test, a nearest-neighbour baseline and label-map
// rendering.  Labels are 1-based everywhere.
namespace mfegan {

// Row-major N x N counts; row = true class, column = predicted class.
std::vector<std::size_t> confusion(std::span<const int> truth,
                                   std::span<const int> pred, int n_classes);

struct Metrics {
  double oa = 0.0;     // overall accuracy: trace / total
  double aa = 0.0;     // mean recall over classes that appear in the truth
  double kappa = 0.0;  // chance-corrected agreement
  std::vector<double> per_class;  // recall; 0 for classes absent from truth
};

// Derives the metrics from a confusion matrix.  When chance agreement is 1
// (all mass in one cell) the kappa ratio degenerates; it is reported as 1
// for perfect agreement and 0 otherwise.
Metrics compute_metrics(std::span<const std::size_t> cm, int n_classes);

// McNemar statistic |f_ab - f_ba| / sqrt(f_ab + f_ba) over the two
// classifiers' disagreement counts (f_ab: a right, b wrong).  Zero when the
// classifiers never disagree; values above 1.96 mark a significant gap.
double mcnemar(std::span<const int> truth, std::span<const int> pred_a,
               std::span<const int> pred_b);

// k-nearest-neighbour vote in flattened-patch space (float64 Euclidean).
// Equal distances prefer the lower training index; vote ties prefer the
// lower class id.
std::vector<int> knn_classify(const PatchSet& train, const PatchSet& queries,
                              int k);

// Binary PPM (P6) rendering of a label map with the fixed class palette.
void render_map(const LabelRaster& raster, const std::filesystem::path& path);

// 17 RGB triples: entry 0 is the background (black), entries 1..16 the class
// colors.  Labels beyond 16 cycle through the class colors.
std::span<const std::array<std::uint8_t, 3>> class_palette();

}  // namespace mfegan
