#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "mfegan/errors.hpp"

namespace mfegan {

// Raw hyperspectral cube, band-major: values[(band*height + row)*width + col].
struct HSICube {
  int height = 0, width = 0, bands = 0;
  std::vector<float> values;

  float at(int band, int row, int col) const {
    return values[(static_cast<std::size_t>(band) * height + row) * width + col];
  }
  float& at(int band, int row, int col) {
    return values[(static_cast<std::size_t>(band) * height + row) * width + col];
  }
};

// Ground-truth raster; 0 = unlabeled background, classes are 1..N.
struct LabelRaster {
  int height = 0, width = 0;
  std::vector<std::uint16_t> labels;  // row-major

  std::uint16_t at(int row, int col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
};

// Spatial-spectral patches cut around labeled pixels.  Patch i holds
// channels*sp*sp floats in [channel][row][col] order; label(i) in 1..n_classes
// and (row,col) name the source pixel.
struct PatchSet {
  int sp = 0, channels = 0, n_classes = 0;
  std::vector<std::uint16_t> labels;
  std::vector<std::int32_t> rows, cols;
  std::vector<float> values;

  std::size_t count() const { return labels.size(); }
  std::size_t patch_floats() const {
    return static_cast<std::size_t>(channels) * sp * sp;
  }
  std::span<const float> patch(std::size_t i) const {
    return {values.data() + i * patch_floats(), patch_floats()};
  }
};

// Train/test partition of a PatchSet, as sorted indices.
struct SplitSpec {
  std::vector<std::uint32_t> train, test;
};

// Shape of a synthetic labeled scene.
struct SyntheticSpec {
  int n_classes = 0;
  std::vector<int> class_sizes;  // pixels per class, 1..n_classes
  int bands = 0;
  int height = 0, width = 0;
  float noise = 0.05f;  // stddev of the per-value Gaussian perturbation
};

// ---- on-disk formats (little-endian) ----------------------------------------
// cube    "HSC1": u32 height, width, bands; f32 payload band-major
// labels  "HSL1": u32 height, width; u16 payload row-major
// patches "HSP1": u32 sp, channels, n_classes, count;
//                 per patch u32 row, u32 col, u16 label, f32 payload
// split   "HSS1": u32 train count + u32 indices; u32 test count + u32 indices
void save_cube(const std::filesystem::path& path, const HSICube& cube);
HSICube load_cube(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelRaster& raster);
LabelRaster load_labels(const std::filesystem::path& path);
void save_patches(const std::filesystem::path& path, const PatchSet& patches);
PatchSet load_patches(const std::filesystem::path& path);
void save_split(const std::filesystem::path& path, const SplitSpec& split);
SplitSpec load_split(const std::filesystem::path& path);

// Checks 1..N label contiguity (every id up to the maximum appears) and that
// at least one pixel is labeled; returns N.  DataError on violation.
int validate_labels(const LabelRaster& raster);

// Rescales every band to [0,1] independently; a constant band maps to zeros.
HSICube normalize_bands(const HSICube& cube);

struct PcaResult {
  HSICube cube;                     // k bands, each min-max scaled to [0,1]
  std::vector<double> eigenvalues;  // all bands' covariance spectrum, descending
  std::vector<double> components;   // k x bands, row-major, unit rows
};

// Projects the cube onto the top-k principal components of its band
// covariance (computed over all pixels).  Component signs are fixed so each
// one's largest-magnitude coefficient is positive.
PcaResult pca_reduce(const HSICube& cube, int k);

// Cuts an sp x sp patch around every labeled pixel (mirror padding at the
// borders, pixel centered at floor(sp/2)) in row-major pixel order.
// sp must be a positive multiple of 4.
PatchSet extract_patches(const HSICube& cube, const LabelRaster& raster, int sp);

// Per-class split: each class contributes round-half-even(fraction * count)
// training samples (at least 1), unless `overrides` names an explicit count
// for it.  Sampling without replacement, per-class streams derived from seed.
SplitSpec stratified_split(const PatchSet& patches, double fraction,
                           std::uint64_t seed,
                           const std::map<int, int>& overrides = {});

// Copies the selected patches, preserving the given order.
PatchSet subset(const PatchSet& patches, std::span<const std::uint32_t> indices);

// Duplicates minority-class patches (uniformly, with replacement) until every
// class matches the majority count, then shuffles the order.  Originals are
// all kept.
PatchSet random_oversample(const PatchSet& patches, std::uint64_t seed);

// Number of patches per class id (index 0 unused).
std::vector<std::size_t> class_counts(const PatchSet& patches);

struct SyntheticScene {
  HSICube cube;
  LabelRaster raster;
};

// Deterministic labeled scene: each class occupies a contiguous blob grown
// from a random seed cell and has a smooth spectral signature shared by all
// its pixels, perturbed by Gaussian noise.  Class sizes are hit exactly.
SyntheticScene synth_cube(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace mfegan
