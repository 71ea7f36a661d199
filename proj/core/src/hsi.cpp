#include "mfegan/hsi.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "binio.hpp"
#include "mfegan/rng.hpp"

namespace mfegan {

// ---- file formats ------------------------------------------------------------

void save_cube(const std::filesystem::path& path, const HSICube& cube) {
  std::ofstream out = binio::open_out(path, "HSC1");
  binio::put_u32(out, static_cast<std::uint32_t>(cube.height));
  binio::put_u32(out, static_cast<std::uint32_t>(cube.width));
  binio::put_u32(out, static_cast<std::uint32_t>(cube.bands));
  binio::put_f32(out, cube.values.data(), cube.values.size());
  if (!out) throw FormatError(path.string() + ": write failed");
}

HSICube load_cube(const std::filesystem::path& path) {
  binio::Reader rd(path, "HSC1");
  HSICube cube;
  cube.height = static_cast<int>(rd.u32("height"));
  cube.width = static_cast<int>(rd.u32("width"));
  cube.bands = static_cast<int>(rd.u32("bands"));
  if (cube.height < 1 || cube.width < 1 || cube.bands < 1) {
    rd.fail("non-positive cube extents");
  }
  const std::size_t n = static_cast<std::size_t>(cube.height) * cube.width *
                        cube.bands;
  cube.values.resize(n);
  rd.bytes(cube.values.data(), n * 4, "cube payload");
  if (!rd.at_eof()) rd.fail("trailing bytes after cube payload");
  return cube;
}

void save_labels(const std::filesystem::path& path, const LabelRaster& raster) {
  std::ofstream out = binio::open_out(path, "HSL1");
  binio::put_u32(out, static_cast<std::uint32_t>(raster.height));
  binio::put_u32(out, static_cast<std::uint32_t>(raster.width));
  for (std::uint16_t v : raster.labels) binio::put_u16(out, v);
  if (!out) throw FormatError(path.string() + ": write failed");
}

LabelRaster load_labels(const std::filesystem::path& path) {
  binio::Reader rd(path, "HSL1");
  LabelRaster raster;
  raster.height = static_cast<int>(rd.u32("height"));
  raster.width = static_cast<int>(rd.u32("width"));
  if (raster.height < 1 || raster.width < 1) {
    rd.fail("non-positive raster extents");
  }
  const std::size_t n = static_cast<std::size_t>(raster.height) * raster.width;
  raster.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) raster.labels[i] = rd.u16("label");
  if (!rd.at_eof()) rd.fail("trailing bytes after label payload");
  return raster;
}

void save_patches(const std::filesystem::path& path, const PatchSet& patches) {
  std::ofstream out = binio::open_out(path, "HSP1");
  binio::put_u32(out, static_cast<std::uint32_t>(patches.sp));
  binio::put_u32(out, static_cast<std::uint32_t>(patches.channels));
  binio::put_u32(out, static_cast<std::uint32_t>(patches.n_classes));
  binio::put_u32(out, static_cast<std::uint32_t>(patches.count()));
  const std::size_t pf = patches.patch_floats();
  for (std::size_t i = 0; i < patches.count(); ++i) {
    binio::put_u32(out, static_cast<std::uint32_t>(patches.rows[i]));
    binio::put_u32(out, static_cast<std::uint32_t>(patches.cols[i]));
    binio::put_u16(out, patches.labels[i]);
    binio::put_f32(out, patches.values.data() + i * pf, pf);
  }
  if (!out) throw FormatError(path.string() + ": write failed");
}

PatchSet load_patches(const std::filesystem::path& path) {
  binio::Reader rd(path, "HSP1");
  PatchSet ps;
  ps.sp = static_cast<int>(rd.u32("patch size"));
  ps.channels = static_cast<int>(rd.u32("channels"));
  ps.n_classes = static_cast<int>(rd.u32("class count"));
  const std::uint32_t count = rd.u32("patch count");
  if (ps.sp < 1 || ps.channels < 1 || ps.n_classes < 1) {
    rd.fail("non-positive patch extents");
  }
  const std::size_t pf = ps.patch_floats();
  ps.labels.reserve(count);
  ps.rows.reserve(count);
  ps.cols.reserve(count);
  ps.values.resize(static_cast<std::size_t>(count) * pf);
  for (std::uint32_t i = 0; i < count; ++i) {
    ps.rows.push_back(static_cast<std::int32_t>(rd.u32("patch row")));
    ps.cols.push_back(static_cast<std::int32_t>(rd.u32("patch col")));
    const std::uint16_t label = rd.u16("patch label");
    if (label < 1 || label > ps.n_classes) rd.fail("patch label out of range");
    ps.labels.push_back(label);
    rd.bytes(ps.values.data() + static_cast<std::size_t>(i) * pf, pf * 4,
             "patch payload");
  }
  if (!rd.at_eof()) rd.fail("trailing bytes after patches");
  return ps;
}

void save_split(const std::filesystem::path& path, const SplitSpec& split) {
  std::ofstream out = binio::open_out(path, "HSS1");
  binio::put_u32(out, static_cast<std::uint32_t>(split.train.size()));
  for (std::uint32_t v : split.train) binio::put_u32(out, v);
  binio::put_u32(out, static_cast<std::uint32_t>(split.test.size()));
  for (std::uint32_t v : split.test) binio::put_u32(out, v);
  if (!out) throw FormatError(path.string() + ": write failed");
}

SplitSpec load_split(const std::filesystem::path& path) {
  binio::Reader rd(path, "HSS1");
  SplitSpec split;
  const std::uint32_t nt = rd.u32("train count");
  split.train.resize(nt);
  for (std::uint32_t i = 0; i < nt; ++i) split.train[i] = rd.u32("train index");
  const std::uint32_t ne = rd.u32("test count");
  split.test.resize(ne);
  for (std::uint32_t i = 0; i < ne; ++i) split.test[i] = rd.u32("test index");
  if (!rd.at_eof()) rd.fail("trailing bytes after split");
  return split;
}

// ---- validation and preprocessing --------------------------------------------

int validate_labels(const LabelRaster& raster) {
  int max_label = 0;
  for (std::uint16_t v : raster.labels) max_label = std::max(max_label, int(v));
  if (max_label == 0) throw DataError("label raster has no labeled pixels");
  std::vector<bool> seen(static_cast<std::size_t>(max_label) + 1, false);
  for (std::uint16_t v : raster.labels) seen[v] = true;
  for (int c = 1; c <= max_label; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw DataError("label raster misses class " + std::to_string(c) +
                      " (ids must be contiguous 1.." + std::to_string(max_label) +
                      ")");
    }
  }
  return max_label;
}

HSICube normalize_bands(const HSICube& cube) {
  HSICube out = cube;
  const std::size_t plane = static_cast<std::size_t>(cube.height) * cube.width;
  for (int b = 0; b < cube.bands; ++b) {
    float* p = out.values.data() + static_cast<std::size_t>(b) * plane;
    float lo = p[0], hi = p[0];
    for (std::size_t i = 1; i < plane; ++i) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
    if (hi > lo) {
      const float scale = 1.0f / (hi - lo);
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - lo) * scale;
    } else {
      // a constant band carries no information
      std::fill(p, p + plane, 0.0f);
    }
  }
  return out;
}

PcaResult pca_reduce(const HSICube& cube, int k) {
  const int D = cube.bands;
  const std::size_t P = static_cast<std::size_t>(cube.height) * cube.width;
  if (k < 1 || k > D) {
    throw ParameterError("pca_reduce: k = " + std::to_string(k) +
                         " outside 1.." + std::to_string(D) + " bands");
  }
  if (P < static_cast<std::size_t>(k) + 1) {
    throw DataError("pca_reduce: not enough pixels for " + std::to_string(k) +
                    " components");
  }

  // Band covariance over all pixels, in double precision.
  Eigen::MatrixXd x(D, static_cast<Eigen::Index>(P));
  for (int d = 0; d < D; ++d) {
    const float* band = cube.values.data() + static_cast<std::size_t>(d) * P;
    for (std::size_t p = 0; p < P; ++p) {
      x(d, static_cast<Eigen::Index>(p)) = band[p];
    }
  }
  const Eigen::VectorXd mean = x.rowwise().mean();
  x.colwise() -= mean;
  const Eigen::MatrixXd cov = (x * x.transpose()) / static_cast<double>(P - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw NumericError("pca_reduce: eigendecomposition failed");
  }
  // Eigen returns ascending eigenvalues; we report them descending.
  PcaResult result;
  result.eigenvalues.resize(D);
  for (int d = 0; d < D; ++d) {
    result.eigenvalues[d] = solver.eigenvalues()(D - 1 - d);
  }

  result.components.resize(static_cast<std::size_t>(k) * D);
  Eigen::MatrixXd basis(D, k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v = solver.eigenvectors().col(D - 1 - j);
    // Deterministic orientation: the largest-magnitude coefficient is
    // positive (first occurrence wins ties).
    int arg = 0;
    for (int d = 1; d < D; ++d) {
      if (std::abs(v(d)) > std::abs(v(arg))) arg = d;
    }
    if (v(arg) < 0.0) v = -v;
    basis.col(j) = v;
    for (int d = 0; d < D; ++d) {
      result.components[static_cast<std::size_t>(j) * D + d] = v(d);
    }
  }

  const Eigen::MatrixXd scores = basis.transpose() * x;  // k x P

  result.cube.height = cube.height;
  result.cube.width = cube.width;
  result.cube.bands = k;
  result.cube.values.resize(static_cast<std::size_t>(k) * P);
  for (int j = 0; j < k; ++j) {
    double lo = scores(j, 0), hi = scores(j, 0);
    for (std::size_t p = 1; p < P; ++p) {
      lo = std::min(lo, scores(j, static_cast<Eigen::Index>(p)));
      hi = std::max(hi, scores(j, static_cast<Eigen::Index>(p)));
    }
    float* band = result.cube.values.data() + static_cast<std::size_t>(j) * P;
    if (hi > lo) {
      const double scale = 1.0 / (hi - lo);
      for (std::size_t p = 0; p < P; ++p) {
        band[p] = static_cast<float>(
            (scores(j, static_cast<Eigen::Index>(p)) - lo) * scale);
      }
    } else {
      std::fill(band, band + P, 0.0f);
    }
  }
  return result;
}

// ---- patches ------------------------------------------------------------------

namespace {
// Mirror (symmetric, edge repeated) index into [0, n).
int mirror_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}
}  // namespace

PatchSet extract_patches(const HSICube& cube, const LabelRaster& raster,
                         int sp) {
  if (sp < 4 || sp % 4 != 0) {
    throw ParameterError("extract_patches: patch size must be a positive "
                         "multiple of 4, got " + std::to_string(sp));
  }
  if (cube.height != raster.height || cube.width != raster.width) {
    throw DimensionError("extract_patches: cube and labels disagree on the "
                         "scene extents");
  }
  const int n_classes = validate_labels(raster);

  PatchSet ps;
  ps.sp = sp;
  ps.channels = cube.bands;
  ps.n_classes = n_classes;
  const int half = sp / 2;
  const std::size_t plane = static_cast<std::size_t>(cube.height) * cube.width;
  const std::size_t pf = ps.patch_floats();

  std::size_t labeled = 0;
  for (std::uint16_t v : raster.labels) labeled += (v != 0);
  ps.labels.reserve(labeled);
  ps.rows.reserve(labeled);
  ps.cols.reserve(labeled);
  ps.values.reserve(labeled * pf);

  for (int r = 0; r < raster.height; ++r) {
    for (int c = 0; c < raster.width; ++c) {
      const std::uint16_t label = raster.at(r, c);
      if (label == 0) continue;
      ps.labels.push_back(label);
      ps.rows.push_back(r);
      ps.cols.push_back(c);
      for (int ch = 0; ch < cube.bands; ++ch) {
        const float* band = cube.values.data() + static_cast<std::size_t>(ch) * plane;
        for (int pr = 0; pr < sp; ++pr) {
          const int sr = mirror_index(r - half + pr, cube.height);
          const float* srow = band + static_cast<std::size_t>(sr) * cube.width;
          for (int pc = 0; pc < sp; ++pc) {
            const int sc = mirror_index(c - half + pc, cube.width);
            ps.values.push_back(srow[sc]);
          }
        }
      }
    }
  }
  return ps;
}

// ---- splitting and balancing ----------------------------------------------------

namespace {
// Banker's rounding with a guard for products like 0.05 * 730 whose exact
// value is a half but whose double image is a hair off it.
int round_half_even_snapped(double x) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  if (std::abs(frac - 0.5) < 1e-9) {
    const long long f = static_cast<long long>(fl);
    return static_cast<int>((f % 2 == 0) ? f : f + 1);
  }
  return static_cast<int>(std::llround(x));
}
}  // namespace

SplitSpec stratified_split(const PatchSet& patches, double fraction,
                           std::uint64_t seed,
                           const std::map<int, int>& overrides) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ParameterError("stratified_split: fraction must be inside (0,1)");
  }
  const int n = patches.n_classes;
  for (const auto& [cls, cnt] : overrides) {
    if (cls < 1 || cls > n) {
      throw ParameterError("stratified_split: override for unknown class " +
                           std::to_string(cls));
    }
    if (cnt < 1) {
      throw ParameterError("stratified_split: override count for class " +
                           std::to_string(cls) + " must be >= 1");
    }
  }

  std::vector<std::vector<std::uint32_t>> by_class(static_cast<std::size_t>(n) + 1);
  for (std::size_t i = 0; i < patches.count(); ++i) {
    by_class[patches.labels[i]].push_back(static_cast<std::uint32_t>(i));
  }

  SplitSpec split;
  for (int c = 1; c <= n; ++c) {
    std::vector<std::uint32_t>& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) {
      throw DataError("stratified_split: class " + std::to_string(c) +
                      " has no samples");
    }
    int take;
    if (auto it = overrides.find(c); it != overrides.end()) {
      take = it->second;
      if (take > static_cast<int>(members.size())) {
        throw ParameterError("stratified_split: override for class " +
                             std::to_string(c) + " exceeds its " +
                             std::to_string(members.size()) + " samples");
      }
    } else {
      take = std::max(1, round_half_even_snapped(
                             fraction * static_cast<double>(members.size())));
      take = std::min<int>(take, static_cast<int>(members.size()));
    }
    Rng rng(derive_seed(seed, {stream::kSplit, static_cast<std::uint64_t>(c)}));
    rng.shuffle(members);
    split.train.insert(split.train.end(), members.begin(), members.begin() + take);
    split.test.insert(split.test.end(), members.begin() + take, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

PatchSet subset(const PatchSet& patches, std::span<const std::uint32_t> indices) {
  PatchSet out;
  out.sp = patches.sp;
  out.channels = patches.channels;
  out.n_classes = patches.n_classes;
  const std::size_t pf = patches.patch_floats();
  out.labels.reserve(indices.size());
  out.rows.reserve(indices.size());
  out.cols.reserve(indices.size());
  out.values.reserve(indices.size() * pf);
  for (std::uint32_t i : indices) {
    if (i >= patches.count()) {
      throw ParameterError("subset: index " + std::to_string(i) +
                           " outside of " + std::to_string(patches.count()) +
                           " patches");
    }
    out.labels.push_back(patches.labels[i]);
    out.rows.push_back(patches.rows[i]);
    out.cols.push_back(patches.cols[i]);
    auto p = patches.patch(i);
    out.values.insert(out.values.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<std::size_t> class_counts(const PatchSet& patches) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(patches.n_classes) + 1, 0);
  for (std::uint16_t label : patches.labels) counts[label]++;
  return counts;
}

PatchSet random_oversample(const PatchSet& patches, std::uint64_t seed) {
  const std::vector<std::size_t> counts = class_counts(patches);
  std::size_t majority = 0;
  for (int c = 1; c <= patches.n_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw DataError("random_oversample: class " + std::to_string(c) +
                      " has no samples");
    }
    majority = std::max(majority, counts[static_cast<std::size_t>(c)]);
  }

  std::vector<std::vector<std::uint32_t>> by_class(
      static_cast<std::size_t>(patches.n_classes) + 1);
  for (std::size_t i = 0; i < patches.count(); ++i) {
    by_class[patches.labels[i]].push_back(static_cast<std::uint32_t>(i));
  }

  // All originals, then the duplicates class by class, then one shuffle.
  std::vector<std::uint32_t> order(patches.count());
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(derive_seed(seed, {stream::kOversample}));
  for (int c = 1; c <= patches.n_classes; ++c) {
    const std::vector<std::uint32_t>& members = by_class[static_cast<std::size_t>(c)];
    for (std::size_t extra = members.size(); extra < majority; ++extra) {
      const int pick = rng.uniform_int(0, static_cast<int>(members.size()) - 1);
      order.push_back(members[static_cast<std::size_t>(pick)]);
    }
  }
  rng.shuffle(order);
  return subset(patches, order);
}

// ---- synthetic scenes -----------------------------------------------------------

namespace {
// Smooth per-class spectral curve; class 0 is the background.
float class_signature(int cls, int band, int bands) {
  const double t = bands > 1 ? static_cast<double>(band) / (bands - 1) : 0.0;
  const double two_pi = 6.283185307179586;
  const double base = 0.5 + 0.32 * std::sin(two_pi * (1.0 + 0.5 * cls) * t + 0.7 * cls);
  const double ripple = 0.08 * std::sin(two_pi * (3.0 + cls) * t + 1.3 * cls);
  return static_cast<float>(base + ripple);
}
}  // namespace

SyntheticScene synth_cube(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_classes < 1) {
    throw ParameterError("synth_cube: need at least one class");
  }
  if (static_cast<int>(spec.class_sizes.size()) != spec.n_classes) {
    throw ParameterError("synth_cube: need one size per class");
  }
  if (spec.bands < 1 || spec.height < 1 || spec.width < 1) {
    throw ParameterError("synth_cube: non-positive extents");
  }
  if (!(spec.noise >= 0.0f)) {
    throw ParameterError("synth_cube: noise must be >= 0");
  }
  std::size_t total = 0;
  for (int s : spec.class_sizes) {
    if (s < 1) throw ParameterError("synth_cube: class sizes must be >= 1");
    total += static_cast<std::size_t>(s);
  }
  const std::size_t cells = static_cast<std::size_t>(spec.height) * spec.width;
  if (total > cells) {
    throw ParameterError("synth_cube: class sizes exceed the scene area");
  }

  SyntheticScene scene;
  scene.raster.height = spec.height;
  scene.raster.width = spec.width;
  scene.raster.labels.assign(cells, 0);

  // Grow one contiguous blob per class from a random start cell; when a blob
  // gets walled in, it continues from the first free cell in scan order.
  Rng layout(derive_seed(seed, {stream::kSynthLayout}));
  std::vector<std::uint32_t> start_order(cells);
  std::iota(start_order.begin(), start_order.end(), 0u);
  layout.shuffle(start_order);

  std::vector<std::deque<std::uint32_t>> frontier(
      static_cast<std::size_t>(spec.n_classes) + 1);
  std::vector<int> remaining(spec.class_sizes.begin(), spec.class_sizes.end());
  std::size_t next_start = 0;

  auto claim = [&](std::uint32_t cell, int cls) {
    scene.raster.labels[cell] = static_cast<std::uint16_t>(cls);
    frontier[static_cast<std::size_t>(cls)].push_back(cell);
    remaining[static_cast<std::size_t>(cls) - 1]--;
  };
  auto first_free_from_shuffle = [&]() -> std::uint32_t {
    while (scene.raster.labels[start_order[next_start]] != 0) ++next_start;
    return start_order[next_start];
  };

  for (int c = 1; c <= spec.n_classes; ++c) claim(first_free_from_shuffle(), c);

  bool any_left = true;
  while (any_left) {
    any_left = false;
    for (int c = 1; c <= spec.n_classes; ++c) {
      if (remaining[static_cast<std::size_t>(c) - 1] == 0) continue;
      any_left = true;
      std::deque<std::uint32_t>& q = frontier[static_cast<std::size_t>(c)];
      bool grew = false;
      while (!q.empty() && !grew) {
        const std::uint32_t cell = q.front();
        const int r = static_cast<int>(cell) / spec.width;
        const int col = static_cast<int>(cell) % spec.width;
        const int dr[4] = {-1, 0, 1, 0};
        const int dc[4] = {0, 1, 0, -1};
        for (int d = 0; d < 4; ++d) {
          const int nr = r + dr[d], nc = col + dc[d];
          if (nr < 0 || nr >= spec.height || nc < 0 || nc >= spec.width) continue;
          const std::uint32_t ncell =
              static_cast<std::uint32_t>(nr) * spec.width + nc;
          if (scene.raster.labels[ncell] == 0) {
            claim(ncell, c);
            grew = true;
            break;
          }
        }
        if (!grew) q.pop_front();  // fully surrounded
      }
      if (!grew) {
        // walled in: restart the blob elsewhere
        claim(first_free_from_shuffle(), c);
      }
    }
  }

  // Spectra: shared class signature plus Gaussian noise, pixel-major draws.
  scene.cube.height = spec.height;
  scene.cube.width = spec.width;
  scene.cube.bands = spec.bands;
  scene.cube.values.resize(cells * static_cast<std::size_t>(spec.bands));
  Rng noise(derive_seed(seed, {stream::kSynthNoise}));
  for (std::size_t p = 0; p < cells; ++p) {
    const int cls = scene.raster.labels[p];
    for (int b = 0; b < spec.bands; ++b) {
      float v = class_signature(cls, b, spec.bands);
      if (spec.noise > 0.0f) v += noise.normal(0.0f, spec.noise);
      scene.cube.values[static_cast<std::size_t>(b) * cells + p] = v;
    }
  }
  return scene;
}

}  // namespace mfegan
