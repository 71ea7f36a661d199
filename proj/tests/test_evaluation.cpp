#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mfegan/errors.hpp"
#include "mfegan/evaluation.hpp"
#include "mfegan/rng.hpp"

using namespace mfegan;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("mfegan_eval_" + name);
}

// Patch set with one constant-valued patch per (value, label) item, so that
// pairwise distances are easy to reason about by hand.
PatchSet make_set(int n_classes, const std::vector<std::pair<float, int>>& items,
                  int sp = 4, int channels = 1) {
  PatchSet ps;
  ps.sp = sp;
  ps.channels = channels;
  ps.n_classes = n_classes;
  for (const auto& [value, label] : items) {
    ps.labels.push_back(static_cast<std::uint16_t>(label));
    ps.rows.push_back(0);
    ps.cols.push_back(0);
    for (std::size_t j = 0; j < ps.patch_floats(); ++j) {
      ps.values.push_back(value);
    }
  }
  return ps;
}

// Metric re-derivation straight from the label vectors, bypassing the
// library's confusion-matrix path entirely.
struct RefMetrics {
  double oa, aa, kappa;
  std::vector<double> per_class;
};

RefMetrics ref_metrics(const std::vector<int>& truth,
                       const std::vector<int>& pred, int n_classes) {
  const double total = static_cast<double>(truth.size());
  double matches = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == pred[i]) matches += 1;
  }
  RefMetrics r;
  r.oa = matches / total;
  r.per_class.assign(static_cast<std::size_t>(n_classes), 0.0);
  double recall_sum = 0;
  int observed = 0;
  double chance = 0;
  for (int c = 1; c <= n_classes; ++c) {
    double in_truth = 0, in_pred = 0, correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c) in_truth += 1;
      if (pred[i] == c) in_pred += 1;
      if (truth[i] == c && pred[i] == c) correct += 1;
    }
    if (in_truth > 0) {
      r.per_class[static_cast<std::size_t>(c - 1)] = correct / in_truth;
      recall_sum += correct / in_truth;
      ++observed;
    }
    chance += in_truth * in_pred;
  }
  r.aa = observed > 0 ? recall_sum / observed : 0.0;
  chance /= total * total;
  r.kappa = chance >= 1.0 ? (r.oa == 1.0 ? 1.0 : 0.0)
                          : (r.oa - chance) / (1.0 - chance);
  return r;
}

struct Ppm {
  std::uint32_t width = 0, height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;
};

// Minimal strict P6 reader for round-trip checks.
Ppm read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string magic;
  in >> magic;
  REQUIRE(magic == "P6");
  Ppm ppm;
  unsigned maxval = 0;
  in >> ppm.width >> ppm.height >> maxval;
  REQUIRE(maxval == 255);
  char ws = 0;
  in.get(ws);  // the single whitespace byte before the raster
  REQUIRE((ws == '\n' || ws == ' '));
  ppm.pixels.resize(static_cast<std::size_t>(ppm.width) * ppm.height);
  in.read(reinterpret_cast<char*>(ppm.pixels.data()),
          static_cast<std::streamsize>(ppm.pixels.size() * 3));
  REQUIRE(in.gcount() ==
          static_cast<std::streamsize>(ppm.pixels.size() * 3));
  in.get(ws);
  REQUIRE(in.eof());  // nothing after the raster
  return ppm;
}

}  // namespace

TEST_CASE("confusion matrix counts and validation") {
  const std::vector<int> truth = {1, 1, 2, 2, 3, 3, 3};
  const std::vector<int> pred = {1, 2, 2, 2, 3, 1, 3};
  const auto cm = confusion(truth, pred, 3);
  const std::vector<std::size_t> want = {1, 1, 0,   // true 1 -> pred 1,2,3
                                         0, 2, 0,   // true 2
                                         1, 0, 2};  // true 3
  CHECK(cm == want);

  CHECK_THROWS_AS(confusion(truth, pred, 0), ParameterError);
  CHECK_THROWS_AS(confusion(truth, std::vector<int>{1, 2}, 3), DimensionError);
  CHECK_THROWS_AS(confusion({}, {}, 3), DataError);
  CHECK_THROWS_AS(confusion(std::vector<int>{4}, std::vector<int>{1}, 3),
                  ParameterError);
  CHECK_THROWS_AS(confusion(std::vector<int>{1}, std::vector<int>{0}, 3),
                  ParameterError);
}

TEST_CASE("metrics match the worked two-class example") {
  // counts: [[40, 10], [5, 45]]
  const std::vector<std::size_t> cm = {40, 10, 5, 45};
  const auto m = compute_metrics(cm, 2);
  CHECK(m.oa == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(m.per_class[0] == doctest::Approx(0.80).epsilon(1e-12));
  CHECK(m.per_class[1] == doctest::Approx(0.90).epsilon(1e-12));
  CHECK(m.aa == doctest::Approx(0.85).epsilon(1e-12));
  // chance agreement (50*45 + 50*55) / 100^2 = 0.5 -> kappa = 0.35 / 0.5
  CHECK(m.kappa == doctest::Approx(0.70).epsilon(1e-12));
}

TEST_CASE("average accuracy skips classes absent from the truth") {
  const std::vector<std::size_t> cm = {40, 10, 0,  //
                                       5,  45, 0,  //
                                       0,  0,  0};
  const auto m = compute_metrics(cm, 3);
  CHECK(m.oa == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(m.per_class[2] == 0.0);
  CHECK(m.aa == doctest::Approx(0.85).epsilon(1e-12));  // mean of 0.8, 0.9
  CHECK(m.kappa == doctest::Approx(0.70).epsilon(1e-12));
}

TEST_CASE("degenerate chance agreement") {
  // Everything is class 1 and predicted as class 1: chance agreement is 1
  // and the kappa ratio is 0/0; perfect agreement reports 1.
  const std::vector<std::size_t> cm = {7, 0, 0, 0};
  const auto m = compute_metrics(cm, 2);
  CHECK(m.oa == 1.0);
  CHECK(m.aa == 1.0);
  CHECK(m.kappa == 1.0);

  CHECK_THROWS_AS(compute_metrics(std::vector<std::size_t>{0, 0, 0, 0}, 2),
                  DataError);
  CHECK_THROWS_AS(compute_metrics(cm, 3), DimensionError);
  CHECK_THROWS_AS(compute_metrics(cm, 0), ParameterError);
}

TEST_CASE("metrics agree with a direct label-space re-derivation") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_classes = rng.uniform_int(2, 7);
    const int count = rng.uniform_int(30, 200);
    std::vector<int> truth(static_cast<std::size_t>(count));
    std::vector<int> pred(static_cast<std::size_t>(count));
    // Skew the truth labels so empty classes actually occur in some trials.
    const int truth_hi = rng.uniform_int(1, n_classes);
    for (int i = 0; i < count; ++i) {
      truth[static_cast<std::size_t>(i)] = rng.uniform_int(1, truth_hi);
      pred[static_cast<std::size_t>(i)] = rng.uniform_int(1, n_classes);
    }
    const auto cm = confusion(truth, pred, n_classes);
    // Row sums count the true labels; the total is the sample count.
    std::size_t total = 0;
    for (auto v : cm) total += v;
    CHECK(total == static_cast<std::size_t>(count));

    const auto got = compute_metrics(cm, n_classes);
    const auto want = ref_metrics(truth, pred, n_classes);
    CHECK(got.oa == doctest::Approx(want.oa).epsilon(1e-12));
    CHECK(got.aa == doctest::Approx(want.aa).epsilon(1e-12));
    CHECK(got.kappa == doctest::Approx(want.kappa).epsilon(1e-12));
    for (int c = 0; c < n_classes; ++c) {
      CHECK(got.per_class[static_cast<std::size_t>(c)] ==
            doctest::Approx(want.per_class[static_cast<std::size_t>(c)])
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("mcnemar statistic") {
  // 40 samples where only a is right, 10 where only b is right, 10 where
  // both are right: |40 - 10| / sqrt(50).
  std::vector<int> truth, a, b;
  for (int i = 0; i < 40; ++i) {
    truth.push_back(1);
    a.push_back(1);
    b.push_back(2);
  }
  for (int i = 0; i < 10; ++i) {
    truth.push_back(1);
    a.push_back(2);
    b.push_back(1);
  }
  for (int i = 0; i < 10; ++i) {
    truth.push_back(1);
    a.push_back(1);
    b.push_back(1);
  }
  const double m = mcnemar(truth, a, b);
  CHECK(m == doctest::Approx(4.242640687119285).epsilon(1e-12));
  CHECK(m > 1.96);  // counts as a significant difference
  CHECK(mcnemar(truth, b, a) == doctest::Approx(m).epsilon(1e-15));

  // No disagreements at all (identical predictions, and also the case where
  // both classifiers are wrong together) -> 0.
  CHECK(mcnemar(truth, a, a) == 0.0);
  const std::vector<int> t2 = {1, 1, 1};
  const std::vector<int> wrong_a = {2, 2, 2};
  const std::vector<int> wrong_b = {3, 3, 3};
  CHECK(mcnemar(t2, wrong_a, wrong_b) == 0.0);

  CHECK_THROWS_AS(mcnemar(t2, wrong_a, std::vector<int>{1}), DimensionError);
  CHECK_THROWS_AS(mcnemar({}, {}, {}), DataError);
}

TEST_CASE("nearest-neighbour vote hand cases") {
  SUBCASE("single nearest neighbour") {
    const auto train =
        make_set(3, {{0.0f, 1}, {1.0f, 2}, {2.0f, 3}});
    const auto queries = make_set(3, {{1.2f, 1}, {1.9f, 1}, {0.1f, 1}});
    CHECK(knn_classify(train, queries, 1) == std::vector<int>{2, 3, 1});
  }
  SUBCASE("distance tie goes to the lower training index") {
    const auto train = make_set(2, {{1.0f, 2}, {3.0f, 1}});
    const auto queries = make_set(2, {{2.0f, 1}});
    CHECK(knn_classify(train, queries, 1) == std::vector<int>{2});
  }
  SUBCASE("vote tie goes to the smaller class id") {
    const auto train = make_set(3, {{0.9f, 3}, {1.1f, 2}});
    const auto queries = make_set(3, {{1.0f, 1}});
    CHECK(knn_classify(train, queries, 2) == std::vector<int>{2});
  }
  SUBCASE("majority beats proximity") {
    const auto train =
        make_set(2, {{1.00f, 1}, {1.01f, 2}, {1.02f, 2}, {5.0f, 1}});
    const auto queries = make_set(2, {{1.0f, 1}});
    CHECK(knn_classify(train, queries, 3) == std::vector<int>{2});
  }
  SUBCASE("argument validation") {
    const auto train = make_set(2, {{0.0f, 1}, {1.0f, 2}});
    const auto queries = make_set(2, {{0.5f, 1}});
    CHECK_THROWS_AS(knn_classify(train, queries, 0), ParameterError);
    CHECK_THROWS_AS(knn_classify(train, queries, 3), ParameterError);
    const auto wide = make_set(2, {{0.5f, 1}}, 8, 1);
    CHECK_THROWS_AS(knn_classify(train, wide, 1), DimensionError);
    const auto empty = make_set(2, {});
    CHECK_THROWS_AS(knn_classify(empty, queries, 1), DataError);
  }
}

TEST_CASE("nearest-neighbour vote matches a brute-force reference") {
  Rng rng(4242);
  PatchSet train;
  train.sp = 4;
  train.channels = 2;
  train.n_classes = 4;
  const int tn = 40;
  for (int i = 0; i < tn; ++i) {
    train.labels.push_back(
        static_cast<std::uint16_t>(rng.uniform_int(1, 4)));
    train.rows.push_back(0);
    train.cols.push_back(0);
    for (std::size_t j = 0; j < train.patch_floats(); ++j) {
      train.values.push_back(rng.uniform());
    }
  }
  PatchSet queries = train;
  queries.labels.clear();
  queries.rows.clear();
  queries.cols.clear();
  queries.values.clear();
  for (int i = 0; i < 15; ++i) {
    queries.labels.push_back(1);
    queries.rows.push_back(0);
    queries.cols.push_back(0);
    for (std::size_t j = 0; j < queries.patch_floats(); ++j) {
      queries.values.push_back(rng.uniform());
    }
  }

  const int k = 5;
  const auto got = knn_classify(train, queries, k);
  REQUIRE(got.size() == queries.count());
  for (std::size_t q = 0; q < queries.count(); ++q) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t t = 0; t < train.count(); ++t) {
      double acc = 0;
      for (std::size_t j = 0; j < train.patch_floats(); ++j) {
        const double d = static_cast<double>(queries.patch(q)[j]) -
                         static_cast<double>(train.patch(t)[j]);
        acc += d * d;
      }
      dist.emplace_back(acc, t);
    }
    std::sort(dist.begin(), dist.end());
    std::array<int, 5> votes{};  // class ids 1..4 -> slots 1..4
    for (int j = 0; j < k; ++j) {
      votes[train.labels[dist[static_cast<std::size_t>(j)].second]] += 1;
    }
    int best = 1;
    for (int c = 2; c <= 4; ++c) {
      if (votes[static_cast<std::size_t>(c)] >
          votes[static_cast<std::size_t>(best)]) {
        best = c;
      }
    }
    CHECK(got[q] == best);
  }
}

TEST_CASE("label-map rendering round-trips through a P6 reader") {
  LabelRaster raster;
  raster.height = 4;
  raster.width = 5;
  raster.labels = {0, 1,  2,  3,  4,   //
                   5, 6,  7,  8,  9,   //
                   10, 11, 12, 13, 14,  //
                   15, 16, 17, 0,  1};
  const auto path = temp_file("map.ppm");
  render_map(raster, path);

  const auto ppm = read_ppm(path);
  CHECK(ppm.width == 5);
  CHECK(ppm.height == 4);
  const auto palette = class_palette();
  REQUIRE(palette.size() == 17);
  for (std::size_t i = 0; i < raster.labels.size(); ++i) {
    const auto label = raster.labels[i];
    const std::size_t idx =
        label == 0 ? 0 : (static_cast<std::size_t>(label) - 1) % 16 + 1;
    CHECK(ppm.pixels[i] == palette[idx]);
  }
  // Label 17 wraps to the first class color; label 0 stays black.
  CHECK(ppm.pixels[17] == palette[1]);
  CHECK(ppm.pixels[0] == std::array<std::uint8_t, 3>{0, 0, 0});
  fs::remove(path);
}

TEST_CASE("palette colors are distinct") {
  const auto palette = class_palette();
  REQUIRE(palette.size() == 17);
  for (std::size_t i = 0; i < palette.size(); ++i) {
    for (std::size_t j = i + 1; j < palette.size(); ++j) {
      CHECK(palette[i] != palette[j]);
    }
  }
}

TEST_CASE("label-map rendering validates its input") {
  LabelRaster empty;
  CHECK_THROWS_AS(render_map(empty, temp_file("bad.ppm")), DataError);
  LabelRaster mismatched;
  mismatched.height = 2;
  mismatched.width = 2;
  mismatched.labels = {1, 2, 3};
  CHECK_THROWS_AS(render_map(mismatched, temp_file("bad.ppm")),
                  DimensionError);
}
