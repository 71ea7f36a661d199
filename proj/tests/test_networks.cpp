#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "mfegan/gradcheck.hpp"
#include "mfegan/networks.hpp"
#include "mfegan/ops.hpp"

using namespace mfegan;

namespace {

std::size_t total_count(std::vector<Tensor> params) {
  std::size_t n = 0;
  for (const Tensor& t : params) n += t.numel();
  return n;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.numel() * 4) == 0;
}

// miniature geometry keeps the finite-difference checks fast
constexpr LayerWidths kTiny{8, 6, 4};

}  // namespace

// ---- construction and initialization ----------------------------------------------

TEST_CASE("network construction validates its geometry") {
  CHECK_THROWS_AS(build_generator(10, 4, 1), ParameterError);
  CHECK_THROWS_AS(build_generator(0, 4, 1), ParameterError);
  CHECK_THROWS_AS(build_generator(20, 0, 1), ParameterError);
  CHECK_THROWS_AS(build_discriminator(18, 4, 1), ParameterError);
  CHECK_THROWS_AS(build_discriminator(20, 4, 1, {0, 2, 2}), ParameterError);
}

TEST_CASE("full-size parameter counts") {
  Generator g = build_generator(20, 16, 1);
  Discriminator d = build_discriminator(20, 16, 1);
  // generator: 116*512 + 512 | 512*256*5*5 + 2*256 | 256*128*4*4 + 2*128
  //            | 128*3*4*4 + 3
  CHECK(total_count(g.parameters()) == 3867907u);
  // discriminator: 128*3*4*4 + 2*128 | 256*128*4*4 + 2*256 | 512*256*5*5
  //                + 2*512 | 512+1 | 512*32+32
  CHECK(total_count(d.parameters()) == 3825953u);
  // everything but the source head
  CHECK(total_count(d.classifier_parameters()) == 3825953u - 513u);

  for (Tensor& t : g.parameters()) {
    CHECK(t.requires_grad());
    CHECK(t.is_leaf());
  }
  for (Tensor& t : d.parameters()) {
    CHECK(t.requires_grad());
    CHECK(t.is_leaf());
  }
}

TEST_CASE("initialization is seeded and follows the documented statistics") {
  Generator a = build_generator(20, 9, 77);
  Generator b = build_generator(20, 9, 77);
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(bitwise_equal(pa[i], pb[i]));

  Generator c = build_generator(20, 9, 78);
  CHECK(!bitwise_equal(a.lin_w, c.lin_w));

  // weights around N(0, 0.02) — 3.3M draws pin the moments tightly
  double sum = 0.0, sq = 0.0;
  for (float v : a.dc1_k.values()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(a.dc1_k.numel());
  const double mean = sum / n;
  const double stddev = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 1e-4);
  CHECK(stddev == doctest::Approx(0.02).epsilon(0.02));

  // gains around N(1, 0.02); shifts, biases and running stats at their rests
  double gsum = 0.0;
  for (float v : a.bn1.gamma.values()) gsum += v;
  CHECK(gsum / 256.0 == doctest::Approx(1.0).epsilon(0.01));
  for (float v : a.lin_b.values()) CHECK(v == 0.0f);
  for (float v : a.dc3_b.values()) CHECK(v == 0.0f);
  for (float v : a.bn1.beta.values()) CHECK(v == 0.0f);
  for (float v : a.bn1.running_mean) CHECK(v == 0.0f);
  for (float v : a.bn1.running_var) CHECK(v == 1.0f);
}

// ---- batch builders -----------------------------------------------------------------

TEST_CASE("latent inputs carry uniform draws and a one-hot class code") {
  Rng rng(5);
  const std::vector<int> labels = {2, 1, 3, 3};
  Tensor z = latent_input(labels, 3, rng);
  REQUIRE(z.shape() == Shape({4, kLatentDim + 3}));
  const int cols = kLatentDim + 3;
  for (int b = 0; b < 4; ++b) {
    const float* row = z.data() + static_cast<std::size_t>(b) * cols;
    for (int i = 0; i < kLatentDim; ++i) {
      CHECK(row[i] >= -1.0f);
      CHECK(row[i] < 1.0f);
    }
    for (int c = 0; c < 3; ++c) {
      const float want = (c == labels[static_cast<std::size_t>(b)] - 1) ? 1.0f : 0.0f;
      CHECK(row[kLatentDim + c] == want);
    }
  }

  Rng rng2(5);
  Tensor z2 = latent_input(labels, 3, rng2);
  CHECK(bitwise_equal(z, z2));

  const std::vector<int> bad = {4};
  CHECK_THROWS_AS(latent_input(bad, 3, rng), ParameterError);
  const std::vector<int> none;
  CHECK_THROWS_AS(latent_input(none, 3, rng), ParameterError);
}

TEST_CASE("label sampling covers 1..N") {
  Rng rng(9);
  std::vector<int> labels = sample_labels(500, 4, rng);
  std::vector<int> seen(5, 0);
  for (int y : labels) {
    REQUIRE(y >= 1);
    REQUIRE(y <= 4);
    seen[static_cast<std::size_t>(y)]++;
  }
  for (int c = 1; c <= 4; ++c) CHECK(seen[static_cast<std::size_t>(c)] > 0);

  Rng r1(3), r2(3);
  CHECK(sample_labels(20, 4, r1) == sample_labels(20, 4, r2));
  CHECK_THROWS_AS(sample_labels(0, 4, rng), ParameterError);
}

TEST_CASE("patch batches copy the selected payloads") {
  PatchSet ps;
  ps.sp = 4;
  ps.channels = 2;
  ps.n_classes = 2;
  for (int i = 0; i < 3; ++i) {
    ps.labels.push_back(1);
    ps.rows.push_back(i);
    ps.cols.push_back(i);
    for (std::size_t j = 0; j < ps.patch_floats(); ++j) {
      ps.values.push_back(static_cast<float>(i * 100) + j);
    }
  }
  const std::vector<std::uint32_t> pick = {2, 0};
  Tensor x = patch_batch(ps, pick);
  REQUIRE(x.shape() == Shape({2, 2, 4, 4}));
  CHECK(std::memcmp(x.data(), ps.patch(2).data(), ps.patch_floats() * 4) == 0);
  CHECK(std::memcmp(x.data() + ps.patch_floats(), ps.patch(0).data(),
                    ps.patch_floats() * 4) == 0);
  const std::vector<std::uint32_t> bad = {3};
  CHECK_THROWS_AS(patch_batch(ps, bad), ParameterError);
}

// ---- forward passes ------------------------------------------------------------------

TEST_CASE("full-size forward shapes hold for every supported patch size") {
  for (int sp : {20, 24, 28}) {
    CAPTURE(sp);
    const int N = 9;
    Generator g = build_generator(sp, N, 2);
    Discriminator d = build_discriminator(sp, N, 2);
    Rng rng(4);
    const std::vector<int> labels = sample_labels(3, N, rng);
    Tensor z = latent_input(labels, N, rng);

    Tensor fake = generate(g, z, true, true);
    REQUIRE(fake.shape() == Shape({3, 3, sp, sp}));
    for (float v : fake.values()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }

    Rng drop(6);
    DiscOut out = discriminate(d, fake, true, true, &drop);
    REQUIRE(out.source_prob.shape() == Shape({3, 1}));
    REQUIRE(out.class_logprob.shape() == Shape({3, 2 * N}));
    REQUIRE(out.class_logits.shape() == Shape({3, 2 * N}));
    for (float v : out.source_prob.values()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
    // log-softmax rows exponentiate to probability vectors
    for (int b = 0; b < 3; ++b) {
      double total = 0.0;
      for (int k = 0; k < 2 * N; ++k) {
        total += std::exp(static_cast<double>(
            out.class_logprob.values()[static_cast<std::size_t>(b) * 2 * N + k]));
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
    }
  }
}

TEST_CASE("forward passes validate their inputs") {
  Generator g = build_generator(8, 2, 1, kTiny);
  Discriminator d = build_discriminator(8, 2, 1, kTiny);
  Tensor bad_z = Tensor::zeros({2, kLatentDim + 3});
  CHECK_THROWS_AS(generate(g, bad_z, false, false), DimensionError);
  Tensor bad_x = Tensor::zeros({2, 1, 8, 8});
  CHECK_THROWS_AS(discriminate(d, bad_x, false, false, nullptr), DimensionError);
  Tensor x = Tensor::zeros({2, 3, 8, 8});
  CHECK_THROWS_AS(discriminate(d, x, true, false, nullptr), ContractError);
}

TEST_CASE("eval-mode forwards are deterministic and leave running stats alone") {
  Generator g = build_generator(8, 3, 5, kTiny);
  Rng rng(7);
  Tensor z = latent_input(sample_labels(2, 3, rng), 3, rng);

  Tensor a = generate(g, z, false, false);
  Tensor b = generate(g, z, false, false);
  CHECK(bitwise_equal(a, b));
  for (float v : g.bn1.running_mean) CHECK(v == 0.0f);
  for (float v : g.bn1.running_var) CHECK(v == 1.0f);

  // train-mode forward with suppressed update also leaves them alone
  Tensor c = generate(g, z, true, false);
  for (float v : g.bn1.running_mean) CHECK(v == 0.0f);
  for (float v : g.bn1.running_var) CHECK(v == 1.0f);

  // ... and with the update enabled they move
  Tensor e = generate(g, z, true, true);
  bool moved = false;
  for (float v : g.bn1.running_mean) moved |= (v != 0.0f);
  CHECK(moved);
}

TEST_CASE("classification takes the best real-class column, low id on ties") {
  Discriminator d = build_discriminator(8, 3, 11, kTiny);
  Rng rng(13);
  Tensor x = Tensor::zeros({4, 3, 8, 8});
  for (float& v : x.values()) v = rng.uniform(0.0f, 1.0f);

  std::vector<int> labels = classify(d, x);
  REQUIRE(labels.size() == 4);

  // must agree with an eval forward inspected by hand
  {
    NoGradScope guard;
    DiscOut out = discriminate(d, x, false, false, nullptr);
    for (int b = 0; b < 4; ++b) {
      const float* row = out.class_logits.data() + static_cast<std::size_t>(b) * 6;
      int best = 0;
      for (int c = 1; c < 3; ++c) {
        if (row[c] > row[best]) best = c;
      }
      CHECK(labels[static_cast<std::size_t>(b)] == best + 1);
      CHECK(labels[static_cast<std::size_t>(b)] >= 1);
      CHECK(labels[static_cast<std::size_t>(b)] <= 3);
    }
  }

  // a zeroed class head makes every column tie -> everything is class 1
  std::fill(d.cls_w.values().begin(), d.cls_w.values().end(), 0.0f);
  std::fill(d.cls_b.values().begin(), d.cls_b.values().end(), 0.0f);
  for (int y : classify(d, x)) CHECK(y == 1);
}

// ---- gradient flow ---------------------------------------------------------------------

TEST_CASE("training-mode losses reach every trainable parameter") {
  Generator g = build_generator(8, 2, 21, kTiny);
  Discriminator d = build_discriminator(8, 2, 22, kTiny);
  Rng rng(23);
  Tensor z = latent_input(sample_labels(4, 2, rng), 2, rng);

  Tape tape;
  {
    TapeScope scope(tape);
    Tensor fake = generate(g, z, true, true);
    Rng drop(24);
    DiscOut out = discriminate(d, fake, true, true, &drop);
    const std::vector<int> targets = {0, 1, 2, 3};
    Tensor loss = ops::add(ops::nll(out.class_logprob, targets),
                           ops::mean_all(out.source_prob));
    tape.backward(loss);
  }

  for (Tensor& t : g.parameters()) {
    REQUIRE(t.has_grad());
    double norm = 0.0;
    for (float v : t.grad()) norm += static_cast<double>(v) * v;
    CHECK(norm > 0.0);
  }
  for (Tensor& t : d.parameters()) {
    REQUIRE(t.has_grad());
    double norm = 0.0;
    for (float v : t.grad()) norm += static_cast<double>(v) * v;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("generator gradients agree with finite differences") {
  Generator g = build_generator(8, 2, 31, kTiny);
  Rng rng(32);
  Tensor z = latent_input(sample_labels(3, 2, rng), 2, rng);

  // eval-mode forward: deterministic, kink-free at this step size
  auto f = [&]() { return ops::mean_all(generate(g, z, false, false)); };
  GradCheckResult res = grad_check(f, g.dc2_k, 5e-3, 1e-3);
  CHECK(res.deterministic);
  CHECK(res.max_rel_error < 2e-2);
}

TEST_CASE("discriminator gradients agree with finite differences") {
  Discriminator d = build_discriminator(8, 2, 41, kTiny);
  Rng rng(42);
  Tensor x = Tensor::zeros({3, 3, 8, 8});
  for (float& v : x.values()) v = rng.uniform(0.0f, 1.0f);
  const std::vector<int> targets = {0, 3, 1};

  SUBCASE("class head weight") {
    auto f = [&]() {
      DiscOut out = discriminate(d, x, false, false, nullptr);
      return ops::nll(out.class_logprob, targets);
    };
    GradCheckResult res = grad_check(f, d.cls_w, 5e-3, 1e-3);
    CHECK(res.deterministic);
    CHECK(res.max_rel_error < 2e-2);
  }

  SUBCASE("first convolution through the source head") {
    auto f = [&]() {
      DiscOut out = discriminate(d, x, false, false, nullptr);
      return ops::mean_all(out.source_prob);
    };
    GradCheckResult res = grad_check(f, d.c1_k, 5e-3, 1e-3);
    CHECK(res.deterministic);
    CHECK(res.max_rel_error < 2e-2);
  }
}

// ---- cloning and checkpoints ----------------------------------------------------------

TEST_CASE("clones are deep copies with live gradient tracking") {
  Generator g = build_generator(8, 2, 51, kTiny);
  g.bn1.running_mean[0] = 0.5f;
  Generator copy = g.clone();

  auto pg = g.parameters(), pc = copy.parameters();
  REQUIRE(pg.size() == pc.size());
  for (std::size_t i = 0; i < pg.size(); ++i) {
    CHECK(bitwise_equal(pg[i], pc[i]));
    CHECK(pc[i].requires_grad());
    CHECK(pc[i].is_leaf());
  }
  CHECK(copy.bn1.running_mean[0] == 0.5f);

  // mutating the original leaves the clone untouched
  g.lin_w.data()[0] += 1.0f;
  g.bn1.running_mean[0] = -9.0f;
  CHECK(copy.lin_w.data()[0] != g.lin_w.data()[0]);
  CHECK(copy.bn1.running_mean[0] == 0.5f);

  Discriminator d = build_discriminator(8, 2, 52, kTiny);
  Discriminator dcopy = d.clone();
  CHECK(bitwise_equal(d.cls_w, dcopy.cls_w));
  d.cls_w.data()[0] += 1.0f;
  CHECK(dcopy.cls_w.data()[0] != d.cls_w.data()[0]);
}

TEST_CASE("checkpoint records restore both networks bit for bit") {
  Generator g1 = build_generator(8, 3, 61, kTiny);
  Discriminator d1 = build_discriminator(8, 3, 62, kTiny);
  g1.bn2.running_mean[1] = 0.25f;
  d1.bn3.running_var[2] = 3.5f;

  std::vector<CheckpointRecord> records = generator_records(g1, "g");
  std::vector<CheckpointRecord> drec = discriminator_records(d1, "d");
  records.insert(records.end(), drec.begin(), drec.end());

  Generator g2 = build_generator(8, 3, 99, kTiny);
  Discriminator d2 = build_discriminator(8, 3, 98, kTiny);
  load_generator(g2, records, "g");
  load_discriminator(d2, records, "d");

  auto p1 = g1.parameters(), p2 = g2.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(bitwise_equal(p1[i], p2[i]));
  CHECK(g2.bn2.running_mean == g1.bn2.running_mean);
  CHECK(g2.bn2.running_var == g1.bn2.running_var);
  auto q1 = d1.parameters(), q2 = d2.parameters();
  for (std::size_t i = 0; i < q1.size(); ++i) CHECK(bitwise_equal(q1[i], q2[i]));
  CHECK(d2.bn3.running_var == d1.bn3.running_var);

  // loaded parameters stay trainable leaves
  for (Tensor& t : g2.parameters()) {
    CHECK(t.requires_grad());
    CHECK(t.is_leaf());
  }

  // missing record
  std::vector<CheckpointRecord> partial(records.begin() + 1, records.end());
  Generator g3 = build_generator(8, 3, 1, kTiny);
  CHECK_THROWS_AS(load_generator(g3, partial, "g"), ContractError);

  // wrong shape (different widths)
  Generator g4 = build_generator(8, 3, 1, {4, 3, 2});
  CHECK_THROWS_AS(load_generator(g4, records, "g"), ContractError);

  // stray record under the same prefix
  std::vector<CheckpointRecord> extra = records;
  extra.push_back({"g.unknown", {1}, {0.0f}});
  Generator g5 = build_generator(8, 3, 1, kTiny);
  CHECK_THROWS_AS(load_generator(g5, extra, "g"), ContractError);
}
