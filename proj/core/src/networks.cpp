#include "mfegan/networks.hpp"

#include <algorithm>
#include <cstring>
#include <map>

#include "mfegan/errors.hpp"
#include "mfegan/ops.hpp"

namespace mfegan {

namespace {

void check_geometry(int sp, int n_classes, const LayerWidths& w) {
  if (sp < 4 || sp % 4 != 0) {
    throw ParameterError("network: patch size must be a positive multiple of "
                         "4, got " + std::to_string(sp));
  }
  if (n_classes < 1) {
    throw ParameterError("network: need at least one class");
  }
  if (w.a < 1 || w.b < 1 || w.c < 1) {
    throw ParameterError("network: layer widths must be positive");
  }
}

Tensor normal_init(Shape shape, float mean, float stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (float& v : t.values()) v = rng.normal(mean, stddev);
  return t;
}

BatchNormParams make_batchnorm(int channels, Rng& rng) {
  BatchNormParams bn;
  bn.gamma = normal_init({channels}, 1.0f, 0.02f, rng);
  bn.beta = Tensor::zeros({channels}, true);
  bn.running_mean.assign(static_cast<std::size_t>(channels), 0.0f);
  bn.running_var.assign(static_cast<std::size_t>(channels), 1.0f);
  return bn;
}

BatchNormParams clone_batchnorm(const BatchNormParams& bn) {
  return {bn.gamma.clone(), bn.beta.clone(), bn.running_mean, bn.running_var};
}

CheckpointRecord record_of(const std::string& name, const Tensor& t) {
  return {name, t.shape(), {t.values().begin(), t.values().end()}};
}

CheckpointRecord record_of(const std::string& name,
                           const std::vector<float>& v) {
  return {name, {static_cast<int>(v.size())}, v};
}

// Record lookup for load_*: every expected name must be present with the
// expected shape; extra records under the prefix are rejected.
struct RecordMap {
  std::map<std::string, const CheckpointRecord*> by_name;
  std::size_t used = 0;

  explicit RecordMap(std::span<const CheckpointRecord> records,
                     const std::string& prefix) {
    for (const CheckpointRecord& r : records) {
      if (r.name.rfind(prefix + ".", 0) == 0) by_name[r.name] = &r;
    }
  }

  const CheckpointRecord& take(const std::string& name, const Shape& shape) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ContractError("weights: missing record '" + name + "'");
    }
    if (it->second->shape != shape) {
      throw ContractError("weights: record '" + name + "' has the wrong shape");
    }
    ++used;
    return *it->second;
  }

  void expect_exhausted() const {
    if (used != by_name.size()) {
      throw ContractError("weights: unexpected extra records under the prefix");
    }
  }
};

void load_into(Tensor& t, const CheckpointRecord& r) {
  std::copy(r.values.begin(), r.values.end(), t.values().begin());
}

}  // namespace

// ---- construction ---------------------------------------------------------------

Generator build_generator(int sp, int n_classes, std::uint64_t seed,
                          LayerWidths widths) {
  check_geometry(sp, n_classes, widths);
  Rng rng(derive_seed(seed, {stream::kInitG}));
  Generator g;
  g.sp = sp;
  g.n_classes = n_classes;
  g.widths = widths;

  const int in = kLatentDim + n_classes;
  const int k1 = sp / 4;
  g.lin_w = normal_init({in, widths.a}, 0.0f, 0.02f, rng);
  g.lin_b = Tensor::zeros({widths.a}, true);
  g.dc1_k = normal_init({widths.a, widths.b, k1, k1}, 0.0f, 0.02f, rng);
  g.bn1 = make_batchnorm(widths.b, rng);
  g.dc2_k = normal_init({widths.b, widths.c, 4, 4}, 0.0f, 0.02f, rng);
  g.bn2 = make_batchnorm(widths.c, rng);
  g.dc3_k = normal_init({widths.c, 3, 4, 4}, 0.0f, 0.02f, rng);
  g.dc3_b = Tensor::zeros({3}, true);
  return g;
}

Discriminator build_discriminator(int sp, int n_classes, std::uint64_t seed,
                                  LayerWidths widths) {
  check_geometry(sp, n_classes, widths);
  Rng rng(derive_seed(seed, {stream::kInitD}));
  Discriminator d;
  d.sp = sp;
  d.n_classes = n_classes;
  d.widths = widths;

  const int k3 = sp / 4;
  d.c1_k = normal_init({widths.c, 3, 4, 4}, 0.0f, 0.02f, rng);
  d.bn1 = make_batchnorm(widths.c, rng);
  d.c2_k = normal_init({widths.b, widths.c, 4, 4}, 0.0f, 0.02f, rng);
  d.bn2 = make_batchnorm(widths.b, rng);
  d.c3_k = normal_init({widths.a, widths.b, k3, k3}, 0.0f, 0.02f, rng);
  d.bn3 = make_batchnorm(widths.a, rng);
  d.src_w = normal_init({widths.a, 1}, 0.0f, 0.02f, rng);
  d.src_b = Tensor::zeros({1}, true);
  d.cls_w = normal_init({widths.a, 2 * n_classes}, 0.0f, 0.02f, rng);
  d.cls_b = Tensor::zeros({2 * n_classes}, true);
  return d;
}

std::vector<Tensor> Generator::parameters() {
  return {lin_w, lin_b, dc1_k, bn1.gamma, bn1.beta,
          dc2_k, bn2.gamma, bn2.beta, dc3_k, dc3_b};
}

Generator Generator::clone() const {
  Generator g;
  g.sp = sp;
  g.n_classes = n_classes;
  g.widths = widths;
  g.lin_w = lin_w.clone();
  g.lin_b = lin_b.clone();
  g.dc1_k = dc1_k.clone();
  g.bn1 = clone_batchnorm(bn1);
  g.dc2_k = dc2_k.clone();
  g.bn2 = clone_batchnorm(bn2);
  g.dc3_k = dc3_k.clone();
  g.dc3_b = dc3_b.clone();
  return g;
}

std::vector<Tensor> Discriminator::parameters() {
  return {c1_k, bn1.gamma, bn1.beta, c2_k, bn2.gamma, bn2.beta,
          c3_k, bn3.gamma, bn3.beta, src_w, src_b, cls_w, cls_b};
}

std::vector<Tensor> Discriminator::classifier_parameters() {
  return {c1_k, bn1.gamma, bn1.beta, c2_k, bn2.gamma, bn2.beta,
          c3_k, bn3.gamma, bn3.beta, cls_w, cls_b};
}

Discriminator Discriminator::clone() const {
  Discriminator d;
  d.sp = sp;
  d.n_classes = n_classes;
  d.widths = widths;
  d.leaky_slope = leaky_slope;
  d.dropout_p = dropout_p;
  d.c1_k = c1_k.clone();
  d.bn1 = clone_batchnorm(bn1);
  d.c2_k = c2_k.clone();
  d.bn2 = clone_batchnorm(bn2);
  d.c3_k = c3_k.clone();
  d.bn3 = clone_batchnorm(bn3);
  d.src_w = src_w.clone();
  d.src_b = src_b.clone();
  d.cls_w = cls_w.clone();
  d.cls_b = cls_b.clone();
  return d;
}

// ---- batches ---------------------------------------------------------------------

std::vector<int> sample_labels(int count, int n_classes, Rng& rng) {
  if (count < 1 || n_classes < 1) {
    throw ParameterError("sample_labels: count and class count must be positive");
  }
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (int& y : labels) y = rng.uniform_int(1, n_classes);
  return labels;
}

Tensor latent_input(std::span<const int> labels, int n_classes, Rng& rng) {
  if (labels.empty()) throw ParameterError("latent_input: empty batch");
  const int B = static_cast<int>(labels.size());
  const int cols = kLatentDim + n_classes;
  Tensor z = Tensor::zeros({B, cols});
  float* p = z.data();
  for (int b = 0; b < B; ++b, p += cols) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 1 || y > n_classes) {
      throw ParameterError("latent_input: label " + std::to_string(y) +
                           " outside 1.." + std::to_string(n_classes));
    }
    for (int i = 0; i < kLatentDim; ++i) p[i] = rng.uniform(-1.0f, 1.0f);
    p[kLatentDim + (y - 1)] = 1.0f;
  }
  return z;
}

Tensor patch_batch(const PatchSet& patches,
                   std::span<const std::uint32_t> indices) {
  if (indices.empty()) throw ParameterError("patch_batch: empty batch");
  const int B = static_cast<int>(indices.size());
  Tensor x = Tensor::zeros({B, patches.channels, patches.sp, patches.sp});
  const std::size_t pf = patches.patch_floats();
  for (int b = 0; b < B; ++b) {
    const std::uint32_t i = indices[static_cast<std::size_t>(b)];
    if (i >= patches.count()) {
      throw ParameterError("patch_batch: index " + std::to_string(i) +
                           " outside of " + std::to_string(patches.count()) +
                           " patches");
    }
    auto src = patches.patch(i);
    std::memcpy(x.data() + static_cast<std::size_t>(b) * pf, src.data(),
                pf * sizeof(float));
  }
  return x;
}

// ---- forward passes ----------------------------------------------------------------

Tensor generate(Generator& g, const Tensor& z, bool train, bool update_running) {
  if (z.rank() != 2 || z.shape()[1] != kLatentDim + g.n_classes) {
    throw DimensionError("generate: input must be [B, " +
                         std::to_string(kLatentDim + g.n_classes) + "]");
  }
  const int B = z.shape()[0];
  Tensor h = ops::relu(ops::linear(z, g.lin_w, g.lin_b));
  h = ops::reshape(h, {B, g.widths.a, 1, 1});
  h = ops::deconv2d(h, g.dc1_k, 1, 0);
  h = ops::relu(ops::batchnorm2d(h, g.bn1.gamma, g.bn1.beta, g.bn1.running_mean,
                                 g.bn1.running_var, train, update_running));
  h = ops::deconv2d(h, g.dc2_k, 2, 1);
  h = ops::relu(ops::batchnorm2d(h, g.bn2.gamma, g.bn2.beta, g.bn2.running_mean,
                                 g.bn2.running_var, train, update_running));
  h = ops::deconv2d(h, g.dc3_k, 2, 1);
  return ops::sigmoid(ops::channel_bias(h, g.dc3_b));
}

DiscOut discriminate(Discriminator& d, const Tensor& x, bool train,
                     bool update_running, Rng* dropout_rng) {
  if (x.rank() != 4 || x.shape()[1] != 3 || x.shape()[2] != d.sp ||
      x.shape()[3] != d.sp) {
    throw DimensionError("discriminate: input must be [B, 3, " +
                         std::to_string(d.sp) + ", " + std::to_string(d.sp) +
                         "]");
  }
  if (train && dropout_rng == nullptr) {
    throw ContractError("discriminate: training mode needs a dropout stream");
  }
  const int B = x.shape()[0];

  auto block = [&](const Tensor& in, const Tensor& k, BatchNormParams& bn,
                   int stride, int pad) {
    Tensor h = ops::conv2d(in, k, stride, pad);
    h = ops::batchnorm2d(h, bn.gamma, bn.beta, bn.running_mean, bn.running_var,
                         train, update_running);
    h = ops::leaky_relu(h, d.leaky_slope);
    if (train) h = ops::dropout(h, d.dropout_p, *dropout_rng);
    return h;
  };

  Tensor h = block(x, d.c1_k, d.bn1, 2, 1);
  h = block(h, d.c2_k, d.bn2, 2, 1);
  h = block(h, d.c3_k, d.bn3, 1, 0);
  h = ops::reshape(h, {B, d.widths.a});

  DiscOut out;
  out.source_prob = ops::sigmoid(ops::linear(h, d.src_w, d.src_b));
  out.class_logits = ops::linear(h, d.cls_w, d.cls_b);
  out.class_logprob = ops::log_softmax(out.class_logits);
  return out;
}

std::vector<int> classify(Discriminator& d, const Tensor& x) {
  NoGradScope guard;
  DiscOut out = discriminate(d, x, false, false, nullptr);
  const int B = x.shape()[0];
  const int cols = 2 * d.n_classes;
  const float* logits = out.class_logits.data();
  std::vector<int> labels(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const float* row = logits + static_cast<std::size_t>(b) * cols;
    int best = 0;
    for (int c = 1; c < d.n_classes; ++c) {
      if (row[c] > row[best]) best = c;
    }
    labels[static_cast<std::size_t>(b)] = best + 1;
  }
  return labels;
}

// ---- checkpoints ------------------------------------------------------------------

namespace {
void append_batchnorm_records(std::vector<CheckpointRecord>& out,
                              const std::string& base,
                              const BatchNormParams& bn) {
  out.push_back(record_of(base + ".gamma", bn.gamma));
  out.push_back(record_of(base + ".beta", bn.beta));
  out.push_back(record_of(base + ".running_mean", bn.running_mean));
  out.push_back(record_of(base + ".running_var", bn.running_var));
}

void load_batchnorm(BatchNormParams& bn, RecordMap& map,
                    const std::string& base) {
  load_into(bn.gamma, map.take(base + ".gamma", bn.gamma.shape()));
  load_into(bn.beta, map.take(base + ".beta", bn.beta.shape()));
  const int c = bn.gamma.shape()[0];
  bn.running_mean = map.take(base + ".running_mean", {c}).values;
  bn.running_var = map.take(base + ".running_var", {c}).values;
}
}  // namespace

std::vector<CheckpointRecord> generator_records(const Generator& g,
                                                const std::string& prefix) {
  std::vector<CheckpointRecord> out;
  out.push_back(record_of(prefix + ".lin.w", g.lin_w));
  out.push_back(record_of(prefix + ".lin.b", g.lin_b));
  out.push_back(record_of(prefix + ".dc1.k", g.dc1_k));
  append_batchnorm_records(out, prefix + ".bn1", g.bn1);
  out.push_back(record_of(prefix + ".dc2.k", g.dc2_k));
  append_batchnorm_records(out, prefix + ".bn2", g.bn2);
  out.push_back(record_of(prefix + ".dc3.k", g.dc3_k));
  out.push_back(record_of(prefix + ".dc3.b", g.dc3_b));
  return out;
}

std::vector<CheckpointRecord> discriminator_records(const Discriminator& d,
                                                    const std::string& prefix) {
  std::vector<CheckpointRecord> out;
  out.push_back(record_of(prefix + ".c1.k", d.c1_k));
  append_batchnorm_records(out, prefix + ".bn1", d.bn1);
  out.push_back(record_of(prefix + ".c2.k", d.c2_k));
  append_batchnorm_records(out, prefix + ".bn2", d.bn2);
  out.push_back(record_of(prefix + ".c3.k", d.c3_k));
  append_batchnorm_records(out, prefix + ".bn3", d.bn3);
  out.push_back(record_of(prefix + ".src.w", d.src_w));
  out.push_back(record_of(prefix + ".src.b", d.src_b));
  out.push_back(record_of(prefix + ".cls.w", d.cls_w));
  out.push_back(record_of(prefix + ".cls.b", d.cls_b));
  return out;
}

void load_generator(Generator& g, std::span<const CheckpointRecord> records,
                    const std::string& prefix) {
  RecordMap map(records, prefix);
  load_into(g.lin_w, map.take(prefix + ".lin.w", g.lin_w.shape()));
  load_into(g.lin_b, map.take(prefix + ".lin.b", g.lin_b.shape()));
  load_into(g.dc1_k, map.take(prefix + ".dc1.k", g.dc1_k.shape()));
  load_batchnorm(g.bn1, map, prefix + ".bn1");
  load_into(g.dc2_k, map.take(prefix + ".dc2.k", g.dc2_k.shape()));
  load_batchnorm(g.bn2, map, prefix + ".bn2");
  load_into(g.dc3_k, map.take(prefix + ".dc3.k", g.dc3_k.shape()));
  load_into(g.dc3_b, map.take(prefix + ".dc3.b", g.dc3_b.shape()));
  map.expect_exhausted();
}

void load_discriminator(Discriminator& d,
                        std::span<const CheckpointRecord> records,
                        const std::string& prefix) {
  RecordMap map(records, prefix);
  load_into(d.c1_k, map.take(prefix + ".c1.k", d.c1_k.shape()));
  load_batchnorm(d.bn1, map, prefix + ".bn1");
  load_into(d.c2_k, map.take(prefix + ".c2.k", d.c2_k.shape()));
  load_batchnorm(d.bn2, map, prefix + ".bn2");
  load_into(d.c3_k, map.take(prefix + ".c3.k", d.c3_k.shape()));
  load_batchnorm(d.bn3, map, prefix + ".bn3");
  load_into(d.src_w, map.take(prefix + ".src.w", d.src_w.shape()));
  load_into(d.src_b, map.take(prefix + ".src.b", d.src_b.shape()));
  load_into(d.cls_w, map.take(prefix + ".cls.w", d.cls_w.shape()));
  load_into(d.cls_b, map.take(prefix + ".cls.b", d.cls_b.shape()));
  map.expect_exhausted();
}

}  // namespace mfegan
