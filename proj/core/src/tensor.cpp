#include "mfegan/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace mfegan {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw DimensionError("negative extent in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace {
std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<detail::TensorImpl>();
  std::size_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<float>>(n, 0.0f);
  impl->requires_grad = requires_grad;
  impl->leaf = true;
  return impl;
}
}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  std::fill(impl->data->begin(), impl->data->end(), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  if (values.size() != n) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::make_shared<std::vector<float>>(std::move(values));
  impl->requires_grad = requires_grad;
  impl->leaf = true;
  return Tensor(std::move(impl));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

int Tensor::dim(int i) const {
  const Shape& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size())) {
    throw DimensionError("dim index " + std::to_string(i) + " out of range for " +
                         shape_str(s));
  }
  return s[static_cast<std::size_t>(i)];
}

std::size_t Tensor::numel() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data->size();
}

float* Tensor::data() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data->data();
}

const float* Tensor::data() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data->data();
}

float Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return (*impl_->data)[0];
}

double Tensor::item_f64() const {
  if (numel() != 1) {
    throw ContractError("item_f64() on non-scalar tensor " + shape_str(shape()));
  }
  if (impl_->scalar_f64) return *impl_->scalar_f64;
  return static_cast<double>((*impl_->data)[0]);
}

bool Tensor::requires_grad() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->requires_grad;
}

void Tensor::set_requires_grad(bool v) {
  if (!impl_) throw ContractError("use of an undefined tensor");
  if (!impl_->leaf && v) {
    throw ContractError("requires_grad can only be toggled on leaf tensors");
  }
  impl_->requires_grad = v;
}

bool Tensor::is_leaf() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->leaf;
}

bool Tensor::has_grad() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return !impl_->grad.empty();
}

std::span<float> Tensor::grad() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(numel(), 0.0f);
  return {impl_->grad.data(), impl_->grad.size()};
}

std::span<const float> Tensor::grad() const {
  if (!impl_ || impl_->grad.empty()) {
    throw ContractError("grad() on a tensor with no accumulated gradient");
  }
  return {impl_->grad.data(), impl_->grad.size()};
}

void Tensor::zero_grad() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const {
  if (!impl_) throw ContractError("detach() of an undefined tensor");
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;  // shared storage
  impl->requires_grad = false;
  impl->leaf = true;
  impl->scalar_f64 = impl_->scalar_f64;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  if (!impl_) throw ContractError("clone() of an undefined tensor");
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = std::make_shared<std::vector<float>>(*impl_->data);
  impl->requires_grad = impl_->requires_grad;
  impl->leaf = true;
  impl->scalar_f64 = impl_->scalar_f64;
  return Tensor(std::move(impl));
}

const float* GradStore::grad_of(const Tensor& t) const {
  auto it = scratch_.find(t.impl());
  if (it != scratch_.end()) return it->second.data();
  return nullptr;
}

float* GradStore::grad_accum(const Tensor& t) {
  detail::TensorImpl* impl = t.impl();
  if (impl->leaf) {
    if (impl->grad.empty()) impl->grad.assign(impl->data->size(), 0.0f);
    return impl->grad.data();
  }
  auto [it, inserted] = scratch_.try_emplace(impl);
  if (inserted) it->second.assign(impl->data->size(), 0.0f);
  return it->second.data();
}

void Tape::record(Tensor output, std::vector<Tensor> pinned, BackwardFn fn) {
  Node node;
  node.output = output.impl();
  node.backward = std::move(fn);
  node.pinned = std::move(pinned);
  node.pinned.push_back(std::move(output));
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got " +
                        shape_str(loss.shape()));
  }
  bool on_tape = false;
  for (const Node& n : nodes_) {
    if (n.output == loss.impl()) {
      on_tape = true;
      break;
    }
  }
  if (!on_tape) {
    throw ContractError("backward() loss was not recorded on this tape");
  }

  GradStore store;
  store.scratch_[loss.impl()] = {1.0f};
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Nodes whose output never received a gradient do not influence the loss.
    if (store.scratch_.find(it->output) == store.scratch_.end()) continue;
    it->backward(store);
  }
}

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape* current_tape() { return g_current_tape; }

TapeScope::TapeScope(Tape& t) : saved_(g_current_tape) { g_current_tape = &t; }
TapeScope::~TapeScope() { g_current_tape = saved_; }

NoGradScope::NoGradScope() : saved_(g_current_tape) { g_current_tape = nullptr; }
NoGradScope::~NoGradScope() { g_current_tape = saved_; }

void check_finite(std::span<const float> v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(what) + " produced a non-finite value");
    }
  }
}

}  // namespace mfegan
