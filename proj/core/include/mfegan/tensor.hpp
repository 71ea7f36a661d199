#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfegan/errors.hpp"

namespace mfegan {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<float>> data;
  std::vector<float> grad;  // allocated lazily; persists across backward calls
  bool requires_grad = false;
  bool leaf = true;
  // Reductions additionally carry their float64-accumulated value so that
  // loss reporting and numeric differencing are not limited to f32 precision.
  std::optional<double> scalar_f64;
};
}  // namespace detail

// Shared handle to an n-dimensional float32 array.  Copies alias the same
// storage; clone() makes a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values,
                     bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int dim(int i) const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::size_t numel() const;

  float* data();
  const float* data() const;
  std::span<float> values() { return {data(), numel()}; }
  std::span<const float> values() const { return {data(), numel()}; }

  // Scalar access; ContractError unless numel() == 1.
  float item() const;
  // Float64 value of a scalar produced by a reduction (falls back to the
  // widened f32 value when no f64 accumulation was recorded).
  double item_f64() const;

  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<float> grad();              // allocates a zeroed buffer on demand
  std::span<const float> grad() const;  // ContractError when absent
  void zero_grad();

  // New leaf sharing this tensor's storage (edits are visible both ways).
  Tensor detach() const;
  // Deep copy: fresh leaf with its own storage, no grad.
  Tensor clone() const;

  detail::TensorImpl* impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Grad buffers visible to backward functions during a reverse sweep.
// Gradients for leaves accumulate into the tensor's persistent buffer;
// gradients for intermediates live in per-sweep scratch storage.
class GradStore {
 public:
  // Gradient of `t` if one has been produced this sweep (or, for leaves,
  // ever); nullptr otherwise.
  const float* grad_of(const Tensor& t) const;
  // Accumulation target for `t`, allocated zeroed on first request.
  float* grad_accum(const Tensor& t);

 private:
  friend class Tape;
  std::unordered_map<detail::TensorImpl*, std::vector<float>> scratch_;
};

using BackwardFn = std::function<void(GradStore&)>;

// Record of operations for reverse-mode differentiation.  Nodes are appended
// in execution order; backward() visits them in reverse, which is a valid
// topological order of the data flow.
class Tape {
 public:
  struct Node {
    detail::TensorImpl* output;
    BackwardFn backward;
    // Keeps every tensor the backward closure touches alive.
    std::vector<Tensor> pinned;
  };

  void record(Tensor output, std::vector<Tensor> pinned, BackwardFn fn);

  // Reverse sweep seeded with d(loss)/d(loss) = 1.  `loss` must be a scalar
  // recorded on this tape.  Leaf gradients accumulate additively, so two
  // backward calls double them.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// The currently recording tape for this thread, or nullptr when either no
// TapeScope is active or a NoGradScope suppresses recording.
Tape* current_tape();

// Installs `t` as the recording tape for the current scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& t);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* saved_;
};

// Temporarily disables recording (forward-only evaluation).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* saved_;
};

// Throws NumericError when the span holds a NaN or Inf; `what` names the
// producing operation.
void check_finite(std::span<const float> v, const char* what);

}  // namespace mfegan
