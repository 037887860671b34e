// Copyright 2026 The fishcast Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense 4-D tensors (batch, channel, height, width) with a reverse-mode tape.
//
// Ops take the Graph they record into as the first argument. A graph is
// single-use: backward() consumes it and must be followed by reset() before
// it records again. Leaf tensors (parameters, inputs) live outside the graph
// and receive gradients in their own grad buffer.

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace fishcast::ad {

struct Shape {
  std::array<std::size_t, 4> dims{};

  std::size_t batch() const { return dims[0]; }
  std::size_t channels() const { return dims[1]; }
  std::size_t height() const { return dims[2]; }
  std::size_t width() const { return dims[3]; }
  std::size_t plane() const { return dims[2] * dims[3]; }
  std::size_t numel() const { return dims[0] * dims[1] * dims[2] * dims[3]; }

  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

// Buffers start on a fixed 64-byte boundary. Vectorized kernels peel
// differently depending on the address, so a fixed alignment keeps results
// bit-identical from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlignment = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlignment}));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t{kAlignment}); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct TensorStorage {
  Shape shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
  bool is_leaf = true;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Shared handle; copies alias the same storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, T value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t numel() const { return s_->value.size(); }

  std::span<T> values() { return s_->value; }
  std::span<const T> values() const { return s_->value; }
  std::span<const T> grad() const { return s_->grad; }
  std::span<T> mutable_grad() {
    s_->ensure_grad();
    return s_->grad;
  }
  void zero_grad() { s_->grad.assign(s_->value.size(), T(0)); }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool on) { s_->requires_grad = on; }
  bool is_leaf() const { return s_->is_leaf; }

  // Value of a single-element tensor.
  T item() const;
  bool all_finite() const;
  // Independent leaf with the same values.
  Tensor clone() const;

  const std::shared_ptr<TensorStorage<T>>& storage() const { return s_; }

 private:
  explicit Tensor(std::shared_ptr<TensorStorage<T>> s) : s_(std::move(s)) {}
  std::shared_ptr<TensorStorage<T>> s_;
};

enum class GradMode { kEnabled, kDisabled };

template <typename T>
class Graph {
 public:
  using Backward = std::function<void()>;

  explicit Graph(GradMode mode = GradMode::kEnabled) : mode_(mode) {}

  bool grad_enabled() const { return mode_ == GradMode::kEnabled; }

  // Records `out` as produced from `inputs`. Returns false (and records
  // nothing) when gradients are disabled or no input requires them; the
  // caller's backward closure is then dropped. The closure must accumulate
  // into the grads of inputs that require them.
  bool record(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs, Backward backward);
  bool record(Tensor<T>& out, std::span<const Tensor<T>> inputs, Backward backward);

  // Seeds d(loss)/d(loss) = 1 and propagates in reverse recording order.
  // Every intermediate and every requires_grad leaf reachable from the graph
  // gets its gradient zeroed first, so leaves without a path to the loss end
  // up with zeros.
  void backward(const Tensor<T>& loss);
  void reset();

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<Tensor<T>>& leaves() const { return leaves_; }

 private:
  struct Node {
    std::shared_ptr<TensorStorage<T>> output;
    Backward backward;
  };
  bool should_record(std::span<const Tensor<T>* const> inputs) const;
  void finish_record(Tensor<T>& out, std::span<const Tensor<T>* const> inputs, Backward backward);

  GradMode mode_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::vector<Tensor<T>> leaves_;
};

// Same-padding, stride-1 cross-correlation. weight [Cout, Cin, k, k] with k
// odd; bias holds Cout values in any shape.
template <typename T>
Tensor<T> conv2d(Graph<T>& g, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> hadamard(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T factor);
template <typename T> Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& a);
template <typename T> Tensor<T> tanh(Graph<T>& g, const Tensor<T>& a);

template <typename T>
Tensor<T> concat_channels(Graph<T>& g, std::span<const Tensor<T>> parts);
template <typename T>
Tensor<T> concat_channels(Graph<T>& g, std::initializer_list<Tensor<T>> parts) {
  return concat_channels<T>(g, std::span<const Tensor<T>>(parts.begin(), parts.size()));
}
template <typename T>
Tensor<T> slice_channels(Graph<T>& g, const Tensor<T>& a, std::size_t begin, std::size_t count);
template <typename T>
std::vector<Tensor<T>> split_channels(Graph<T>& g, const Tensor<T>& a, std::span<const std::size_t> sizes);

// Scalar reductions, shape [1,1,1,1].
template <typename T> Tensor<T> sum(Graph<T>& g, const Tensor<T>& a);
template <typename T> Tensor<T> mean(Graph<T>& g, const Tensor<T>& a);
template <typename T> Tensor<T> l1_loss(Graph<T>& g, const Tensor<T>& pred, const Tensor<T>& target);
template <typename T> Tensor<T> l2_loss(Graph<T>& g, const Tensor<T>& pred, const Tensor<T>& target);

// Central-difference gradient check in double precision. `fn` builds a scalar
// from the inputs; it is re-run once per perturbed coordinate.
struct GradientCheckReport {
  std::vector<double> max_rel_error;  // one entry per input
  double worst = 0.0;
  bool passed = false;
};

using ScalarFn = std::function<Tensor<double>(Graph<double>&, std::span<const Tensor<double>>)>;

GradientCheckReport gradient_check(const ScalarFn& fn, std::span<Tensor<double>> inputs, double eps,
                                   double tol);

}  // namespace fishcast::ad
