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

#include "fishcast/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "fishcast/errors.hpp"

namespace fishcast::ad {

std::string to_string(const Shape& shape) {
  return "[" + std::to_string(shape.dims[0]) + "," + std::to_string(shape.dims[1]) + "," +
         std::to_string(shape.dims[2]) + "," + std::to_string(shape.dims[3]) + "]";
}

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return filled(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  auto s = std::make_shared<TensorStorage<T>>();
  s->shape = shape;
  s->value.assign(shape.numel(), value);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

template <typename T>
Tensor<T> Tensor<T>::from_values(Shape shape, std::vector<T> values, bool requires_grad) {
  if (values.size() != shape.numel()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " + to_string(shape));
  }
  auto s = std::make_shared<TensorStorage<T>>();
  s->shape = shape;
  s->value.assign(values.begin(), values.end());
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return s_->value[0];
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(s_->value.begin(), s_->value.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return from_values(shape(), std::vector<T>(s_->value.begin(), s_->value.end()), s_->requires_grad);
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
bool Graph<T>::should_record(std::span<const Tensor<T>* const> inputs) const {
  if (!grad_enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void Graph<T>::finish_record(Tensor<T>& out, std::span<const Tensor<T>* const> inputs, Backward backward) {
  if (consumed_) throw StaleGraphError("graph already consumed by backward(); call reset() first");
  out.storage()->requires_grad = true;
  out.storage()->is_leaf = false;
  for (const Tensor<T>* in : inputs) {
    if (in->requires_grad() && in->is_leaf()) {
      const bool known = std::any_of(leaves_.begin(), leaves_.end(),
                                     [&](const Tensor<T>& l) { return l.storage() == in->storage(); });
      if (!known) leaves_.push_back(*in);
    }
  }
  nodes_.push_back(Node{out.storage(), std::move(backward)});
}

template <typename T>
bool Graph<T>::record(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs, Backward backward) {
  const std::span<const Tensor<T>* const> view(inputs.begin(), inputs.size());
  if (!should_record(view)) return false;
  finish_record(out, view, std::move(backward));
  return true;
}

template <typename T>
bool Graph<T>::record(Tensor<T>& out, std::span<const Tensor<T>> inputs, Backward backward) {
  std::vector<const Tensor<T>*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  if (!should_record(ptrs)) return false;
  finish_record(out, ptrs, std::move(backward));
  return true;
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw StaleGraphError("backward() called twice without reset()");
  if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + to_string(loss.shape()));
  for (auto& node : nodes_) node.output->grad.assign(node.output->value.size(), T(0));
  for (auto& leaf : leaves_) leaf.zero_grad();
  consumed_ = true;
  loss.storage()->ensure_grad();
  loss.storage()->grad[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

template <typename T>
void Graph<T>::reset() {
  nodes_.clear();
  leaves_.clear();
  consumed_ = false;
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

template <typename T>
using Storage = std::shared_ptr<TensorStorage<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename T>
T* grad_of(const Storage<T>& s) {
  if (!s->requires_grad) return nullptr;
  s->ensure_grad();
  return s->grad.data();
}

template <typename T, typename F>
Tensor<T> map_unary(const Tensor<T>& a, F f) {
  auto out = Tensor<T>::zeros(a.shape());
  auto src = a.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Unrolls one image (C×H×W) into a (C·k·k) × (H·W) patch matrix, zero padded.
template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width, std::size_t k, T* col) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(height), W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = col + ((c * k + ki) * k + kj) * height * width;
        const auto dy = static_cast<std::ptrdiff_t>(ki) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kj) - pad;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          T* dst = row + y * W;
          const std::ptrdiff_t iy = y + dy;
          if (iy < 0 || iy >= H || x_lo >= x_hi) {
            std::fill(dst, dst + W, T(0));
            continue;
          }
          std::fill(dst, dst + x_lo, T(0));
          std::copy(plane + iy * W + x_lo + dx, plane + iy * W + x_hi + dx, dst + x_lo);
          std::fill(dst + x_hi, dst + W, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch gradients back into the image gradient.
template <typename T>
void col2im_add(const T* col, std::size_t channels, std::size_t height, std::size_t width, std::size_t k, T* image) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(height), W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = col + ((c * k + ki) * k + kj) * height * width;
        const auto dy = static_cast<std::ptrdiff_t>(ki) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kj) - pad;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t iy = y + dy;
          if (iy < 0 || iy >= H) continue;
          const T* src = row + y * W;
          T* dst = plane + iy * W;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) dst[x + dx] += src[x];
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d(Graph<T>& g, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const std::size_t cout = ws.dims[0], cin = ws.dims[1], k = ws.dims[2];
  if (ws.dims[3] != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square with odd size");
  if (xs.channels() != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.channels()) + " channels, weight expects " +
                     std::to_string(cin));
  }
  if (bias.numel() != cout) throw ShapeError("conv2d: bias size does not match output channels");

  const std::size_t B = xs.batch(), H = xs.height(), W = xs.width(), HW = H * W;
  const std::size_t patch = cin * k * k;
  auto out = Tensor<T>::zeros(Shape{{B, cout, H, W}});

  const ConstMatMap<T> wmat(weight.values().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
  AlignedVector<T> col(k == 1 ? 0 : patch * HW);
  for (std::size_t b = 0; b < B; ++b) {
    const T* xb = input.values().data() + b * cin * HW;
    const T* cols = xb;
    if (k != 1) {
      im2col(xb, cin, H, W, k, col.data());
      cols = col.data();
    }
    const ConstMatMap<T> cmat(cols, static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(HW));
    MatMap<T> omat(out.values().data() + b * cout * HW, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(HW));
    omat.noalias() = wmat * cmat;
    for (std::size_t o = 0; o < cout; ++o) omat.row(static_cast<Eigen::Index>(o)).array() += bias.values()[o];
  }

  g.record(out, {&input, &weight, &bias},
           [x = input.storage(), w = weight.storage(), bs = bias.storage(), o = out.storage(), B, cin, cout, H, W, HW,
            k, patch]() {
             T* gx = grad_of(x);
             T* gw = grad_of(w);
             T* gb = grad_of(bs);
             const ConstMatMap<T> wm(w->value.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
             AlignedVector<T> col(k == 1 ? 0 : patch * HW);
             AlignedVector<T> dcol(gx && k != 1 ? patch * HW : 0);
             for (std::size_t b = 0; b < B; ++b) {
               const ConstMatMap<T> go(o->grad.data() + b * cout * HW, static_cast<Eigen::Index>(cout),
                                       static_cast<Eigen::Index>(HW));
               if (gb) {
                 for (std::size_t c = 0; c < cout; ++c) gb[c] += go.row(static_cast<Eigen::Index>(c)).sum();
               }
               const T* xb = x->value.data() + b * cin * HW;
               if (gw) {
                 const T* cols = xb;
                 if (k != 1) {
                   im2col(xb, cin, H, W, k, col.data());
                   cols = col.data();
                 }
                 const ConstMatMap<T> cm(cols, static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(HW));
                 MatMap<T> gwm(gw, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
                 gwm.noalias() += go * cm.transpose();
               }
               if (gx) {
                 T* gxb = gx + b * cin * HW;
                 if (k == 1) {
                   MatMap<T> gxm(gxb, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(HW));
                   gxm.noalias() += wm.transpose() * go;
                 } else {
                   MatMap<T> dcm(dcol.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(HW));
                   dcm.noalias() = wm.transpose() * go;
                   col2im_add(dcol.data(), cin, H, W, k, gxb);
                 }
               }
             }
           });
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto out = Tensor<T>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = a.values()[i] + b.values()[i];
  g.record(out, {&a, &b}, [sa = a.storage(), sb = b.storage(), o = out.storage()]() {
    const std::size_t n = o->value.size();
    if (T* ga = grad_of(sa))
      for (std::size_t i = 0; i < n; ++i) ga[i] += o->grad[i];
    if (T* gb = grad_of(sb))
      for (std::size_t i = 0; i < n; ++i) gb[i] += o->grad[i];
  });
  return out;
}

template <typename T>
Tensor<T> sub(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  auto out = Tensor<T>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
  g.record(out, {&a, &b}, [sa = a.storage(), sb = b.storage(), o = out.storage()]() {
    const std::size_t n = o->value.size();
    if (T* ga = grad_of(sa))
      for (std::size_t i = 0; i < n; ++i) ga[i] += o->grad[i];
    if (T* gb = grad_of(sb))
      for (std::size_t i = 0; i < n; ++i) gb[i] -= o->grad[i];
  });
  return out;
}

template <typename T>
Tensor<T> hadamard(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "hadamard");
  auto out = Tensor<T>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
  g.record(out, {&a, &b}, [sa = a.storage(), sb = b.storage(), o = out.storage()]() {
    const std::size_t n = o->value.size();
    if (T* ga = grad_of(sa))
      for (std::size_t i = 0; i < n; ++i) ga[i] += o->grad[i] * sb->value[i];
    if (T* gb = grad_of(sb))
      for (std::size_t i = 0; i < n; ++i) gb[i] += o->grad[i] * sa->value[i];
  });
  return out;
}

template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T factor) {
  auto out = map_unary(a, [factor](T v) { return v * factor; });
  g.record(out, {&a}, [sa = a.storage(), o = out.storage(), factor]() {
    if (T* ga = grad_of(sa))
      for (std::size_t i = 0; i < o->value.size(); ++i) ga[i] += factor * o->grad[i];
  });
  return out;
}

template <typename T>
Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& a) {
  auto out = map_unary(a, [](T v) { return T(1) / (T(1) + std::exp(-v)); });
  g.record(out, {&a}, [sa = a.storage(), o = out.storage()]() {
    if (T* ga = grad_of(sa)) {
      for (std::size_t i = 0; i < o->value.size(); ++i) {
        const T y = o->value[i];
        ga[i] += o->grad[i] * y * (T(1) - y);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> tanh(Graph<T>& g, const Tensor<T>& a) {
  auto out = map_unary(a, [](T v) { return std::tanh(v); });
  g.record(out, {&a}, [sa = a.storage(), o = out.storage()]() {
    if (T* ga = grad_of(sa)) {
      for (std::size_t i = 0; i < o->value.size(); ++i) {
        const T y = o->value[i];
        ga[i] += o->grad[i] * (T(1) - y * y);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Channel plumbing

template <typename T>
Tensor<T> concat_channels(Graph<T>& g, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = parts.front().shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.batch() != first.batch() || s.height() != first.height() || s.width() != first.width()) {
      throw ShapeError("concat_channels: incompatible shapes " + to_string(first) + " and " + to_string(s));
    }
    channels += s.channels();
  }
  const std::size_t B = first.batch(), HW = first.plane();
  auto out = Tensor<T>::zeros(Shape{{B, channels, first.height(), first.width()}});
  std::vector<Storage<T>> stores;
  stores.reserve(parts.size());
  for (std::size_t b = 0; b < B; ++b) {
    T* dst = out.values().data() + b * channels * HW;
    for (const auto& p : parts) {
      const std::size_t n = p.shape().channels() * HW;
      std::copy_n(p.values().data() + b * n, n, dst);
      dst += n;
    }
  }
  for (const auto& p : parts) stores.push_back(p.storage());
  g.record(out, parts, [stores, o = out.storage(), B, channels, HW]() {
    for (std::size_t b = 0; b < B; ++b) {
      const T* src = o->grad.data() + b * channels * HW;
      for (const auto& s : stores) {
        const std::size_t n = s->shape.channels() * HW;
        if (T* gs = grad_of(s)) {
          T* dst = gs + b * n;
          for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
        }
        src += n;
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> slice_channels(Graph<T>& g, const Tensor<T>& a, std::size_t begin, std::size_t count) {
  const Shape& s = a.shape();
  if (count == 0 || begin + count > s.channels()) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + to_string(s));
  }
  const std::size_t B = s.batch(), C = s.channels(), HW = s.plane();
  auto out = Tensor<T>::zeros(Shape{{B, count, s.height(), s.width()}});
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(a.values().data() + (b * C + begin) * HW, count * HW, out.values().data() + b * count * HW);
  }
  g.record(out, {&a}, [sa = a.storage(), o = out.storage(), B, C, HW, begin, count]() {
    if (T* ga = grad_of(sa)) {
      for (std::size_t b = 0; b < B; ++b) {
        T* dst = ga + (b * C + begin) * HW;
        const T* src = o->grad.data() + b * count * HW;
        for (std::size_t i = 0; i < count * HW; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(Graph<T>& g, const Tensor<T>& a, std::span<const std::size_t> sizes) {
  std::size_t total = 0;
  for (std::size_t s : sizes) total += s;
  if (total != a.shape().channels()) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but tensor has " +
                     std::to_string(a.shape().channels()) + " channels");
  }
  std::vector<Tensor<T>> out;
  std::size_t begin = 0;
  for (std::size_t s : sizes) {
    out.push_back(slice_channels(g, a, begin, s));
    begin += s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses

namespace {
const Shape kScalar{{1, 1, 1, 1}};
}

template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& a) {
  T total = 0;
  for (T v : a.values()) total += v;
  auto out = Tensor<T>::filled(kScalar, total);
  g.record(out, {&a}, [sa = a.storage(), o = out.storage()]() {
    if (T* ga = grad_of(sa))
      for (std::size_t i = 0; i < sa->value.size(); ++i) ga[i] += o->grad[0];
  });
  return out;
}

template <typename T>
Tensor<T> mean(Graph<T>& g, const Tensor<T>& a) {
  const auto n = static_cast<T>(a.numel());
  T total = 0;
  for (T v : a.values()) total += v;
  auto out = Tensor<T>::filled(kScalar, total / n);
  g.record(out, {&a}, [sa = a.storage(), o = out.storage(), n]() {
    if (T* ga = grad_of(sa))
      for (std::size_t i = 0; i < sa->value.size(); ++i) ga[i] += o->grad[0] / n;
  });
  return out;
}

template <typename T>
Tensor<T> l1_loss(Graph<T>& g, const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "l1_loss");
  const auto n = static_cast<T>(pred.numel());
  T total = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) total += std::abs(pred.values()[i] - target.values()[i]);
  auto out = Tensor<T>::filled(kScalar, total / n);
  g.record(out, {&pred, &target}, [sp = pred.storage(), st = target.storage(), o = out.storage(), n]() {
    T* gp = grad_of(sp);
    T* gt = grad_of(st);
    const T scale = o->grad[0] / n;
    for (std::size_t i = 0; i < sp->value.size(); ++i) {
      const T d = sp->value[i] - st->value[i];
      const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (gp) gp[i] += scale * sgn;
      if (gt) gt[i] -= scale * sgn;
    }
  });
  return out;
}

template <typename T>
Tensor<T> l2_loss(Graph<T>& g, const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "l2_loss");
  const auto n = static_cast<T>(pred.numel());
  T total = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const T d = pred.values()[i] - target.values()[i];
    total += d * d;
  }
  auto out = Tensor<T>::filled(kScalar, total / n);
  g.record(out, {&pred, &target}, [sp = pred.storage(), st = target.storage(), o = out.storage(), n]() {
    T* gp = grad_of(sp);
    T* gt = grad_of(st);
    const T scale = T(2) * o->grad[0] / n;
    for (std::size_t i = 0; i < sp->value.size(); ++i) {
      const T d = sp->value[i] - st->value[i];
      if (gp) gp[i] += scale * d;
      if (gt) gt[i] -= scale * d;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Gradient check

GradientCheckReport gradient_check(const ScalarFn& fn, std::span<Tensor<double>> inputs, double eps, double tol) {
  for (auto& t : inputs) t.set_requires_grad(true);
  Graph<double> graph;
  const Tensor<double> loss = fn(graph, inputs);
  graph.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    if (t.grad().empty()) {
      analytic.emplace_back(t.numel(), 0.0);
    } else {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    }
  }

  const auto evaluate = [&]() {
    Graph<double> g(GradMode::kDisabled);
    return fn(g, inputs).item();
  };

  GradientCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].values();
    double worst = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + eps;
      const double plus = evaluate();
      values[j] = saved - eps;
      const double minus = evaluate();
      values[j] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    report.max_rel_error.push_back(worst);
    report.worst = std::max(report.worst, worst);
  }
  report.passed = report.worst < tol;
  return report;
}

// ---------------------------------------------------------------------------
// Instantiations

#define FISHCAST_INSTANTIATE(T)                                                                             \
  template class Tensor<T>;                                                                                 \
  template class Graph<T>;                                                                                  \
  template Tensor<T> conv2d(Graph<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> add(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> hadamard(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> scale(Graph<T>&, const Tensor<T>&, T);                                                 \
  template Tensor<T> sigmoid(Graph<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> tanh(Graph<T>&, const Tensor<T>&);                                                     \
  template Tensor<T> concat_channels(Graph<T>&, std::span<const Tensor<T>>);                                \
  template Tensor<T> slice_channels(Graph<T>&, const Tensor<T>&, std::size_t, std::size_t);                 \
  template std::vector<Tensor<T>> split_channels(Graph<T>&, const Tensor<T>&, std::span<const std::size_t>); \
  template Tensor<T> sum(Graph<T>&, const Tensor<T>&);                                                      \
  template Tensor<T> mean(Graph<T>&, const Tensor<T>&);                                                     \
  template Tensor<T> l1_loss(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> l2_loss(Graph<T>&, const Tensor<T>&, const Tensor<T>&);

FISHCAST_INSTANTIATE(float)
FISHCAST_INSTANTIATE(double)

#undef FISHCAST_INSTANTIATE

}  // namespace fishcast::ad
