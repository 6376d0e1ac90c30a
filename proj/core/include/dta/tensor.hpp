// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff on a flat tape. A Tape owns every node created
// during one forward pass; node ids are creation-ordered, which makes the
// creation order a topological order for the reverse sweep. Gradient
// buffers are allocated lazily, so subgraphs nothing pulled on stay cold.
#pragma once

#include <cassert>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dta {

template <class T>
class Tape;

// Lightweight handle into a tape. Copyable; valid while the tape lives.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input owning a copy of `values`.
  Var<T> leaf(std::vector<int> shape, const T* values, bool requires_grad = true) {
    Node n;
    n.shape = std::move(shape);
    n.count = count_of(n.shape);
    n.own.assign(values, values + n.count);
    n.data = n.own.data();
    n.needs_grad = requires_grad;
    return push(std::move(n));
  }

  // Differentiable input aliasing caller-owned storage. The pointer must
  // stay valid for the tape's lifetime; gradients are still tape-owned.
  Var<T> leaf_view(std::vector<int> shape, T* values, bool requires_grad = true) {
    Node n;
    n.shape = std::move(shape);
    n.count = count_of(n.shape);
    n.data = values;
    n.needs_grad = requires_grad;
    return push(std::move(n));
  }

  // Non-differentiable input owning a copy of `values`.
  Var<T> constant(std::vector<int> shape, const T* values) {
    return leaf(std::move(shape), values, false);
  }

  // Non-differentiable input aliasing caller-owned storage.
  Var<T> constant_view(std::vector<int> shape, const T* values) {
    return leaf_view(std::move(shape), const_cast<T*>(values), false);
  }

  Var<T> constant_scalar(T v) { return constant({1}, &v); }

  // Zero-filled output node. `needs_grad` is normally the OR over the
  // producing op's parents. Ops attach their reverse closure afterwards
  // with set_back, once the output handle exists to capture.
  Var<T> make(std::vector<int> shape, bool needs_grad, std::function<void()> back = {}) {
    Node n;
    n.shape = std::move(shape);
    n.count = count_of(n.shape);
    n.own.assign(static_cast<size_t>(n.count), T(0));
    n.data = n.own.data();
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    return push(std::move(n));
  }

  // No-op when the node does not participate in differentiation.
  void set_back(Var<T> v, std::function<void()> back) {
    Node& n = at(v);
    if (n.needs_grad) n.back = std::move(back);
  }

  const std::vector<int>& shape(Var<T> v) const { return at(v).shape; }
  int64_t numel(Var<T> v) const { return at(v).count; }
  bool needs_grad(Var<T> v) const { return at(v).needs_grad; }

  std::span<T> data(Var<T> v) {
    Node& n = at(v);
    return {n.data, static_cast<size_t>(n.count)};
  }
  std::span<const T> data(Var<T> v) const {
    const Node& n = at(v);
    return {n.data, static_cast<size_t>(n.count)};
  }
  T* data_ptr(Var<T> v) { return at(v).data; }
  const T* data_ptr(Var<T> v) const { return at(v).data; }

  // Scalar convenience; asserts a single-element node.
  T value(Var<T> v) const {
    assert(at(v).count == 1);
    return at(v).data[0];
  }

  // Gradient buffer, zero-allocated on first touch.
  std::span<T> grad(Var<T> v) {
    Node& n = at(v);
    assert(n.needs_grad);
    if (n.grad.empty()) n.grad.assign(static_cast<size_t>(n.count), T(0));
    return {n.grad.data(), n.grad.size()};
  }
  T* grad_ptr(Var<T> v) { return grad(v).data(); }

  // True once a downstream op has contributed to this node's gradient.
  bool grad_allocated(Var<T> v) const { return !at(v).grad.empty(); }

  // Reverse sweep from a scalar loss. Single use per tape.
  void backward(Var<T> loss) {
    if (backward_done_) throw std::logic_error("tape: backward already ran");
    backward_done_ = true;
    check(loss);
    const Node& root = at(loss);
    if (root.count != 1) throw std::logic_error("tape: backward root must be scalar");
    if (!root.needs_grad) throw std::logic_error("tape: backward root has no differentiable inputs");
    grad(loss)[0] = T(1);
    for (int32_t id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (n.needs_grad && !n.grad.empty() && n.back) n.back();
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> shape;
    int64_t count = 0;
    T* data = nullptr;
    std::vector<T> own;
    std::vector<T> grad;
    bool needs_grad = false;
    std::function<void()> back;
  };

  static int64_t count_of(const std::vector<int>& shape) {
    assert(!shape.empty() && shape.size() <= 3);
    int64_t c = 1;
    for (int d : shape) {
      assert(d > 0);
      c *= d;
    }
    return c;
  }

  Var<T> push(Node&& n) {
    nodes_.push_back(std::move(n));
    return {this, static_cast<int32_t>(nodes_.size() - 1)};
  }

  void check(Var<T> v) const {
    assert(v.tape == this);
    assert(v.id >= 0 && static_cast<size_t>(v.id) < nodes_.size());
    (void)v;
  }

  Node& at(Var<T> v) {
    check(v);
    return nodes_[static_cast<size_t>(v.id)];
  }
  const Node& at(Var<T> v) const {
    check(v);
    return nodes_[static_cast<size_t>(v.id)];
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace dta
