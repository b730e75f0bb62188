#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "hyperking/tensor.hpp"

namespace hyperking {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid for the
/// lifetime of the owning tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Backward rule of a recorded operation. `parent_grads[i]` is null when the
/// i-th parent does not require a gradient; otherwise the rule accumulates
/// (adds) its contribution into it.
using BackwardFn =
    std::function<void(const Tensor& out_grad, std::span<Tensor* const> parent_grads)>;

/// Append-only record of operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every node's parents precede
/// it. `backward` sweeps the nodes once in reverse order. A tape is owned by a
/// single worker; kernels recorded on it may parallelize internally.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records the result of an operation. When no parent requires a gradient,
  /// or recording is disabled, the backward rule is dropped.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  /// Computes d(root)/d(node) for every node that requires a gradient.
  /// Gradients from a previous call are discarded first, so repeated calls
  /// on the same tape produce identical results.
  void backward(Var root);

  /// Gradient of the last backward pass; zeros when the node received none.
  const Tensor& grad(Var v) const;

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  void set_recording(bool on) noexcept { recording_ = on; }
  bool recording() const noexcept { return recording_; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    Tensor grad;
    bool has_grad = false;
  };

  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  bool recording_ = true;
};

/// Disables recording on a tape for the lifetime of the guard.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), previous_(tape.recording()) {
    tape_.set_recording(false);
  }
  ~NoGradGuard() { tape_.set_recording(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

}  // namespace hyperking
