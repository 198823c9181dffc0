#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "fguap/tensor.hpp"

namespace fguap::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid until the
/// owning tape is cleared or destroyed.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Accumulated gradient; zeros if backward never reached this node.
  Tensor grad() const;
  bool requires_grad() const;
  const Shape& dims() const { return value().dims(); }

  Tape& tape() const;
  std::size_t index() const noexcept { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index, std::uint64_t generation)
      : tape_(tape), index_(index), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
  std::uint64_t generation_ = 0;
};

/// Define-by-run record of primitive operations.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// valid reverse topological order for backward(). A tape is single-threaded;
/// independent tapes may be used concurrently.
class Tape {
 public:
  /// Receives the gradient flowing into the node's output and accumulates
  /// into its inputs through accumulate_grad().
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that participates in differentiation.
  Var variable(Tensor value);
  /// Leaf treated as a constant.
  Var constant(Tensor value);

  /// Records an op output. The backward rule is kept only when at least one
  /// input requires grad. Throws NonFiniteError if value holds NaN/Inf.
  Var record(const char* op, Tensor value, std::vector<Var> inputs,
             BackwardFn backward);

  /// Seeds d(root)/d(root) = 1 and replays backward rules in reverse order.
  /// The root must hold exactly one element.
  void backward(const Var& root);

  /// Adds g into the gradient of v if v requires grad; no-op otherwise.
  void accumulate_grad(const Var& v, const Tensor& g);
  /// Mutable gradient buffer for v (allocated on first use), or nullptr when
  /// v does not require grad. Ops with sparse or strided backward use this.
  Tensor* grad_buffer(const Var& v);

  /// Drops every record. Outstanding Vars become invalid.
  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);
  Var push(Node n);

  std::deque<Node> nodes_;
  std::uint64_t generation_ = 1;
};

}  // namespace fguap::ad
