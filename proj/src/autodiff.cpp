#include "fguap/autodiff.hpp"

#include <stdexcept>

#include "fguap/errors.hpp"

namespace fguap::ad {

const Tensor& Var::value() const { return tape().node(*this).value; }

Tensor Var::grad() const {
  const auto& n = tape().node(*this);
  if (n.has_grad) return n.grad;
  return Tensor::zeros(n.value.dims());
}

bool Var::requires_grad() const { return tape().node(*this).requires_grad; }

Tape& Var::tape() const {
  if (tape_ == nullptr) throw std::logic_error("use of unbound ad::Var");
  return *tape_;
}

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.generation_ != generation_ ||
      v.index_ >= nodes_.size()) {
    throw std::logic_error("stale ad::Var (tape cleared or foreign tape)");
  }
  return nodes_[v.index_];
}

Tape::Node& Tape::node(const Var& v) {
  return const_cast<Node&>(static_cast<const Tape&>(*this).node(v));
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs,
                 BackwardFn backward) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string(op) + ": produced a non-finite value");
  }
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (node(in).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::backward(const Var& root) {
  Node& r = node(root);
  if (r.value.size() != 1) {
    throw ShapeError("backward root must be a single element, got " +
                     shape_string(r.value.dims()));
  }
  if (!r.requires_grad) return;
  r.grad = Tensor::full(r.value.dims(), 1.0);
  r.has_grad = true;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Tensor* Tape::grad_buffer(const Var& v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.dims());
    n.has_grad = true;
  }
  return &n.grad;
}

void Tape::accumulate_grad(const Var& v, const Tensor& g) {
  Tensor* buf = grad_buffer(v);
  if (buf == nullptr) return;
  require_same_shape(*buf, g, "accumulate_grad");
  auto dst = buf->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::clear() {
  nodes_.clear();
  ++generation_;
}

}  // namespace fguap::ad
