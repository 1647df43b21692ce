#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace vocseg::nc {

using Shape = std::vector<int>;

inline size_t numel(const Shape& s) {
  size_t n = 1;
  for (int e : s) {
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= static_cast<size_t>(e);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class S>
struct Node {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // empty until first accumulation / backward
  bool requires_grad = false;
  uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void(Node<S>&)> backward;  // pulls from this->grad into parents

  bool is_leaf() const { return !backward; }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
  }
};

inline uint64_t next_seq() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// Grad recording is on by default; NoGradGuard disables it for a scope
// (inference paths), which also stops the graph from being retained.
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
inline bool grad_enabled() { return grad_mode_flag(); }

class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense tensor handle participating in reverse-mode differentiation.
// Single-writer: values() mutation is only legal on leaves (parameter
// updates, construction); op outputs are never mutated.
template <class S>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(std::shared_ptr<Node<S>> n) : n_(std::move(n)) {}

  static TensorT zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), S(0), requires_grad);
  }
  static TensorT filled(Shape shape, S v, bool requires_grad = false) {
    auto n = std::make_shared<Node<S>>();
    n->value.assign(numel(shape), v);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    n->seq = next_seq();
    return TensorT(std::move(n));
  }
  static TensorT from(Shape shape, std::vector<S> values, bool requires_grad = false) {
    if (numel(shape) != values.size())
      throw std::invalid_argument("value count does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node<S>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    n->seq = next_seq();
    return TensorT(std::move(n));
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape.at(static_cast<size_t>(i)); }
  size_t size() const { return n_->value.size(); }

  const std::vector<S>& values() const { return n_->value; }
  std::vector<S>& values() { return n_->value; }
  S scalar() const {
    if (size() != 1) throw std::invalid_argument("scalar() on tensor of size " + std::to_string(size()));
    return n_->value[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool rg) { n_->requires_grad = rg; }

  bool has_grad() const { return !n_->grad.empty(); }
  // Gradient buffer; zeros when nothing has been accumulated yet.
  std::vector<S> grad() const {
    if (n_->grad.empty()) return std::vector<S>(size(), S(0));
    return n_->grad;
  }
  void zero_grad() { n_->grad.clear(); }

  Node<S>* node() const { return n_.get(); }
  const std::shared_ptr<Node<S>>& node_ptr() const { return n_; }

 private:
  std::shared_ptr<Node<S>> n_;
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

// Linearized backward program for one scalar root: the reachable nodes in
// creation order (which is topological: every operand of entry k was
// produced by an earlier entry or is a leaf).
template <class S>
class Tape {
 public:
  explicit Tape(const TensorT<S>& root) : root_(root) {
    if (!root.defined()) throw std::invalid_argument("backward on undefined tensor");
    if (root.size() != 1) throw std::invalid_argument("backward requires a scalar loss");
    std::unordered_set<Node<S>*> seen;
    std::vector<Node<S>*> stack{root.node()};
    seen.insert(root.node());
    while (!stack.empty()) {
      Node<S>* n = stack.back();
      stack.pop_back();
      entries_.push_back(n);
      for (auto& p : n->parents)
        if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(entries_.begin(), entries_.end(),
              [](const Node<S>* a, const Node<S>* b) { return a->seq < b->seq; });
  }

  // One traversal populates grads of every reachable requires_grad leaf.
  // Leaf grads accumulate across calls (explicit zero_grad resets them);
  // interior grads are rebuilt per call.
  void backward() {
    for (Node<S>* n : entries_)
      if (!n->is_leaf()) n->grad.assign(n->value.size(), S(0));
    Node<S>* root = root_.node();
    root->ensure_grad();
    root->grad[0] += S(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      Node<S>* n = *it;
      if (n->backward) n->backward(*n);
    }
  }

  size_t size() const { return entries_.size(); }
  const std::vector<Node<S>*>& order() const { return entries_; }

 private:
  TensorT<S> root_;
  std::vector<Node<S>*> entries_;
};

template <class S>
void backward(const TensorT<S>& loss) {
  Tape<S>(loss).backward();
}

}  // namespace vocseg::nc
