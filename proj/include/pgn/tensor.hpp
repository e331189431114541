#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pgn/errors.hpp"

namespace pgn {

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

inline std::vector<int64_t> shape_strides(const std::vector<int64_t>& shape) {
  std::vector<int64_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * shape[i + 1];
  return st;
}

// Tape autodiff: each forward op allocates a node holding its output buffer,
// links to its input nodes and a closure that pushes gradient from the node
// into its parents. The graph is rebuilt on every forward pass and dropped
// when the last handle goes away.
template <typename T>
struct TensorImpl {
  std::vector<int64_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated on first accumulation
  bool requires_grad = false;
  const char* op = "";  // empty for leaves
  std::vector<std::shared_ptr<TensorImpl<T>>> parents;
  std::function<void(TensorImpl<T>&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool is_leaf() const { return !backward_fn; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void accumulate(const T* g, int64_t n) {
    ensure_grad();
    for (int64_t i = 0; i < n; ++i) grad[i] += g[i];
  }
};

inline bool& grad_mode_ref() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_ref()) { grad_mode_ref() = false; }
  ~NoGradGuard() { grad_mode_ref() = prev; }
};

inline bool& nan_check_ref() {
  static bool on = false;
  return on;
}
inline void set_nan_checks(bool on) { nan_check_ref() = on; }

template <typename T>
class Tensor {
 public:
  Tensor() : impl_(std::make_shared<TensorImpl<T>>()) {}
  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(std::vector<int64_t> shape, T v, bool requires_grad = false) {
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->data.assign(static_cast<size_t>(shape_numel(shape)), v);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(impl);
  }

  static Tensor from(std::vector<int64_t> shape, std::vector<T> data, bool requires_grad = false) {
    require(shape_numel(shape) == static_cast<int64_t>(data.size()), ErrorCode::ShapeMismatch,
            "data length " + std::to_string(data.size()) + " does not fill " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(impl);
  }

  static Tensor scalar(T v, bool requires_grad = false) { return from({}, {v}, requires_grad); }

  const std::vector<int64_t>& shape() const { return impl_->shape; }
  int64_t numel() const { return impl_->numel(); }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int64_t size(int i) const { return impl_->shape[static_cast<size_t>(i)]; }

  std::vector<T>& data() { return impl_->data; }
  const std::vector<T>& data() const { return impl_->data; }
  std::vector<T>& grad() { return impl_->grad; }
  const std::vector<T>& grad() const { return impl_->grad; }
  bool has_grad() const { return !impl_->grad.empty(); }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  T item() const {
    require(numel() == 1, ErrorCode::NotScalar, "item() on " + shape_str(shape()));
    return impl_->data[0];
  }

  void zero_grad() { impl_->grad.assign(impl_->data.size(), T(0)); }

  // leaf copy, cut off from the tape
  Tensor detach() const {
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(impl);
  }

  std::shared_ptr<TensorImpl<T>>& impl() { return impl_; }
  const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Topologically ordered op records reachable from a root, leaves included.
template <typename T>
struct Graph {
  std::vector<TensorImpl<T>*> order;  // parents always precede consumers
};

template <typename T>
Graph<T> build_graph(const Tensor<T>& root) {
  Graph<T> g;
  std::unordered_set<TensorImpl<T>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<TensorImpl<T>*, size_t>> stack;
  stack.emplace_back(root.impl().get(), 0);
  seen.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl<T>* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      g.order.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

// Reverse-mode sweep. Leaf gradients accumulate across calls; intermediate
// node gradients are reset per sweep so repeated backward() calls scale
// leaf grads exactly.
template <typename T>
void backward(Tensor<T>& loss) {
  require(loss.numel() == 1, ErrorCode::NotScalar,
          "backward needs a scalar loss, got " + shape_str(loss.shape()));
  Graph<T> g = build_graph(loss);
  for (TensorImpl<T>* node : g.order)
    if (!node->is_leaf()) node->grad.assign(node->data.size(), T(0));
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] += T(1);
  for (auto it = g.order.rbegin(); it != g.order.rend(); ++it) {
    TensorImpl<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> t, bool frz = false)
      : name(std::move(n)), tensor(std::move(t)), frozen(frz) {
    tensor.set_requires_grad(!frozen);
  }

  int64_t numel() const { return tensor.numel(); }
};

template <typename T>
class ParamStore {
 public:
  void add(Parameter<T>* p) { params_.push_back(p); }

  const std::vector<Parameter<T>*>& all() const { return params_; }

  std::vector<Parameter<T>*> trainable() const {
    std::vector<Parameter<T>*> out;
    for (auto* p : params_)
      if (!p->frozen) out.push_back(p);
    return out;
  }

  Parameter<T>* find(const std::string& name) const {
    for (auto* p : params_)
      if (p->name == name) return p;
    return nullptr;
  }

  int64_t trainable_count(const std::string& prefix = "") const {
    int64_t n = 0;
    for (auto* p : params_)
      if (!p->frozen && p->name.rfind(prefix, 0) == 0) n += p->numel();
    return n;
  }

  void zero_grad() {
    for (auto* p : params_)
      if (!p->frozen) p->tensor.zero_grad();
  }

 private:
  std::vector<Parameter<T>*> params_;
};

}  // namespace pgn
