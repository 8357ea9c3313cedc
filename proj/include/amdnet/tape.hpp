#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "amdnet/errors.hpp"
#include "amdnet/tensor.hpp"

namespace amdnet {

/// Handle to a node on a Tape.
struct Var {
  std::int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

/// A named trainable tensor. grad always matches value's shape and is owned
/// by the parameter; the tape accumulates into it, the optimizer consumes it,
/// the caller zeroes it.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.zero(); }
};

/// Ordered collection of parameters. Creation order is the canonical order
/// for the optimizer, checkpoints and the model fingerprint.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& create(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) throw input_error("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter<T>>(name, std::move(init)));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  Parameter<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw input_error("no such parameter: " + name);
    return *params_[it->second];
  }
  const Parameter<T>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t count() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.create(p->name, p->value.template cast<U>());
    return out;
  }

  ParamStore clone() const { return cast<T>(); }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reverse-mode tape over a fixed kernel set (see ops.hpp). Ops push value
/// nodes plus a pull closure that routes the node's gradient to its parents.
/// backward() seeds a scalar node with 1 and runs pulls in reverse push
/// order, which is a valid topological order by construction.
template <typename T>
class Tape {
 public:
  using PullFn = std::function<void(Tape&, Var)>;

  Var push(Tensor<T> value, PullFn pull) {
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, std::move(pull), nullptr});
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  /// Data leaf; no gradient flows out of it.
  Var input(Tensor<T> value) { return push(std::move(value), nullptr); }

  /// Parameter leaf: after backward(), the leaf gradient is added into
  /// param.grad.
  Var param(Parameter<T>& p) {
    Var v = push(p.value, nullptr);
    nodes_.back().bound = &p;
    return v;
  }

  const Tensor<T>& value(Var v) const { return nodes_[check(v)].value; }

  /// Gradient slot, allocated (zeroed) on first touch.
  Tensor<T>& grad(Var v) {
    Node& n = nodes_[check(v)];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  /// Null when nothing has accumulated into this node yet; pull closures use
  /// it to skip dead branches.
  const Tensor<T>* grad_if_any(Var v) const {
    const Node& n = nodes_[check(v)];
    return n.grad.empty() ? nullptr : &n.grad;
  }

  void backward(Var loss) {
    const std::size_t root = check(loss);
    if (nodes_[root].value.size() != 1) throw input_error("backward: loss must be scalar");
    grad(loss)[0] = T(1);
    for (std::size_t i = root + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.pull && !n.grad.empty()) n.pull(*this, Var{static_cast<std::int32_t>(i)});
      if (n.bound && !n.grad.empty()) {
        Tensor<T>& pg = n.bound->grad;
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    PullFn pull;
    Parameter<T>* bound;
  };

  std::size_t check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.idx) >= nodes_.size())
      throw input_error("invalid tape handle");
    return static_cast<std::size_t>(v.idx);
  }

  std::vector<Node> nodes_;
};

}  // namespace amdnet
