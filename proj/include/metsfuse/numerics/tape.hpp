#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "metsfuse/numerics/tensor.hpp"

namespace metsfuse::num {

/// A named learnable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;
};

/// Ordered collection of parameters. Addresses are stable for the set's lifetime.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, Tensor value, bool requires_grad = true);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  /// Total number of scalars across all parameters.
  std::size_t scalar_count() const;
  void zero_grad();

  /// Value snapshot in insertion order; restore() requires identical shapes.
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  std::map<std::string, Tensor> gradients() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Records forward operations and replays them in reverse to accumulate gradients.
///
/// Nodes are appended in evaluation order, so every input precedes its consumers and a
/// reverse sweep over node ids is a reverse topological order. A tape is not thread-safe;
/// use one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t node)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf bound to a parameter, read in place; the parameter must outlive the tape and stay
  /// unchanged until backward() has run.
  Var leaf(Parameter& param);

  /// Used by op implementations. `backward` may be empty when no input needs a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t node) const {
    const auto& n = nodes_[node];
    return n.param != nullptr ? n.param->value : n.value;
  }
  const Tensor& value(Var v) const { return value(v.id); }
  bool needs_grad(std::size_t node) const { return nodes_[node].needs_grad; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  const std::vector<std::size_t>& inputs(std::size_t node) const { return nodes_[node].inputs; }

  /// Gradient buffer of a node, allocated as zeros on first access. Parameter leaves share
  /// parameter.grad, so ops accumulate into it directly.
  Tensor& grad(std::size_t node);
  const Tensor& out_grad(std::size_t node) const { return nodes_[node].grad; }

  /// Reverse sweep from a scalar node; parameter gradients are accumulated (+=).
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
};

}  // namespace metsfuse::num
