#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "advbench/core/data.hpp"
#include "advbench/core/parameters.hpp"

namespace advbench {

/// Everything a backward pass needs from the matching forward pass.
template <class T>
struct ForwardPass {
  Tensor<T> input;
  std::vector<Tensor<T>> activations;
  Tensor<T> logits;  // (n, k, 1, 1)
};

/// Differentiable classifier over normalized [0,1] images.
///
/// Forward and backward are const: parameters are only mutated through `parameters()`
/// by a trainer, so concurrent read-only queries against a frozen model are safe.
template <class T>
class Classifier {
 public:
  virtual ~Classifier() = default;

  Task task() const { return task_; }
  int num_classes() const { return k_; }
  /// Expected frame extents (n = 1).
  Shape input_shape() const { return input_; }
  const std::string& architecture() const { return architecture_; }
  std::uint64_t seed() const { return seed_; }

  Parameters<T>& parameters() { return params_; }
  const Parameters<T>& parameters() const { return params_; }

  virtual ForwardPass<T> forward(const Tensor<T>& x) const = 0;

  /// Backpropagates dL/dlogits. Parameter gradients are accumulated into `grads` when
  /// non-null; the returned tensor is dL/dx when `need_input_grad`, empty otherwise.
  virtual Tensor<T> backward(const ForwardPass<T>& pass, const Tensor<T>& grad_logits, Parameters<T>* grads,
                             bool need_input_grad) const = 0;

  virtual std::vector<std::string> tap_names() const { return {}; }

  virtual Tensor<T> tap(const ForwardPass<T>&, std::string_view name) const {
    throw ContractError("model '" + architecture_ + "' has no layer tap '" + std::string(name) + "'");
  }

  virtual bool has_attention() const { return false; }

  virtual std::unique_ptr<Classifier> clone() const = 0;

  void check_input(const Tensor<T>& x) const {
    const Shape s = x.shape();
    if (s.c != input_.c || s.h != input_.h || s.w != input_.w) {
      throw ContractError("input contract: model '" + architecture_ + "' expects frames " + input_.str() +
                          ", got batch " + s.str());
    }
  }

 protected:
  Classifier(std::string architecture, Shape input, int k, Task task, std::uint64_t seed)
      : architecture_(std::move(architecture)), input_(input.with_batch(1)), k_(k), task_(task), seed_(seed) {
    require(k >= 2, "classifier needs k >= 2");
  }

  Parameters<T> params_;

 private:
  std::string architecture_;
  Shape input_;
  int k_;
  Task task_;
  std::uint64_t seed_;
};

}  // namespace advbench
