#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "amdnet/errors.hpp"
#include "amdnet/tape.hpp"

namespace amdnet {

/// Bias-corrected Adam over a ParamStore. Moment buffers are laid out in the
/// store's canonical parameter order. Gradients are read, never modified; the
/// caller zeroes them between steps.
template <typename T>
class AdamState {
 public:
  AdamState() = default;

  explicit AdamState(const ParamStore<T>& params, T lr = T(3e-4), T beta1 = T(0.9),
                     T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), initialized_(true) {
    m_.reserve(params.count());
    v_.reserve(params.count());
    for (std::size_t i = 0; i < params.count(); ++i) {
      m_.emplace_back(params[i].value.shape());
      v_.emplace_back(params[i].value.shape());
    }
  }

  bool initialized() const { return initialized_; }
  std::uint64_t step_count() const { return step_; }
  T learning_rate() const { return lr_; }
  void set_learning_rate(T lr) { lr_ = lr; }

  void step(ParamStore<T>& params) {
    if (!initialized_) throw input_error("adam_step: state not initialized for a parameter set");
    if (m_.size() != params.count()) throw input_error("adam_step: state does not match parameter set");
    ++step_;
    const T bc1 = T(1) - std::pow(beta1_, T(step_));
    const T bc2 = T(1) - std::pow(beta2_, T(step_));
    for (std::size_t p = 0; p < params.count(); ++p) {
      Parameter<T>& par = params[p];
      if (!par.value.same_shape(m_[p]))
        throw input_error("adam_step: parameter shape changed: " + par.name);
      Tensor<T>& m = m_[p];
      Tensor<T>& v = v_[p];
      for (std::size_t i = 0; i < par.value.size(); ++i) {
        const T g = par.grad[i];
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g;
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g * g;
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        par.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t step_ = 0;
  T lr_ = T(3e-4);
  T beta1_ = T(0.9);
  T beta2_ = T(0.999);
  T eps_ = T(1e-8);
  bool initialized_ = false;
};

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
  state.step(params);
}

}  // namespace amdnet
