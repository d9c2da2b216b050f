#pragma once

#include <cmath>
#include <memory>
#include <unordered_map>
#include <vector>

#include "statecnn/layers.hpp"

namespace statecnn {

// --- categorical cross-entropy -------------------------------------------
//
// Consumes probabilities (the head ends in an explicit softmax), so the
// true-class probability is clipped at 1e-7 before the log.
template <typename T>
struct LossResult {
  T loss;
  Tensor<T> d_probs;
};

template <typename T>
LossResult<T> categorical_crossentropy(const Tensor<T>& probs, const Tensor<T>& targets) {
  constexpr T clip = static_cast<T>(1e-7);
  if (probs.shape.rank() != 2 || probs.shape != targets.shape)
    fail(ErrorKind::shape, "loss expects matching [N,K] probs and targets");
  const int64_t n = probs.shape[0], k = probs.shape[1];
  for (int64_t i = 0; i < n; ++i) {
    T row_sum = 0;
    int ones = 0;
    for (int64_t j = 0; j < k; ++j) {
      T t = targets.data[i * k + j];
      if (t == T(1))
        ++ones;
      else if (t != T(0))
        fail(ErrorKind::input, "target row " + std::to_string(i) + " is not one-hot");
      row_sum += probs.data[i * k + j];
    }
    if (ones != 1)
      fail(ErrorKind::input, "target row " + std::to_string(i) + " is not one-hot");
    if (std::abs(row_sum - T(1)) > static_cast<T>(1e-4))
      fail(ErrorKind::input,
           "probability row " + std::to_string(i) + " does not sum to 1");
  }

  LossResult<T> r{T(0), Tensor<T>(probs.shape)};
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) {
      if (targets.data[i * k + j] != T(1)) continue;
      T p = probs.data[i * k + j];
      r.loss -= std::log(std::max(p, clip));
      if (p >= clip) r.d_probs.data[i * k + j] = -T(1) / (static_cast<T>(n) * p);
    }
  r.loss /= static_cast<T>(n);
  return r;
}

// --- optimizers -----------------------------------------------------------
//
// Every implementation walks the slot list, skips frozen slots entirely,
// and requires a populated gradient on each trainable slot. Auxiliary
// state is created lazily per slot; gradients are consumed by the step.

enum class OptimizerKind { sgd, rmsprop, adam };

template <typename T>
struct SgdOptions {
  T lr = static_cast<T>(1e-4);
  T momentum = static_cast<T>(0.9);
  T decay = static_cast<T>(1e-6);
};

template <typename T>
struct RmspropOptions {
  T lr = static_cast<T>(1e-3);
  T rho = static_cast<T>(0.9);
  T epsilon = static_cast<T>(1e-7);
};

template <typename T>
struct AdamOptions {
  T lr = static_cast<T>(1e-3);
  T beta1 = static_cast<T>(0.9);
  T beta2 = static_cast<T>(0.999);
  T epsilon = static_cast<T>(1e-7);
};

template <typename T>
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual OptimizerKind kind() const = 0;

  void step(const std::vector<ParamSlot<T>*>& slots) {
    for (ParamSlot<T>* slot : slots) {
      if (!slot->trainable) continue;
      if (!slot->has_grad)
        fail(ErrorKind::state, "optimizer step with no gradient on '" + slot->name + "'");
    }
    apply(slots);
    for (ParamSlot<T>* slot : slots)
      if (slot->trainable) slot->has_grad = false;
    ++iteration_;
  }

  int64_t iteration() const { return iteration_; }

 protected:
  virtual void apply(const std::vector<ParamSlot<T>*>& slots) = 0;

  Tensor<T>& aux(std::unordered_map<ParamSlot<T>*, Tensor<T>>& store, ParamSlot<T>* slot) {
    auto it = store.find(slot);
    if (it == store.end())
      it = store.emplace(slot, Tensor<T>(slot->value.shape)).first;
    return it->second;
  }

  int64_t iteration_ = 0;
};

// velocity <- momentum * velocity - lr_t * grad;  param += velocity
// with the inverse-time schedule lr_t = lr / (1 + decay * iteration).
template <typename T>
class Sgd : public Optimizer<T> {
 public:
  explicit Sgd(SgdOptions<T> opt = {}) : opt_(opt) {}
  OptimizerKind kind() const override { return OptimizerKind::sgd; }

  T current_lr() const {
    return opt_.lr / (T(1) + opt_.decay * static_cast<T>(this->iteration_));
  }

 protected:
  void apply(const std::vector<ParamSlot<T>*>& slots) override {
    const T lr_t = current_lr();
    for (ParamSlot<T>* slot : slots) {
      if (!slot->trainable) continue;
      Tensor<T>& vel = this->aux(velocity_, slot);
      for (int64_t i = 0; i < slot->value.size(); ++i) {
        vel.data[i] = opt_.momentum * vel.data[i] - lr_t * slot->grad.data[i];
        slot->value.data[i] += vel.data[i];
      }
    }
  }

 private:
  SgdOptions<T> opt_;
  std::unordered_map<ParamSlot<T>*, Tensor<T>> velocity_;
};

// avg <- rho * avg + (1-rho) * grad^2;  param -= lr * grad / (sqrt(avg) + eps)
template <typename T>
class Rmsprop : public Optimizer<T> {
 public:
  explicit Rmsprop(RmspropOptions<T> opt = {}) : opt_(opt) {}
  OptimizerKind kind() const override { return OptimizerKind::rmsprop; }

 protected:
  void apply(const std::vector<ParamSlot<T>*>& slots) override {
    for (ParamSlot<T>* slot : slots) {
      if (!slot->trainable) continue;
      Tensor<T>& avg = this->aux(sq_avg_, slot);
      for (int64_t i = 0; i < slot->value.size(); ++i) {
        T g = slot->grad.data[i];
        avg.data[i] = opt_.rho * avg.data[i] + (T(1) - opt_.rho) * g * g;
        slot->value.data[i] -= opt_.lr * g / (std::sqrt(avg.data[i]) + opt_.epsilon);
      }
    }
  }

 private:
  RmspropOptions<T> opt_;
  std::unordered_map<ParamSlot<T>*, Tensor<T>> sq_avg_;
};

// Bias-corrected first/second moment update.
template <typename T>
class Adam : public Optimizer<T> {
 public:
  explicit Adam(AdamOptions<T> opt = {}) : opt_(opt) {}
  OptimizerKind kind() const override { return OptimizerKind::adam; }

 protected:
  void apply(const std::vector<ParamSlot<T>*>& slots) override {
    const auto t = static_cast<T>(this->iteration_ + 1);
    const T bc1 = T(1) - std::pow(opt_.beta1, t);
    const T bc2 = T(1) - std::pow(opt_.beta2, t);
    for (ParamSlot<T>* slot : slots) {
      if (!slot->trainable) continue;
      Tensor<T>& m = this->aux(m_, slot);
      Tensor<T>& v = this->aux(v_, slot);
      for (int64_t i = 0; i < slot->value.size(); ++i) {
        T g = slot->grad.data[i];
        m.data[i] = opt_.beta1 * m.data[i] + (T(1) - opt_.beta1) * g;
        v.data[i] = opt_.beta2 * v.data[i] + (T(1) - opt_.beta2) * g * g;
        T mhat = m.data[i] / bc1;
        T vhat = v.data[i] / bc2;
        slot->value.data[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.epsilon);
      }
    }
  }

 private:
  AdamOptions<T> opt_;
  std::unordered_map<ParamSlot<T>*, Tensor<T>> m_, v_;
};

}  // namespace statecnn
