#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace zipfls {

// Named view of one parameter tensor and its gradient. grad may be null for
// buffers that are saved but never optimized (e.g. batch-norm running stats).
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;
};

struct StepSchedule {
  std::vector<int> milestones;  // strictly increasing epochs
  double factor = 0.1;
};

// base_lr * factor^(number of milestones <= epoch).
inline double lr_at(int epoch, const StepSchedule& schedule, double base_lr) {
  if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
  int prev = -1;
  double lr = base_lr;
  for (int m : schedule.milestones) {
    if (m <= prev) throw std::invalid_argument("milestones must be strictly increasing");
    prev = m;
    if (m <= epoch) lr *= schedule.factor;
  }
  return lr;
}

// SGD with momentum and classic (coupled) weight decay:
//   v <- momentum * v + (g + wd * p);  p <- p - lr * v
template <typename T>
struct SgdState {
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<std::vector<T>> velocity;  // lazily sized to match params
};

template <typename T>
void sgd_step(const std::vector<ParamRef<T>>& params, SgdState<T>& state, double lr) {
  if (state.velocity.empty()) {
    state.velocity.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.velocity[i].assign(params[i].value->size(), T(0));
    }
  }
  if (state.velocity.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRef<T>& p = params[i];
    std::vector<T>& v = state.velocity[i];
    if (p.grad == nullptr) continue;
    if (v.size() != p.value->size() || p.grad->size() != p.value->size()) {
      throw std::invalid_argument("shape mismatch for parameter " + p.name);
    }
    for (std::size_t j = 0; j < v.size(); ++j) {
      const T g = (*p.grad)[j];
      if (!std::isfinite(static_cast<double>(g))) {
        throw std::runtime_error("non-finite gradient in parameter " + p.name);
      }
      v[j] = static_cast<T>(state.momentum * v[j] +
                            (g + state.weight_decay * (*p.value)[j]));
      (*p.value)[j] -= static_cast<T>(lr * v[j]);
    }
  }
}

}  // namespace zipfls
