#pragma once

#include "zipfls/types.hpp"

namespace zipfls {

struct LossResult {
  double value = 0.0;
  std::vector<double> grad;  // d value / d logit, one entry per class
};

// Stable full softmax over all classes.
std::vector<double> softmax(const Logits& logits);

// Softmax restricted to the non-target logits (max-shifted exponentials).
SoftLabel nontarget_softmax(const Logits& logits, int target);

// Cross entropy against the one-hot target. grad = softmax - onehot.
LossResult ce_loss(const Logits& logits, int target);

// Cross entropy against the smoothed target (1-beta on target, beta/(C-1)
// elsewhere). grad = softmax - smoothed target.
LossResult ls_loss(const Logits& logits, int target, double beta);

// KL(tilde || nontarget_softmax(logits)). tilde is treated as a constant;
// grad is p_hat - tilde on non-target classes and exactly 0 on the target.
LossResult zipf_loss(const Logits& logits, int target, const SoftLabel& tilde);

// ce_loss + lambda * zipf_loss, value and gradient.
LossResult total_loss(const Logits& logits, int target, const SoftLabel& tilde,
                      double lambda);

}  // namespace zipfls
