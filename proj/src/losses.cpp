#include "zipfls/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace zipfls {
namespace {

constexpr double kTildeTolerance = 1e-9;
constexpr double kLogClamp = 1e-15;  // floor for log arguments of soft-label mass

void check_finite(const Logits& logits) {
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("non-finite logit");
  }
}

// log softmax over all classes, max-shifted.
std::vector<double> log_softmax(const Logits& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - m - lse;
  return out;
}

}  // namespace

std::vector<double> softmax(const Logits& logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  check_finite(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

SoftLabel nontarget_softmax(const Logits& logits, int target) {
  const int c = static_cast<int>(logits.size());
  if (c < 2) throw std::invalid_argument("no non-target classes");
  if (target < 0 || target >= c) throw std::invalid_argument("target out of range");
  check_finite(logits);

  double m = -std::numeric_limits<double>::infinity();
  for (int id = 0; id < c; ++id) {
    if (id != target) m = std::max(m, logits[id]);
  }
  SoftLabel out;
  out.probs.resize(c - 1);
  double sum = 0.0;
  for (int id = 0; id < c; ++id) {
    if (id == target) continue;
    const double e = std::exp(logits[id] - m);
    out.probs[nontarget_index(id, target)] = e;
    sum += e;
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

LossResult ce_loss(const Logits& logits, int target) {
  const int c = static_cast<int>(logits.size());
  if (c < 1) throw std::invalid_argument("empty logits");
  if (target < 0 || target >= c) throw std::invalid_argument("target out of range");
  check_finite(logits);

  const auto logp = log_softmax(logits);
  LossResult res;
  res.value = -logp[target];
  res.grad.resize(c);
  for (int id = 0; id < c; ++id) {
    res.grad[id] = std::exp(logp[id]) - (id == target ? 1.0 : 0.0);
  }
  return res;
}

LossResult ls_loss(const Logits& logits, int target, double beta) {
  const int c = static_cast<int>(logits.size());
  if (c < 2) throw std::invalid_argument("label smoothing needs at least 2 classes");
  if (target < 0 || target >= c) throw std::invalid_argument("target out of range");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in [0, 1)");
  check_finite(logits);

  const auto logp = log_softmax(logits);
  const double off = beta / static_cast<double>(c - 1);
  double nontarget_logp = 0.0;
  for (int id = 0; id < c; ++id) {
    if (id != target) nontarget_logp += logp[id];
  }
  LossResult res;
  res.value = -(1.0 - beta) * logp[target] - off * nontarget_logp;
  res.grad.resize(c);
  for (int id = 0; id < c; ++id) {
    res.grad[id] = std::exp(logp[id]) - (id == target ? 1.0 - beta : off);
  }
  return res;
}

LossResult zipf_loss(const Logits& logits, int target, const SoftLabel& tilde) {
  const int c = static_cast<int>(logits.size());
  if (c < 2) throw std::invalid_argument("no non-target classes");
  if (target < 0 || target >= c) throw std::invalid_argument("target out of range");
  check_finite(logits);
  if (tilde.probs.size() != static_cast<std::size_t>(c - 1)) {
    throw std::invalid_argument("soft label size does not match non-target class count");
  }
  double mass = 0.0;
  for (double p : tilde.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("soft label entries must be non-negative");
    }
    mass += p;
  }
  if (std::abs(mass - 1.0) > kTildeTolerance) {
    throw std::invalid_argument("soft label is not normalized");
  }

  // log p_hat computed from logits directly so extreme spreads cannot underflow.
  double m = -std::numeric_limits<double>::infinity();
  for (int id = 0; id < c; ++id) {
    if (id != target) m = std::max(m, logits[id]);
  }
  double sum = 0.0;
  for (int id = 0; id < c; ++id) {
    if (id != target) sum += std::exp(logits[id] - m);
  }
  const double lse = std::log(sum);

  LossResult res;
  res.grad.assign(c, 0.0);
  double value = 0.0;
  for (int id = 0; id < c; ++id) {
    if (id == target) continue;
    const double shifted = logits[id] - m;
    const double p_hat = std::exp(shifted) / sum;
    const double p_tilde = tilde.probs[nontarget_index(id, target)];
    if (p_tilde > 0.0) {
      const double log_hat = shifted - lse;
      value += p_tilde * (std::log(std::max(p_tilde, kLogClamp)) - log_hat);
    }
    res.grad[id] = p_hat - p_tilde;
  }
  res.value = std::max(value, 0.0);  // Gibbs; shields tiny negative round-off
  return res;
}

LossResult total_loss(const Logits& logits, int target, const SoftLabel& tilde,
                      double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  LossResult res = ce_loss(logits, target);
  if (lambda != 0.0) {
    const LossResult z = zipf_loss(logits, target, tilde);
    res.value += lambda * z.value;
    for (std::size_t i = 0; i < res.grad.size(); ++i) {
      res.grad[i] += lambda * z.grad[i];
    }
  }
  return res;
}

}  // namespace zipfls
